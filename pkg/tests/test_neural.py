import numpy as np
import pytest

from gdfield import (
    InvalidInputError,
    MlpConfig,
    NeuralField,
    Representation,
    TrainOptions,
    TrainingDivergedError,
    TrainingSet,
    autodecoder_config,
    composite_loss,
    fit_latent,
    l1_loss,
    learning_rate_at,
    load_field,
    save_field,
    single_shape_config,
    train_autodecoder,
    train_single,
)
from gdfield.neural import Adam, DEFAULT_COMPOSITE_WEIGHTS, LatentFitOptions, RowwiseAdam
from gdfield import (
    NormalizeTransform,
    SamplingConfig,
    build_training_set,
    chamfer_l2,
    decompose,
    evaluate_grid,
    extract_mesh,
    gdf_ground_truth,
    sample_surface,
)

from conftest import cylinder_patch, hemisphere, plane_sheet


def tiny_net(input_dim=3, output_dim=3, width=16, layers=2, seed=0, latent_dim=0):
    cfg = MlpConfig(input_dim=input_dim, hidden_layers=layers, hidden_width=width,
                    output_dim=output_dim, latent_dim=latent_dim)
    rep = Representation.GDF if output_dim == input_dim else Representation.UDF
    return NeuralField.initialize(cfg, rep, np.random.default_rng(seed))


def fd_param_gradient(net, points, loss_fn, h=1e-6):
    """Central finite differences over every weight and bias entry."""
    grads_w = [np.zeros_like(w) for w in net.weights]
    grads_b = [np.zeros_like(b) for b in net.biases]
    for arrs, grads in ((net.weights, grads_w), (net.biases, grads_b)):
        for arr, grad in zip(arrs, grads):
            flat = arr.ravel()
            gflat = grad.ravel()
            for i in range(flat.size):
                keep = flat[i]
                flat[i] = keep + h
                hi = loss_fn(net.forward(points))
                flat[i] = keep - h
                lo = loss_fn(net.forward(points))
                flat[i] = keep
                gflat[i] = (hi - lo) / (2 * h)
    return grads_w, grads_b


# ---------------------------------------------------------------------------
# losses and their gradients

def test_l1_loss_value_and_gradient():
    rng = np.random.default_rng(0)
    pred = rng.normal(size=(40, 3))
    target = rng.normal(size=(40, 3))
    loss, grad = l1_loss(pred, target)
    assert loss == pytest.approx(np.abs(pred - target).sum(axis=1).mean())
    # finite differences on the prediction argument
    h = 1e-7
    fd = np.zeros_like(pred)
    for idx in np.ndindex(pred.shape):
        p = pred.copy()
        p[idx] += h
        hi, _ = l1_loss(p, target)
        p[idx] -= 2 * h
        lo, _ = l1_loss(p, target)
        fd[idx] = (hi - lo) / (2 * h)
    np.testing.assert_allclose(grad, fd, atol=1e-6)


def test_composite_loss_terms():
    rng = np.random.default_rng(1)
    pred = rng.normal(size=(50, 3))
    gt = rng.normal(size=(50, 3))
    loss, _ = composite_loss(pred, gt, (100.0, 4.0, 50.0))

    u, g = np.linalg.norm(gt, axis=1), gt / np.linalg.norm(gt, axis=1, keepdims=True)
    r = np.maximum(np.linalg.norm(pred, axis=1), 1e-8)
    direction = pred / r[:, None]
    expected = (
        100.0 * np.abs(pred - gt).sum(axis=1).mean()
        + 4.0 * np.abs(direction - g).sum(axis=1).mean()
        + 50.0 * np.abs(np.linalg.norm(pred, axis=1) - u).mean()
    )
    assert loss == pytest.approx(expected, rel=1e-12)


def test_composite_loss_gradient_matches_fd():
    rng = np.random.default_rng(2)
    pred = rng.normal(size=(30, 3))
    gt = rng.normal(size=(30, 3))
    _, grad = composite_loss(pred, gt, DEFAULT_COMPOSITE_WEIGHTS)
    h = 1e-7
    fd = np.zeros_like(pred)
    for idx in np.ndindex(pred.shape):
        p = pred.copy()
        p[idx] += h
        hi, _ = composite_loss(p, gt, DEFAULT_COMPOSITE_WEIGHTS)
        p[idx] -= 2 * h
        lo, _ = composite_loss(p, gt, DEFAULT_COMPOSITE_WEIGHTS)
        fd[idx] = (hi - lo) / (2 * h)
    np.testing.assert_allclose(grad, fd, rtol=1e-5, atol=1e-6)


def test_backprop_weight_gradients_match_fd():
    net = tiny_net(width=8, layers=2, seed=3)
    rng = np.random.default_rng(4)
    points = rng.normal(size=(12, 3)) * 0.3
    target = rng.normal(size=(12, 3))

    out, cache = net.forward_cached(points)
    _, d_out = l1_loss(out, target)
    d_w, d_b, _ = net.backward(cache, d_out)

    fd_w, fd_b = fd_param_gradient(net, points, lambda o: l1_loss(o, target)[0])
    for got, want in zip(d_w, fd_w):
        np.testing.assert_allclose(got, want, rtol=1e-4, atol=1e-7)
    for got, want in zip(d_b, fd_b):
        np.testing.assert_allclose(got, want, rtol=1e-4, atol=1e-7)


def test_backprop_input_gradients_match_fd():
    net = tiny_net(width=10, layers=3, seed=5)
    rng = np.random.default_rng(6)
    points = rng.normal(size=(8, 3)) * 0.3
    target = rng.normal(size=(8, 3))

    out, cache = net.forward_cached(points)
    _, d_out = l1_loss(out, target)
    _, _, d_in = net.backward(cache, d_out)

    h = 1e-6
    fd = np.zeros_like(points)
    for idx in np.ndindex(points.shape):
        p = points.copy()
        p[idx] += h
        hi, _ = l1_loss(net.forward(p), target)
        p[idx] -= 2 * h
        lo, _ = l1_loss(net.forward(p), target)
        fd[idx] = (hi - lo) / (2 * h)
    np.testing.assert_allclose(d_in, fd, rtol=1e-4, atol=1e-7)


# ---------------------------------------------------------------------------
# architecture and initialization

def test_mlp_config_layer_dims():
    cfg = MlpConfig(input_dim=3, hidden_layers=2, hidden_width=32, output_dim=1)
    assert cfg.layer_dims() == [(3, 32), (32, 32), (32, 1)]
    cfg = MlpConfig(input_dim=3, hidden_layers=2, hidden_width=32, output_dim=3,
                    latent_dim=8)
    # latent codes are concatenated onto the point input
    assert cfg.layer_dims() == [(11, 32), (32, 32), (32, 3)]


def test_recipe_configs():
    single = single_shape_config()
    assert single.hidden_layers == 8 and single.hidden_width == 512
    assert single.latent_dim == 0
    auto = autodecoder_config()
    assert auto.hidden_layers == 12 and auto.hidden_width == 1024
    assert auto.latent_dim == 512
    big = autodecoder_config(large=True)
    assert big.hidden_layers == 18


def test_initialization_bounds_and_determinism():
    cfg = MlpConfig(input_dim=3, hidden_layers=2, hidden_width=64, output_dim=3)
    a = NeuralField.initialize(cfg, Representation.GDF, np.random.default_rng(7))
    b = NeuralField.initialize(cfg, Representation.GDF, np.random.default_rng(7))
    for wa, wb in zip(a.weights, b.weights):
        np.testing.assert_array_equal(wa, wb)
    for w in a.weights:
        bound = np.sqrt(6.0 / w.shape[0])
        assert np.abs(w).max() <= bound
    for bias in a.biases:
        assert not bias.any()


def test_forward_shapes():
    net = tiny_net(output_dim=1)
    out = net.forward(np.zeros((7, 3)))
    assert out.shape == (7, 1)


def test_forward_all_zero_parameters_gives_zero_output():
    net = tiny_net(width=8, layers=2, seed=5)
    for w in net.weights:
        w[:] = 0.0
    for b in net.biases:
        b[:] = 0.0
    out = net.forward(np.random.default_rng(0).normal(size=(17, 3)))
    assert np.array_equal(out, np.zeros((17, 3)))


def test_toward_surface_gdf():
    net = tiny_net(seed=8)
    pts = np.random.default_rng(9).normal(size=(20, 3))
    u, g = net.toward_surface(pts)
    v = net.predict_vectors(pts)
    np.testing.assert_allclose(u, np.linalg.norm(v, axis=1), atol=1e-12)
    norms = np.linalg.norm(g, axis=1)
    assert np.all((np.abs(norms - 1) < 1e-9) | (norms == 0))


def test_toward_surface_udf_gradient_direction():
    # UDF direction comes from the input gradient of the scalar distance:
    # g = -grad u / |grad u|, pointing toward the surface (downhill)
    net = tiny_net(output_dim=1, width=12, layers=2, seed=10)
    pts = np.random.default_rng(11).normal(size=(5, 3)) * 0.4
    u, g = net.toward_surface(pts)
    assert u.min() >= 0.0
    h = 1e-6
    for i in range(len(pts)):
        grad = np.zeros(3)
        for k in range(3):
            p = pts.copy()
            p[i, k] += h
            hi = net.forward(p[i : i + 1])[0, 0]
            p[i, k] -= 2 * h
            lo = net.forward(p[i : i + 1])[0, 0]
            grad[k] = (hi - lo) / (2 * h)
        norm = np.linalg.norm(grad)
        if norm > 1e-9:
            np.testing.assert_allclose(g[i], -grad / norm, atol=1e-4)


# ---------------------------------------------------------------------------
# optimizers and schedule

def test_adam_single_step_reference():
    # first step with bias correction: m_hat = g, v_hat = g^2, so the update
    # is -lr * g / (|g| + eps)
    param = np.array([1.0, -2.0])
    grad = np.array([0.5, -1.5])
    opt = Adam([param])
    opt.step([param], [grad.copy()], 0.01)
    m_hat = (0.1 * grad) / (1 - 0.9)
    v_hat = (0.001 * grad**2) / (1 - 0.999)
    expected = np.array([1.0, -2.0]) - 0.01 * m_hat / (np.sqrt(v_hat) + 1e-8)
    np.testing.assert_allclose(param, expected, rtol=1e-12)


def test_adam_converges_on_quadratic():
    param = np.array([5.0, -3.0, 2.0])
    opt = Adam([param])
    for _ in range(2000):
        opt.step([param], [2 * param], 0.05)
    np.testing.assert_allclose(param, 0.0, atol=1e-4)


def test_rowwise_adam_only_touches_active_rows():
    table = np.ones((4, 3))
    opt = RowwiseAdam(table.shape)
    grad_rows = np.array([[1.0, 1, 1], [1, 1, 1]])
    opt.step(table, np.array([1, 3]), grad_rows, 0.1)
    np.testing.assert_array_equal(table[0], 1.0)
    np.testing.assert_array_equal(table[2], 1.0)
    assert np.all(table[1] < 1.0) and np.all(table[3] < 1.0)


def test_rowwise_adam_matches_dense_adam_per_row():
    # a row stepped only on iterations 1 and 3 must see bias correction for
    # its own two steps, exactly like a dense Adam stepped twice
    table = np.array([[1.0, 2.0], [0.5, -0.5]])
    dense = table[0].copy()
    row_opt = RowwiseAdam(table.shape)
    dense_opt = Adam([dense])
    row_opt.step(table, np.array([0]), np.array([[0.3, -0.4]]), 0.01)
    dense_opt.step([dense], [np.array([0.3, -0.4])], 0.01)
    row_opt.step(table, np.array([1]), np.array([[1.0, 1.0]]), 0.01)  # other row
    row_opt.step(table, np.array([0]), np.array([[-0.1, 0.2]]), 0.01)
    dense_opt.step([dense], [np.array([-0.1, 0.2])], 0.01)
    np.testing.assert_allclose(table[0], dense, rtol=1e-14)


def test_learning_rate_schedule_boundaries():
    total = 100
    base = 1.0
    # stages switch at ceil(total * {1/4, 1/2, 3/4}) = 25, 50, 75
    assert learning_rate_at(24, total, base) == pytest.approx(1.0)
    assert learning_rate_at(25, total, base) == pytest.approx(0.75)
    assert learning_rate_at(49, total, base) == pytest.approx(0.75)
    assert learning_rate_at(50, total, base) == pytest.approx(0.75**2)
    assert learning_rate_at(75, total, base) == pytest.approx(0.75**3)
    assert learning_rate_at(100, total, base) == pytest.approx(0.75**3)


def test_learning_rate_schedule_odd_total():
    # ceil boundaries for total=10: 3, 5, 8
    assert learning_rate_at(2, 10, 1.0) == 1.0
    assert learning_rate_at(3, 10, 1.0) == 0.75
    assert learning_rate_at(5, 10, 1.0) == 0.75**2
    assert learning_rate_at(8, 10, 1.0) == 0.75**3


# ---------------------------------------------------------------------------
# training entry points

@pytest.fixture(scope="module")
def sheet_training_set():
    return build_training_set(plane_sheet(), SamplingConfig(3000, 300, seed=1))


def test_train_single_reduces_loss(sheet_training_set):
    cfg = MlpConfig(input_dim=3, hidden_layers=2, hidden_width=32, output_dim=3)
    opt = TrainOptions(representation=Representation.GDF, iterations=400,
                       batch_size=256, base_lr=1e-3,
                       loss_weights=DEFAULT_COMPOSITE_WEIGHTS, seed=0)
    net, result = train_single(sheet_training_set, cfg, opt)
    assert len(result.loss_history) == 400
    early = result.loss_history[:50].mean()
    late = result.loss_history[-50:].mean()
    assert late < 0.5 * early


def test_train_single_deterministic(sheet_training_set):
    cfg = MlpConfig(input_dim=3, hidden_layers=1, hidden_width=16, output_dim=1)
    opt = TrainOptions(representation=Representation.UDF, iterations=50,
                       batch_size=64, base_lr=1e-3, seed=4)
    net_a, res_a = train_single(sheet_training_set, cfg, opt)
    cfg_b = MlpConfig(input_dim=3, hidden_layers=1, hidden_width=16, output_dim=1)
    net_b, res_b = train_single(sheet_training_set, cfg_b, opt)
    for wa, wb in zip(net_a.weights, net_b.weights):
        np.testing.assert_array_equal(wa, wb)
    np.testing.assert_array_equal(res_a.loss_history, res_b.loss_history)


def test_desk_scale_fit_reaches_reference_accuracy():
    # the small reference recipe (4x128, 3000 iterations) on a flat sheet:
    # held-out near-surface distances come out within 5e-3 of ground truth
    mesh = plane_sheet()
    train = build_training_set(mesh, SamplingConfig(30000, 2000, seed=11))
    opt = TrainOptions(representation=Representation.GDF, iterations=3000,
                       batch_size=1000, base_lr=1e-3, seed=0)
    net, _ = train_single(
        train,
        MlpConfig(input_dim=3, hidden_layers=4, hidden_width=128, output_dim=3),
        opt)

    probe = np.random.default_rng(99).uniform(-0.55, 0.55, size=(40000, 3))
    u_true, _ = decompose(gdf_ground_truth(probe, mesh))
    keep = u_true < 0.017
    u_pred, _ = net.toward_surface(probe[keep])
    assert float(np.abs(u_pred - u_true[keep]).mean()) < 5e-3


def test_composite_requires_gdf():
    with pytest.raises(InvalidInputError):
        TrainOptions(representation=Representation.UDF,
                     loss_weights=DEFAULT_COMPOSITE_WEIGHTS).validate()


def test_train_divergence_detected(sheet_training_set):
    cfg = MlpConfig(input_dim=3, hidden_layers=2, hidden_width=16, output_dim=3)
    # an absurd learning rate overflows the forward pass to inf/nan
    opt = TrainOptions(representation=Representation.GDF, iterations=10,
                       batch_size=64, base_lr=1e200, seed=0)
    with pytest.raises(TrainingDivergedError) as err:
        train_single(sheet_training_set, cfg, opt)
    assert err.value.iteration >= 2


def test_train_single_rejects_latent_config(sheet_training_set):
    cfg = MlpConfig(input_dim=3, hidden_layers=1, hidden_width=8, output_dim=3,
                    latent_dim=4)
    with pytest.raises(InvalidInputError):
        train_single(sheet_training_set, cfg, TrainOptions())


def test_autodecoder_trains_and_separates_codes(sheet_training_set):
    shifted = TrainingSet(sheet_training_set.points + 0.05,
                          sheet_training_set.vectors.copy())
    cfg = MlpConfig(input_dim=3, hidden_layers=2, hidden_width=24, output_dim=3,
                    latent_dim=4)
    opt = TrainOptions(representation=Representation.GDF, iterations=300,
                       batch_size=256, base_lr=1e-3,
                       loss_weights=DEFAULT_COMPOSITE_WEIGHTS, seed=2)
    result = train_autodecoder([sheet_training_set, shifted], cfg, opt)
    assert result.field.latents.shape == (2, 4)
    assert not np.allclose(result.field.latents[0], result.field.latents[1])
    assert np.isfinite(result.loss_history).all()


def test_fit_latent_zero_iterations_returns_initial_code():
    net = tiny_net(latent_dim=6, seed=12)
    cloud = np.random.default_rng(13).uniform(-0.4, 0.4, size=(100, 3))
    options = LatentFitOptions(iterations=0, pool_size=500, seed=21)
    code, history = fit_latent(net, cloud, options)
    assert history.shape == (0,)
    expected = np.random.default_rng(21).normal(0.0, 0.01, size=6)
    np.testing.assert_array_equal(code, expected)


def test_fit_latent_improves_match(sheet_training_set):
    # train a 2-shape autodecoder, then recover a code for one of the shapes
    shifted = TrainingSet(sheet_training_set.points + np.array([0, 0, 0.1]),
                          sheet_training_set.vectors.copy())
    cfg = MlpConfig(input_dim=3, hidden_layers=2, hidden_width=24, output_dim=3,
                    latent_dim=4)
    opt = TrainOptions(representation=Representation.GDF, iterations=500,
                       batch_size=256, base_lr=1e-3,
                       loss_weights=DEFAULT_COMPOSITE_WEIGHTS, seed=3)
    result = train_autodecoder([sheet_training_set, shifted], cfg, opt)

    mesh = plane_sheet()
    cloud = mesh.vertices
    options = LatentFitOptions(iterations=150, batch_size=256, pool_size=4000, seed=5)
    code, history = fit_latent(result.field, cloud, options)
    assert history[-25:].mean() < history[:25].mean()
    assert code.shape == (4,)


def test_fit_latent_requires_latent_net(sheet_training_set):
    net = tiny_net()
    with pytest.raises(InvalidInputError):
        fit_latent(net, np.zeros((10, 3)), LatentFitOptions())


def test_initial_code_norms_match_spread(sheet_training_set):
    # codes start at N(0, 0.01) per entry, so norms land near 0.01 * sqrt(dim)
    cfg = MlpConfig(input_dim=3, hidden_layers=2, hidden_width=24,
                    output_dim=3, latent_dim=16)
    opt = TrainOptions(representation=Representation.GDF, iterations=0, seed=2)
    result = train_autodecoder([sheet_training_set] * 3, cfg, opt)
    norms = np.linalg.norm(result.field.latents, axis=1)
    expected = 0.01 * np.sqrt(16)
    assert np.all(norms > 0.5 * expected), norms
    assert np.all(norms < 1.5 * expected), norms


def test_single_shape_autodecoder_matches_train_single():
    # a one-entry code table adds capacity but must not change what the net
    # learns: held-out distance error within 10% of the plain fit
    mesh = hemisphere()
    train = build_training_set(mesh, SamplingConfig(4000, 400, seed=1))
    probe = np.random.default_rng(99).uniform(-0.55, 0.55, size=(20000, 3))
    u_true, _ = decompose(gdf_ground_truth(probe, mesh))
    keep = u_true < 0.05
    probe, u_true = probe[keep], u_true[keep]

    opt = TrainOptions(representation=Representation.GDF, iterations=3000,
                       batch_size=512, base_lr=1e-3,
                       loss_weights=DEFAULT_COMPOSITE_WEIGHTS, seed=3)
    single, _ = train_single(
        train,
        MlpConfig(input_dim=3, hidden_layers=3, hidden_width=64, output_dim=3),
        opt)
    auto = train_autodecoder(
        [train],
        MlpConfig(input_dim=3, hidden_layers=3, hidden_width=64, output_dim=3,
                  latent_dim=8),
        opt)

    u_single, _ = single.toward_surface(probe)
    u_auto, _ = auto.field.toward_surface(probe, latent=auto.field.latents[0])
    e_single = float(np.abs(u_single - u_true).mean())
    e_auto = float(np.abs(u_auto - u_true).mean())
    assert abs(e_auto - e_single) <= 0.1 * e_single, (e_single, e_auto)


@pytest.fixture(scope="module")
def three_shape_field():
    """One shared decoder plus codes over three very different open shapes."""
    meshes = [plane_sheet(), hemisphere(), cylinder_patch()]
    sets = [build_training_set(m, SamplingConfig(6000, 800, seed=21 + i))
            for i, m in enumerate(meshes)]
    cfg = MlpConfig(input_dim=3, hidden_layers=3, hidden_width=64,
                    output_dim=3, latent_dim=8)
    opt = TrainOptions(representation=Representation.GDF, iterations=3000,
                       batch_size=512, base_lr=1e-3,
                       loss_weights=DEFAULT_COMPOSITE_WEIGHTS, seed=0)
    return train_autodecoder(sets, cfg, opt).field, meshes


def reconstruct_32(field, latent):
    return extract_mesh(evaluate_grid(field, 32, (-0.55,) * 3, (0.55,) * 3,
                                      latent=latent))


def test_codes_reconstruct_their_own_shape(three_shape_field):
    # swap check: decoding shape i's code must land nearer shape i than
    # either other shape's mesh, for every code
    field, meshes = three_shape_field
    for i in range(3):
        rec = reconstruct_32(field, field.latents[i])
        assert not rec.is_empty
        cds = [chamfer_l2(rec, m, 8000, 0) for m in meshes]
        for j in range(3):
            if j != i:
                assert cds[i] < cds[j], (i, j, cds)


def test_fit_latent_self_consistency(three_shape_field):
    # a code fitted to a cloud from a training shape must reconstruct that
    # shape nearly as well as the code learned during training (within 2x)
    field, meshes = three_shape_field
    own_cd = chamfer_l2(reconstruct_32(field, field.latents[1]), meshes[1],
                        8000, 0)
    cloud, _ = sample_surface(meshes[1], 4000, np.random.default_rng(42))
    options = LatentFitOptions(iterations=400, batch_size=512,
                               pool_size=20000, seed=7)
    code, _ = fit_latent(field, cloud, options)
    fit_cd = chamfer_l2(reconstruct_32(field, code), meshes[1], 8000, 0)
    assert fit_cd <= 2.0 * own_cd, (fit_cd, own_cd)


def test_clamp_distance_noop_when_generous(sheet_training_set):
    # a cap above every target norm must not perturb training at all
    cfg = MlpConfig(input_dim=3, hidden_layers=1, hidden_width=8, output_dim=3)
    base = TrainOptions(representation=Representation.GDF, iterations=40,
                        batch_size=64, seed=4)
    capped = TrainOptions(representation=Representation.GDF, iterations=40,
                          batch_size=64, clamp_distance=1e6, seed=4)
    net_a, _ = train_single(sheet_training_set, cfg, base)
    cfg_b = MlpConfig(input_dim=3, hidden_layers=1, hidden_width=8, output_dim=3)
    net_b, _ = train_single(sheet_training_set, cfg_b, capped)
    for wa, wb in zip(net_a.weights, net_b.weights):
        np.testing.assert_array_equal(wa, wb)


def test_clamp_distance_changes_supervision(sheet_training_set):
    # a cap below the largest target norm must actually alter training
    nets = {}
    for clamp in (None, 0.01):
        cfg = MlpConfig(input_dim=3, hidden_layers=1, hidden_width=16,
                        output_dim=1)
        opt = TrainOptions(representation=Representation.UDF, iterations=60,
                           batch_size=256, clamp_distance=clamp, seed=4)
        nets[clamp], _ = train_single(sheet_training_set, cfg, opt)
    assert any(
        not np.array_equal(wa, wb)
        for wa, wb in zip(nets[None].weights, nets[0.01].weights)
    )

    bad = TrainOptions(clamp_distance=-1.0)
    with pytest.raises(InvalidInputError):
        bad.validate()


def test_latent_penalty_shrinks_codes(sheet_training_set):
    shifted = TrainingSet(sheet_training_set.points + 0.05,
                          sheet_training_set.vectors.copy())
    sets = [sheet_training_set, shifted]
    cfg = dict(input_dim=3, hidden_layers=2, hidden_width=24, output_dim=3,
               latent_dim=4)
    norms = {}
    for penalty in (0.0, 50.0):
        opt = TrainOptions(representation=Representation.GDF, iterations=300,
                           batch_size=256, base_lr=1e-3,
                           latent_penalty=penalty, seed=2)
        result = train_autodecoder(sets, MlpConfig(**cfg), opt)
        norms[penalty] = np.linalg.norm(result.field.latents, axis=1).mean()
    assert norms[50.0] < norms[0.0]

    with pytest.raises(InvalidInputError):
        TrainOptions(latent_penalty=-0.1).validate()


def test_latent_penalty_in_code_fitting(sheet_training_set):
    net = tiny_net(latent_dim=6, seed=12)
    cloud = np.random.default_rng(13).uniform(-0.4, 0.4, size=(200, 3))
    norms = {}
    for penalty in (0.0, 100.0):
        options = LatentFitOptions(iterations=120, batch_size=128,
                                   pool_size=2000, latent_penalty=penalty,
                                   seed=21)
        code, _ = fit_latent(net, cloud, options)
        norms[penalty] = float(np.linalg.norm(code))
    assert norms[100.0] < norms[0.0]

    with pytest.raises(InvalidInputError):
        fit_latent(net, cloud, LatentFitOptions(latent_penalty=-1.0))


# ---------------------------------------------------------------------------
# checkpoints

def test_checkpoint_roundtrip_bitwise(tmp_path):
    net = tiny_net(width=24, layers=3, seed=14)
    net.transform = NormalizeTransform(2.5, np.array([0.1, -0.2, 0.3]))
    path = tmp_path / "n.gdfn"
    save_field(path, net)
    loaded = load_field(path)
    assert loaded.config == net.config
    assert loaded.representation is net.representation
    # disk stores float32: roundtrip must equal the f32 cast exactly
    for wa, wb in zip(loaded.weights, net.weights):
        np.testing.assert_array_equal(wa, wb.astype(np.float32).astype(np.float64))
    assert loaded.transform.scale == np.float32(2.5)
    # a second save of the loaded net is byte-identical
    path2 = tmp_path / "n2.gdfn"
    save_field(path2, loaded)
    assert path.read_bytes() == path2.read_bytes()


def test_checkpoint_with_latents_roundtrip(tmp_path):
    net = tiny_net(latent_dim=5, seed=15)
    net.latents = np.random.default_rng(16).normal(0, 0.01, size=(3, 5))
    path = tmp_path / "l.gdfn"
    save_field(path, net)
    loaded = load_field(path)
    assert loaded.latents.shape == (3, 5)
    np.testing.assert_array_equal(
        loaded.latents, net.latents.astype(np.float32).astype(np.float64)
    )


def test_checkpoint_bad_magic(tmp_path):
    path = tmp_path / "bad.gdfn"
    path.write_bytes(b"XXXX" + bytes(64))
    with pytest.raises(InvalidInputError):
        load_field(path)


def test_checkpoint_trailing_bytes_rejected(tmp_path):
    net = tiny_net(seed=17)
    path = tmp_path / "t.gdfn"
    save_field(path, net)
    path.write_bytes(path.read_bytes() + b"\x00")
    with pytest.raises(InvalidInputError):
        load_field(path)


def test_checkpoint_truncated_rejected(tmp_path):
    net = tiny_net(seed=18)
    path = tmp_path / "t.gdfn"
    save_field(path, net)
    data = path.read_bytes()
    path.write_bytes(data[: len(data) // 2])
    with pytest.raises(InvalidInputError):
        load_field(path)
