import numpy as np
import pytest

from gdfield import (
    NULL_EPS,
    InvalidInputError,
    Representation,
    TrainingSet,
    build_training_set,
    clamp_vectors,
    decompose,
    gdf_ground_truth,
    load_samples,
    recompose,
    save_samples,
    target_for,
)
from gdfield import Bvh, SamplingConfig, brute_force_closest_points

from conftest import hemisphere, random_soup


# ---------------------------------------------------------------------------
# vector algebra

def test_decompose_recompose_identity():
    rng = np.random.default_rng(0)
    v = rng.normal(size=(10_000, 3)) * np.exp(rng.uniform(-8, 4, size=(10_000, 1)))
    u, g = decompose(v)
    np.testing.assert_allclose(recompose(u, g), v, rtol=0, atol=1e-12)
    np.testing.assert_allclose(np.linalg.norm(g, axis=1), 1.0, atol=1e-12)


def test_decompose_null_convention():
    v = np.array([[0.0, 0, 0], [1e-13, 0, 0], [NULL_EPS * 2, 0, 0]])
    u, g = decompose(v)
    # below the epsilon the direction is the null vector, not a unit vector
    np.testing.assert_array_equal(g[0], [0, 0, 0])
    np.testing.assert_array_equal(g[1], [0, 0, 0])
    np.testing.assert_allclose(g[2], [1, 0, 0])
    assert u[0] == 0.0


def test_decompose_2d_vectors():
    v = np.array([[3.0, 4.0], [0.0, 0.0]])
    u, g = decompose(v)
    np.testing.assert_allclose(u, [5.0, 0.0])
    np.testing.assert_allclose(g, [[0.6, 0.8], [0.0, 0.0]])


# ---------------------------------------------------------------------------
# representations

def test_representation_codes_and_dims():
    assert Representation.GDF.value == 0
    assert Representation.UDF.value == 1
    assert Representation.CSP.value == 2
    assert Representation.GDF.output_dim() == 3
    assert Representation.UDF.output_dim() == 1
    assert Representation.CSP.output_dim() == 3
    assert Representation.GDF.output_dim(spatial_dim=2) == 2
    assert Representation.UDF.output_dim(spatial_dim=2) == 1


def test_representation_parse():
    assert Representation.parse("gdf") is Representation.GDF
    assert Representation.parse("UDF") is Representation.UDF
    with pytest.raises(InvalidInputError):
        Representation.parse("sdf")


def test_target_for_all_representations():
    points = np.array([[1.0, 1, 1], [0, 0, 0]])
    vectors = np.array([[0.5, 0, 0], [0, -1.0, 0]])
    np.testing.assert_array_equal(
        target_for(Representation.GDF, points, vectors), vectors
    )
    np.testing.assert_allclose(
        target_for(Representation.UDF, points, vectors), [[0.5], [1.0]]
    )
    np.testing.assert_allclose(
        target_for(Representation.CSP, points, vectors), [[1.5, 1, 1], [0, -1, 0]]
    )


def test_clamp_vectors_caps_long_ones_only():
    v = np.array([[3.0, 4.0, 0.0], [0.01, 0.0, 0.0], [0.0, 0.0, 0.0]])
    capped = clamp_vectors(v, 1.0)
    np.testing.assert_allclose(capped[0], [0.6, 0.8, 0.0], rtol=1e-15)
    np.testing.assert_array_equal(capped[1:], v[1:])
    with pytest.raises(InvalidInputError):
        clamp_vectors(v, 0.0)
    with pytest.raises(InvalidInputError):
        clamp_vectors(v, -0.5)


def test_target_for_clamp_applies_to_every_representation():
    points = np.array([[1.0, 0.0, 0.0]])
    vectors = np.array([[0.0, 2.0, 0.0]])
    np.testing.assert_allclose(
        target_for(Representation.GDF, points, vectors, clamp=0.5),
        [[0.0, 0.5, 0.0]],
    )
    np.testing.assert_allclose(
        target_for(Representation.UDF, points, vectors, clamp=0.5), [[0.5]]
    )
    np.testing.assert_allclose(
        target_for(Representation.CSP, points, vectors, clamp=0.5),
        [[1.0, 0.5, 0.0]],
    )
    # a generous cap changes nothing, bitwise
    np.testing.assert_array_equal(
        target_for(Representation.GDF, points, vectors, clamp=10.0), vectors
    )


# ---------------------------------------------------------------------------
# ground truth

def test_gdf_ground_truth_matches_brute_force():
    mesh = random_soup(40, seed=3)
    queries = np.random.default_rng(4).uniform(-0.7, 0.7, size=(300, 3))
    v = gdf_ground_truth(queries, mesh)
    closest, dist, _ = brute_force_closest_points(queries, mesh)
    np.testing.assert_array_equal(v, closest - queries)
    np.testing.assert_allclose(np.linalg.norm(v, axis=1), dist, rtol=1e-15)


def test_gdf_ground_truth_reuses_bvh():
    mesh = random_soup(20, seed=1)
    bvh = Bvh(mesh)
    queries = np.random.default_rng(0).uniform(-0.5, 0.5, size=(50, 3))
    np.testing.assert_array_equal(
        gdf_ground_truth(queries, mesh, bvh), gdf_ground_truth(queries, mesh)
    )


def test_on_surface_query_has_zero_vector():
    mesh = hemisphere(nu=16, nv=8)
    v = gdf_ground_truth(mesh.vertices[:5], mesh)
    np.testing.assert_allclose(v, 0.0, atol=1e-15)


# ---------------------------------------------------------------------------
# training sets

def test_build_training_set_consistency(hemisphere_mesh):
    ts = build_training_set(hemisphere_mesh, SamplingConfig(500, 100, seed=2))
    assert len(ts) == 600
    # stored vectors must equal an independent ground-truth pass
    np.testing.assert_array_equal(
        ts.vectors, gdf_ground_truth(ts.points, hemisphere_mesh)
    )
    u = ts.distances()
    g = ts.directions()
    np.testing.assert_allclose(recompose(u, g), ts.vectors, atol=1e-12)


def test_training_set_shape_validation():
    with pytest.raises(InvalidInputError):
        TrainingSet(np.zeros((5, 3)), np.zeros((4, 3)))
    with pytest.raises(InvalidInputError):
        TrainingSet(np.zeros((5, 5)), np.zeros((5, 5)))
    assert TrainingSet(np.zeros((5, 2)), np.zeros((5, 2))).points.shape == (5, 2)


def test_default_sampling_counts_and_band(sheet_mesh):
    # the full default recipe: 420000 records, at least 95% of them closer
    # to the surface than three of the wide noise scale
    ts = build_training_set(sheet_mesh, SamplingConfig())
    assert len(ts) == 420000
    lo, hi = sheet_mesh.bounds()
    band = 3 * 0.005 * float(np.linalg.norm(hi - lo))
    assert (ts.distances() < band).mean() >= 0.95


# ---------------------------------------------------------------------------
# sample cache serialization

def test_samples_roundtrip_exact(tmp_path, hemisphere_mesh):
    ts = build_training_set(hemisphere_mesh, SamplingConfig(200, 40, seed=5))
    path = tmp_path / "c.gdfs"
    save_samples(path, ts)
    loaded = load_samples(path)
    # float32 on disk: roundtrip through f32 must be exact
    np.testing.assert_array_equal(loaded.points, ts.points.astype(np.float32))
    np.testing.assert_array_equal(loaded.vectors, ts.vectors.astype(np.float32))
    assert loaded.points.dtype == np.float64


def test_samples_bad_magic(tmp_path):
    path = tmp_path / "bad.gdfs"
    path.write_bytes(b"NOPE" + bytes(12))
    with pytest.raises(InvalidInputError):
        load_samples(path)


def test_samples_truncated(tmp_path, hemisphere_mesh):
    ts = build_training_set(hemisphere_mesh, SamplingConfig(50, 10, seed=6))
    path = tmp_path / "t.gdfs"
    save_samples(path, ts)
    data = path.read_bytes()
    path.write_bytes(data[:-5])
    with pytest.raises(InvalidInputError):
        load_samples(path)


def test_samples_missing_file():
    with pytest.raises(InvalidInputError):
        load_samples("/nonexistent/x.gdfs")
