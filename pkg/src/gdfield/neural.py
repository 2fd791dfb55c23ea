"""Neural toward-surface fields: MLP, losses, optimizers, training, checkpoints.

Everything is plain numpy with hand-written reverse-mode gradients, float64
in memory. Checkpoints are float32 on disk and byte-identical for a fixed
seed, which the evaluation pipeline relies on.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.spatial import cKDTree

from .errors import InvalidInputError, TrainingDivergedError
from .field import NULL_EPS, Representation, TrainingSet, clamp_vectors, decompose, target_for
from .geometry import NormalizeTransform

GDFN_MAGIC = b"GDFN"
GDFN_VERSION = 1

# Composite-objective weights: toward-surface vector, unit direction, distance.
DEFAULT_COMPOSITE_WEIGHTS = (100.0, 4.0, 50.0)
# Predicted-vector norms are clamped here before any division by them.
NORM_GUARD = 1e-8

DEFAULT_BASE_LR = 1e-4
LR_DECAY = 0.75
DEFAULT_BATCH = 32000
LATENT_INIT_STD = 0.01


@dataclass
class MlpConfig:
    """Architecture of the field network.

    The network maps (point, latent) to the representation's output through
    `hidden_layers` ReLU layers of `hidden_width` units and a linear head.
    """

    input_dim: int = 3
    hidden_layers: int = 8
    hidden_width: int = 512
    output_dim: int = 3
    latent_dim: int = 0

    def layer_dims(self) -> list[tuple[int, int]]:
        sizes = (
            [self.input_dim + self.latent_dim]
            + [self.hidden_width] * self.hidden_layers
            + [self.output_dim]
        )
        return list(zip(sizes[:-1], sizes[1:]))

    def validate(self):
        if min(self.input_dim, self.hidden_layers, self.hidden_width, self.output_dim) <= 0:
            raise InvalidInputError(f"non-positive dimension in {self}")
        if self.latent_dim < 0:
            raise InvalidInputError(f"negative latent size in {self}")


def single_shape_config(representation: Representation = Representation.GDF) -> MlpConfig:
    """The 8x512 network used to overfit one shape."""
    return MlpConfig(hidden_layers=8, hidden_width=512,
                     output_dim=representation.output_dim())


def autodecoder_config(
    representation: Representation = Representation.GDF, large: bool = False
) -> MlpConfig:
    """Shared-network recipes: 12 (or 18) layers, width 1024, 512-long codes."""
    return MlpConfig(hidden_layers=18 if large else 12, hidden_width=1024,
                     output_dim=representation.output_dim(), latent_dim=512)


class NeuralField:
    """An MLP regressing a toward-surface representation, plus its frame.

    `transform` maps original mesh coordinates into the normalized frame the
    network was trained in. `latents` is the per-shape code table for
    shared-network fields, None for single-shape ones.
    """

    def __init__(
        self,
        config: MlpConfig,
        representation: Representation,
        weights: list[np.ndarray],
        biases: list[np.ndarray],
        transform: NormalizeTransform | None = None,
        latents: np.ndarray | None = None,
    ):
        config.validate()
        self.config = config
        self.representation = representation
        self.weights = weights
        self.biases = biases
        self.transform = transform if transform is not None else NormalizeTransform.identity()
        self.latents = latents

    @classmethod
    def initialize(
        cls,
        config: MlpConfig,
        representation: Representation,
        rng: np.random.Generator,
        transform: NormalizeTransform | None = None,
    ) -> "NeuralField":
        """Uniform init with bound sqrt(6 / fan_in); biases start at zero."""
        weights, biases = [], []
        for fan_in, fan_out in config.layer_dims():
            bound = math.sqrt(6.0 / fan_in)
            weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
            biases.append(np.zeros(fan_out))
        return cls(config, representation, weights, biases, transform=transform)

    def parameters(self) -> list[np.ndarray]:
        out: list[np.ndarray] = []
        for w, b in zip(self.weights, self.biases):
            out.append(w)
            out.append(b)
        return out

    def _assemble_input(self, points: np.ndarray, latent: np.ndarray | None) -> np.ndarray:
        x = np.asarray(points, dtype=np.float64).reshape(-1, self.config.input_dim)
        if self.config.latent_dim == 0:
            if latent is not None:
                raise InvalidInputError("field has no latent input")
            return x
        if latent is None:
            raise InvalidInputError("field requires a latent code per query")
        z = np.asarray(latent, dtype=np.float64)
        if z.ndim == 1:
            z = np.broadcast_to(z, (len(x), self.config.latent_dim))
        return np.concatenate([x, z], axis=1)

    def forward(self, points: np.ndarray, latent: np.ndarray | None = None) -> np.ndarray:
        h = self._assemble_input(points, latent)
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            h = h @ w + b
            if i != last:
                np.maximum(h, 0.0, out=h)
        return h

    def forward_cached(self, net_input: np.ndarray):
        """Forward pass keeping layer inputs and ReLU masks for backward()."""
        inputs = []
        masks = []
        h = net_input
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            inputs.append(h)
            h = h @ w + b
            if i != last:
                mask = h > 0.0
                masks.append(mask)
                h = h * mask
        return h, (inputs, masks)

    def backward(self, cache, d_out: np.ndarray):
        """Gradients of a scalar loss given d(loss)/d(output).

        Returns (weight grads, bias grads, d(loss)/d(network input)).
        """
        inputs, masks = cache
        d_w = [None] * len(self.weights)
        d_b = [None] * len(self.biases)
        d = d_out
        for i in range(len(self.weights) - 1, -1, -1):
            if i != len(self.weights) - 1:
                d = d * masks[i]
            d_w[i] = inputs[i].T @ d
            d_b[i] = d.sum(axis=0)
            d = d @ self.weights[i].T
        return d_w, d_b, d

    def toward_surface(
        self, points: np.ndarray, latent: np.ndarray | None = None
    ) -> tuple[np.ndarray, np.ndarray]:
        """Predicted (distance, unit direction) at each point.

        The direction always points toward the predicted surface. For the
        distance-only representation it comes from the negated input gradient
        of the raw scalar (the clamp to nonnegative distances is bypassed for
        the gradient, which keeps directions stable where the net undershoots).
        """
        x = np.asarray(points, dtype=np.float64).reshape(-1, self.config.input_dim)
        if self.representation is Representation.UDF:
            net_input = self._assemble_input(x, latent)
            out, cache = self.forward_cached(net_input)
            _, _, d_in = self.backward(cache, np.ones_like(out))
            grad = d_in[:, : self.config.input_dim]
            u = np.maximum(out[:, 0], 0.0)
            length = np.linalg.norm(grad, axis=1, keepdims=True)
            g = np.where(length > NULL_EPS, -grad / np.maximum(length, NULL_EPS), 0.0)
            return u, g
        out = self.forward(x, latent)
        v = out - x if self.representation is Representation.CSP else out
        return decompose(v)

    def predict_vectors(
        self, points: np.ndarray, latent: np.ndarray | None = None
    ) -> np.ndarray:
        """Predicted toward-surface vectors (distance-only fields not supported)."""
        if self.representation is Representation.UDF:
            raise InvalidInputError("distance-only field has no vector prediction")
        x = np.asarray(points, dtype=np.float64).reshape(-1, self.config.input_dim)
        out = self.forward(x, latent)
        return out - x if self.representation is Representation.CSP else out


# ---------------------------------------------------------------------------
# losses: each returns (scalar value, gradient with respect to the prediction)

def l1_loss(pred: np.ndarray, target: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean over samples of the summed absolute error."""
    diff = pred - target
    value = float(np.abs(diff).sum(axis=-1).mean())
    grad = np.sign(diff) / len(pred)
    return value, grad


def composite_loss(
    pred: np.ndarray,
    target_vectors: np.ndarray,
    weights: tuple[float, float, float] = DEFAULT_COMPOSITE_WEIGHTS,
) -> tuple[float, np.ndarray]:
    """Vector L1 plus direction L1 plus distance L1, with analytic gradient.

    The predicted norm is clamped at NORM_GUARD before division; inside the
    clamp the norm is treated as constant, so the gradient stays finite at
    the null vector.
    """
    w_vec, w_dir, w_dist = weights
    n = len(pred)
    u, g = decompose(target_vectors)

    r_raw = np.linalg.norm(pred, axis=-1)
    r = np.maximum(r_raw, NORM_GUARD)
    active = (r_raw > NORM_GUARD)[:, None]

    diff = pred - target_vectors
    vec_term = np.abs(diff).sum(axis=-1).mean()
    grad = w_vec * np.sign(diff)

    dir_pred = pred / r[:, None]
    dir_diff = dir_pred - g
    dir_term = np.abs(dir_diff).sum(axis=-1).mean()
    s = np.sign(dir_diff)
    s_dot_p = np.einsum("ij,ij->i", s, pred)
    grad += w_dir * (s / r[:, None] - active * (s_dot_p / r**3)[:, None] * pred)

    dist_diff = r_raw - u
    dist_term = np.abs(dist_diff).mean()
    grad += w_dist * np.sign(dist_diff)[:, None] * active * (pred / r[:, None])

    value = float(w_vec * vec_term + w_dir * dir_term + w_dist * dist_term)
    return value, grad / n


# ---------------------------------------------------------------------------
# optimizers

class Adam:
    """Standard Adam over a list of arrays, updated in place."""

    def __init__(self, params: list[np.ndarray],
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, params: list[np.ndarray], grads: list[np.ndarray], lr: float):
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        c1 = 1.0 - b1**self.t
        c2 = 1.0 - b2**self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            p -= lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


class RowwiseAdam:
    """Adam over rows of one table, stepping only the rows that got gradients.

    Each row keeps its own step counter so shapes sampled at different rates
    still see correctly bias-corrected moments.
    """

    def __init__(self, table_shape: tuple[int, int],
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.m = np.zeros(table_shape)
        self.v = np.zeros(table_shape)
        self.t = np.zeros(table_shape[0], dtype=np.int64)

    def step(self, table: np.ndarray, rows: np.ndarray, row_grads: np.ndarray, lr: float):
        self.t[rows] += 1
        t = self.t[rows][:, None].astype(np.float64)
        b1, b2 = self.beta1, self.beta2
        self.m[rows] = b1 * self.m[rows] + (1.0 - b1) * row_grads
        self.v[rows] = b2 * self.v[rows] + (1.0 - b2) * row_grads**2
        m_hat = self.m[rows] / (1.0 - b1**t)
        v_hat = self.v[rows] / (1.0 - b2**t)
        table[rows] -= lr * m_hat / (np.sqrt(v_hat) + self.eps)


def learning_rate_at(step: int, total: int, base: float, decay: float = LR_DECAY) -> float:
    """Step schedule: multiply by `decay` at each quarter of the run.

    `step` is 1-based; the boundaries sit at ceil(total/4), ceil(total/2),
    and ceil(3*total/4).
    """
    stage = sum(step >= math.ceil(total * q) for q in (0.25, 0.5, 0.75))
    return base * decay**stage


# ---------------------------------------------------------------------------
# training

@dataclass
class TrainOptions:
    """Knobs shared by the training entry points.

    `loss_weights` of None means plain L1 on the representation's target;
    a triple enables the composite objective (toward-surface fields only).
    `clamp_distance` caps target distances before training, off by default.
    `latent_penalty` adds a squared-norm penalty on shape codes, 0 = off.
    """

    representation: Representation = Representation.GDF
    iterations: int = 30000
    batch_size: int = DEFAULT_BATCH
    base_lr: float = DEFAULT_BASE_LR
    loss_weights: tuple[float, float, float] | None = None
    clamp_distance: float | None = None
    latent_penalty: float = 0.0
    seed: int = 0

    def validate(self):
        if self.iterations < 0 or self.batch_size <= 0 or self.base_lr <= 0:
            raise InvalidInputError(f"bad training options: {self}")
        if self.clamp_distance is not None and self.clamp_distance <= 0:
            raise InvalidInputError(f"clamp_distance must be positive: {self}")
        if self.latent_penalty < 0:
            raise InvalidInputError(f"latent_penalty must be non-negative: {self}")
        if self.loss_weights is not None and self.representation is not Representation.GDF:
            raise InvalidInputError(
                "the composite objective decomposes predicted toward-surface "
                "vectors and only applies to the gdf representation"
            )


@dataclass
class TrainResult:
    loss_history: np.ndarray
    final_loss: float


def _loss_and_grad(pred, targets, vectors, options):
    if options.loss_weights is None:
        return l1_loss(pred, targets)
    return composite_loss(pred, vectors, options.loss_weights)


def train_single(
    training_set: TrainingSet,
    config: MlpConfig,
    options: TrainOptions,
    transform: NormalizeTransform | None = None,
) -> tuple[NeuralField, TrainResult]:
    """Overfit one field to one shape's samples. Deterministic per seed."""
    options.validate()
    if config.latent_dim != 0:
        raise InvalidInputError("single-shape training takes a latent-free network")
    if len(training_set) == 0:
        raise InvalidInputError("empty training set")
    config.output_dim = options.representation.output_dim(config.input_dim)

    rng = np.random.default_rng(options.seed)
    net = NeuralField.initialize(config, options.representation, rng, transform=transform)
    params = net.parameters()
    opt = Adam(params)

    points = training_set.points
    vectors = training_set.vectors
    if options.clamp_distance is not None:
        # composite terms and targets must see the same capped vectors
        vectors = clamp_vectors(vectors, options.clamp_distance)
    targets = target_for(options.representation, points, vectors)
    n = len(points)

    history = np.empty(options.iterations)
    for step in range(1, options.iterations + 1):
        idx = rng.integers(0, n, size=options.batch_size)
        batch_in = points[idx]
        out, cache = net.forward_cached(batch_in)
        loss, d_out = _loss_and_grad(out, targets[idx], vectors[idx], options)
        if not np.isfinite(loss):
            raise TrainingDivergedError(step, loss)
        history[step - 1] = loss
        d_w, d_b, _ = net.backward(cache, d_out)
        grads = []
        for gw, gb in zip(d_w, d_b):
            grads.append(gw)
            grads.append(gb)
        opt.step(params, grads, learning_rate_at(step, options.iterations, options.base_lr))
    final = float(history[-1]) if options.iterations else math.nan
    return net, TrainResult(history, final)


@dataclass
class AutoDecoderResult:
    field: NeuralField
    loss_history: np.ndarray


def train_autodecoder(
    training_sets: list[TrainingSet],
    config: MlpConfig,
    options: TrainOptions,
) -> AutoDecoderResult:
    """Train one shared network plus one latent code per shape.

    Codes start at N(0, 0.01^2) and receive gradient steps only when their
    shape appears in the batch; the shared weights step every iteration.
    """
    options.validate()
    if config.latent_dim <= 0:
        raise InvalidInputError("shared-network training needs latent_dim > 0")
    if not training_sets:
        raise InvalidInputError("no shapes to train on")
    config.output_dim = options.representation.output_dim(config.input_dim)

    rng = np.random.default_rng(options.seed)
    net = NeuralField.initialize(config, options.representation, rng)
    n_shapes = len(training_sets)
    latents = rng.normal(0.0, LATENT_INIT_STD, size=(n_shapes, config.latent_dim))
    net.latents = latents

    points = np.concatenate([ts.points for ts in training_sets], axis=0)
    vectors = np.concatenate([ts.vectors for ts in training_sets], axis=0)
    shape_ids = np.concatenate(
        [np.full(len(ts), i, dtype=np.int64) for i, ts in enumerate(training_sets)]
    )
    if options.clamp_distance is not None:
        vectors = clamp_vectors(vectors, options.clamp_distance)
    targets = target_for(options.representation, points, vectors)
    n = len(points)
    dim = config.input_dim

    params = net.parameters()
    opt = Adam(params)
    latent_opt = RowwiseAdam(latents.shape)

    history = np.empty(options.iterations)
    for step in range(1, options.iterations + 1):
        idx = rng.integers(0, n, size=options.batch_size)
        rows_in_batch = shape_ids[idx]
        codes = latents[rows_in_batch]
        net_in = np.concatenate([points[idx], codes], axis=1)
        out, cache = net.forward_cached(net_in)
        loss, d_out = _loss_and_grad(out, targets[idx], vectors[idx], options)
        if options.latent_penalty > 0.0:
            loss += options.latent_penalty * float((codes**2).sum(axis=1).mean())
        if not np.isfinite(loss):
            raise TrainingDivergedError(step, loss)
        history[step - 1] = loss

        d_w, d_b, d_in = net.backward(cache, d_out)
        grads = []
        for gw, gb in zip(d_w, d_b):
            grads.append(gw)
            grads.append(gb)
        lr = learning_rate_at(step, options.iterations, options.base_lr)
        opt.step(params, grads, lr)

        d_z = d_in[:, dim:]
        if options.latent_penalty > 0.0:
            d_z = d_z + (2.0 * options.latent_penalty / len(idx)) * codes
        rows, inverse = np.unique(rows_in_batch, return_inverse=True)
        row_grads = np.zeros((len(rows), config.latent_dim))
        np.add.at(row_grads, inverse, d_z)
        latent_opt.step(latents, rows, row_grads, lr)
    return AutoDecoderResult(net, history)


@dataclass
class LatentFitOptions:
    """Optimization of a single code against a raw point cloud.

    Supervision is pseudo ground truth: query points are cloud points under
    Gaussian noise at the two `sigma_near` scales (fractions of the cloud's
    bounding-box diagonal) and each target vector points to the nearest cloud
    point. The network weights stay frozen.
    """

    iterations: int = 800
    batch_size: int = 4096
    base_lr: float = 1e-3
    sigma_near: tuple[float, float] = (0.005, 0.0005)
    pool_size: int = 200_000
    loss_weights: tuple[float, float, float] | None = DEFAULT_COMPOSITE_WEIGHTS
    latent_penalty: float = 0.0
    seed: int = 0


def fit_latent(
    field: NeuralField, cloud: np.ndarray, options: LatentFitOptions
) -> tuple[np.ndarray, np.ndarray]:
    """Find the latent code that makes a frozen field match a point cloud.

    Returns (code, loss history). Zero iterations returns the initial code.
    """
    if field.config.latent_dim <= 0:
        raise InvalidInputError("field has no latent input to optimize")
    if options.latent_penalty < 0:
        raise InvalidInputError(f"latent_penalty must be non-negative: {options}")
    cloud = np.asarray(cloud, dtype=np.float64).reshape(-1, field.config.input_dim)
    if len(cloud) == 0:
        raise InvalidInputError("empty point cloud")

    rng = np.random.default_rng(options.seed)
    z = rng.normal(0.0, LATENT_INIT_STD, size=field.config.latent_dim)

    lo, hi = cloud.min(axis=0), cloud.max(axis=0)
    diagonal = float(np.linalg.norm(hi - lo))
    reps = max(1, -(-options.pool_size // len(cloud)))
    base = np.tile(cloud, (reps, 1))[: options.pool_size]
    n_pool = len(base)
    sigmas = np.empty(n_pool)
    half = (n_pool + 1) // 2
    sigmas[:half] = options.sigma_near[0] * diagonal
    sigmas[half:] = options.sigma_near[1] * diagonal
    queries = base + rng.standard_normal(base.shape) * sigmas[:, None]
    _, nn = cKDTree(cloud).query(queries)
    pseudo_vectors = cloud[nn] - queries
    pseudo_targets = target_for(field.representation, queries, pseudo_vectors)

    opts = TrainOptions(
        representation=field.representation,
        loss_weights=options.loss_weights,
    )
    opts.validate()

    opt = Adam([z])
    dim = field.config.input_dim
    history = np.empty(options.iterations)
    for step in range(1, options.iterations + 1):
        idx = rng.integers(0, n_pool, size=options.batch_size)
        net_in = np.concatenate(
            [queries[idx], np.broadcast_to(z, (len(idx), len(z)))], axis=1
        )
        out, cache = field.forward_cached(net_in)
        loss, d_out = _loss_and_grad(out, pseudo_targets[idx], pseudo_vectors[idx], opts)
        if options.latent_penalty > 0.0:
            loss += options.latent_penalty * float((z**2).sum())
        if not np.isfinite(loss):
            raise TrainingDivergedError(step, loss)
        history[step - 1] = loss
        _, _, d_in = field.backward(cache, d_out)
        d_z = d_in[:, dim:].sum(axis=0)
        if options.latent_penalty > 0.0:
            d_z = d_z + 2.0 * options.latent_penalty * z
        opt.step([z], [d_z], learning_rate_at(step, options.iterations, options.base_lr))
    return z, history


# ---------------------------------------------------------------------------
# checkpoints

def save_field(path: str | Path, field: NeuralField):
    """Serialize a field: header, transform, architecture, codes, weights.

    All floats are little-endian float32; the same trained field always
    produces the same bytes.
    """
    cfg = field.config
    latents = field.latents if field.latents is not None else np.zeros((0, cfg.latent_dim))
    with open(path, "wb") as fh:
        fh.write(GDFN_MAGIC)
        fh.write(struct.pack("<IB", GDFN_VERSION, int(field.representation)))
        t = field.transform
        fh.write(struct.pack("<4f", t.scale, *t.translation))
        fh.write(struct.pack(
            "<6I", cfg.input_dim, cfg.hidden_layers, cfg.hidden_width,
            cfg.output_dim, cfg.latent_dim, len(latents),
        ))
        fh.write(np.ascontiguousarray(latents, dtype="<f4").tobytes())
        for w, b in zip(field.weights, field.biases):
            fh.write(np.ascontiguousarray(w, dtype="<f4").tobytes())
            fh.write(np.ascontiguousarray(b, dtype="<f4").tobytes())


def load_field(path: str | Path) -> NeuralField:
    """Read a checkpoint written by save_field. Arrays come back float64."""
    path = Path(path)
    if not path.exists():
        raise InvalidInputError(f"checkpoint does not exist: {path}")
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < 4 + 5 + 16 + 24 or data[:4] != GDFN_MAGIC:
        raise InvalidInputError(f"not a field checkpoint (bad magic): {path}")
    version, rep_byte = struct.unpack_from("<IB", data, 4)
    if version != GDFN_VERSION:
        raise InvalidInputError(f"unsupported checkpoint version {version}: {path}")
    try:
        representation = Representation(rep_byte)
    except ValueError:
        raise InvalidInputError(f"unknown representation byte {rep_byte}: {path}") from None
    scale, tx, ty, tz = struct.unpack_from("<4f", data, 9)
    in_dim, layers, width, out_dim, latent_dim, n_latents = struct.unpack_from("<6I", data, 25)
    config = MlpConfig(in_dim, layers, width, out_dim, latent_dim)
    config.validate()

    offset = 49

    def take(count):
        nonlocal offset
        nbytes = count * 4
        if offset + nbytes > len(data):
            raise InvalidInputError(f"checkpoint truncated: {path}")
        arr = np.frombuffer(data, dtype="<f4", count=count, offset=offset)
        offset += nbytes
        return arr.astype(np.float64)

    latents = take(n_latents * latent_dim).reshape(n_latents, latent_dim) if n_latents else None
    weights, biases = [], []
    for fan_in, fan_out in config.layer_dims():
        weights.append(take(fan_in * fan_out).reshape(fan_in, fan_out))
        biases.append(take(fan_out))
    if offset != len(data):
        raise InvalidInputError(f"checkpoint has {len(data) - offset} trailing bytes: {path}")
    transform = NormalizeTransform(float(scale), np.array([tx, ty, tz], dtype=np.float64))
    return NeuralField(config, representation, weights, biases,
                       transform=transform, latents=latents)
