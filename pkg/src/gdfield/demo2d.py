"""2D contour regression demo: distance-only versus toward-surface-vector nets.

Trains two identical 2D MLPs on identical samples of an open contour, one
regressing the unsigned distance and one the toward-surface vector, then
rasterizes both fields and measures contour coverage at a 2-pixel threshold.
The vector field interpolates through zero across the sheet, so its distance
image keeps the contour connected where the scalar one leaves gaps.
"""

from __future__ import annotations

import importlib.resources
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InvalidInputError, MeshFormatError
from .field import Representation, TrainingSet, decompose
from .neural import MlpConfig, NeuralField, TrainOptions, train_single

IMAGE_LO = -0.55
IMAGE_HI = 0.55
COVERAGE_THRESHOLD_PX = 2.0
_GT_CHUNK = 4096


@dataclass
class Contour2D:
    """Open 2D polylines. Each polyline is a (k, 2) float64 array, k >= 2."""

    polylines: list

    def __post_init__(self):
        if not self.polylines:
            raise InvalidInputError("contour has no polylines")
        clean = []
        for i, poly in enumerate(self.polylines):
            arr = np.asarray(poly, dtype=np.float64).reshape(-1, 2)
            if len(arr) < 2:
                raise InvalidInputError(f"polyline {i} has fewer than 2 vertices")
            if (np.linalg.norm(np.diff(arr, axis=0), axis=1) == 0).any():
                raise InvalidInputError(f"polyline {i} contains a zero-length segment")
            clean.append(arr)
        self.polylines = clean

    def segments(self) -> tuple[np.ndarray, np.ndarray]:
        """All segments as (start points, end points)."""
        a = np.concatenate([p[:-1] for p in self.polylines], axis=0)
        b = np.concatenate([p[1:] for p in self.polylines], axis=0)
        return a, b

    def n_segments(self) -> int:
        return sum(len(p) - 1 for p in self.polylines)

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        pts = np.concatenate(self.polylines, axis=0)
        return pts.min(axis=0), pts.max(axis=0)

    def normalized(self) -> "Contour2D":
        """Center the bounding box and scale the longest side to 1."""
        lo, hi = self.bounds()
        extent = float((hi - lo).max())
        if extent <= 0:
            raise InvalidInputError("contour has zero spatial extent")
        center = (lo + hi) / 2.0
        return Contour2D([(p - center) / extent for p in self.polylines])


def load_contour(path: str | Path) -> Contour2D:
    """Read x,y vertex rows; a blank line starts a new polyline."""
    path = Path(path)
    if not path.exists():
        raise InvalidInputError(f"contour file does not exist: {path}")
    polylines: list[list[tuple[float, float]]] = [[]]
    with open(path, "r") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                if polylines[-1]:
                    polylines.append([])
                continue
            if line.startswith("#"):
                continue
            parts = line.split(",")
            if len(parts) != 2:
                raise MeshFormatError(f"expected x,y row, got {line!r}", lineno)
            try:
                polylines[-1].append((float(parts[0]), float(parts[1])))
            except ValueError:
                raise MeshFormatError(f"bad coordinate in {line!r}", lineno) from None
    polylines = [p for p in polylines if p]
    if not polylines:
        raise InvalidInputError(f"contour file has no vertices: {path}")
    return Contour2D(polylines)


def save_contour(path: str | Path, contour: Contour2D):
    with open(path, "w") as fh:
        for i, poly in enumerate(contour.polylines):
            if i:
                fh.write("\n")
            for x, y in poly:
                fh.write(f"{x:.9g},{y:.9g}\n")


def bundled_bunny() -> Contour2D:
    """The open contour shipped with the package."""
    data = importlib.resources.files("gdfield").joinpath("data/bunny_contour.csv")
    with importlib.resources.as_file(data) as path:
        return load_contour(path)


def gdf2d_ground_truth(points: np.ndarray, contour: Contour2D) -> np.ndarray:
    """Exact toward-contour vectors: nearest point on any segment minus x."""
    points = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    a, b = contour.segments()
    ab = b - a
    len2 = np.einsum("ij,ij->i", ab, ab)
    out = np.empty_like(points)
    for s in range(0, len(points), _GT_CHUNK):
        p = points[s:s + _GT_CHUNK]
        ap = p[:, None, :] - a[None, :, :]
        t = np.clip(np.einsum("nsj,sj->ns", ap, ab) / len2, 0.0, 1.0)
        cand = a[None] + t[..., None] * ab[None]
        d2 = ((cand - p[:, None, :]) ** 2).sum(axis=2)
        j = np.argmin(d2, axis=1)
        out[s:s + _GT_CHUNK] = cand[np.arange(len(p)), j] - p
    return out


@dataclass
class Demo2dConfig:
    """Training and rasterization knobs for the 2D comparison.

    The defaults (8x256 network, 10000 iterations, 20000 samples) run in
    minutes on a desktop CPU.
    """

    image_size: int = 256
    hidden_layers: int = 8
    hidden_width: int = 256
    iterations: int = 10000
    batch_size: int = 256
    base_lr: float = 1e-3
    n_near: int = 19000
    n_uniform: int = 1000
    sigma_near: tuple[float, float] = (0.005, 0.0005)
    seed: int = 0

    @property
    def pixel_size(self) -> float:
        return (IMAGE_HI - IMAGE_LO) / self.image_size


def sample_contour_points(
    contour: Contour2D, config: Demo2dConfig, rng: np.random.Generator | None = None
) -> np.ndarray:
    """Training queries: noisy arc-length-weighted contour samples plus
    uniform fill over the padded image box."""
    if rng is None:
        rng = np.random.default_rng(config.seed)
    a, b = contour.segments()
    lengths = np.linalg.norm(b - a, axis=1)
    lo, hi = contour.bounds()
    diagonal = float(np.linalg.norm(hi - lo))

    n = config.n_near
    seg = rng.choice(len(a), size=n, p=lengths / lengths.sum())
    t = rng.random(n)
    on_contour = a[seg] + t[:, None] * (b[seg] - a[seg])
    sigmas = np.empty(n)
    half = (n + 1) // 2
    sigmas[:half] = config.sigma_near[0] * diagonal
    sigmas[half:] = config.sigma_near[1] * diagonal
    near = on_contour + rng.standard_normal((n, 2)) * sigmas[:, None]

    uniform = rng.uniform(IMAGE_LO, IMAGE_HI, size=(config.n_uniform, 2))
    return np.concatenate([near, uniform], axis=0)


def _train_2d(
    training_set: TrainingSet, representation: Representation, config: Demo2dConfig
) -> NeuralField:
    mlp = MlpConfig(
        input_dim=2,
        hidden_layers=config.hidden_layers,
        hidden_width=config.hidden_width,
        output_dim=representation.output_dim(2),
    )
    options = TrainOptions(
        representation=representation,
        iterations=config.iterations,
        batch_size=config.batch_size,
        base_lr=config.base_lr,
        seed=config.seed,
    )
    net, _ = train_single(training_set, mlp, options)
    return net


def rasterize(field: NeuralField, image_size: int) -> tuple[np.ndarray, np.ndarray]:
    """(distance image, direction-x image) over pixel centers, row 0 at top."""
    px = (IMAGE_HI - IMAGE_LO) / image_size
    centers = IMAGE_LO + (np.arange(image_size) + 0.5) * px
    xs, ys = np.meshgrid(centers, centers[::-1])  # image rows top to bottom
    pts = np.stack([xs.reshape(-1), ys.reshape(-1)], axis=1)
    u = np.empty(len(pts))
    gx = np.empty(len(pts))
    for s in range(0, len(pts), 16384):
        uu, gg = field.toward_surface(pts[s:s + 16384])
        u[s:s + 16384] = uu
        gx[s:s + 16384] = gg[:, 0]
    return u.reshape(image_size, image_size), gx.reshape(image_size, image_size)


def _pixel_points(image_size: int) -> np.ndarray:
    px = (IMAGE_HI - IMAGE_LO) / image_size
    centers = IMAGE_LO + (np.arange(image_size) + 0.5) * px
    xs, ys = np.meshgrid(centers, centers[::-1])
    return np.stack([xs.reshape(-1), ys.reshape(-1)], axis=1)


def contour_coverage(
    u_image: np.ndarray, contour: Contour2D, threshold_px: float = COVERAGE_THRESHOLD_PX
) -> float:
    """Of the pixels truly on the contour (within the threshold), the fraction
    the field also places on it (predicted distance under the threshold)."""
    size = u_image.shape[0]
    px = (IMAGE_HI - IMAGE_LO) / size
    pts = _pixel_points(size)
    d_true = np.linalg.norm(gdf2d_ground_truth(pts, contour), axis=1).reshape(size, size)
    on_contour = d_true < threshold_px * px
    if not on_contour.any():
        raise InvalidInputError("no contour pixels at this threshold")
    covered = u_image < threshold_px * px
    return float((on_contour & covered).sum() / on_contour.sum())


def opposite_side_products(
    field: NeuralField,
    contour: Contour2D,
    n_pairs: int = 400,
    offset_px: float = 3.0,
    image_size: int = 256,
    seed: int = 0,
) -> np.ndarray:
    """Products of the direction's x-component at paired points straddling
    the contour. Strongly negative means the field flips across the sheet.

    Pairs sit on segment normals with a clear x-component, at interior
    parameters, and are kept only when each endpoint's true nearest contour
    point is the pair's base point (no interference from other sheet parts).
    """
    rng = np.random.default_rng(seed)
    a, b = contour.segments()
    ab = b - a
    lengths = np.linalg.norm(ab, axis=1)
    normals = np.stack([-ab[:, 1], ab[:, 0]], axis=1) / lengths[:, None]
    usable = np.abs(normals[:, 0]) > 0.3
    if not usable.any():
        raise InvalidInputError("contour has no segments with x-facing normals")
    seg_ids = np.flatnonzero(usable)
    pick = rng.choice(seg_ids, size=n_pairs, p=lengths[seg_ids] / lengths[seg_ids].sum())
    t = rng.uniform(0.2, 0.8, size=n_pairs)
    base = a[pick] + t[:, None] * ab[pick]
    delta = offset_px * (IMAGE_HI - IMAGE_LO) / image_size
    plus = base + delta * normals[pick]
    minus = base - delta * normals[pick]

    v_plus = gdf2d_ground_truth(plus, contour)
    v_minus = gdf2d_ground_truth(minus, contour)
    clean = (np.linalg.norm(plus + v_plus - base, axis=1) < 0.5 * delta) & (
        np.linalg.norm(minus + v_minus - base, axis=1) < 0.5 * delta
    )
    if not clean.any():
        raise InvalidInputError("no clean opposite-side pairs found")

    _, g_plus = field.toward_surface(plus[clean])
    _, g_minus = field.toward_surface(minus[clean])
    return g_plus[:, 0] * g_minus[:, 0]


def probe_minimum(
    field: NeuralField,
    contour: Contour2D,
    image_size: int = 256,
    half_width_px: float = 4.0,
    n_steps: int = 81,
) -> float:
    """Minimum predicted distance along a probe line crossing the contour
    perpendicular to its longest segment, in pixel units."""
    a, b = contour.segments()
    ab = b - a
    lengths = np.linalg.norm(ab, axis=1)
    j = int(np.argmax(lengths))
    mid = (a[j] + b[j]) / 2.0
    normal = np.array([-ab[j, 1], ab[j, 0]]) / lengths[j]
    px = (IMAGE_HI - IMAGE_LO) / image_size
    offsets = np.linspace(-half_width_px * px, half_width_px * px, n_steps)
    pts = mid[None] + offsets[:, None] * normal[None]
    u, _ = field.toward_surface(pts)
    return float(u.min() / px)


@dataclass
class Demo2dReport:
    """Everything run_demo measured, plus the rendered images."""

    coverage_gdf: float
    coverage_udf: float
    flip_mean_product: float
    probe_min_gdf_px: float
    probe_min_udf_px: float
    threshold_px: float
    image_size: int
    seed: int
    u_gdf: np.ndarray
    u_udf: np.ndarray
    gx_gdf: np.ndarray
    gx_udf: np.ndarray

    def csv(self) -> str:
        lines = [
            "method,coverage,threshold_px,image_size,seed",
            f"gdf,{self.coverage_gdf:.10g},{self.threshold_px:g},{self.image_size},{self.seed}",
            f"udf,{self.coverage_udf:.10g},{self.threshold_px:g},{self.image_size},{self.seed}",
        ]
        return "\n".join(lines) + "\n"


def run_demo(contour: Contour2D, config: Demo2dConfig | None = None) -> Demo2dReport:
    """Train both representations on identical samples and compare coverage."""
    if config is None:
        config = Demo2dConfig()
    contour = contour.normalized()
    rng = np.random.default_rng(config.seed)
    points = sample_contour_points(contour, config, rng)
    vectors = gdf2d_ground_truth(points, contour)
    training_set = TrainingSet(points, vectors)

    net_gdf = _train_2d(training_set, Representation.GDF, config)
    net_udf = _train_2d(training_set, Representation.UDF, config)

    u_gdf, gx_gdf = rasterize(net_gdf, config.image_size)
    u_udf, gx_udf = rasterize(net_udf, config.image_size)

    coverage_gdf = contour_coverage(u_gdf, contour)
    coverage_udf = contour_coverage(u_udf, contour)
    products = opposite_side_products(
        net_gdf, contour, image_size=config.image_size, seed=config.seed
    )
    return Demo2dReport(
        coverage_gdf=coverage_gdf,
        coverage_udf=coverage_udf,
        flip_mean_product=float(products.mean()),
        probe_min_gdf_px=probe_minimum(net_gdf, contour, config.image_size),
        probe_min_udf_px=probe_minimum(net_udf, contour, config.image_size),
        threshold_px=COVERAGE_THRESHOLD_PX,
        image_size=config.image_size,
        seed=config.seed,
        u_gdf=u_gdf,
        u_udf=u_udf,
        gx_gdf=gx_gdf,
        gx_udf=gx_udf,
    )


def write_pgm(path: str | Path, image: np.ndarray):
    """Binary 8-bit grayscale image file."""
    data = np.asarray(image)
    if data.dtype != np.uint8:
        raise InvalidInputError("pgm output expects uint8 pixels")
    h, w = data.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(data.tobytes())


def distance_to_pixels(u_image: np.ndarray, scale_px: float = 16.0,
                       image_size: int | None = None) -> np.ndarray:
    """Distance field to display pixels: 0 at the surface, 255 at and beyond
    scale_px pixels away."""
    size = image_size if image_size is not None else u_image.shape[0]
    px = (IMAGE_HI - IMAGE_LO) / size
    scaled = np.clip(u_image / (scale_px * px), 0.0, 1.0)
    return np.round(scaled * 255).astype(np.uint8)


def direction_to_pixels(gx_image: np.ndarray) -> np.ndarray:
    """Direction component in [-1, 1] to display pixels centered at 128."""
    return np.round((np.clip(gx_image, -1.0, 1.0) + 1.0) * 127.5).astype(np.uint8)
