"""Toward-surface vector fields: ground truth, decomposition, sample caches.

The core quantity is v(x) = closest_surface_point(x) - x. Its norm is the
unsigned distance u and its direction g = v/u is the (negated) distance
gradient. On the surface itself v is the null vector and g is defined as 0.
"""

from __future__ import annotations

import enum
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .bvh import Bvh
from .errors import InvalidInputError
from .geometry import SamplingConfig, TriangleMesh, sample_training_points

# Distances below this are treated as "on the surface": the direction is the
# null vector rather than an unstable normalized one.
NULL_EPS = 1e-12

GDFS_MAGIC = b"GDFS"
GDFS_VERSION = 1


class Representation(enum.IntEnum):
    """What the field regresses at each query point.

    GDF: the toward-surface vector itself (distance and direction in one).
    UDF: the unsigned distance alone.
    CSP: the absolute closest surface point.
    """

    GDF = 0
    UDF = 1
    CSP = 2

    def output_dim(self, spatial_dim: int = 3) -> int:
        return 1 if self is Representation.UDF else spatial_dim

    @staticmethod
    def parse(name: str) -> "Representation":
        try:
            return Representation[name.strip().upper()]
        except KeyError:
            raise InvalidInputError(
                f"unknown representation {name!r} (expected gdf, udf, or csp)"
            ) from None


def decompose(v: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Split toward-surface vectors into (distance, unit direction).

    Works on any trailing spatial dimension. Vectors with norm below NULL_EPS
    decompose to distance 0 and the null direction.
    """
    v = np.asarray(v, dtype=np.float64)
    u = np.linalg.norm(v, axis=-1)
    safe = np.maximum(u, NULL_EPS)
    g = np.where(u[..., None] >= NULL_EPS, v / safe[..., None], 0.0)
    return u, g


def recompose(u: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Inverse of decompose: distance times direction."""
    return np.asarray(u)[..., None] * np.asarray(g)


def clamp_vectors(vectors: np.ndarray, clamp: float) -> np.ndarray:
    """Scale every vector longer than `clamp` back to that length.

    Distance-capped training targets, for pipelines that do not care about
    the field far from the surface. Directions are preserved.
    """
    if clamp <= 0:
        raise InvalidInputError(f"clamp must be positive, got {clamp}")
    vectors = np.asarray(vectors, dtype=np.float64)
    norms = np.linalg.norm(vectors, axis=-1, keepdims=True)
    scale = np.where(norms > clamp, clamp / np.maximum(norms, NULL_EPS), 1.0)
    return vectors * scale


def target_for(
    representation: Representation,
    points: np.ndarray,
    vectors: np.ndarray,
    clamp: float | None = None,
) -> np.ndarray:
    """Regression target per representation, from toward-surface vectors.

    GDF targets are the vectors themselves, UDF their norms (n, 1), and CSP
    the absolute closest points x + v(x). `clamp`, if given, caps the encoded
    distance by shortening long vectors first.
    """
    if clamp is not None:
        vectors = clamp_vectors(vectors, clamp)
    if representation is Representation.GDF:
        return vectors
    if representation is Representation.UDF:
        return np.linalg.norm(vectors, axis=-1, keepdims=True)
    return np.asarray(points) + vectors


@dataclass
class TrainingSet:
    """Query points with their ground-truth toward-surface vectors."""

    points: np.ndarray
    vectors: np.ndarray

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=np.float64)
        self.vectors = np.asarray(self.vectors, dtype=np.float64)
        if self.points.shape != self.vectors.shape:
            raise InvalidInputError(
                f"points {self.points.shape} and vectors {self.vectors.shape} disagree"
            )
        if self.points.ndim != 2 or self.points.shape[1] not in (2, 3):
            raise InvalidInputError(
                f"expected (n, 2) or (n, 3) arrays, got {self.points.shape}"
            )

    def __len__(self) -> int:
        return len(self.points)

    def distances(self) -> np.ndarray:
        return np.linalg.norm(self.vectors, axis=-1)

    def directions(self) -> np.ndarray:
        return decompose(self.vectors)[1]


def gdf_ground_truth(
    points: np.ndarray, mesh: TriangleMesh, bvh: Bvh | None = None
) -> np.ndarray:
    """Exact toward-surface vectors for arbitrary query points."""
    if bvh is None:
        bvh = Bvh(mesh)
    closest, _, _ = bvh.closest_points(points)
    return closest - np.asarray(points, dtype=np.float64).reshape(-1, 3)


def build_training_set(
    mesh: TriangleMesh, config: SamplingConfig, bvh: Bvh | None = None
) -> TrainingSet:
    """Sample query points around a normalized mesh and attach ground truth."""
    points = sample_training_points(mesh, config)
    vectors = gdf_ground_truth(points, mesh, bvh=bvh)
    return TrainingSet(points, vectors)


def save_samples(path: str | Path, training_set: TrainingSet):
    """Write a sample cache: magic, version, count, then (x, v) float32 records."""
    points = training_set.points.reshape(-1, 3)
    vectors = training_set.vectors.reshape(-1, 3)
    records = np.concatenate([points, vectors], axis=1).astype("<f4")
    with open(path, "wb") as fh:
        fh.write(GDFS_MAGIC)
        fh.write(struct.pack("<IQ", GDFS_VERSION, len(records)))
        fh.write(records.tobytes())


def load_samples(path: str | Path) -> TrainingSet:
    """Read a sample cache written by save_samples. Values come back float64."""
    path = Path(path)
    if not path.exists():
        raise InvalidInputError(f"sample cache does not exist: {path}")
    with open(path, "rb") as fh:
        head = fh.read(16)
        if len(head) < 16 or head[:4] != GDFS_MAGIC:
            raise InvalidInputError(f"not a sample cache (bad magic): {path}")
        version, count = struct.unpack("<IQ", head[4:16])
        if version != GDFS_VERSION:
            raise InvalidInputError(f"unsupported sample cache version {version}: {path}")
        body = fh.read()
    expected = count * 6 * 4
    if len(body) < expected:
        raise InvalidInputError(f"sample cache truncated ({len(body)} < {expected} bytes): {path}")
    records = np.frombuffer(body[:expected], dtype="<f4").reshape(count, 6).astype(np.float64)
    return TrainingSet(records[:, :3], records[:, 3:])
