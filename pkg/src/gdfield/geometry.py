"""Triangle meshes: file I/O, normalization, and surface sampling.

Meshes are plain numpy containers. All geometry downstream of `normalize_mesh`
lives in a unit box centered at the origin (longest axis spanning [-0.5, 0.5]),
which is the coordinate frame the neural fields are trained in.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InvalidInputError, MeshFormatError

# Faces with area at or below this (in normalized units) are dropped at load.
DEGENERATE_AREA = 1e-12

# Uniform training samples cover the unit box padded by 10% so the field is
# supervised slightly outside the shape (meshing grids extend past the surface).
UNIFORM_LO = -0.55
UNIFORM_HI = 0.55


@dataclass
class TriangleMesh:
    """Indexed triangle soup. `vertices` is (n, 3) float64, `triangles` (m, 3) int32."""

    vertices: np.ndarray
    triangles: np.ndarray
    face_normals: np.ndarray | None = None

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=np.float64).reshape(-1, 3)
        self.triangles = np.asarray(self.triangles, dtype=np.int32).reshape(-1, 3)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    @property
    def is_empty(self) -> bool:
        return self.n_triangles == 0

    def corners(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Per-face corner positions (a, b, c), each (m, 3)."""
        v, t = self.vertices, self.triangles
        return v[t[:, 0]], v[t[:, 1]], v[t[:, 2]]

    def areas(self) -> np.ndarray:
        a, b, c = self.corners()
        return 0.5 * np.linalg.norm(np.cross(b - a, c - a), axis=1)

    def compute_face_normals(self) -> np.ndarray:
        """Unit face normals; cached on the mesh. Zero for degenerate faces."""
        if self.face_normals is None or len(self.face_normals) != self.n_triangles:
            a, b, c = self.corners()
            n = np.cross(b - a, c - a)
            length = np.linalg.norm(n, axis=1, keepdims=True)
            with np.errstate(invalid="ignore", divide="ignore"):
                n = np.where(length > 0, n / length, 0.0)
            self.face_normals = n
        return self.face_normals

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        if self.n_vertices == 0:
            raise InvalidInputError("empty mesh has no bounds")
        return self.vertices.min(axis=0), self.vertices.max(axis=0)

    def validate(self):
        """Check index ranges; raises InvalidInputError on violation."""
        if self.n_triangles and (
            self.triangles.min() < 0 or self.triangles.max() >= self.n_vertices
        ):
            raise InvalidInputError("triangle index out of vertex range")


@dataclass
class LoadReport:
    """What happened while loading a mesh file."""

    path: str
    format: str
    n_vertices: int
    n_triangles: int
    degenerate_dropped: int


@dataclass
class NormalizeTransform:
    """Affine map into the normalized frame: p_norm = scale * p + translation."""

    scale: float
    translation: np.ndarray

    def __post_init__(self):
        self.translation = np.asarray(self.translation, dtype=np.float64).reshape(3)

    def to_normalized(self, points: np.ndarray) -> np.ndarray:
        return np.asarray(points, dtype=np.float64) * self.scale + self.translation

    def to_original(self, points: np.ndarray) -> np.ndarray:
        return (np.asarray(points, dtype=np.float64) - self.translation) / self.scale

    @staticmethod
    def identity() -> "NormalizeTransform":
        return NormalizeTransform(1.0, np.zeros(3))


def _drop_degenerate(vertices: np.ndarray, triangles: np.ndarray) -> tuple[np.ndarray, int]:
    if len(triangles) == 0:
        return triangles, 0
    a = vertices[triangles[:, 0]]
    b = vertices[triangles[:, 1]]
    c = vertices[triangles[:, 2]]
    areas = 0.5 * np.linalg.norm(np.cross(b - a, c - a), axis=1)
    keep = areas > DEGENERATE_AREA
    return triangles[keep], int((~keep).sum())


def _parse_obj(path: Path) -> tuple[np.ndarray, np.ndarray]:
    vertices: list[tuple[float, float, float]] = []
    faces: list[tuple[int, int, int]] = []
    with open(path, "r", errors="replace") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            tag = parts[0]
            if tag == "v":
                if len(parts) < 4:
                    raise MeshFormatError(f"vertex record needs 3 coordinates: {line!r}", lineno)
                try:
                    vertices.append((float(parts[1]), float(parts[2]), float(parts[3])))
                except ValueError:
                    raise MeshFormatError(f"bad vertex coordinate: {line!r}", lineno) from None
            elif tag == "f":
                if len(parts) < 4:
                    raise MeshFormatError(f"face record needs >= 3 indices: {line!r}", lineno)
                idx = []
                for token in parts[1:]:
                    head = token.split("/")[0]
                    try:
                        i = int(head)
                    except ValueError:
                        raise MeshFormatError(f"bad face index: {token!r}", lineno) from None
                    # OBJ is 1-based; negative indices count back from the end.
                    i = i - 1 if i > 0 else len(vertices) + i
                    if i < 0 or i >= len(vertices):
                        raise MeshFormatError(f"face index out of range: {token!r}", lineno)
                    idx.append(i)
                for k in range(1, len(idx) - 1):  # fan-triangulate polygons
                    faces.append((idx[0], idx[k], idx[k + 1]))
            # other records (vn, vt, o, g, usemtl, ...) are ignored
    return (
        np.asarray(vertices, dtype=np.float64).reshape(-1, 3),
        np.asarray(faces, dtype=np.int32).reshape(-1, 3),
    )


def _write_obj(mesh: TriangleMesh, path: Path):
    with open(path, "w") as fh:
        for v in mesh.vertices:
            fh.write(f"v {v[0]:.17g} {v[1]:.17g} {v[2]:.17g}\n")
        for t in mesh.triangles:
            fh.write(f"f {t[0] + 1} {t[1] + 1} {t[2] + 1}\n")


_PLY_SCALAR = {"float": ("<f4", 4), "float32": ("<f4", 4), "double": ("<f8", 8),
               "int": ("<i4", 4), "int32": ("<i4", 4), "uint": ("<u4", 4),
               "uchar": ("<u1", 1), "uint8": ("<u1", 1), "char": ("<i1", 1),
               "short": ("<i2", 2), "ushort": ("<u2", 2)}


def _parse_ply(path: Path) -> tuple[np.ndarray, np.ndarray]:
    with open(path, "rb") as fh:
        data = fh.read()
    if not data.startswith(b"ply"):
        raise MeshFormatError("not a PLY file (missing 'ply' magic)", 1)
    try:
        header_end = data.index(b"end_header\n") + len(b"end_header\n")
    except ValueError:
        raise MeshFormatError("PLY header has no end_header") from None
    header = data[:header_end].decode("ascii", errors="replace").splitlines()

    elements: list[tuple[str, int, list]] = []  # (name, count, [properties])
    fmt = None
    for lineno, line in enumerate(header, start=1):
        parts = line.split()
        if not parts:
            continue
        if parts[0] == "format":
            fmt = parts[1]
        elif parts[0] == "element":
            elements.append((parts[1], int(parts[2]), []))
        elif parts[0] == "property":
            if not elements:
                raise MeshFormatError("PLY property before any element", lineno)
            elements[-1][2].append(parts[1:])
    if fmt != "binary_little_endian":
        raise MeshFormatError(f"unsupported PLY format {fmt!r} (binary little-endian only)")

    body = data[header_end:]
    try:
        vertices, faces, _ = _parse_ply_body(body, elements)
    except ValueError as exc:
        raise MeshFormatError(f"PLY body ended early: {exc}") from None
    if vertices is None:
        raise MeshFormatError("PLY file has no vertex element")
    return vertices, np.asarray(faces, dtype=np.int32).reshape(-1, 3)


def _parse_ply_body(body: bytes, elements) -> tuple:
    offset = 0
    vertices = None
    faces: list[tuple[int, int, int]] = []
    for name, count, props in elements:
        if name == "vertex":
            dtype_fields = []
            for p in props:
                if p[0] == "list":
                    raise MeshFormatError("list property on vertex element is unsupported")
                code, _ = _PLY_SCALAR[p[0]]
                dtype_fields.append((p[1], code))
            dt = np.dtype(dtype_fields)
            arr = np.frombuffer(body, dtype=dt, count=count, offset=offset)
            offset += dt.itemsize * count
            try:
                vertices = np.stack(
                    [arr["x"], arr["y"], arr["z"]], axis=1
                ).astype(np.float64)
            except KeyError:
                raise MeshFormatError("PLY vertex element lacks x/y/z properties") from None
        elif name == "face":
            if not props or props[0][0] != "list":
                raise MeshFormatError("PLY face element must carry a list property")
            count_code, count_size = _PLY_SCALAR[props[0][1]]
            idx_code, idx_size = _PLY_SCALAR[props[0][2]]
            for _ in range(count):
                (n,) = np.frombuffer(body, dtype=count_code, count=1, offset=offset)
                offset += count_size
                idx = np.frombuffer(body, dtype=idx_code, count=int(n), offset=offset)
                offset += idx_size * int(n)
                for k in range(1, int(n) - 1):
                    faces.append((int(idx[0]), int(idx[k]), int(idx[k + 1])))
        else:
            # skip unknown fixed-size elements; lists elsewhere are unsupported
            sizes = []
            for p in props:
                if p[0] == "list":
                    raise MeshFormatError(f"cannot skip PLY element {name!r} with list property")
                sizes.append(_PLY_SCALAR[p[0]][1])
            offset += sum(sizes) * count
    return vertices, faces, offset


def _write_ply(mesh: TriangleMesh, path: Path):
    n_v, n_f = mesh.n_vertices, mesh.n_triangles
    header = (
        "ply\n"
        "format binary_little_endian 1.0\n"
        f"element vertex {n_v}\n"
        "property float x\n"
        "property float y\n"
        "property float z\n"
        f"element face {n_f}\n"
        "property list uchar int vertex_indices\n"
        "end_header\n"
    )
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        fh.write(mesh.vertices.astype("<f4").tobytes())
        if n_f:
            counts = np.full((n_f, 1), 3, dtype="<u1")
            idx = mesh.triangles.astype("<i4")
            # interleave count byte + 3 indices per face
            rec = np.zeros(n_f, dtype=[("n", "<u1"), ("idx", "<i4", (3,))])
            rec["n"] = counts[:, 0]
            rec["idx"] = idx
            fh.write(rec.tobytes())


def load_mesh(path: str | Path) -> tuple[TriangleMesh, LoadReport]:
    """Load an OBJ or PLY mesh, dropping degenerate faces.

    Returns the mesh and a LoadReport with the degenerate-face drop count.
    Raises MeshFormatError on parse failures and InvalidInputError for
    missing files or empty meshes.
    """
    path = Path(path)
    if not path.exists():
        raise InvalidInputError(f"mesh file does not exist: {path}")
    suffix = path.suffix.lower()
    if suffix == ".obj":
        vertices, triangles = _parse_obj(path)
        fmt = "obj"
    elif suffix == ".ply":
        vertices, triangles = _parse_ply(path)
        fmt = "ply"
    else:
        raise InvalidInputError(f"unsupported mesh format {suffix!r}: {path}")
    if len(vertices) == 0 or len(triangles) == 0:
        raise InvalidInputError(f"mesh has no geometry: {path}")
    triangles, dropped = _drop_degenerate(vertices, triangles)
    if len(triangles) == 0:
        raise InvalidInputError(f"mesh has only degenerate faces: {path}")
    mesh = TriangleMesh(vertices, triangles)
    mesh.validate()
    report = LoadReport(str(path), fmt, mesh.n_vertices, mesh.n_triangles, dropped)
    return mesh, report


def load_points(path: str | Path) -> np.ndarray:
    """Read a point cloud: OBJ/PLY vertices, or xyz/csv/txt coordinate rows."""
    path = Path(path)
    if not path.exists():
        raise InvalidInputError(f"point file does not exist: {path}")
    suffix = path.suffix.lower()
    if suffix == ".obj":
        points, _ = _parse_obj(path)
    elif suffix == ".ply":
        points, _ = _parse_ply(path)
    elif suffix in (".xyz", ".csv", ".txt"):
        delimiter = "," if suffix == ".csv" else None
        try:
            points = np.loadtxt(path, delimiter=delimiter, dtype=np.float64, ndmin=2)
        except ValueError as exc:
            raise MeshFormatError(f"could not parse coordinates in {path}: {exc}") from None
        if points.shape[1] < 3:
            raise MeshFormatError(f"expected 3 coordinates per row in {path}")
        points = points[:, :3]
    else:
        raise InvalidInputError(f"unsupported point format {suffix!r}: {path}")
    if len(points) == 0:
        raise InvalidInputError(f"point file has no points: {path}")
    return np.asarray(points, dtype=np.float64)


def save_mesh(mesh: TriangleMesh, path: str | Path):
    """Write OBJ (ascii) or PLY (binary little-endian), chosen by extension."""
    path = Path(path)
    suffix = path.suffix.lower()
    if suffix == ".obj":
        _write_obj(mesh, path)
    elif suffix == ".ply":
        _write_ply(mesh, path)
    else:
        raise InvalidInputError(f"unsupported mesh format {suffix!r}: {path}")


def normalize_mesh(mesh: TriangleMesh) -> tuple[TriangleMesh, NormalizeTransform]:
    """Center the bounding box at the origin and scale the longest axis to 1.

    Returns the normalized mesh and the transform; `to_original` inverts the
    normalization exactly (up to float rounding).
    """
    if mesh.is_empty or mesh.n_vertices == 0:
        raise InvalidInputError("cannot normalize an empty mesh")
    lo, hi = mesh.bounds()
    extent = float((hi - lo).max())
    if extent <= 0.0:
        raise InvalidInputError("mesh has zero spatial extent")
    scale = 1.0 / extent
    center = (hi + lo) / 2.0
    transform = NormalizeTransform(scale, -scale * center)
    out = TriangleMesh(transform.to_normalized(mesh.vertices), mesh.triangles.copy())
    return out, transform


@dataclass
class SamplingConfig:
    """Counts and noise scales for training-point generation.

    Near-surface points are area-weighted surface samples with isotropic
    Gaussian offsets, half at each of the two `sigma_near` scales (fractions
    of the bounding-box diagonal). The remaining points are uniform over the
    padded unit box. Defaults follow the 400000/20000 recipe, which puts the
    uniform share at ~5%.
    """

    n_near_surface: int = 400_000
    n_uniform: int = 20_000
    sigma_near: tuple[float, float] = (0.005, 0.0005)
    seed: int = 0

    def validate(self):
        if self.n_near_surface < 0 or self.n_uniform < 0:
            raise InvalidInputError("sample counts must be non-negative")
        if len(self.sigma_near) != 2 or any(s < 0 for s in self.sigma_near):
            raise InvalidInputError("sigma_near must be two non-negative scales")


def sample_surface(
    mesh: TriangleMesh, n: int, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    """Area-weighted surface samples. Returns (points (n,3), face ids (n,))."""
    if mesh.is_empty:
        raise InvalidInputError("cannot sample an empty mesh")
    areas = mesh.areas()
    total = areas.sum()
    if total <= 0:
        raise InvalidInputError("mesh has zero total area")
    face_ids = rng.choice(mesh.n_triangles, size=n, p=areas / total)
    a, b, c = mesh.corners()
    a, b, c = a[face_ids], b[face_ids], c[face_ids]
    r1 = rng.random(n)
    r2 = rng.random(n)
    su = np.sqrt(r1)
    # uniform barycentric coordinates
    points = a * (1.0 - su)[:, None] + b * (su * (1.0 - r2))[:, None] + c * (su * r2)[:, None]
    return points, face_ids.astype(np.int32)


def sample_training_points(
    mesh: TriangleMesh, config: SamplingConfig, rng: np.random.Generator | None = None
) -> np.ndarray:
    """Query points for field supervision: noisy surface samples plus uniform fill.

    Deterministic for a fixed config seed. Expects a normalized mesh.
    """
    config.validate()
    if rng is None:
        rng = np.random.default_rng(config.seed)
    lo, hi = mesh.bounds()
    diagonal = float(np.linalg.norm(hi - lo))

    n_near = int(config.n_near_surface)
    surface_pts, _ = sample_surface(mesh, n_near, rng)
    n_first = (n_near + 1) // 2
    sigmas = np.empty(n_near)
    sigmas[:n_first] = config.sigma_near[0] * diagonal
    sigmas[n_first:] = config.sigma_near[1] * diagonal
    near = surface_pts + rng.standard_normal((n_near, 3)) * sigmas[:, None]

    uniform = rng.uniform(UNIFORM_LO, UNIFORM_HI, size=(int(config.n_uniform), 3))
    return np.concatenate([near, uniform], axis=0)
