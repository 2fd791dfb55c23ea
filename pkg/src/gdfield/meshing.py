"""Mesh extraction from toward-surface fields.

The field is sampled on a regular grid of (distance, direction) pairs. Cube
polygonization needs signs, which an unsigned field lacks, so each cell gets
pseudo-signs: the corner closest to the surface anchors the cell, and every
corner whose direction disagrees with the anchor's (negative dot product) is
put on the opposite side. Crossing positions use distances only, so shared
edges get identical vertices in every cell that emits them, and the vertex
weld is exact. Cells far from the surface are skipped, and sheets stay open
where neighboring cells disagree; no cleanup pass runs afterward.
"""

from __future__ import annotations

import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from ._mc_tables import TRI_TABLE
from .errors import ExtractionError, InvalidInputError
from .geometry import TriangleMesh

GDFG_MAGIC = b"GDFG"
GDFG_VERSION = 1

DEFAULT_FAR_CUTOFF = 3.0  # in cell diagonals
_EVAL_CHUNK = 65536

# Cube corner offsets in node index space, in table order.
CORNER_OFFSETS = np.array(
    [(0, 0, 0), (1, 0, 0), (1, 1, 0), (0, 1, 0),
     (0, 0, 1), (1, 0, 1), (1, 1, 1), (0, 1, 1)],
    dtype=np.int64,
)
# Cube edges as corner pairs, in table order.
EDGE_CORNERS = np.array(
    [(0, 1), (1, 2), (2, 3), (3, 0),
     (4, 5), (5, 6), (6, 7), (7, 4),
     (0, 4), (1, 5), (2, 6), (3, 7)],
    dtype=np.int64,
)
# Each edge in global terms: its axis and the node offset of its low corner.
EDGE_AXIS = np.array([0, 1, 0, 1, 0, 1, 0, 1, 2, 2, 2, 2], dtype=np.int64)
EDGE_ORIGIN = np.array(
    [(0, 0, 0), (1, 0, 0), (0, 1, 0), (0, 0, 0),
     (0, 0, 1), (1, 0, 1), (0, 1, 1), (0, 0, 1),
     (0, 0, 0), (1, 0, 0), (1, 1, 0), (0, 1, 0)],
    dtype=np.int64,
)


@dataclass
class FieldGrid:
    """Node-sampled field: distances u and unit directions g on a regular grid.

    `resolution` counts cells per axis; arrays live on the nodes, so their
    shape is resolution + 1.
    """

    u: np.ndarray
    g: np.ndarray
    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        self.u = np.asarray(self.u, dtype=np.float64)
        self.g = np.asarray(self.g, dtype=np.float64)
        self.lo = np.asarray(self.lo, dtype=np.float64).reshape(3)
        self.hi = np.asarray(self.hi, dtype=np.float64).reshape(3)
        if self.u.ndim != 3 or self.g.shape != self.u.shape + (3,):
            raise InvalidInputError(
                f"grid arrays disagree: u {self.u.shape}, g {self.g.shape}"
            )

    @property
    def resolution(self) -> tuple[int, int, int]:
        s = self.u.shape
        return (s[0] - 1, s[1] - 1, s[2] - 1)

    def cell_size(self) -> np.ndarray:
        return (self.hi - self.lo) / np.asarray(self.resolution, dtype=np.float64)

    def node_position(self, ix, iy, iz) -> np.ndarray:
        cell = self.cell_size()
        return self.lo + np.stack(
            [np.asarray(ix) * cell[0], np.asarray(iy) * cell[1], np.asarray(iz) * cell[2]],
            axis=-1,
        )


FieldFn = Callable[[np.ndarray], tuple[np.ndarray, np.ndarray]]


def _as_field_fn(field, latent) -> FieldFn:
    if callable(field) and not hasattr(field, "toward_surface"):
        if latent is not None:
            raise InvalidInputError("latent codes only apply to neural fields")
        return field
    return lambda pts: field.toward_surface(pts, latent)


def evaluate_grid(
    field,
    resolution: int | tuple[int, int, int],
    lo=(-0.55, -0.55, -0.55),
    hi=(0.55, 0.55, 0.55),
    latent: np.ndarray | None = None,
    threads: int = 1,
    chunk: int = _EVAL_CHUNK,
) -> FieldGrid:
    """Sample a field on grid nodes. `field` is a NeuralField or a callable
    mapping (n, 3) points to (distances (n,), directions (n, 3)).

    Each node is evaluated exactly once into a disjoint slice, so the result
    is identical for any chunk size or thread count.
    """
    res = np.broadcast_to(np.asarray(resolution, dtype=np.int64), (3,)).copy()
    if (res < 1).any():
        raise InvalidInputError(f"resolution must be at least 1 cell per axis: {res}")
    lo = np.asarray(lo, dtype=np.float64).reshape(3)
    hi = np.asarray(hi, dtype=np.float64).reshape(3)
    if (hi <= lo).any():
        raise InvalidInputError("grid bounds are empty or inverted")

    fn = _as_field_fn(field, latent)
    nodes = res + 1
    axes = [np.linspace(lo[a], hi[a], nodes[a]) for a in range(3)]
    grid_pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, 3)

    n = len(grid_pts)
    u_flat = np.empty(n)
    g_flat = np.empty((n, 3))

    if chunk < 1:
        raise InvalidInputError("chunk size must be positive")

    def run(start: int):
        stop = min(start + chunk, n)
        u_c, g_c = fn(grid_pts[start:stop])
        u_flat[start:stop] = np.asarray(u_c).reshape(-1)
        g_flat[start:stop] = np.asarray(g_c).reshape(-1, 3)

    starts = range(0, n, chunk)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(run, starts))
    else:
        for s in starts:
            run(s)

    if not (np.isfinite(u_flat).all() and np.isfinite(g_flat).all()):
        raise ExtractionError("field evaluation produced non-finite values")
    shape = tuple(nodes)
    return FieldGrid(u_flat.reshape(shape), g_flat.reshape(shape + (3,)), lo, hi)


def _corner_views(arr: np.ndarray) -> list[np.ndarray]:
    """The 8 corner-node views of a node array, each shaped like the cell grid."""
    views = []
    for dx, dy, dz in CORNER_OFFSETS:
        views.append(arr[dx: arr.shape[0] - 1 + dx,
                         dy: arr.shape[1] - 1 + dy,
                         dz: arr.shape[2] - 1 + dz])
    return views


def extract_mesh(
    grid: FieldGrid,
    dot_threshold: float = 0.0,
    far_cutoff: float = DEFAULT_FAR_CUTOFF,
) -> TriangleMesh:
    """Polygonize a (distance, direction) grid into a possibly-open mesh.

    Per cell: the minimum-distance corner is the anchor (positive side);
    any corner whose direction dots below `dot_threshold` against the
    anchor's flips negative. Cells whose nearest corner is farther than
    `far_cutoff` cell diagonals are skipped entirely. The mesh may be empty.
    """
    if not (np.isfinite(grid.u).all() and np.isfinite(grid.g).all()):
        raise ExtractionError("grid contains non-finite values")
    nx, ny, nz = grid.resolution
    cell = grid.cell_size()
    cutoff = far_cutoff * float(np.linalg.norm(cell))

    u_corner = _corner_views(grid.u)
    u_min = u_corner[0]
    for v in u_corner[1:]:
        u_min = np.minimum(u_min, v)
    active = u_min < cutoff
    if not active.any():
        return TriangleMesh(np.zeros((0, 3)), np.zeros((0, 3), dtype=np.int32))

    ax, ay, az = np.nonzero(active)
    a_count = len(ax)
    u_cells = np.empty((a_count, 8))
    g_cells = np.empty((a_count, 8, 3))
    for c, (dx, dy, dz) in enumerate(CORNER_OFFSETS):
        u_cells[:, c] = grid.u[ax + dx, ay + dy, az + dz]
        g_cells[:, c] = grid.g[ax + dx, ay + dy, az + dz]

    anchor = np.argmin(u_cells, axis=1)
    g_anchor = g_cells[np.arange(a_count), anchor]
    dots = np.einsum("acj,aj->ac", g_cells, g_anchor)
    negative = dots < dot_threshold  # anchor itself has dot >= 0, stays positive
    cube_index = (negative.astype(np.int64) << np.arange(8)).sum(axis=1)

    emitting = (cube_index != 0) & (cube_index != 255)
    if not emitting.any():
        return TriangleMesh(np.zeros((0, 3)), np.zeros((0, 3), dtype=np.int32))
    ax, ay, az = ax[emitting], ay[emitting], az[emitting]
    u_cells = u_cells[emitting]
    cube_index = cube_index[emitting]

    # Group cells by case so vertex positions and keys vectorize per case.
    key_chunks: list[np.ndarray] = []
    pos_chunks: list[np.ndarray] = []
    tri_chunks: list[np.ndarray] = []
    n_edge_rows = 0
    ny_nodes, nz_nodes = ny + 1, nz + 1

    order = np.argsort(cube_index, kind="stable")
    sorted_index = cube_index[order]
    boundaries = np.flatnonzero(np.diff(sorted_index)) + 1
    groups = np.split(order, boundaries)

    for members in groups:
        case = int(cube_index[members[0]])
        row = TRI_TABLE[case]
        edges = row[row >= 0].astype(np.int64)
        if len(edges) == 0:
            continue
        cx, cy, cz = ax[members], ay[members], az[members]
        m = len(members)
        k = len(edges)

        ca = EDGE_CORNERS[edges, 0]
        cb = EDGE_CORNERS[edges, 1]
        ua = u_cells[members][:, ca]
        ub = u_cells[members][:, cb]
        total = ua + ub
        with np.errstate(invalid="ignore", divide="ignore"):
            t = ua / total
        t = np.where(total > 0, t, 0.5)

        pa = np.stack(
            [(cx[:, None] + CORNER_OFFSETS[ca, 0]) * cell[0] + grid.lo[0],
             (cy[:, None] + CORNER_OFFSETS[ca, 1]) * cell[1] + grid.lo[1],
             (cz[:, None] + CORNER_OFFSETS[ca, 2]) * cell[2] + grid.lo[2]],
            axis=-1,
        )
        pb = np.stack(
            [(cx[:, None] + CORNER_OFFSETS[cb, 0]) * cell[0] + grid.lo[0],
             (cy[:, None] + CORNER_OFFSETS[cb, 1]) * cell[1] + grid.lo[1],
             (cz[:, None] + CORNER_OFFSETS[cb, 2]) * cell[2] + grid.lo[2]],
            axis=-1,
        )
        pos = pa + t[..., None] * (pb - pa)

        gx = cx[:, None] + EDGE_ORIGIN[edges, 0]
        gy = cy[:, None] + EDGE_ORIGIN[edges, 1]
        gz = cz[:, None] + EDGE_ORIGIN[edges, 2]
        axis = np.broadcast_to(EDGE_AXIS[edges], (m, k))
        keys = ((axis * (nx + 1) + gx) * ny_nodes + gy) * nz_nodes + gz

        key_chunks.append(keys.reshape(-1))
        pos_chunks.append(pos.reshape(-1, 3))
        tri_chunks.append(np.arange(n_edge_rows, n_edge_rows + m * k).reshape(-1, 3))
        n_edge_rows += m * k

    if not key_chunks:
        return TriangleMesh(np.zeros((0, 3)), np.zeros((0, 3), dtype=np.int32))

    all_keys = np.concatenate(key_chunks)
    all_pos = np.concatenate(pos_chunks)
    all_tris = np.concatenate(tri_chunks)

    unique_keys, first, inverse = np.unique(all_keys, return_index=True, return_inverse=True)
    vertices = all_pos[first]
    triangles = inverse[all_tris].astype(np.int32)
    # a collapsed crossing can degenerate a triangle; drop those
    ok = (
        (triangles[:, 0] != triangles[:, 1])
        & (triangles[:, 1] != triangles[:, 2])
        & (triangles[:, 0] != triangles[:, 2])
    )
    return TriangleMesh(vertices, triangles[ok])


def mesh_topology(mesh: TriangleMesh) -> dict:
    """Edge-sharing and connectivity census of a triangle mesh.

    Reports boundary/nonmanifold edge counts, the Euler characteristic
    V - E + F, and the number of connected components. A closed surface has
    zero boundary edges; a closed genus-0 one has Euler characteristic 2.
    """
    if mesh.is_empty:
        return {"n_vertices": 0, "n_edges": 0, "n_triangles": 0,
                "boundary_edges": 0, "nonmanifold_edges": 0, "euler": 0,
                "closed": False, "n_components": 0}
    t = mesh.triangles
    e = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]], axis=0)
    e.sort(axis=1)
    unique_e, counts = np.unique(e, axis=0, return_counts=True)
    n_edges = len(counts)
    boundary = int((counts == 1).sum())
    nonmanifold = int((counts > 2).sum())
    used = np.unique(t)

    from scipy.sparse import coo_matrix
    from scipy.sparse.csgraph import connected_components

    n_v = mesh.n_vertices
    adj = coo_matrix(
        (np.ones(len(unique_e)), (unique_e[:, 0], unique_e[:, 1])), shape=(n_v, n_v)
    )
    n_all, labels = connected_components(adj, directed=False)
    n_components = int(len(np.unique(labels[used])))

    euler = int(len(used) - n_edges + len(t))
    return {
        "n_vertices": int(len(used)),
        "n_edges": n_edges,
        "n_triangles": int(len(t)),
        "boundary_edges": boundary,
        "nonmanifold_edges": nonmanifold,
        "euler": euler,
        "closed": boundary == 0,
        "n_components": n_components,
    }


def surface_coverage(
    extracted: TriangleMesh, reference_points: np.ndarray, epsilon: float
) -> float:
    """Fraction of reference surface points strictly within `epsilon` of the
    mesh. An empty mesh covers nothing."""
    from .bvh import Bvh

    reference_points = np.asarray(reference_points, dtype=np.float64).reshape(-1, 3)
    if len(reference_points) == 0:
        raise InvalidInputError("no reference points")
    if extracted.is_empty:
        return 0.0
    _, dist, _ = Bvh(extracted).closest_points(reference_points)
    return float((dist < epsilon).mean())


def save_grid(path: str | Path, grid: FieldGrid):
    """Write a grid dump: magic, version, cell resolution, bounds, u, then g."""
    res = grid.resolution
    with open(path, "wb") as fh:
        fh.write(GDFG_MAGIC)
        fh.write(struct.pack("<I", GDFG_VERSION))
        fh.write(struct.pack("<3I", *res))
        fh.write(struct.pack("<6f", *grid.lo, *grid.hi))
        fh.write(np.ascontiguousarray(grid.u, dtype="<f4").tobytes())
        fh.write(np.ascontiguousarray(grid.g, dtype="<f4").tobytes())


def load_grid(path: str | Path) -> FieldGrid:
    path = Path(path)
    if not path.exists():
        raise InvalidInputError(f"grid dump does not exist: {path}")
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < 44 or data[:4] != GDFG_MAGIC:
        raise InvalidInputError(f"not a grid dump (bad magic): {path}")
    (version,) = struct.unpack_from("<I", data, 4)
    if version != GDFG_VERSION:
        raise InvalidInputError(f"unsupported grid dump version {version}: {path}")
    rx, ry, rz = struct.unpack_from("<3I", data, 8)
    bounds = struct.unpack_from("<6f", data, 20)
    nodes = (rx + 1) * (ry + 1) * (rz + 1)
    expected = 44 + nodes * 4 + nodes * 12
    if len(data) != expected:
        raise InvalidInputError(f"grid dump has wrong size ({len(data)} != {expected}): {path}")
    u = np.frombuffer(data, dtype="<f4", count=nodes, offset=44)
    g = np.frombuffer(data, dtype="<f4", count=nodes * 3, offset=44 + nodes * 4)
    return FieldGrid(
        u.astype(np.float64).reshape(rx + 1, ry + 1, rz + 1),
        g.astype(np.float64).reshape(rx + 1, ry + 1, rz + 1, 3),
        np.asarray(bounds[:3]),
        np.asarray(bounds[3:]),
    )
