"""Shared synthetic geometry for the test suite.

Every generator returns shapes inside the unit box so they work with the
default sampling and meshing bounds without normalization.
"""

import numpy as np
import pytest

from gdfield import TriangleMesh


def param_patch(f, nu, nv, u0, u1, v0, v1) -> TriangleMesh:
    """Triangulate a parametric patch f(u, v) -> (n, 3) on an nu x nv grid."""
    us = np.linspace(u0, u1, nu)
    vs = np.linspace(v0, v1, nv)
    uu, vv = np.meshgrid(us, vs, indexing="ij")
    verts = f(uu.ravel(), vv.ravel())
    idx = np.arange(nu * nv).reshape(nu, nv)
    a = idx[:-1, :-1].ravel()
    b = idx[1:, :-1].ravel()
    c = idx[1:, 1:].ravel()
    d = idx[:-1, 1:].ravel()
    tris = np.concatenate([np.stack([a, b, c], 1), np.stack([a, c, d], 1)])
    return TriangleMesh(verts, tris.astype(np.int32))


def hemisphere(nu=40, nv=20, r=0.45) -> TriangleMesh:
    """Open upper hemisphere; the equator rim is a boundary."""
    def f(th, ph):
        return np.stack(
            [r * np.cos(th) * np.sin(ph), r * np.sin(th) * np.sin(ph), r * np.cos(ph)], 1
        )
    return param_patch(f, nu, nv, 0.0, 2 * np.pi, 1e-3, np.pi / 2)


def plane_sheet(n=21, half=0.45, z=0.0137) -> TriangleMesh:
    """Flat open square sheet. Kept off lattice planes of the default grids."""
    def f(x, y):
        return np.stack([x, y, np.full_like(x, z)], 1)
    return param_patch(f, n, n, -half, half, -half, half)


def wave_sheet(n=40, half=0.45, amp=0.1) -> TriangleMesh:
    """Gently curved open sheet; its focal set lies outside the unit box."""
    def f(x, y):
        return np.stack([x, y, amp * np.sin(np.pi * (x + y) / (4 * half))], 1)
    return param_patch(f, n, n, -half, half, -half, half)


def cylinder_patch(nu=40, nv=16, r=0.35, h=0.8, arc=4 * np.pi / 3) -> TriangleMesh:
    """Two-thirds of a cylinder wall: open at both caps and along the seam."""
    def f(th, z):
        return np.stack([r * np.cos(th), r * np.sin(th), z], 1)
    return param_patch(f, nu, nv, 0.0, arc, -h / 2, h / 2)


def uv_sphere(nu=48, nv=24, r=0.45) -> TriangleMesh:
    """Closed sphere with pole fans; watertight after vertex welding."""
    def f(th, ph):
        return np.stack(
            [r * np.cos(th) * np.sin(ph), r * np.sin(th) * np.sin(ph), r * np.cos(ph)], 1
        )
    mesh = param_patch(f, nu + 1, nv + 1, 0.0, 2 * np.pi, 0.0, np.pi)
    verts = np.round(mesh.vertices, 12)
    uniq, inverse = np.unique(verts, axis=0, return_inverse=True)
    tris = inverse[mesh.triangles]
    keep = (
        (tris[:, 0] != tris[:, 1]) & (tris[:, 1] != tris[:, 2]) & (tris[:, 0] != tris[:, 2])
    )
    return TriangleMesh(uniq, tris[keep].astype(np.int32))


def random_soup(n_triangles=60, seed=0, scale=0.8) -> TriangleMesh:
    """Disconnected random triangles, including slivers; stress input."""
    rng = np.random.default_rng(seed)
    base = rng.uniform(-scale / 2, scale / 2, size=(n_triangles, 3))
    offsets = rng.normal(0, 0.15, size=(n_triangles, 2, 3))
    verts = np.concatenate([base[:, None], base[:, None] + offsets], axis=1)
    return TriangleMesh(verts.reshape(-1, 3), np.arange(3 * n_triangles, dtype=np.int32).reshape(-1, 3))


@pytest.fixture(scope="session")
def sphere_mesh():
    return uv_sphere()


@pytest.fixture(scope="session")
def hemisphere_mesh():
    return hemisphere()


@pytest.fixture(scope="session")
def sheet_mesh():
    return plane_sheet()
