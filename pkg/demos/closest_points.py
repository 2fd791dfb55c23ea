"""Closest-point queries against a triangle soup.

Builds a random soup, queries it through the BVH, and cross-checks a few
thousand queries against the exhaustive per-triangle scan. Prints timings
so you can see what the tree buys you.
"""

import time

import numpy as np

from gdfield import Bvh, TriangleMesh, brute_force_closest_points


def random_soup(n_triangles, seed=0, scale=0.8):
    rng = np.random.default_rng(seed)
    centers = rng.uniform(-scale, scale, size=(n_triangles, 3))
    corners = centers[:, None, :] + rng.normal(scale=0.1, size=(n_triangles, 3, 3))
    vertices = corners.reshape(-1, 3)
    triangles = np.arange(len(vertices), dtype=np.int64).reshape(-1, 3)
    return TriangleMesh(vertices, triangles)


def main():
    mesh = random_soup(2000, seed=42)
    rng = np.random.default_rng(7)
    queries = rng.uniform(-1.2, 1.2, size=(5000, 3))

    t0 = time.perf_counter()
    bvh = Bvh(mesh)
    t_build = time.perf_counter() - t0

    t0 = time.perf_counter()
    closest, dist, tri = bvh.closest_points(queries)
    t_query = time.perf_counter() - t0

    # the slow reference answers the same question one triangle at a time
    t0 = time.perf_counter()
    _, dist_ref, _ = brute_force_closest_points(queries[:500], mesh)
    t_ref = time.perf_counter() - t0

    worst = np.abs(dist[:500] - dist_ref).max()
    print(f"mesh: {mesh.n_triangles} triangles, {len(queries)} queries")
    print(f"build {t_build * 1e3:.1f} ms, query {t_query * 1e3:.1f} ms "
          f"({t_query / len(queries) * 1e6:.1f} us/query)")
    print(f"exhaustive scan on 500 queries: {t_ref * 1e3:.1f} ms")
    print(f"max |distance difference| on those 500: {worst:.2e}")
    print(f"nearest triangle of query 0: #{tri[0]}, "
          f"closest point {np.round(closest[0], 4)}")


if __name__ == "__main__":
    main()
