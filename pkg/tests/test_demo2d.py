import numpy as np
import pytest

from gdfield import (
    Contour2D,
    Demo2dConfig,
    InvalidInputError,
    MeshFormatError,
    bundled_bunny,
    gdf2d_ground_truth,
    load_contour,
    run_demo,
    save_contour,
    write_pgm,
)
from gdfield.demo2d import (
    COVERAGE_THRESHOLD_PX,
    contour_coverage,
    direction_to_pixels,
    distance_to_pixels,
    opposite_side_products,
    probe_minimum,
    rasterize,
    sample_contour_points,
)


def open_arc(n=64, r=0.4, span=1.5 * np.pi):
    t = np.linspace(0.0, span, n)
    return Contour2D([np.stack([r * np.cos(t), r * np.sin(t)], axis=1)])


def segment_contour():
    return Contour2D([np.array([[-0.4, 0.0], [0.4, 0.0]])])


# ---------------------------------------------------------------------------
# contour container and I/O

def test_contour_validation():
    with pytest.raises(InvalidInputError):
        Contour2D([np.array([[0.0, 0.0]])])  # single vertex
    with pytest.raises(InvalidInputError):
        Contour2D([np.array([[0.0, 0.0], [0.0, 0.0]])])  # zero-length segment
    with pytest.raises(InvalidInputError):
        Contour2D([])


def test_contour_segments_and_bounds():
    c = Contour2D([np.array([[0.0, 0], [1, 0], [1, 1]])])
    starts, ends = c.segments()
    assert len(starts) == 2 and c.n_segments() == 2
    lo, hi = c.bounds()
    np.testing.assert_array_equal(lo, [0, 0])
    np.testing.assert_array_equal(hi, [1, 1])


def test_contour_normalized_fits_half_box():
    c = Contour2D([np.array([[2.0, 3.0], [6.0, 3.0], [6.0, 5.0]])])
    n = c.normalized()
    lo, hi = n.bounds()
    assert (hi - lo).max() == pytest.approx(1.0)
    np.testing.assert_allclose((lo + hi) / 2, 0.0, atol=1e-15)


def test_contour_csv_roundtrip(tmp_path):
    c = Contour2D([
        np.array([[0.0, 0.1], [0.5, 0.2], [0.3, -0.4]]),
        np.array([[-0.2, -0.2], [0.2, 0.3]]),
    ])
    path = tmp_path / "c.csv"
    save_contour(path, c)
    loaded = load_contour(path)
    assert len(loaded.polylines) == 2
    for got, want in zip(loaded.polylines, c.polylines):
        np.testing.assert_allclose(got, want, atol=1e-12)


def test_contour_bad_row_reports_line(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("0.0,0.1\nnot,numbers\n")
    with pytest.raises(MeshFormatError) as err:
        load_contour(path)
    assert err.value.line == 2


def test_bundled_contour_loads():
    c = bundled_bunny()
    lo, hi = c.bounds()
    assert (hi - lo).max() <= 1.0 + 1e-9
    assert sum(len(p) for p in c.polylines) >= 100


# ---------------------------------------------------------------------------
# 2D ground truth

def test_gdf2d_against_closed_form_segment():
    c = segment_contour()
    pts = np.array([
        [0.0, 0.3],     # above the interior: straight down
        [0.0, -0.2],    # below: straight up
        [0.6, 0.0],     # beyond the right endpoint: toward the endpoint
        [0.5, 0.1],
    ])
    v = gdf2d_ground_truth(pts, c)
    np.testing.assert_allclose(v[0], [0, -0.3], atol=1e-15)
    np.testing.assert_allclose(v[1], [0, 0.2], atol=1e-15)
    np.testing.assert_allclose(v[2], [-0.2, 0.0], atol=1e-15)
    np.testing.assert_allclose(v[3], [-0.1, -0.1], atol=1e-15)


def test_gdf2d_on_contour_is_zero():
    c = open_arc()
    v = gdf2d_ground_truth(c.polylines[0][:10], c)
    np.testing.assert_allclose(v, 0.0, atol=1e-15)


def test_gdf2d_picks_nearest_polyline():
    c = Contour2D([
        np.array([[-1.0, 0.1], [1.0, 0.1]]),
        np.array([[-1.0, -0.5], [1.0, -0.5]]),
    ])
    v = gdf2d_ground_truth(np.array([[0.0, 0.0]]), c)
    np.testing.assert_allclose(v[0], [0.0, 0.1], atol=1e-15)


# ---------------------------------------------------------------------------
# sampling and training scaffolding

def test_sample_contour_points_counts_and_spread():
    c = open_arc()
    cfg = Demo2dConfig(n_near=600, n_uniform=100, seed=1)
    pts = sample_contour_points(c, cfg)
    assert pts.shape == (700, 2)
    v = gdf2d_ground_truth(pts[:600], c)
    assert np.linalg.norm(v, axis=1).mean() < 0.05


def test_coverage_of_perfect_and_blind_fields():
    c = segment_contour()
    size = 64
    px = 1.1 / size
    centers = -0.55 + (np.arange(size) + 0.5) * px
    # rows are y from top to bottom
    yy, xx = np.meshgrid(centers[::-1], centers, indexing="ij")
    pts = np.stack([xx.ravel(), yy.ravel()], axis=1)
    u_true = np.linalg.norm(gdf2d_ground_truth(pts, c), axis=1).reshape(size, size)
    assert contour_coverage(u_true, c) == 1.0
    assert contour_coverage(np.full((size, size), 9.0), c) == 0.0


class ExactContourField:
    """Adapter exposing the analytic 2D field through toward_surface."""

    def __init__(self, contour):
        self.contour = contour

    def toward_surface(self, points, latent=None):
        v = gdf2d_ground_truth(np.asarray(points), self.contour)
        u = np.linalg.norm(v, axis=1)
        g = np.where(u[:, None] > 1e-12, v / np.maximum(u, 1e-300)[:, None], 0.0)
        return u, g


def test_opposite_side_products_sign_on_exact_field():
    # vertical segment so its normal points along x; the x-direction component
    # must flip sign across the contour, making every pair product negative
    c = Contour2D([np.array([[0.1, -0.4], [0.1, 0.4]])])
    products = opposite_side_products(ExactContourField(c), c, image_size=256, seed=0)
    assert len(products) > 0
    assert products.mean() < -0.9
    assert (products < 0).all()


def test_probe_minimum_of_exact_field_is_zero():
    c = segment_contour()
    minimum_px = probe_minimum(ExactContourField(c), c, image_size=256)
    assert minimum_px == pytest.approx(0.0, abs=1e-9)


# ---------------------------------------------------------------------------
# images

def test_write_pgm_format(tmp_path):
    image = np.arange(12, dtype=np.uint8).reshape(3, 4)
    path = tmp_path / "i.pgm"
    write_pgm(path, image)
    data = path.read_bytes()
    assert data.startswith(b"P5\n4 3\n255\n")
    assert data[len(b"P5\n4 3\n255\n"):] == image.tobytes()


def test_write_pgm_requires_uint8(tmp_path):
    with pytest.raises(InvalidInputError):
        write_pgm(tmp_path / "x.pgm", np.zeros((2, 2), dtype=np.float64))


def test_pixel_mappings():
    u = np.array([[0.0, 1.0]])
    px = distance_to_pixels(u, scale_px=16.0, image_size=256)
    assert px.dtype == np.uint8
    assert px[0, 0] == 0 and px[0, 1] == 255
    gx = direction_to_pixels(np.array([[-1.0, 0.0, 1.0]]))
    assert gx.dtype == np.uint8
    np.testing.assert_array_equal(gx[0], [0, 128, 255])


# ---------------------------------------------------------------------------
# end-to-end (tiny budget)

def test_run_demo_smoke():
    c = open_arc(n=40)
    cfg = Demo2dConfig(image_size=48, hidden_layers=2, hidden_width=24,
                       iterations=150, batch_size=128, n_near=800, n_uniform=100,
                       seed=0)
    report = run_demo(c, cfg)
    assert report.u_gdf.shape == (48, 48)
    assert report.u_udf.shape == (48, 48)
    assert 0.0 <= report.coverage_gdf <= 1.0
    assert 0.0 <= report.coverage_udf <= 1.0
    assert np.isfinite(report.flip_mean_product)
    csv = report.csv()
    assert csv.splitlines()[0] == "method,coverage,threshold_px,image_size,seed"
    assert report.threshold_px == COVERAGE_THRESHOLD_PX


def test_rasterize_orientation():
    # a field that returns u = y must produce an image whose top row (y max)
    # holds the largest values
    class Linear:
        def toward_surface(self, points, latent=None):
            p = np.asarray(points)
            g = np.zeros_like(p)
            g[:, 1] = -1.0
            return p[:, 1], g

    u, gx = rasterize(Linear(), 32)
    assert u.shape == (32, 32)
    assert u[0].mean() > u[-1].mean()
