"""Side-by-side 2D comparison on the bundled open contour.

Trains one vector-valued net and one scalar unsigned-distance net on the
same samples of an open 2D curve, rasterizes both predicted distance
fields, and writes four grayscale images: distances and the x component of
the gradient for each. The gradient image is where the difference shows:
the vector field flips sign across the curve, the scalar field does not.

Writes contour_*.pgm next to this script by default. The quick settings
finish in about two minutes; --full uses the heavier defaults.
"""

import argparse
import time
from pathlib import Path

from gdfield.demo2d import (
    Demo2dConfig,
    bundled_bunny,
    direction_to_pixels,
    distance_to_pixels,
    run_demo,
    write_pgm,
)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--full", action="store_true")
    ap.add_argument("--out-dir", default=str(Path(__file__).parent))
    args = ap.parse_args()

    if args.full:
        config = Demo2dConfig(seed=0)
    else:
        config = Demo2dConfig(iterations=3000, batch_size=512, seed=0)

    t0 = time.perf_counter()
    report = run_demo(bundled_bunny(), config)
    print(f"trained both nets in {time.perf_counter() - t0:.0f}s")
    print(f"contour coverage at {report.threshold_px:.0f}px: "
          f"vector {report.coverage_gdf:.4f}  scalar {report.coverage_udf:.4f}")
    print(f"mean product of gradients across the curve: "
          f"{report.flip_mean_product:+.3f} (negative = sign flip)")

    out = Path(args.out_dir)
    for name, image in (
        ("contour_dist_vector.pgm", distance_to_pixels(report.u_gdf)),
        ("contour_dist_scalar.pgm", distance_to_pixels(report.u_udf)),
        ("contour_gradx_vector.pgm", direction_to_pixels(report.gx_gdf)),
        ("contour_gradx_scalar.pgm", direction_to_pixels(report.gx_udf)),
    ):
        write_pgm(out / name, image)
        print(f"wrote {out / name}")


if __name__ == "__main__":
    main()
