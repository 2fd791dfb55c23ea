"""Command-line pipeline: sample, fit, train-autodecoder, fit-latent, mesh,
eval, demo2d.

Every artifact-producing command writes a JSON manifest next to its primary
output (command, resolved config, seed, input hashes, outputs, wall time).
Config precedence is CLI flag > config file (key=value lines) > built-in
default. Exit codes: 0 success, 2 usage/input error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import demo2d as demo2d_mod
from .errors import ExtractionError, GdfError, InvalidInputError, TrainingDivergedError
from .field import (
    Representation,
    TrainingSet,
    build_training_set,
    load_samples,
    save_samples,
)
from .geometry import (
    SamplingConfig,
    load_mesh,
    load_points,
    normalize_mesh,
    save_mesh,
)
from .meshing import evaluate_grid, extract_mesh, load_grid, save_grid
from .metrics import (
    EvalReport,
    chamfer_l2,
    format_table,
    near_surface_field_error,
    normal_consistency,
)
from .neural import (
    DEFAULT_BASE_LR,
    DEFAULT_BATCH,
    DEFAULT_COMPOSITE_WEIGHTS,
    LatentFitOptions,
    MlpConfig,
    TrainOptions,
    fit_latent,
    load_field,
    save_field,
    train_autodecoder,
    train_single,
)

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_NUMERIC = 3


# ---------------------------------------------------------------------------
# config resolution and manifests

def _load_config_file(path: str) -> dict[str, str]:
    p = Path(path)
    if not p.exists():
        raise InvalidInputError(f"config file does not exist: {path}")
    out: dict[str, str] = {}
    for lineno, raw in enumerate(p.read_text().splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise InvalidInputError(f"config line {lineno} is not key=value: {line!r}")
        key, value = line.split("=", 1)
        out[key.strip().replace("-", "_")] = value.strip()
    return out


def _coerce(text: str, like) -> object:
    if isinstance(like, bool):
        lowered = text.lower()
        if lowered in ("1", "true", "yes", "on"):
            return True
        if lowered in ("0", "false", "no", "off"):
            return False
        raise InvalidInputError(f"expected a boolean, got {text!r}")
    if isinstance(like, int):
        return int(text)
    if isinstance(like, float):
        return float(text)
    if isinstance(like, tuple):
        parts = [float(v) for v in text.split(",")]
        return tuple(parts)
    return text


def _resolve(args: argparse.Namespace, defaults: dict) -> dict:
    """CLI flag > config file > default, for every key in `defaults`."""
    file_cfg = _load_config_file(args.config) if getattr(args, "config", None) else {}
    resolved = {}
    for key, default in defaults.items():
        value = getattr(args, key, None)
        if value is None and key in file_cfg:
            value = _coerce(file_cfg[key], default)
        if value is None:
            value = default
        resolved[key] = value
    unknown = set(file_cfg) - set(defaults)
    if unknown:
        raise InvalidInputError(f"unknown config keys: {sorted(unknown)}")
    return resolved


def _hash_file(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()[:16]


def _write_manifest(primary_out, command: str, config: dict, seed: int,
                    inputs: list, outputs: list, wall: float):
    manifest = {
        "command": command,
        "config": {k: list(v) if isinstance(v, tuple) else v for k, v in config.items()},
        "seed": seed,
        "input_hashes": {str(p): _hash_file(p) for p in inputs},
        "outputs": [str(p) for p in outputs],
        "wall_time_s": round(wall, 3),
    }
    path = Path(str(primary_out) + ".manifest.json")
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def _parse_weights(text: str) -> tuple[float, float, float]:
    parts = [float(v) for v in text.split(",")]
    if len(parts) != 3:
        raise InvalidInputError(f"expected three comma-separated weights, got {text!r}")
    return tuple(parts)


# ---------------------------------------------------------------------------
# commands

def cmd_sample(args) -> int:
    defaults = dict(near=400_000, uniform=20_000, sigma0=0.005, sigma1=0.0005,
                    seed=0, threads=1)
    cfg = _resolve(args, defaults)
    t0 = time.time()
    mesh, report = load_mesh(args.mesh)
    mesh, transform = normalize_mesh(mesh)
    sampling = SamplingConfig(
        n_near_surface=cfg["near"],
        n_uniform=cfg["uniform"],
        sigma_near=(cfg["sigma0"], cfg["sigma1"]),
        seed=cfg["seed"],
    )
    training_set = build_training_set(mesh, sampling)
    save_samples(args.out, training_set)
    cfg["normalize_scale"] = transform.scale
    cfg["normalize_translation"] = list(transform.translation)
    _write_manifest(args.out, "sample", cfg, cfg["seed"], [args.mesh], [args.out],
                    time.time() - t0)
    print(f"{len(training_set)} samples -> {args.out} "
          f"(mesh: {report.n_triangles} triangles, {report.degenerate_dropped} degenerate dropped)")
    return EXIT_OK


def cmd_fit(args) -> int:
    defaults = dict(repr="gdf", depth=8, width=512, iters=30_000,
                    batch=DEFAULT_BATCH, lr=DEFAULT_BASE_LR, loss="",
                    weights="", clamp=0.0, seed=0, threads=1)
    cfg = _resolve(args, defaults)
    t0 = time.time()
    representation = Representation.parse(cfg["repr"])
    training_set = load_samples(args.samples)

    loss_mode = cfg["loss"] or ("composite" if representation is Representation.GDF else "plain")
    if loss_mode not in ("plain", "composite"):
        raise InvalidInputError(f"unknown loss {loss_mode!r} (expected plain or composite)")
    weights = None
    if loss_mode == "composite":
        weights = _parse_weights(cfg["weights"]) if cfg["weights"] else DEFAULT_COMPOSITE_WEIGHTS

    mlp = MlpConfig(input_dim=3, hidden_layers=cfg["depth"], hidden_width=cfg["width"],
                    output_dim=representation.output_dim())
    options = TrainOptions(
        representation=representation,
        iterations=cfg["iters"],
        batch_size=cfg["batch"],
        base_lr=cfg["lr"],
        loss_weights=weights,
        clamp_distance=cfg["clamp"] or None,
        seed=cfg["seed"],
    )
    net, result = train_single(training_set, mlp, options)
    save_field(args.out, net)
    cfg["loss"] = loss_mode
    cfg["weights"] = list(weights) if weights else None
    _write_manifest(args.out, "fit", cfg, cfg["seed"], [args.samples], [args.out],
                    time.time() - t0)
    final = f"{result.final_loss:.6f}" if np.isfinite(result.final_loss) else "n/a"
    print(f"fit {cfg['repr']} {cfg['depth']}x{cfg['width']} for {cfg['iters']} iters, "
          f"final loss {final} -> {args.out}")
    return EXIT_OK


def cmd_train_autodecoder(args) -> int:
    defaults = dict(repr="gdf", depth=12, width=1024, latent=512, iters=30_000,
                    batch=DEFAULT_BATCH, lr=DEFAULT_BASE_LR, loss="",
                    weights="", seed=0, threads=1)
    cfg = _resolve(args, defaults)
    t0 = time.time()
    representation = Representation.parse(cfg["repr"])

    sample_dir = Path(args.sample_dir)
    if not sample_dir.is_dir():
        raise InvalidInputError(f"not a directory: {sample_dir}")
    sample_files = sorted(sample_dir.glob("*.gdfs"))
    if not sample_files:
        raise InvalidInputError(f"no .gdfs sample caches in {sample_dir}")
    training_sets = [load_samples(p) for p in sample_files]

    loss_mode = cfg["loss"] or ("composite" if representation is Representation.GDF else "plain")
    weights = None
    if loss_mode == "composite":
        weights = _parse_weights(cfg["weights"]) if cfg["weights"] else DEFAULT_COMPOSITE_WEIGHTS

    mlp = MlpConfig(input_dim=3, hidden_layers=cfg["depth"], hidden_width=cfg["width"],
                    output_dim=representation.output_dim(), latent_dim=cfg["latent"])
    options = TrainOptions(
        representation=representation,
        iterations=cfg["iters"],
        batch_size=cfg["batch"],
        base_lr=cfg["lr"],
        loss_weights=weights,
        seed=cfg["seed"],
    )
    result = train_autodecoder(training_sets, mlp, options)
    save_field(args.out, result.field)
    cfg["shapes"] = [p.name for p in sample_files]
    cfg["loss"] = loss_mode
    _write_manifest(args.out, "train-autodecoder", cfg, cfg["seed"],
                    list(sample_files), [args.out], time.time() - t0)
    print(f"trained {len(training_sets)}-shape autodecoder -> {args.out}")
    return EXIT_OK


def cmd_fit_latent(args) -> int:
    defaults = dict(points=0, iters=800, batch=4096, lr=1e-3, pool=200_000,
                    seed=0, threads=1)
    cfg = _resolve(args, defaults)
    t0 = time.time()
    net = load_field(args.checkpoint)
    cloud = load_points(args.cloud)
    if cfg["points"]:
        if cfg["points"] > len(cloud):
            raise InvalidInputError(
                f"--points {cfg['points']} exceeds cloud size {len(cloud)}"
            )
        pick = np.random.default_rng(cfg["seed"]).choice(
            len(cloud), size=cfg["points"], replace=False
        )
        cloud = cloud[pick]

    weights = DEFAULT_COMPOSITE_WEIGHTS if net.representation is Representation.GDF else None
    options = LatentFitOptions(
        iterations=cfg["iters"],
        batch_size=cfg["batch"],
        base_lr=cfg["lr"],
        pool_size=cfg["pool"],
        loss_weights=weights,
        seed=cfg["seed"],
    )
    code, history = fit_latent(net, cloud, options)
    net.latents = code[None, :]
    save_field(args.out, net)
    _write_manifest(args.out, "fit-latent", cfg, cfg["seed"],
                    [args.checkpoint, args.cloud], [args.out], time.time() - t0)
    final = f"{history[-1]:.6f}" if len(history) else "n/a"
    print(f"fitted latent code on {len(cloud)} points, final loss {final} -> {args.out}")
    return EXIT_OK


def cmd_mesh(args) -> int:
    defaults = dict(res=128, latent=-1, dot_threshold=0.0, far_cutoff=3.0,
                    lo=-0.55, hi=0.55, denormalize=False, dump_grid="",
                    seed=0, threads=1)
    cfg = _resolve(args, defaults)
    t0 = time.time()
    source = Path(args.field)
    if source.suffix.lower() == ".gdfg":
        grid = load_grid(source)
        transform = None
    else:
        net = load_field(source)
        latent = None
        index = cfg["latent"]
        if net.latents is not None and len(net.latents):
            if index < 0:
                if len(net.latents) > 1:
                    raise InvalidInputError(
                        f"checkpoint has {len(net.latents)} codes; pick one with --latent"
                    )
                index = 0
            if index >= len(net.latents):
                raise InvalidInputError(
                    f"--latent {index} out of range ({len(net.latents)} codes)"
                )
            latent = net.latents[index]
        elif index >= 0:
            raise InvalidInputError("checkpoint has no latent codes")
        grid = evaluate_grid(net, cfg["res"], lo=[cfg["lo"]] * 3, hi=[cfg["hi"]] * 3,
                             latent=latent, threads=cfg["threads"])
        transform = net.transform
    if cfg["dump_grid"]:
        save_grid(cfg["dump_grid"], grid)

    mesh = extract_mesh(grid, dot_threshold=cfg["dot_threshold"],
                        far_cutoff=cfg["far_cutoff"])
    if cfg["denormalize"]:
        if transform is None:
            raise InvalidInputError("grid dumps carry no normalization to undo")
        mesh.vertices = transform.to_original(mesh.vertices)
        mesh.face_normals = None
    save_mesh(mesh, args.out)
    res = "x".join(str(r) for r in grid.resolution)
    cfg["res"] = list(int(r) for r in grid.resolution)
    outputs = [args.out] + ([cfg["dump_grid"]] if cfg["dump_grid"] else [])
    _write_manifest(args.out, "mesh", cfg, cfg["seed"], [args.field], outputs,
                    time.time() - t0)
    print(f"extracted {mesh.n_triangles} triangles at {res} cells -> {args.out}")
    return EXIT_OK


def cmd_eval(args) -> int:
    defaults = dict(res=64, samples=30_000, threshold_cells=1.0, method="",
                    shape="", normalize_gt=False, out="", latent=-1,
                    seed=0, threads=1)
    cfg = _resolve(args, defaults)
    t0 = time.time()
    gt_mesh, _ = load_mesh(args.gt)
    if cfg["normalize_gt"]:
        gt_mesh, _ = normalize_mesh(gt_mesh)

    pred_path = Path(args.pred)
    dist_err = 0.0
    grad_err = 0.0
    if pred_path.suffix.lower() == ".gdfn":
        net = load_field(pred_path)
        latent = None
        if net.latents is not None and len(net.latents):
            index = cfg["latent"] if cfg["latent"] >= 0 else 0
            if index >= len(net.latents):
                raise InvalidInputError(
                    f"--latent {index} out of range ({len(net.latents)} codes)"
                )
            latent = net.latents[index]
        grid = evaluate_grid(net, cfg["res"], latent=latent, threads=cfg["threads"])
        pred_mesh = extract_mesh(grid)
        if pred_mesh.is_empty:
            raise ExtractionError("field produced an empty mesh; nothing to evaluate")
        dist_err, grad_err = near_surface_field_error(
            net, gt_mesh, cfg["res"], cfg["threshold_cells"], latent=latent,
            threads=cfg["threads"],
        )
        method = cfg["method"] or net.representation.name.lower()
    else:
        pred_mesh, _ = load_mesh(pred_path)
        method = cfg["method"] or "mesh"

    cd = chamfer_l2(pred_mesh, gt_mesh, cfg["samples"], cfg["seed"])
    nc = normal_consistency(pred_mesh, gt_mesh, cfg["samples"], cfg["seed"])
    report = EvalReport(
        method=method,
        shape=cfg["shape"] or Path(args.gt).stem,
        cd=cd,
        nc=nc,
        dist_err=dist_err,
        grad_err=grad_err,
        n_samples=cfg["samples"],
        seed=cfg["seed"],
    )
    report.validate()
    print(format_table([report]))
    if cfg["out"]:
        Path(cfg["out"]).write_text(EvalReport.to_csv([report]))
        _write_manifest(cfg["out"], "eval", cfg, cfg["seed"],
                        [args.pred, args.gt], [cfg["out"]], time.time() - t0)
    return EXIT_OK


def cmd_demo2d(args) -> int:
    defaults = dict(image_size=256, depth=8, width=256, iters=10_000, batch=256,
                    lr=1e-3, near=19_000, uniform=1000, seed=0, threads=1)
    cfg = _resolve(args, defaults)
    t0 = time.time()
    if args.contour:
        contour = demo2d_mod.load_contour(args.contour)
        inputs = [args.contour]
    else:
        contour = demo2d_mod.bundled_bunny()
        inputs = []

    config = demo2d_mod.Demo2dConfig(
        image_size=cfg["image_size"],
        hidden_layers=cfg["depth"],
        hidden_width=cfg["width"],
        iterations=cfg["iters"],
        batch_size=cfg["batch"],
        base_lr=cfg["lr"],
        n_near=cfg["near"],
        n_uniform=cfg["uniform"],
        seed=cfg["seed"],
    )
    report = demo2d_mod.run_demo(contour, config)

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    images = {
        "gdf_distance.pgm": demo2d_mod.distance_to_pixels(report.u_gdf),
        "udf_distance.pgm": demo2d_mod.distance_to_pixels(report.u_udf),
        "gdf_gradx.pgm": demo2d_mod.direction_to_pixels(report.gx_gdf),
        "udf_gradx.pgm": demo2d_mod.direction_to_pixels(report.gx_udf),
    }
    outputs = []
    for name, image in images.items():
        path = out_dir / name
        demo2d_mod.write_pgm(path, image)
        outputs.append(path)
    csv_path = out_dir / "coverage.csv"
    csv_path.write_text(report.csv())
    outputs.append(csv_path)
    _write_manifest(csv_path, "demo2d", cfg, cfg["seed"], inputs, outputs,
                    time.time() - t0)
    print(f"coverage: gdf {report.coverage_gdf:.4f}  udf {report.coverage_udf:.4f}  "
          f"(threshold {report.threshold_px:g} px)")
    print(f"opposite-side direction-x product: {report.flip_mean_product:.4f}")
    print(f"probe minima (px): gdf {report.probe_min_gdf_px:.3f}  "
          f"udf {report.probe_min_udf_px:.3f}")
    print(f"images and report -> {out_dir}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser

def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--seed", type=int, default=None, help="RNG seed (default 0)")
    p.add_argument("--config", type=str, default=None,
                   help="key=value config file; CLI flags override it")
    p.add_argument("--threads", type=int, default=None,
                   help="worker threads for grid/metric evaluation (default 1)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gdf",
        description="Toward-surface distance fields: sampling, fitting, meshing, "
                    "evaluation. Artifact-producing commands write a JSON manifest "
                    "next to their output.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sample", help="sample training points around a mesh "
                                      "and cache ground-truth vectors (.gdfs)")
    p.add_argument("mesh", help="input mesh (.obj or .ply)")
    p.add_argument("--out", required=True, help="output sample cache (.gdfs)")
    p.add_argument("--near", type=int, default=None, help="near-surface samples (default 400000)")
    p.add_argument("--uniform", type=int, default=None, help="uniform samples (default 20000)")
    p.add_argument("--sigma0", type=float, default=None,
                   help="first noise scale, fraction of bbox diagonal (default 0.005)")
    p.add_argument("--sigma1", type=float, default=None,
                   help="second noise scale (default 0.0005)")
    _add_common(p)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("fit", help="train a single-shape field from a sample cache")
    p.add_argument("samples", help="sample cache (.gdfs)")
    p.add_argument("--out", required=True, help="output checkpoint (.gdfn)")
    p.add_argument("--repr", type=str, default=None, choices=["gdf", "udf", "csp"],
                   help="field representation (default gdf)")
    p.add_argument("--depth", type=int, default=None, help="hidden layers (default 8)")
    p.add_argument("--width", type=int, default=None, help="hidden width (default 512)")
    p.add_argument("--iters", type=int, default=None, help="iterations (default 30000)")
    p.add_argument("--batch", type=int, default=None, help="batch size (default 32000)")
    p.add_argument("--lr", type=float, default=None, help="base learning rate (default 1e-4)")
    p.add_argument("--loss", type=str, default=None, choices=["plain", "composite"],
                   help="objective (default: composite for gdf, plain otherwise)")
    p.add_argument("--weights", type=str, default=None,
                   help="composite weights as 'vec,dir,dist' (default 100,4,50)")
    p.add_argument("--clamp", type=float, default=None,
                   help="cap target distances at this value (default: no cap)")
    _add_common(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("train-autodecoder",
                       help="train one shared field plus per-shape codes from a "
                            "directory of sample caches")
    p.add_argument("sample_dir", help="directory of .gdfs caches (sorted by name)")
    p.add_argument("--out", required=True, help="output checkpoint (.gdfn)")
    p.add_argument("--repr", type=str, default=None, choices=["gdf", "udf", "csp"])
    p.add_argument("--depth", type=int, default=None, help="hidden layers (default 12)")
    p.add_argument("--width", type=int, default=None, help="hidden width (default 1024)")
    p.add_argument("--latent", type=int, default=None, help="code length (default 512)")
    p.add_argument("--iters", type=int, default=None)
    p.add_argument("--batch", type=int, default=None)
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--loss", type=str, default=None, choices=["plain", "composite"])
    p.add_argument("--weights", type=str, default=None)
    _add_common(p)
    p.set_defaults(func=cmd_train_autodecoder)

    p = sub.add_parser("fit-latent",
                       help="optimize a latent code for a point cloud against a "
                            "frozen autodecoder checkpoint; writes a one-code checkpoint")
    p.add_argument("cloud", help="point cloud (.obj/.ply/.xyz/.csv/.txt)")
    p.add_argument("checkpoint", help="autodecoder checkpoint (.gdfn)")
    p.add_argument("--out", required=True, help="output checkpoint with the fitted code")
    p.add_argument("--points", type=int, default=None,
                   help="subsample the cloud to this many points (default: all)")
    p.add_argument("--iters", type=int, default=None, help="iterations (default 800)")
    p.add_argument("--batch", type=int, default=None, help="batch size (default 4096)")
    p.add_argument("--lr", type=float, default=None, help="base learning rate (default 1e-3)")
    p.add_argument("--pool", type=int, default=None,
                   help="pseudo-ground-truth pool size (default 200000)")
    _add_common(p)
    p.set_defaults(func=cmd_fit_latent)

    p = sub.add_parser("mesh", help="extract a triangle mesh from a checkpoint "
                                    "or grid dump")
    p.add_argument("field", help="checkpoint (.gdfn) or grid dump (.gdfg)")
    p.add_argument("--out", required=True, help="output mesh (.ply or .obj)")
    p.add_argument("--res", type=int, default=None, help="grid cells per axis (default 128)")
    p.add_argument("--latent", type=int, default=None,
                   help="latent code index for autodecoder checkpoints")
    p.add_argument("--dot-threshold", type=float, default=None, dest="dot_threshold",
                   help="direction-agreement threshold for pseudo-signs (default 0)")
    p.add_argument("--far-cutoff", type=float, default=None, dest="far_cutoff",
                   help="skip cells farther than this many cell diagonals (default 3)")
    p.add_argument("--lo", type=float, default=None, help="grid lower bound (default -0.55)")
    p.add_argument("--hi", type=float, default=None, help="grid upper bound (default 0.55)")
    p.add_argument("--denormalize", action="store_true", default=None,
                   help="map vertices back through the checkpoint's stored transform")
    p.add_argument("--dump-grid", type=str, default=None, dest="dump_grid",
                   help="also write the sampled grid (.gdfg)")
    _add_common(p)
    p.set_defaults(func=cmd_mesh)

    p = sub.add_parser("eval",
                       help="score a predicted mesh or checkpoint against a "
                            "ground-truth mesh; CSV columns: "
                            + EvalReport.CSV_HEADER
                            + " (dist_err/grad_err need a checkpoint; 0 for plain meshes)")
    p.add_argument("pred", help="predicted mesh (.obj/.ply) or checkpoint (.gdfn)")
    p.add_argument("gt", help="ground-truth mesh (expected in the same frame; "
                              "see --normalize-gt)")
    p.add_argument("--out", type=str, default=None, help="write the CSV row here")
    p.add_argument("--res", type=int, default=None,
                   help="grid resolution for checkpoint meshing and field error (default 64)")
    p.add_argument("--samples", type=int, default=None,
                   help="surface samples per mesh (default 30000)")
    p.add_argument("--threshold-cells", type=float, default=None, dest="threshold_cells",
                   help="near-surface node threshold in cells (default 1)")
    p.add_argument("--method", type=str, default=None, help="method label for the CSV row")
    p.add_argument("--shape", type=str, default=None, help="shape label for the CSV row")
    p.add_argument("--latent", type=int, default=None,
                   help="latent code index for autodecoder checkpoints (default 0)")
    p.add_argument("--normalize-gt", action="store_true", default=None, dest="normalize_gt",
                   help="normalize the ground-truth mesh into the unit frame first")
    _add_common(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("demo2d",
                       help="train distance-only vs toward-surface 2D fields on an "
                            "open contour; writes PGM images and coverage.csv "
                            "(columns: method,coverage,threshold_px,image_size,seed)")
    p.add_argument("--contour", type=str, default=None,
                   help="polyline CSV (x,y rows, blank line between polylines); "
                        "default: bundled contour")
    p.add_argument("--out-dir", type=str, default="demo2d_out", dest="out_dir",
                   help="output directory (default demo2d_out)")
    p.add_argument("--image-size", type=int, default=None, dest="image_size")
    p.add_argument("--depth", type=int, default=None, help="hidden layers (default 8)")
    p.add_argument("--width", type=int, default=None, help="hidden width (default 256)")
    p.add_argument("--iters", type=int, default=None, help="iterations (default 10000)")
    p.add_argument("--batch", type=int, default=None, help="batch size (default 256)")
    p.add_argument("--lr", type=float, default=None, help="base learning rate (default 1e-3)")
    p.add_argument("--near", type=int, default=None, help="near-contour samples (default 19000)")
    p.add_argument("--uniform", type=int, default=None, help="uniform samples (default 1000)")
    _add_common(p)
    p.set_defaults(func=cmd_demo2d)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (TrainingDivergedError, ExtractionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (InvalidInputError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except GdfError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
