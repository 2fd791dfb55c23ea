"""Toward-surface vector fields for open and non-watertight geometry.

A field maps a query point to the vector reaching its closest surface point;
its norm is the unperturbed unclamped distance and its direction flips across
the surface, which gives enough structure to mesh open sheets without signs.
This package covers the full pipeline: exact ground truth from triangle soup,
neural fitting (single shape and multi-shape autodecoder), pseudo-sign
marching cubes, benchmarking metrics, and a 2D comparison demo.
"""

from .bvh import Bvh, brute_force_closest_points, closest_points_on_mesh
from .demo2d import (
    Contour2D,
    Demo2dConfig,
    Demo2dReport,
    bundled_bunny,
    gdf2d_ground_truth,
    load_contour,
    run_demo,
    save_contour,
    write_pgm,
)
from .errors import (
    ExtractionError,
    GdfError,
    InvalidInputError,
    MeshFormatError,
    TrainingDivergedError,
)
from .field import (
    NULL_EPS,
    Representation,
    TrainingSet,
    build_training_set,
    clamp_vectors,
    decompose,
    gdf_ground_truth,
    load_samples,
    recompose,
    save_samples,
    target_for,
)
from .geometry import (
    LoadReport,
    NormalizeTransform,
    SamplingConfig,
    TriangleMesh,
    load_mesh,
    load_points,
    normalize_mesh,
    sample_surface,
    sample_training_points,
    save_mesh,
)
from .meshing import (
    FieldGrid,
    evaluate_grid,
    extract_mesh,
    load_grid,
    mesh_topology,
    save_grid,
    surface_coverage,
)
from .metrics import (
    EvalReport,
    chamfer_l2,
    format_table,
    hausdorff_distance,
    near_surface_field_error,
    normal_consistency,
)
from .neural import (
    Adam,
    AutoDecoderResult,
    LatentFitOptions,
    MlpConfig,
    NeuralField,
    RowwiseAdam,
    TrainOptions,
    TrainResult,
    autodecoder_config,
    composite_loss,
    fit_latent,
    l1_loss,
    learning_rate_at,
    load_field,
    save_field,
    single_shape_config,
    train_autodecoder,
    train_single,
)

__version__ = "0.1.0"

__all__ = [
    "Adam",
    "AutoDecoderResult",
    "Bvh",
    "Contour2D",
    "Demo2dConfig",
    "Demo2dReport",
    "EvalReport",
    "ExtractionError",
    "FieldGrid",
    "GdfError",
    "InvalidInputError",
    "LatentFitOptions",
    "LoadReport",
    "MeshFormatError",
    "MlpConfig",
    "NULL_EPS",
    "NeuralField",
    "NormalizeTransform",
    "Representation",
    "RowwiseAdam",
    "SamplingConfig",
    "TrainOptions",
    "TrainResult",
    "TrainingDivergedError",
    "TrainingSet",
    "TriangleMesh",
    "autodecoder_config",
    "brute_force_closest_points",
    "build_training_set",
    "bundled_bunny",
    "chamfer_l2",
    "closest_points_on_mesh",
    "composite_loss",
    "clamp_vectors",
    "decompose",
    "evaluate_grid",
    "extract_mesh",
    "fit_latent",
    "format_table",
    "gdf2d_ground_truth",
    "gdf_ground_truth",
    "hausdorff_distance",
    "l1_loss",
    "learning_rate_at",
    "load_contour",
    "load_field",
    "load_grid",
    "load_mesh",
    "load_points",
    "load_samples",
    "mesh_topology",
    "near_surface_field_error",
    "normal_consistency",
    "normalize_mesh",
    "recompose",
    "run_demo",
    "sample_surface",
    "sample_training_points",
    "save_contour",
    "save_field",
    "save_grid",
    "save_mesh",
    "save_samples",
    "surface_coverage",
    "target_for",
    "train_autodecoder",
    "train_single",
    "write_pgm",
]
