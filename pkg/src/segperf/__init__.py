"""Online performance prediction for semantic segmentation via auxiliary depth evaluation."""

from .frameio import (
    DepthMap,
    FrameRecord,
    ImageTensor,
    ProbMap,
    SegMap,
    SparseDepthMap,
    IGNORE_LABEL,
)
from .metrics import (
    ConfusionCounts,
    ErrorSummary,
    MetricSample,
    calibrate_global_scale,
    confusion_counts,
    cross_entropy_loss,
    depth_acc,
    depth_scale_factor,
    error_summary,
    miou_image,
    pearson,
    pearson_xy,
    photometric_loss,
    smoothness_loss,
    ssim_map,
)
from .perturb import PerturbationSpec, apply_perturbation, derive_seed, generate_perturbation
from .regress import RegressionModel, fit_quadratic, load_model, predict_miou, save_model
from .synthmodel import DegradationConfig, SceneConfig, degrade_outputs, generate_scene
from .timeagg import (
    AggregationConfig,
    aggregate_window,
    decision_latency,
    evaluate_aggregated,
    pairwise_miou_curve,
    window_indices,
)

__version__ = "0.1.0"
