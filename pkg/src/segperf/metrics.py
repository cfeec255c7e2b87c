"""Segmentation/depth metrics, image losses, and prediction error summaries.

All metrics work on [0, 1]-valued quantities; percent conversion is done at
reporting time only.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .frameio import (
    DepthMap,
    ImageTensor,
    ProbMap,
    SegMap,
    ShapeError,
    SparseDepthMap,
    IGNORE_LABEL,
)

DELTA_THRESHOLD = 1.25  # depth accuracy ratio threshold ("delta < 1.25")
SSIM_C1 = 0.01 ** 2
SSIM_C2 = 0.03 ** 2


class UndefinedMetricError(ValueError):
    """Metric has no defined value on this input (e.g. no evaluated pixels)."""


class EmptyGroundTruthError(ValueError):
    """No valid ground-truth pixels to evaluate against."""


class CalibrationError(ValueError):
    """Scale calibration received no usable frames."""


@dataclass(frozen=True)
class ConfusionCounts:
    """Per-class true positive / false positive / false negative pixel counts."""

    tp: np.ndarray
    fp: np.ndarray
    fn: np.ndarray

    @property
    def class_present(self) -> np.ndarray:
        return (self.tp + self.fp + self.fn) > 0

    @property
    def num_classes(self) -> int:
        return len(self.tp)


@dataclass(frozen=True)
class MetricSample:
    """One (frame, perturbation, strength) evaluation result."""

    frame_id: str
    n: int
    perturbation: str
    epsilon: float  # strength in gray-value units of 1/255; 0 = clean
    miou: float
    acc: float

    def __post_init__(self):
        for name in ("epsilon", "miou", "acc"):
            object.__setattr__(self, name, float(getattr(self, name)))
        if self.epsilon < 0:
            raise ValueError("epsilon must be >= 0")
        if not (0.0 <= self.miou <= 1.0 and 0.0 <= self.acc <= 1.0):
            raise ValueError("miou and acc must lie in [0, 1]")


@dataclass(frozen=True)
class ErrorSummary:
    """Prediction error statistics: MAE, RMSE, and correlation."""

    mae: float
    rmse: float
    rho: float
    count: int


def confusion_counts(pred: SegMap, gt: SegMap) -> ConfusionCounts:
    """Count per-class TP/FP/FN between prediction and ground truth.

    Pixels with gt == IGNORE are excluded entirely.
    """
    if pred.labels.shape != gt.labels.shape:
        raise ShapeError(f"pred {pred.labels.shape} vs gt {gt.labels.shape}")
    if pred.num_classes != gt.num_classes:
        raise ShapeError(f"num_classes mismatch: {pred.num_classes} vs {gt.num_classes}")
    n = gt.num_classes
    mask = gt.labels != IGNORE_LABEL
    g = gt.labels[mask]
    # pred IGNORE pixels fall into an extra "none of the classes" bin
    p = np.minimum(pred.labels[mask], n)
    cm = np.bincount(g * (n + 1) + p, minlength=n * (n + 1)).reshape(n, n + 1)
    tp = np.diagonal(cm[:, :n]).copy()
    fn = cm.sum(axis=1) - tp
    fp = cm[:, :n].sum(axis=0) - tp
    return ConfusionCounts(tp=tp, fp=fp, fn=fn)


def miou_image(counts: ConfusionCounts) -> float:
    """Mean IoU over the classes present in this image.

    Classes with tp + fp + fn == 0 are skipped so the single-image metric
    stays defined; raises if no class is present at all.
    """
    present = counts.class_present
    if not present.any():
        raise UndefinedMetricError("no class present; frame must be skipped upstream")
    denom = (counts.tp + counts.fp + counts.fn)[present]
    iou = counts.tp[present] / denom
    return float(iou.mean())


def depth_scale_factor(pred: DepthMap, gt: SparseDepthMap, mode: str = "median-ratio") -> float:
    """Per-image global scale factor between predicted and ground-truth depth.

    mode "median-ratio": median over valid pixels of gt/pred.
    mode "ratio-of-medians": median(gt) / median(pred) over valid pixels.
    """
    if pred.depth.shape != gt.depth.shape:
        raise ShapeError(f"pred {pred.depth.shape} vs gt {gt.depth.shape}")
    if gt.num_valid == 0:
        raise EmptyGroundTruthError("no valid ground-truth depth pixels")
    d = pred.depth[gt.valid]
    db = gt.depth[gt.valid]
    if mode == "median-ratio":
        return float(np.median(db / d))
    if mode == "ratio-of-medians":
        return float(np.median(db) / np.median(d))
    raise ValueError(f"unknown scale mode {mode!r}")


def calibrate_global_scale(val_frames, mode: str = "median-ratio") -> float:
    """Median of per-frame scale factors over a validation set."""
    factors = [depth_scale_factor(pred, gt, mode) for pred, gt in val_frames]
    if not factors:
        raise CalibrationError("no frames to calibrate the depth scale on")
    return float(np.median(factors))


def depth_acc(pred: DepthMap, gt: SparseDepthMap, scale: float = 1.0) -> float:
    """Fraction of valid pixels with max(d/gt, gt/d) < 1.25 after global scaling.

    Scaled predictions are clamped to [d_min, d_max] before the comparison.
    """
    if pred.depth.shape != gt.depth.shape:
        raise ShapeError(f"pred {pred.depth.shape} vs gt {gt.depth.shape}")
    if scale <= 0:
        raise ValueError("scale must be > 0")
    if gt.num_valid == 0:
        raise EmptyGroundTruthError("no valid ground-truth depth pixels")
    d = np.clip(pred.depth[gt.valid] * scale, pred.d_min, pred.d_max)
    db = gt.depth[gt.valid]
    ratio = np.maximum(d / db, db / d)
    return float((ratio < DELTA_THRESHOLD).mean())


def class_weights_from_frequencies(freqs) -> np.ndarray:
    """Inverse log-frequency class weights: w_s = 1 / ln(1.02 + p_s)."""
    freqs = np.asarray(freqs, dtype=np.float64)
    return 1.0 / np.log(1.02 + freqs)


def cross_entropy_loss(probs: ProbMap, gt_onehot: ProbMap, class_weights=None) -> float:
    """Weighted cross-entropy averaged over all pixels."""
    if probs.probs.shape != gt_onehot.probs.shape:
        raise ShapeError(f"probs {probs.probs.shape} vs gt {gt_onehot.probs.shape}")
    if class_weights is None:
        class_weights = np.ones(probs.num_classes)
    w = np.asarray(class_weights, dtype=np.float64)
    if w.shape != (probs.num_classes,):
        raise ShapeError(f"expected {probs.num_classes} class weights, got shape {w.shape}")
    log_p = np.log(np.maximum(probs.probs, 1e-12))
    per_pixel = -(w[None, None, :] * gt_onehot.probs * log_p).sum(axis=2)
    return float(per_pixel.mean())


def _box3(x: np.ndarray) -> np.ndarray:
    """3x3 box mean with replicate edge padding, per channel."""
    p = np.pad(x, ((1, 1), (1, 1)) + ((0, 0),) * (x.ndim - 2), mode="edge")
    s = np.zeros_like(x, dtype=np.float64)
    for dy in range(3):
        for dx in range(3):
            s += p[dy : dy + x.shape[0], dx : dx + x.shape[1]]
    return s / 9.0


def ssim_map(a: ImageTensor, b: ImageTensor) -> np.ndarray:
    """Per-pixel SSIM on 3x3 neighborhoods, averaged over channels.

    Raw SSIM lies in [-1, 1]; the returned map is clamped to [0, 1].
    """
    if a.data.shape != b.data.shape:
        raise ShapeError(f"a {a.data.shape} vs b {b.data.shape}")
    x, y = a.data, b.data
    mu_x = _box3(x)
    mu_y = _box3(y)
    var_x = _box3(x * x) - mu_x ** 2
    var_y = _box3(y * y) - mu_y ** 2
    cov = _box3(x * y) - mu_x * mu_y
    num = (2 * mu_x * mu_y + SSIM_C1) * (2 * cov + SSIM_C2)
    den = (mu_x ** 2 + mu_y ** 2 + SSIM_C1) * (var_x + var_y + SSIM_C2)
    ssim = (num / den).mean(axis=2)
    return np.clip(ssim, 0.0, 1.0)


def photometric_loss(target: ImageTensor, warped, alpha: float = 0.85) -> float:
    """Minimum-reprojection photometric loss over warped candidates.

    Per pixel: min over candidates of
    alpha/2 * (1 - SSIM) + (1 - alpha) * mean-channel L1, then image mean.
    """
    warped = list(warped)
    if not warped:
        raise ValueError("need at least one warped candidate")
    costs = []
    for cand in warped:
        if cand.data.shape != target.data.shape:
            raise ShapeError(f"candidate {cand.data.shape} vs target {target.data.shape}")
        ssim = ssim_map(target, cand)
        l1 = np.abs(target.data - cand.data).mean(axis=2)
        costs.append(alpha / 2.0 * (1.0 - ssim) + (1.0 - alpha) * l1)
    return float(np.min(costs, axis=0).mean())


def smoothness_loss(depth: DepthMap, image: ImageTensor) -> float:
    """Edge-aware smoothness of the mean-normalized inverse depth.

    mean(|dx d*| e^{-|dx I|}) + mean(|dy d*| e^{-|dy I|}); image gradients
    averaged over channels. The 1e-3 loss weight is applied by the caller.
    """
    if depth.depth.shape != image.data.shape[:2]:
        raise ShapeError(f"depth {depth.depth.shape} vs image {image.data.shape[:2]}")
    disp = 1.0 / depth.depth
    disp = disp / disp.mean()
    dx_d = np.abs(disp[:, 1:] - disp[:, :-1])
    dy_d = np.abs(disp[1:, :] - disp[:-1, :])
    dx_i = np.abs(image.data[:, 1:] - image.data[:, :-1]).mean(axis=2)
    dy_i = np.abs(image.data[1:, :] - image.data[:-1, :]).mean(axis=2)
    return float((dx_d * np.exp(-dx_i)).mean() + (dy_d * np.exp(-dy_i)).mean())


def pearson_xy(a, b) -> float:
    """Pearson correlation between two equal-length sequences."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ShapeError(f"sequences must be equal-length 1-D, got {a.shape} and {b.shape}")
    if len(a) < 2:
        raise UndefinedMetricError("need at least 2 samples for correlation")
    da = a - a.mean()
    db = b - b.mean()
    na = math.sqrt(float((da ** 2).sum()))
    nb = math.sqrt(float((db ** 2).sum()))
    if na == 0.0 or nb == 0.0:
        raise UndefinedMetricError("correlation undefined for a constant sequence")
    return float((da * db).sum() / (na * nb))


def pearson(samples) -> float:
    """Pearson correlation between the mIoU and ACC values of the samples."""
    samples = list(samples)
    return pearson_xy([s.miou for s in samples], [s.acc for s in samples])


def error_summary(predicted, actual) -> ErrorSummary:
    """MAE/RMSE of predicted - actual, plus their correlation (nan if undefined)."""
    predicted = np.asarray(predicted, dtype=np.float64)
    actual = np.asarray(actual, dtype=np.float64)
    if predicted.shape != actual.shape or predicted.ndim != 1 or len(predicted) == 0:
        raise ShapeError(f"need equal nonempty 1-D inputs, got {predicted.shape} and {actual.shape}")
    delta = predicted - actual
    mae = float(np.abs(delta).mean())
    rmse = float(np.sqrt((delta ** 2).mean()))
    try:
        rho = pearson_xy(predicted, actual)
    except UndefinedMetricError:
        rho = float("nan")
    return ErrorSummary(mae=mae, rmse=rmse, rho=rho, count=len(delta))


SAMPLE_CSV_FIELDS = ["frame_id", "n", "perturbation", "epsilon_255", "miou", "acc"]


def write_samples_csv(path, samples) -> None:
    """Write MetricSamples to CSV; epsilon is stored in 1/255 units times 255."""
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(SAMPLE_CSV_FIELDS)
        for s in samples:
            writer.writerow(
                [s.frame_id, s.n, s.perturbation, repr(s.epsilon * 255.0), repr(s.miou), repr(s.acc)]
            )


def read_samples_csv(path) -> list[MetricSample]:
    samples = []
    with open(path, newline="") as f:
        for row in csv.DictReader(f):
            samples.append(
                MetricSample(
                    frame_id=row["frame_id"],
                    n=int(row["n"]),
                    perturbation=row["perturbation"],
                    epsilon=float(row["epsilon_255"]) / 255.0,
                    miou=float(row["miou"]),
                    acc=float(row["acc"]),
                )
            )
    return samples
