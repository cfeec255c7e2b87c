"""Deterministic synthetic perceiver for end-to-end pipeline verification.

Generates procedural scenes with full segmentation ground truth and dense
depth, then produces degraded "predictions" whose quality falls with the
perturbation strength in a correlation-controlled way. This stands in for
trained networks: the regression and aggregation machinery only needs
(mIoU, ACC) pairs with a controllable correlation structure.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .frameio import (
    DEPTH_MAX,
    DEPTH_MIN,
    DepthMap,
    FrameRecord,
    ImageTensor,
    SegMap,
    SparseDepthMap,
)
from .perturb import derive_seed


@dataclass(frozen=True)
class SceneConfig:
    height: int = 64
    width: int = 96
    num_classes: int = 5
    num_objects: int = 8
    depth_range: tuple = (DEPTH_MIN, DEPTH_MAX)
    gt_sparsity: float = 0.05  # fraction of pixels with LiDAR-style depth GT
    seed: int = 0

    def __post_init__(self):
        if self.num_classes < 2:
            raise ValueError("need at least 2 classes")
        if self.height < 16 or self.width < 16:
            raise ValueError("scene must be at least 16x16")
        if not 0.0 < self.gt_sparsity <= 1.0:
            raise ValueError("gt_sparsity must be in (0, 1]")


@dataclass(frozen=True)
class DegradationConfig:
    seg_sensitivity: float = 2.0  # label-corruption rate per unit epsilon
    depth_sensitivity: float = 2.0  # depth corruption rate per unit epsilon
    coupling: float = 1.0  # shared vs. independent per-frame severity
    seg_clean_noise: float = 0.0  # frame-to-frame corruption floor at eps=0
    depth_clean_noise: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.coupling <= 1.0:
            raise ValueError("coupling must be in [0, 1]")
        if min(self.seg_sensitivity, self.depth_sensitivity,
               self.seg_clean_noise, self.depth_clean_noise) < 0:
            raise ValueError("sensitivities and noise floors must be >= 0")


def _class_color(s: int) -> np.ndarray:
    # fixed palette: golden-ratio hue walk, no RNG so colors are stable per class
    h = (s * 0.618033988749895) % 1.0
    return np.array([abs(h * 6 % 2 - 1), abs((h + 1 / 3) * 6 % 2 - 1), abs((h + 2 / 3) * 6 % 2 - 1)])


def generate_scene(config: SceneConfig, frame_id: str | None = None) -> FrameRecord:
    """Render a layered random-shape scene with full seg and dense depth GT.

    The returned depth_gt stores dense depth with the sparse LiDAR-style
    validity mask sampled at gt_sparsity; degraders read the dense array.
    """
    rng = np.random.default_rng(config.seed)
    h, w = config.height, config.width
    d_min, d_max = config.depth_range

    labels = np.zeros((h, w), dtype=np.int64)
    # background depth: vertical ramp from far (top) to mid-range (bottom)
    rows = np.linspace(0.9, 0.4, h)[:, None]
    depth = d_min + (d_max - d_min) * np.repeat(rows, w, axis=1)

    yy, xx = np.mgrid[0:h, 0:w]
    # draw far-to-near so closer objects occlude
    obj_depths = np.sort(rng.uniform(d_min + 1.0, 0.8 * d_max, config.num_objects))[::-1]
    for obj_depth in obj_depths:
        cls = int(rng.integers(0, config.num_classes))
        cy, cx = rng.uniform(0, h), rng.uniform(0, w)
        ry = rng.uniform(h / 10, h / 3)
        rx = rng.uniform(w / 10, w / 3)
        if rng.random() < 0.5:
            mask = ((yy - cy) / ry) ** 2 + ((xx - cx) / rx) ** 2 <= 1.0
        else:
            mask = (np.abs(yy - cy) <= ry) & (np.abs(xx - cx) <= rx)
        labels[mask] = cls
        depth[mask] = obj_depth

    shading = 0.35 + 0.65 * (d_max - depth) / (d_max - d_min)
    colors = np.stack([_class_color(s) for s in range(config.num_classes)])
    image = colors[labels] * shading[:, :, None]
    image += rng.normal(0.0, 0.01, image.shape)
    image = np.clip(image, 0.0, 1.0)

    valid = rng.random((h, w)) < config.gt_sparsity
    if not valid.any():
        valid[h // 2, w // 2] = True

    if frame_id is None:
        frame_id = f"synth_{config.seed:016x}"
    return FrameRecord(
        frame_id=frame_id,
        image=ImageTensor(image),
        seg_gt=SegMap(labels, config.num_classes),
        depth_gt=SparseDepthMap(depth, valid),
    )


# Depth corruption constants: corrupted pixels get multiplicative lognormal
# noise with sigma DEPTH_NOISE_SIGMA; DEPTH_FAIL_PROB is the chance such a
# pixel violates the 1.25 accuracy ratio, so corrupting a fraction
# (1 - target) / DEPTH_FAIL_PROB of pixels yields an expected ACC of target.
DEPTH_NOISE_SIGMA = 1.0
DEPTH_FAIL_PROB = 2.0 * (1.0 - 0.5 * (1.0 + math.erf(math.log(1.25) / math.sqrt(2.0))))


def _flip_labels(rng, labels, num_classes: int, rate: float):
    """Flip each label to a random wrong class with probability rate."""
    flip = rng.random(labels.shape) < rate
    offsets = rng.integers(1, num_classes, size=labels.shape)
    return SegMap(np.where(flip, (labels + offsets) % num_classes, labels), num_classes)


def _generic_quality(rate: float) -> float:
    """Typical mIoU response to a uniform label-flip rate (hyperbolic fit)."""
    return (1.0 - rate) / (1.0 + 3.0 * rate)


def degrade_outputs(frame: FrameRecord, eps: float, deg: DegradationConfig, seed: int):
    """Produce (seg_pred, depth_pred) whose quality degrades with eps.

    Labels flip to a random wrong class with rate
    min(1, seg_clean_noise * u + seg_sensitivity * eps * z_seg). Depth is
    corrupted towards a target accuracy: a fraction of pixels gets strong
    multiplicative lognormal noise so the expected accuracy matches a
    quality target. With weight `coupling` that target tracks the mIoU of a
    reference flip at shared severity (so both metrics degrade together,
    including per-frame difficulty); the remaining weight uses a generic
    response at an independent severity, which decorrelates the two tasks.
    """
    if frame.seg_gt is None or frame.depth_gt is None:
        raise ValueError(f"frame {frame.frame_id} lacks seg_gt or depth_gt")
    # deferred import: metrics builds on frameio types only
    from .metrics import confusion_counts, miou_image

    rng = np.random.default_rng(derive_seed(seed, frame.frame_id, repr(eps)))
    z_shared = rng.gamma(4.0, 0.25)
    z_seg = rng.gamma(4.0, 0.25)
    z_depth = rng.gamma(4.0, 0.25)
    u_seg = rng.gamma(4.0, 0.25)
    u_depth = rng.gamma(4.0, 0.25)

    labels = frame.seg_gt.labels
    num_classes = frame.seg_gt.num_classes
    h, w = labels.shape

    seg_severity = deg.coupling * z_shared + (1.0 - deg.coupling) * z_seg
    flip_rate = min(1.0, deg.seg_clean_noise * u_seg + deg.seg_sensitivity * eps * seg_severity)
    seg_pred = _flip_labels(rng, labels, num_classes, flip_rate)

    matched_rate = min(1.0, deg.depth_sensitivity * eps * z_shared)
    if matched_rate > 0.0:
        reference = _flip_labels(rng, labels, num_classes, matched_rate)
        matched_target = miou_image(confusion_counts(reference, frame.seg_gt))
    else:
        rng.random((h, w))  # keep the stream position independent of the rate
        rng.integers(1, num_classes, size=(h, w))
        matched_target = 1.0
    independent_target = _generic_quality(min(1.0, deg.depth_sensitivity * eps * z_depth))
    target = deg.coupling * matched_target + (1.0 - deg.coupling) * independent_target
    target = max(0.0, min(1.0, target - deg.depth_clean_noise * u_depth))

    corrupt_frac = min(1.0, (1.0 - target) / DEPTH_FAIL_PROB)
    corrupt = rng.random((h, w)) < corrupt_frac
    noise = np.where(corrupt, np.exp(rng.normal(0.0, DEPTH_NOISE_SIGMA, (h, w))), 1.0)
    depth_pred = DepthMap(np.clip(frame.depth_gt.depth * noise, DEPTH_MIN, DEPTH_MAX))
    return seg_pred, depth_pred
