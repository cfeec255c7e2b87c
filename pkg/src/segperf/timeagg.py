"""Temporal aggregation of per-frame performance and decision latency.

Actual and predicted per-frame metrics are averaged over a centered window
of delta_n frames subsampled every k frames, which trades a decision
latency of (delta_n - 1)/2 * k / f seconds for a lower prediction error.
"""
from __future__ import annotations

from collections.abc import Mapping
from dataclasses import dataclass

import numpy as np

from .metrics import ErrorSummary, confusion_counts, error_summary, miou_image


class CoverageError(ValueError):
    """A window refers to frames that are not available."""


@dataclass(frozen=True)
class AggregationConfig:
    delta_n: int  # window size, odd
    k: int = 100  # subsampling factor in frames
    f: float = 10.0  # camera frame rate in 1/s

    def __post_init__(self):
        if self.delta_n < 1 or self.delta_n % 2 == 0:
            raise ValueError("delta_n must be an odd positive integer")
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.f <= 0:
            raise ValueError("frame rate must be > 0")


def window_indices(config: AggregationConfig, n: int) -> np.ndarray:
    """Frame indices {n - k*(delta_n-1)/2, ..., n, ..., n + k*(delta_n-1)/2}."""
    half = (config.delta_n - 1) // 2
    return n + config.k * np.arange(-half, half + 1)


def aggregate_window(values, indices) -> float:
    """Arithmetic mean of the per-frame values at the given indices."""
    picked = []
    for i in indices:
        i = int(i)
        if isinstance(values, Mapping):
            if i not in values:
                raise CoverageError(f"no value for frame {i}")
            picked.append(values[i])
        else:
            if i < 0 or i >= len(values):
                raise CoverageError(f"frame {i} outside series of length {len(values)}")
            picked.append(values[i])
    return float(np.mean(picked))


def decision_latency(config: AggregationConfig) -> float:
    """Latency in seconds of centered windowing: (delta_n - 1)/2 * k/f."""
    return (config.delta_n - 1) / 2.0 * config.k / config.f


def aggregated_series(actual, predicted, config: AggregationConfig, mode: str = "sequence", seed: int = 0):
    """Window-average both series; returns flattened (agg_actual, agg_pred).

    Inputs are (num_frames,) or (num_frames, num_eps) arrays on the same grid.
    mode "sequence" uses true frame indices and drops centers whose window
    leaves the series; mode "random" draws delta_n - 1 distinct other frames
    per center (for unordered test sets), seeded for reproducibility.
    """
    actual = np.asarray(actual, dtype=np.float64)
    predicted = np.asarray(predicted, dtype=np.float64)
    if actual.shape != predicted.shape:
        raise ValueError(f"series shapes differ: {actual.shape} vs {predicted.shape}")
    if actual.ndim == 1:
        actual = actual[:, None]
        predicted = predicted[:, None]
    num_frames = actual.shape[0]
    agg_a, agg_p = [], []
    if mode == "sequence":
        for n in range(num_frames):
            idx = window_indices(config, n)
            if idx[0] < 0 or idx[-1] >= num_frames:
                continue
            agg_a.append(actual[idx].mean(axis=0))
            agg_p.append(predicted[idx].mean(axis=0))
        if not agg_a:
            raise CoverageError(f"no complete window of delta_n={config.delta_n}, k={config.k} "
                                f"fits a series of {num_frames} frames")
    elif mode == "random":
        if config.delta_n > num_frames:
            raise CoverageError(f"delta_n={config.delta_n} exceeds {num_frames} available frames")
        rng = np.random.default_rng(seed)
        for n in range(num_frames):
            others = np.delete(np.arange(num_frames), n)
            extra = rng.choice(others, size=config.delta_n - 1, replace=False)
            idx = np.concatenate(([n], extra))
            agg_a.append(actual[idx].mean(axis=0))
            agg_p.append(predicted[idx].mean(axis=0))
    else:
        raise ValueError(f"unknown aggregation mode {mode!r}")
    return np.ravel(agg_a), np.ravel(agg_p)


def evaluate_aggregated(actual, predicted, config: AggregationConfig,
                        mode: str = "sequence", seed: int = 0) -> ErrorSummary:
    """MAE/RMSE/correlation of the window-averaged prediction error."""
    agg_a, agg_p = aggregated_series(actual, predicted, config, mode=mode, seed=seed)
    return error_summary(agg_p, agg_a)


def pairwise_miou_curve(seg_maps, k_values):
    """Mean mIoU between map pairs (i, i + K) for each K, plus all-pairs baseline.

    Returns (curve, baseline) where curve maps K to the mean pairwise mIoU and
    baseline is the mean over all unordered pairs (the dataset reference line).
    """
    seg_maps = list(seg_maps)
    if len(seg_maps) < 2:
        raise ValueError("need at least 2 segmentation maps")
    n = len(seg_maps)

    def pair_miou(i, j):
        return miou_image(confusion_counts(seg_maps[i], seg_maps[j]))

    curve = {}
    for k in k_values:
        k = int(k)
        if k < 1 or k >= n:
            raise CoverageError(f"K={k} out of range for {n} maps")
        curve[k] = float(np.mean([pair_miou(i, i + k) for i in range(n - k)]))
    baseline = float(np.mean([pair_miou(i, j) for i in range(n) for j in range(i + 1, n)]))
    return curve, baseline
