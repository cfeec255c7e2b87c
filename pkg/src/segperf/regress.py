"""Second-order polynomial regression from depth accuracy to predicted mIoU."""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

DEGREE_SET = (0, 1, 2)


class DegenerateFitError(ValueError):
    """Design matrix is rank deficient (fewer than 3 distinct ACC values)."""


@dataclass(frozen=True)
class RegressionModel:
    """Coefficients (theta0, theta1, theta2) of miou_hat = sum_k theta_k * acc^k."""

    theta: tuple
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        theta = tuple(float(t) for t in self.theta)
        if len(theta) != len(DEGREE_SET) or not all(np.isfinite(theta)):
            raise ValueError(f"expected {len(DEGREE_SET)} finite coefficients, got {self.theta}")
        object.__setattr__(self, "theta", theta)


def fit_quadratic(samples) -> RegressionModel:
    """Least-squares fit of mIoU against {1, ACC, ACC^2} over all samples.

    Uses an orthogonal-factorization solver (SVD via lstsq) since ACC values
    clustering near 1 make the Vandermonde system ill-conditioned.
    """
    samples = list(samples)
    acc = np.array([s.acc for s in samples], dtype=np.float64)
    miou = np.array([s.miou for s in samples], dtype=np.float64)
    if len(samples) < 3 or len(np.unique(acc)) < 3:
        raise DegenerateFitError("need >= 3 samples with >= 3 distinct ACC values")
    design = np.vander(acc, N=len(DEGREE_SET), increasing=True)
    theta, _, rank, _ = np.linalg.lstsq(design, miou, rcond=None)
    if rank < len(DEGREE_SET):
        raise DegenerateFitError("rank-deficient design matrix")
    meta = {
        "num_samples": len(samples),
        "perturbations": sorted({s.perturbation for s in samples}),
        "eps_255": sorted({round(s.epsilon * 255.0, 6) for s in samples}),
    }
    return RegressionModel(theta=tuple(theta), meta=meta)


def predict_miou(model: RegressionModel, acc: float) -> float:
    """Evaluate the polynomial at acc and clamp into [0, 1]."""
    value = sum(t * acc ** k for k, t in zip(DEGREE_SET, model.theta))
    return float(min(1.0, max(0.0, value)))


def save_model(model: RegressionModel, path) -> None:
    with open(path, "w") as f:
        json.dump({"theta": list(model.theta), "k_set": list(DEGREE_SET), "meta": model.meta}, f, indent=2)
        f.write("\n")


def load_model(path) -> RegressionModel:
    with open(path) as f:
        obj = json.load(f)
    if obj.get("k_set") != list(DEGREE_SET):
        raise ValueError(f"unsupported degree set {obj.get('k_set')}")
    return RegressionModel(theta=tuple(obj["theta"]), meta=obj.get("meta", {}))
