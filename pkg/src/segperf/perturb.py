"""Strength-normalized input perturbations applied with clipping.

Strength epsilon is the RMS amplitude of the perturbation in gray-value
units (1/255 steps expressed on the [0, 1] scale), identical across
perturbation kinds so different kinds are comparable at equal epsilon.

All randomness goes through numpy's PCG64 (np.random.default_rng), which is
stable across platforms for a fixed seed.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from .frameio import ImageTensor, ShapeError

PERTURBATION_KINDS = ("gaussian", "salt_pepper")

# Paper-style default strength sweep, in 1/255 gray-value units.
DEFAULT_EPS_255 = (0.25, 0.5, 1, 2, 4, 8, 12, 16, 20, 24, 28, 32)


@dataclass(frozen=True)
class PerturbationSpec:
    kind: str
    epsilon: float  # RMS strength in units of 1/255 on the [0, 1] scale
    seed: int

    def __post_init__(self):
        if self.kind not in PERTURBATION_KINDS:
            raise ValueError(f"unknown perturbation kind {self.kind!r}")
        if self.epsilon < 0:
            raise ValueError("epsilon must be >= 0")


def derive_seed(seed: int, *tokens) -> int:
    """Stable per-item seed: mixes a global seed with string tokens."""
    h = hashlib.blake2b(digest_size=8)
    h.update(str(seed).encode())
    for t in tokens:
        h.update(b"\x00" + str(t).encode())
    return int.from_bytes(h.digest(), "little")


def generate_perturbation(spec: PerturbationSpec, height: int, width: int, channels: int) -> np.ndarray:
    """Generate a perturbation tensor in [-1, 1] with RMS amplitude epsilon.

    gaussian: i.i.d. zero-mean normals rescaled so the empirical RMS equals
    epsilon exactly.
    salt_pepper: a fraction eps^2 of pixels gets -1 or +1 (equal probability);
    after clipped addition the pixel saturates to exactly 0 or 1, and the
    expected RMS of the tensor equals epsilon.
    """
    if height <= 0 or width <= 0 or channels <= 0:
        raise ValueError("dimensions must be positive")
    shape = (height, width, channels)
    if spec.epsilon == 0.0:
        return np.zeros(shape)
    rng = np.random.default_rng(spec.seed)
    if spec.kind == "gaussian":
        r = rng.standard_normal(shape)
        rms = np.sqrt((r ** 2).mean())
        r = r * (spec.epsilon / rms)
        return np.clip(r, -1.0, 1.0)
    # salt_pepper: flip whole pixels, same sign across channels
    flip = rng.random((height, width)) < spec.epsilon ** 2
    sign = np.where(rng.random((height, width)) < 0.5, -1.0, 1.0)
    r = np.where(flip, sign, 0.0)
    return np.repeat(r[:, :, None], channels, axis=2)


def apply_perturbation(image: ImageTensor, perturbation: np.ndarray) -> ImageTensor:
    """x_eps = clip(x + r, 0, 1)."""
    if perturbation.shape != image.data.shape:
        raise ShapeError(f"perturbation {perturbation.shape} vs image {image.data.shape}")
    return ImageTensor(np.clip(image.data + perturbation, 0.0, 1.0))


def perturb_image(image: ImageTensor, spec: PerturbationSpec) -> ImageTensor:
    """Convenience: generate for this image's shape and apply with clipping."""
    r = generate_perturbation(spec, image.height, image.width, image.channels)
    return apply_perturbation(image, r)
