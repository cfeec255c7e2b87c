"""Core image/label data types and KITTI-convention PNG I/O.

Conventions:
  - images: 8-bit PNG, value v maps to gray value v/255 in [0, 1]
  - segmentation maps: 8-bit single-channel PNG, pixel value = class index,
    255 reserved as the IGNORE sentinel
  - depth maps: 16-bit single-channel PNG, raw value = meters * 256,
    raw 0 marks a pixel without ground truth
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

IGNORE_LABEL = 255
DEPTH_MIN = 0.1
DEPTH_MAX = 100.0
DEPTH_PNG_SCALE = 256.0


class FormatError(ValueError):
    """File content does not match the expected raster format."""


class LabelRangeError(ValueError):
    """Segmentation label outside {0..num_classes-1} u {IGNORE}."""


class RangeError(ValueError):
    """Value outside the representable range of the target format."""


class ShapeError(ValueError):
    """Mismatched array dimensions between related inputs."""


@dataclass(frozen=True)
class ImageTensor:
    """Normalized image with values in [0, 1], shape (H, W, C), C in {1, 3}."""

    data: np.ndarray

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim == 2:
            data = data[:, :, None]
        if data.ndim != 3 or data.shape[2] not in (1, 3):
            raise FormatError(f"expected (H, W, C) with C in {{1, 3}}, got shape {data.shape}")
        if data.size and (data.min() < 0.0 or data.max() > 1.0):
            raise RangeError("image values must lie in [0, 1]")
        object.__setattr__(self, "data", data)

    @property
    def height(self):
        return self.data.shape[0]

    @property
    def width(self):
        return self.data.shape[1]

    @property
    def channels(self):
        return self.data.shape[2]


@dataclass(frozen=True)
class SegMap:
    """Per-pixel class labels in {0..num_classes-1} u {IGNORE_LABEL}."""

    labels: np.ndarray
    num_classes: int

    def __post_init__(self):
        labels = np.asarray(self.labels)
        if labels.ndim != 2:
            raise FormatError(f"expected (H, W) labels, got shape {labels.shape}")
        if not np.issubdtype(labels.dtype, np.integer):
            raise FormatError("labels must be integers")
        if self.num_classes < 1 or self.num_classes > IGNORE_LABEL:
            raise ValueError(f"num_classes must be in [1, {IGNORE_LABEL}]")
        bad = (labels >= self.num_classes) & (labels != IGNORE_LABEL)
        bad |= labels < 0
        if bad.any():
            y, x = np.argwhere(bad)[0]
            raise LabelRangeError(
                f"label {labels[y, x]} at pixel ({y}, {x}) invalid for num_classes={self.num_classes}"
            )
        object.__setattr__(self, "labels", labels.astype(np.int64))

    @property
    def height(self):
        return self.labels.shape[0]

    @property
    def width(self):
        return self.labels.shape[1]


@dataclass(frozen=True)
class ProbMap:
    """Per-pixel class probability vectors, shape (H, W, num_classes)."""

    probs: np.ndarray

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=np.float64)
        if probs.ndim != 3:
            raise FormatError(f"expected (H, W, S) probabilities, got shape {probs.shape}")
        if probs.size and (probs.min() < 0.0 or probs.max() > 1.0):
            raise RangeError("probabilities must lie in [0, 1]")
        sums = probs.sum(axis=2)
        if probs.size and np.abs(sums - 1.0).max() > 1e-6:
            raise ValueError("per-pixel probabilities must sum to 1 within 1e-6")
        object.__setattr__(self, "probs", probs)

    @property
    def height(self):
        return self.probs.shape[0]

    @property
    def width(self):
        return self.probs.shape[1]

    @property
    def num_classes(self):
        return self.probs.shape[2]


@dataclass(frozen=True)
class DepthMap:
    """Dense metric depth, every value in [d_min, d_max]."""

    depth: np.ndarray
    d_min: float = DEPTH_MIN
    d_max: float = DEPTH_MAX

    def __post_init__(self):
        depth = np.asarray(self.depth, dtype=np.float64)
        if depth.ndim != 2:
            raise FormatError(f"expected (H, W) depth, got shape {depth.shape}")
        if depth.size and (depth.min() < self.d_min or depth.max() > self.d_max):
            raise RangeError(f"depth values must lie in [{self.d_min}, {self.d_max}]")
        object.__setattr__(self, "depth", depth)

    @property
    def height(self):
        return self.depth.shape[0]

    @property
    def width(self):
        return self.depth.shape[1]


@dataclass(frozen=True)
class SparseDepthMap:
    """Metric depth defined only where `valid` is true (LiDAR-style)."""

    depth: np.ndarray
    valid: np.ndarray

    def __post_init__(self):
        depth = np.asarray(self.depth, dtype=np.float64)
        valid = np.asarray(self.valid, dtype=bool)
        if depth.ndim != 2 or valid.shape != depth.shape:
            raise ShapeError(f"depth {depth.shape} and valid {valid.shape} must be equal (H, W)")
        if valid.any() and depth[valid].min() <= 0.0:
            raise RangeError("depth at valid pixels must be > 0")
        object.__setattr__(self, "depth", depth)
        object.__setattr__(self, "valid", valid)

    @property
    def height(self):
        return self.depth.shape[0]

    @property
    def width(self):
        return self.depth.shape[1]

    @property
    def num_valid(self):
        return int(self.valid.sum())


@dataclass(frozen=True)
class FrameRecord:
    """One frame with whichever inputs/outputs are available for it."""

    frame_id: str
    image: ImageTensor | None = None
    seg_gt: SegMap | None = None
    seg_pred: SegMap | None = None
    depth_pred: DepthMap | None = None
    depth_gt: SparseDepthMap | None = None

    def __post_init__(self):
        shapes = {
            name: (m.height, m.width)
            for name, m in [
                ("image", self.image),
                ("seg_gt", self.seg_gt),
                ("seg_pred", self.seg_pred),
                ("depth_pred", self.depth_pred),
                ("depth_gt", self.depth_gt),
            ]
            if m is not None
        }
        if len(set(shapes.values())) > 1:
            raise ShapeError(f"frame {self.frame_id}: members disagree on (H, W): {shapes}")


def load_image(path) -> ImageTensor:
    """Load an 8-bit single- or three-channel PNG as a normalized image."""
    img = Image.open(path)
    if img.mode not in ("L", "RGB"):
        raise FormatError(f"{path}: unsupported PNG mode {img.mode!r}, expected 8-bit L or RGB")
    arr = np.asarray(img, dtype=np.float64) / 255.0
    return ImageTensor(arr)


def save_image(image: ImageTensor, path) -> None:
    """Write an 8-bit PNG; values are rounded to the nearest 1/255 step."""
    raw = np.rint(image.data * 255.0).astype(np.uint8)
    if image.channels == 1:
        Image.fromarray(raw[:, :, 0], mode="L").save(path)
    else:
        Image.fromarray(raw, mode="RGB").save(path)


def load_seg_map(path, num_classes: int) -> SegMap:
    """Load an 8-bit single-channel PNG of class indices (255 = IGNORE)."""
    img = Image.open(path)
    if img.mode != "L":
        raise FormatError(f"{path}: unsupported PNG mode {img.mode!r}, expected 8-bit L")
    labels = np.asarray(img, dtype=np.int64)
    try:
        return SegMap(labels, num_classes)
    except LabelRangeError as e:
        raise LabelRangeError(f"{path}: {e}") from None


def save_seg_map(seg: SegMap, path) -> None:
    Image.fromarray(seg.labels.astype(np.uint8), mode="L").save(path)


def load_depth_map(path) -> SparseDepthMap:
    """Load a 16-bit depth PNG; raw value = meters * 256, 0 = no ground truth."""
    img = Image.open(path)
    if img.mode not in ("I", "I;16"):
        raise FormatError(f"{path}: unsupported PNG mode {img.mode!r}, expected 16-bit depth")
    raw = np.asarray(img, dtype=np.int64)
    valid = raw > 0
    depth = raw.astype(np.float64) / DEPTH_PNG_SCALE
    return SparseDepthMap(depth, valid)


def save_depth_map(depth: SparseDepthMap, path) -> None:
    """Write a 16-bit depth PNG (meters * 256); invalid pixels store 0."""
    raw = np.rint(depth.depth * DEPTH_PNG_SCALE).astype(np.int64)
    raw[~depth.valid] = 0
    if raw.max(initial=0) > 65535:
        raise RangeError(f"depth {raw.max() / DEPTH_PNG_SCALE} m exceeds 16-bit raw range")
    if depth.valid.any() and raw[depth.valid].min() == 0:
        raise RangeError("valid depth rounds to raw 0 and would be lost")
    Image.fromarray(raw.astype(np.uint16)).save(path)


def read_manifest(path) -> list[dict]:
    """Read a JSON Lines manifest, one frame entry per line."""
    rows = []
    with open(path) as f:
        for line in f:
            line = line.strip()
            if line:
                rows.append(json.loads(line))
    return rows


def write_manifest(path, rows) -> None:
    with open(path, "w") as f:
        for row in rows:
            f.write(json.dumps(row) + "\n")


def load_frame(row: dict, root, num_classes: int) -> FrameRecord:
    """Materialize a FrameRecord from a manifest row; paths are relative to root."""
    root = Path(root)

    def p(key):
        return root / row[key] if row.get(key) else None

    return FrameRecord(
        frame_id=row["frame_id"],
        image=load_image(p("image")) if row.get("image") else None,
        seg_gt=load_seg_map(p("seg_gt"), num_classes) if row.get("seg_gt") else None,
        seg_pred=load_seg_map(p("seg_pred"), num_classes) if row.get("seg_pred") else None,
        depth_pred=_load_dense_depth(p("depth_pred")) if row.get("depth_pred") else None,
        depth_gt=load_depth_map(p("depth_gt")) if row.get("depth_gt") else None,
    )


def _load_dense_depth(path) -> DepthMap:
    sparse = load_depth_map(path)
    if not sparse.valid.all():
        raise FormatError(f"{path}: predicted depth must be dense (no zero pixels)")
    return DepthMap(np.clip(sparse.depth, DEPTH_MIN, DEPTH_MAX))
