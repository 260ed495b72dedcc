"""Appearance/motion feature extraction and fusion.

The pipeline does not ship a CNN. :class:`BuiltinDescriptor` is a small
hand-built grid descriptor for hermetic runs; :class:`PrecomputedBackbone`
serves rows from a feature file so features from any external network
(e.g. a VGG-16 layer) can be plugged in.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import BackboneError, EmptyInput, ParseError, ShapeMismatch

APPEARANCE = "appearance"
MOTION = "motion"


def _cell_edges(n, g):
    return [(i * n) // g for i in range(g + 1)]


def builtin_descriptor(image, grid: int = 4) -> np.ndarray:
    """Grid descriptor of length 4 * grid * grid.

    Intensity is the channel mean scaled to [0, 1]. For each cell, in raster
    order, four values are emitted: mean intensity, intensity standard
    deviation, mean |horizontal gradient| and mean |vertical gradient|.
    Gradients are forward differences assigned to the left/upper pixel, with
    the last column/row set to zero.
    """
    img = np.asarray(image, dtype=np.float64)
    if img.ndim == 2:
        intensity = img / 255.0
    else:
        intensity = img.mean(axis=2) / 255.0
    if intensity.size == 0:
        raise EmptyInput("empty image")
    h, w = intensity.shape
    gx = np.zeros_like(intensity)
    gy = np.zeros_like(intensity)
    gx[:, :-1] = np.abs(np.diff(intensity, axis=1))
    gy[:-1, :] = np.abs(np.diff(intensity, axis=0))
    ys = _cell_edges(h, grid)
    xs = _cell_edges(w, grid)
    out = np.zeros(4 * grid * grid)
    k = 0
    for r in range(grid):
        for c in range(grid):
            sl = (slice(ys[r], ys[r + 1]), slice(xs[c], xs[c + 1]))
            cell = intensity[sl]
            if cell.size:
                out[k] = cell.mean()
                out[k + 1] = cell.std()
                out[k + 2] = gx[sl].mean()
                out[k + 3] = gy[sl].mean()
            k += 4
    return out


class FeatureBackbone:
    """Maps an image (and its frame key) to a fixed-length vector."""

    name = "backbone"
    kind = "builtin-descriptor"
    output_dim = 0

    def extract(self, image, key=None) -> np.ndarray:
        raise NotImplementedError


class BuiltinDescriptor(FeatureBackbone):
    kind = "builtin-descriptor"

    def __init__(self, grid: int = 4):
        self.grid = grid
        self.name = f"builtin-grid{grid}"
        self.output_dim = 4 * grid * grid

    def extract(self, image, key=None):
        return builtin_descriptor(image, self.grid)


class PrecomputedBackbone(FeatureBackbone):
    """Row lookup in an ``n x d`` table; ``key`` is the row number.

    Appearance lookups use the source frame index. For motion tables, row ``r``
    holds features of the motion that arrives at frame ``r`` and row 0 holds the
    zero-motion features.
    """

    kind = "precomputed-file"

    def __init__(self, table, name="precomputed"):
        table = np.asarray(table, dtype=np.float64)
        if table.ndim != 2:
            raise ValueError("feature table must be 2-D")
        self.table = table
        self.name = name
        self.output_dim = table.shape[1]

    @classmethod
    def from_file(cls, path):
        return cls(read_feature_file(path), name=f"precomputed:{Path(path).name}")

    def extract(self, image, key=None):
        if key is None or not 0 <= key < len(self.table):
            raise BackboneError(key, f"no precomputed row (table has {len(self.table)})")
        return self.table[key].copy()


def read_feature_file(path) -> np.ndarray:
    """Read an ``n d`` feature table, text or little-endian float32 payload."""
    data = Path(path).read_bytes()
    nl = data.find(b"\n")
    if nl < 0:
        raise ParseError(f"{path}: missing 'n d' header", line=1)
    try:
        n, d = (int(x) for x in data[:nl].decode("ascii").split())
    except (UnicodeDecodeError, ValueError) as exc:
        raise ParseError(f"{path}: malformed 'n d' header", line=1) from exc
    body = data[nl + 1:]
    try:
        values = np.array(body.decode("ascii").split(), dtype=np.float64)
        if values.size == n * d:
            return values.reshape(n, d)
    except (UnicodeDecodeError, ValueError):
        pass
    if len(body) == 4 * n * d:
        return np.frombuffer(body, dtype="<f4").astype(np.float64).reshape(n, d)
    raise ParseError(f"{path}: payload does not hold {n}x{d} values")


def write_feature_file(path, table, binary: bool = False) -> None:
    table = np.asarray(table, dtype=np.float64)
    n, d = table.shape
    header = f"{n} {d}\n".encode("ascii")
    if binary:
        Path(path).write_bytes(header + table.astype("<f4").tobytes())
    else:
        lines = [" ".join(repr(float(v)) for v in row) for row in table]
        Path(path).write_bytes(header + ("\n".join(lines) + "\n").encode("ascii"))


@dataclass(frozen=True)
class FeatureMatrix:
    rows: np.ndarray
    frame_indices: tuple
    path: str

    def __post_init__(self):
        if self.rows.ndim != 2 or self.rows.shape[0] != len(self.frame_indices):
            raise ShapeMismatch("rows and frame_indices disagree")
        if not np.all(np.isfinite(self.rows)):
            raise ValueError(f"{self.path} features contain NaN or Inf")


@dataclass(frozen=True)
class FusedFeatureMatrix:
    rows: np.ndarray
    frame_indices: tuple
    appearance_dim: int

    @property
    def motion_dim(self):
        return self.rows.shape[1] - self.appearance_dim

    def split(self):
        return self.rows[:, : self.appearance_dim], self.rows[:, self.appearance_dim:]


def _run(backbone, image, key, frame_index):
    try:
        v = np.asarray(backbone.extract(image, key), dtype=np.float64).ravel()
    except BackboneError:
        raise
    except Exception as exc:
        raise BackboneError(frame_index, str(exc)) from exc
    if backbone.output_dim and v.size != backbone.output_dim:
        raise BackboneError(frame_index, f"got {v.size} values, expected {backbone.output_dim}")
    return v


def extract_appearance(seq, backbone: FeatureBackbone) -> FeatureMatrix:
    if len(seq) == 0:
        raise EmptyInput("no frames")
    rows = [_run(backbone, f.rgb, f.index, f.index) for f in seq]
    return FeatureMatrix(np.vstack(rows), tuple(f.index for f in seq), APPEARANCE)


def extract_motion(motion_images: Sequence[np.ndarray], backbone: FeatureBackbone,
                   frame_indices=None) -> FeatureMatrix:
    """One row per motion image. ``frame_indices[i]`` names the frame image ``i`` arrives at."""
    if len(motion_images) == 0:
        raise EmptyInput("no motion images")
    if frame_indices is None:
        frame_indices = range(1, len(motion_images) + 1)
    frame_indices = tuple(frame_indices)
    rows = [_run(backbone, img, key, key) for img, key in zip(motion_images, frame_indices)]
    return FeatureMatrix(np.vstack(rows), frame_indices, MOTION)


def zero_motion_image(shape) -> np.ndarray:
    return np.full(tuple(shape[:2]) + (3,), 128, dtype=np.uint8)


def align_paths(fa: FeatureMatrix, fm: FeatureMatrix, zero_motion_row=None):
    """Align motion rows (one per frame pair) with appearance rows.

    Motion row ``i`` belongs to the later frame of its pair. With
    ``zero_motion_row`` given, the first frame receives it and every frame is
    kept; otherwise the first appearance row is dropped.
    """
    if fm.rows.shape[0] != fa.rows.shape[0] - 1:
        raise ShapeMismatch(
            f"expected {fa.rows.shape[0] - 1} motion rows, got {fm.rows.shape[0]}"
        )
    if zero_motion_row is None:
        fa2 = FeatureMatrix(fa.rows[1:], fa.frame_indices[1:], APPEARANCE)
        fm2 = FeatureMatrix(fm.rows, fa.frame_indices[1:], MOTION)
        return fa2, fm2
    z = np.asarray(zero_motion_row, dtype=np.float64).reshape(1, -1)
    fm2 = FeatureMatrix(np.vstack([z, fm.rows]) if fm.rows.size else z,
                        fa.frame_indices, MOTION)
    return fa, fm2


def fuse(fa: FeatureMatrix, fm: FeatureMatrix) -> FusedFeatureMatrix:
    if fa.path != APPEARANCE or fm.path != MOTION:
        raise ShapeMismatch(f"expected appearance+motion, got {fa.path}+{fm.path}")
    if fa.rows.shape[0] != fm.rows.shape[0]:
        raise ShapeMismatch(
            f"row counts differ: {fa.rows.shape[0]} appearance vs {fm.rows.shape[0]} motion"
        )
    return FusedFeatureMatrix(np.hstack([fa.rows, fm.rows]), fa.frame_indices,
                              fa.rows.shape[1])


def zscore_columns(x) -> np.ndarray:
    """Column z-scores (population sd); zero-variance columns become 0."""
    x = np.asarray(x, dtype=np.float64)
    mu = x.mean(axis=0)
    sd = x.std(axis=0)
    out = np.zeros_like(x)
    ok = sd > 1e-12 * np.maximum(1.0, np.abs(mu))
    out[:, ok] = (x[:, ok] - mu[ok]) / sd[ok]
    return out


def robust_scale_columns(x) -> np.ndarray:
    """Centre columns on the median and divide by the interquartile range.

    Columns with zero IQR become 0. Unlike z-scores, a handful of extreme
    rows (scene cuts in the motion path) cannot inflate a column's weight.
    """
    x = np.asarray(x, dtype=np.float64)
    med = np.median(x, axis=0)
    q75, q25 = np.percentile(x, [75, 25], axis=0)
    iqr = q75 - q25
    out = np.zeros_like(x)
    ok = iqr > 1e-12 * np.maximum(1.0, np.abs(med))
    out[:, ok] = (x[:, ok] - med[ok]) / iqr[ok]
    return out


SCALERS = {
    "robust": robust_scale_columns,
    "zscore": zscore_columns,
    "none": lambda x: np.array(x, dtype=np.float64),
}
