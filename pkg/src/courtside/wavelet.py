"""Haar approximation bands and LL-difference motion maps."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptyInput, IndexGap, ShapeMismatch

MOTION_EPS = 1e-8


@dataclass(frozen=True)
class WaveletApprox:
    ll: np.ndarray
    level: int
    source_index: int = 0


@dataclass(frozen=True)
class MotionMap:
    d: np.ndarray
    pair: tuple


def _halve(a: np.ndarray) -> np.ndarray:
    # edge replication for odd sizes, then 2x2 block means
    h, w = a.shape
    if h % 2:
        a = np.concatenate([a, a[-1:, :]], axis=0)
    if w % 2:
        a = np.concatenate([a, a[:, -1:]], axis=1)
    return 0.25 * (a[0::2, 0::2] + a[0::2, 1::2] + a[1::2, 0::2] + a[1::2, 1::2])


def haar_ll(gray, level: int = 2, source_index: int = 0) -> WaveletApprox:
    """LL band of a ``level``-deep Haar decomposition, averaging normalization.

    Each level replaces 2x2 blocks by their mean, so a constant image keeps its
    value and the output is ceil(H / 2**level) x ceil(W / 2**level).
    """
    a = np.asarray(gray, dtype=np.float64)
    if a.size == 0:
        raise EmptyInput("empty image")
    if a.ndim != 2:
        raise ValueError(f"expected a 2-D array, got shape {a.shape}")
    if level < 1:
        raise ValueError("level must be positive")
    for _ in range(level):
        a = _halve(a)
    return WaveletApprox(a, level, source_index)


def motion_map_unchecked(prev: WaveletApprox, next_: WaveletApprox) -> MotionMap:
    if prev.ll.shape != next_.ll.shape or prev.level != next_.level:
        raise ShapeMismatch(
            f"LL shapes/levels differ: {prev.ll.shape}@{prev.level} vs "
            f"{next_.ll.shape}@{next_.level}"
        )
    return MotionMap(next_.ll - prev.ll, (prev.source_index, next_.source_index))


def motion_map(prev: WaveletApprox, next_: WaveletApprox) -> MotionMap:
    """Signed LL difference ``next - prev`` for adjacent sampled frames.

    ``source_index`` here is the position in the sampled sequence, so strided
    sequences still count as adjacent.
    """
    if next_.source_index != prev.source_index + 1:
        raise IndexGap(
            f"frames {prev.source_index} and {next_.source_index} are not consecutive"
        )
    return motion_map_unchecked(prev, next_)


def motion_to_3channel(m) -> np.ndarray:
    """Map a signed motion map to a mid-gray centred uint8 image (H', W', 3).

    v -> clamp(rint(128 + 127.5 * v / max(max|v|, 1e-8)), 0, 255), where rint
    rounds half to even.
    """
    d = m.d if isinstance(m, MotionMap) else np.asarray(m, dtype=np.float64)
    peak = max(float(np.max(np.abs(d))) if d.size else 0.0, MOTION_EPS)
    v = np.clip(np.rint(128.0 + 127.5 * d / peak), 0, 255).astype(np.uint8)
    return np.repeat(v[:, :, None], 3, axis=2)


def sequence_motion_images(grays, level: int = 2) -> list[np.ndarray]:
    """3-channel motion images for every adjacent pair of a gray frame list."""
    approx = [haar_ll(g, level, i) for i, g in enumerate(grays)]
    return [motion_to_3channel(motion_map(a, b)) for a, b in zip(approx, approx[1:])]
