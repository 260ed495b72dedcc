"""Spatiotemporal token grid and multi-block mask sampling.

Block sampling, per block and in this draw order (all from :class:`PortableRNG`):

1. spatial scale ``s ~ U[spatial_lo, spatial_hi]``
2. aspect ratio ``r ~ U[aspect_lo, aspect_hi]``
3. temporal scale ``tau ~ U[temporal_lo, temporal_hi]``
4. ``t0``, ``h0``, ``w0`` uniform over valid start positions (``randbelow``)

With ``A = s * h_tokens * w_tokens`` the block is
``bh = clamp(rint(sqrt(A * r)), 1, h_tokens)``,
``bw = clamp(rint(sqrt(A / r)), 1, w_tokens)`` and
``bt = clamp(rint(tau * t_tokens), 1, t_tokens)``; ``rint`` rounds half to even.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import InvalidGeometry
from .rng import PortableRNG, derive_seed


@dataclass(frozen=True)
class TokenGrid:
    t_tokens: int
    h_tokens: int
    w_tokens: int

    @property
    def total(self) -> int:
        return self.t_tokens * self.h_tokens * self.w_tokens

    @property
    def shape(self):
        return (self.t_tokens, self.h_tokens, self.w_tokens)


def token_grid(frames: int = 16, height: int = 256, width: int = 256,
               patch: int = 16, tubelet: int = 2) -> TokenGrid:
    if min(frames, height, width, patch, tubelet) < 1:
        raise InvalidGeometry("all geometry values must be positive")
    if frames % tubelet:
        raise InvalidGeometry(f"{frames} frames not divisible by tubelet {tubelet}")
    if height % patch or width % patch:
        raise InvalidGeometry(f"{height}x{width} not divisible by patch {patch}")
    return TokenGrid(frames // tubelet, height // patch, width // patch)


@dataclass(frozen=True)
class MaskConfig:
    num_blocks: int
    spatial_scale: tuple = (0.15, 0.15)
    temporal_scale: tuple = (1.0, 1.0)
    aspect_ratio: tuple = (0.75, 1.5)

    def __post_init__(self):
        if self.num_blocks < 0:
            raise InvalidGeometry("num_blocks must be >= 0")
        for name in ("spatial_scale", "temporal_scale"):
            lo, hi = getattr(self, name)
            if not 0 < lo <= hi <= 1:
                raise InvalidGeometry(f"{name} must satisfy 0 < lo <= hi <= 1, got {(lo, hi)}")
        lo, hi = self.aspect_ratio
        if not 0 < lo <= hi:
            raise InvalidGeometry(f"aspect_ratio must satisfy 0 < lo <= hi, got {(lo, hi)}")

    def to_dict(self):
        d = asdict(self)
        return {k: list(v) if isinstance(v, tuple) else v for k, v in d.items()}


# short-range and long-range configurations used for pretraining
SHORT_RANGE = MaskConfig(8, (0.15, 0.15), (1.0, 1.0), (0.75, 1.5))
LONG_RANGE = MaskConfig(2, (0.7, 0.7), (1.0, 1.0), (0.75, 1.5))
DEFAULT_CONFIGS = (SHORT_RANGE, LONG_RANGE)


def block_shape(grid: TokenGrid, s: float, r: float, tau: float):
    area = s * grid.h_tokens * grid.w_tokens
    bh = min(max(int(np.rint(math.sqrt(area * r))), 1), grid.h_tokens)
    bw = min(max(int(np.rint(math.sqrt(area / r))), 1), grid.w_tokens)
    bt = min(max(int(np.rint(tau * grid.t_tokens)), 1), grid.t_tokens)
    return bt, bh, bw


def sample_block(grid: TokenGrid, config: MaskConfig, rng: PortableRNG):
    """One block extent ``(t0, t1, h0, h1, w0, w1)``, half-open on every axis."""
    s = rng.uniform(*config.spatial_scale)
    r = rng.uniform(*config.aspect_ratio)
    tau = rng.uniform(*config.temporal_scale)
    bt, bh, bw = block_shape(grid, s, r, tau)
    t0 = rng.randbelow(grid.t_tokens - bt + 1)
    h0 = rng.randbelow(grid.h_tokens - bh + 1)
    w0 = rng.randbelow(grid.w_tokens - bw + 1)
    return (t0, t0 + bt, h0, h0 + bh, w0, w0 + bw)


@dataclass
class MaskSet:
    grid: TokenGrid
    masked: np.ndarray
    blocks: list = field(default_factory=list)
    configs: list = field(default_factory=list)
    seed: int = 0

    @classmethod
    def from_blocks(cls, grid, blocks, configs=(), seed=0):
        masked = np.zeros(grid.shape, dtype=bool)
        for t0, t1, h0, h1, w0, w1 in blocks:
            masked[t0:t1, h0:h1, w0:w1] = True
        return cls(grid, masked, list(blocks), list(configs), seed)

    def to_dict(self):
        return {
            "grid": list(self.grid.shape),
            "seed": self.seed,
            "configs": [c.to_dict() for c in self.configs],
            "blocks": [list(b) for b in self.blocks],
            "masked_rle": rle_encode(self.masked),
        }

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_dict(cls, d):
        grid = TokenGrid(*d["grid"])
        masked = rle_decode(d["masked_rle"], grid.shape)
        configs = [MaskConfig(c["num_blocks"], tuple(c["spatial_scale"]),
                              tuple(c["temporal_scale"]), tuple(c["aspect_ratio"]))
                   for c in d.get("configs", [])]
        return cls(grid, masked, [tuple(b) for b in d["blocks"]], configs, d["seed"])


def rle_encode(mask: np.ndarray) -> list:
    """Run lengths over the C-order flattening, starting with a run of False."""
    flat = np.asarray(mask, dtype=bool).ravel()
    runs = []
    current = False
    count = 0
    for v in flat:
        if bool(v) == current:
            count += 1
        else:
            runs.append(count)
            current = not current
            count = 1
    runs.append(count)
    return runs


def rle_decode(runs, shape) -> np.ndarray:
    flat = np.zeros(int(np.prod(shape)), dtype=bool)
    pos = 0
    value = False
    for n in runs:
        flat[pos:pos + n] = value
        pos += n
        value = not value
    if pos != flat.size:
        raise ValueError(f"RLE covers {pos} tokens, grid has {flat.size}")
    return flat.reshape(shape)


def generate_masks(grid: TokenGrid, configs=DEFAULT_CONFIGS, seed: int = 0,
                   combined: bool = False):
    """Sample every config's blocks.

    Config ``i`` draws from its own generator seeded with
    ``derive_seed(seed, f"mask-config-{i}")``, so the blocks do not depend on
    whether masks are returned per config (a list) or as one union.
    """
    configs = list(configs)
    if not configs:
        raise InvalidGeometry("at least one mask config is required")
    per_config = []
    for i, cfg in enumerate(configs):
        rng = PortableRNG(derive_seed(seed, f"mask-config-{i}"))
        blocks = [sample_block(grid, cfg, rng) for _ in range(cfg.num_blocks)]
        per_config.append(MaskSet.from_blocks(grid, blocks, [cfg], seed))
    if combined:
        blocks = [b for m in per_config for b in m.blocks]
        return MaskSet.from_blocks(grid, blocks, configs, seed)
    return per_config


def mask_stats(m: MaskSet) -> dict:
    n_blocks = len(m.blocks)
    areas = [(t1 - t0) * (h1 - h0) * (w1 - w0) for t0, t1, h0, h1, w0, w1 in m.blocks]
    return {
        "coverage_fraction": int(m.masked.sum()) / m.grid.total,
        "num_blocks": n_blocks,
        "mean_block_area": (sum(areas) / n_blocks) if n_blocks else 0.0,
    }
