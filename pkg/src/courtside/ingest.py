"""Frame sequence loading and per-frame preprocessing.

Two input layouts are accepted:

* a directory of image files (PNG/JPEG/BMP/PPM), read in lexicographic order;
* a raw planar RGB24 file: an ASCII header line ``W H N`` followed by
  ``N`` frames, each stored as three ``H x W`` uint8 planes (R, then G, then B).
"""

from __future__ import annotations

import logging
import os
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import DecodeError, DimensionMismatch, EmptyInput, InvalidTarget

logger = logging.getLogger(__name__)

IMAGE_SUFFIXES = {".png", ".jpg", ".jpeg", ".bmp", ".ppm", ".pgm", ".tif", ".tiff"}
LUMA_WEIGHTS = (0.299, 0.587, 0.114)


@dataclass(frozen=True)
class Frame:
    """One decoded RGB frame. ``rgb`` is float64, shape (H, W, 3), range [0, 255]."""

    index: int
    rgb: np.ndarray

    @property
    def height(self) -> int:
        return self.rgb.shape[0]

    @property
    def width(self) -> int:
        return self.rgb.shape[1]

    @cached_property
    def gray(self) -> np.ndarray:
        return to_grayscale(self)


@dataclass(frozen=True)
class FrameSequence:
    frames: tuple
    width: int
    height: int
    source_fps: Optional[float] = None
    clip_id: str = ""

    def __post_init__(self):
        if len(self.frames) == 0:
            raise EmptyInput("a frame sequence needs at least one frame")
        prev = -1
        for f in self.frames:
            if f.rgb.shape != (self.height, self.width, 3):
                raise DimensionMismatch(
                    f"frame {f.index} has shape {f.rgb.shape}, "
                    f"expected {(self.height, self.width, 3)}"
                )
            if f.index <= prev:
                raise ValueError("frame indices must be strictly increasing")
            prev = f.index
        if self.frames[0].index < 0:
            raise ValueError("frame indices start at 0")

    def __len__(self):
        return len(self.frames)

    def __getitem__(self, i):
        return self.frames[i]

    @property
    def indices(self) -> list[int]:
        return [f.index for f in self.frames]

    @classmethod
    def from_arrays(cls, arrays: Sequence[np.ndarray], clip_id="", source_fps=None):
        """Build a sequence from (H, W, 3) arrays, indexed 0..N-1."""
        if len(arrays) == 0:
            raise EmptyInput("no frames given")
        frames = tuple(
            Frame(i, np.asarray(a, dtype=np.float64)) for i, a in enumerate(arrays)
        )
        h, w = frames[0].rgb.shape[:2]
        return cls(frames, width=w, height=h, source_fps=source_fps, clip_id=clip_id)


@dataclass
class IngestConfig:
    target_width: Optional[int] = None
    target_height: Optional[int] = None
    stride: Optional[int] = None
    target_fps: Optional[float] = None
    source_fps: Optional[float] = None
    clip_id: Optional[str] = None

    def effective_stride(self) -> int:
        """Stride 1 unless a stride is given or both fps values are known.

        When neither ``stride`` nor ``target_fps`` is set, the default target
        rate of 4 fps applies as soon as ``source_fps`` is known.
        """
        if self.stride is not None and self.target_fps is not None:
            raise ValueError("stride and target_fps are mutually exclusive")
        if self.stride is not None:
            if self.stride < 1:
                raise ValueError("stride must be >= 1")
            return int(self.stride)
        if self.source_fps is None:
            return 1
        fps = 4.0 if self.target_fps is None else float(self.target_fps)
        if fps <= 0:
            raise ValueError("target_fps must be positive")
        return max(1, int(round(self.source_fps / fps)))


def to_grayscale(frame) -> np.ndarray:
    """BT.601 luma scaled to [0, 1]. Accepts a :class:`Frame` or an (H, W, 3) array."""
    rgb = frame.rgb if isinstance(frame, Frame) else np.asarray(frame, dtype=np.float64)
    r, g, b = LUMA_WEIGHTS
    gray = (r * rgb[..., 0] + g * rgb[..., 1] + b * rgb[..., 2]) / 255.0
    return np.clip(gray, 0.0, 1.0)


def bilinear_resize_array(arr: np.ndarray, w: int, h: int) -> np.ndarray:
    """Align-corners bilinear resize of an (H, W) or (H, W, C) array.

    Output pixel ``x`` samples source coordinate ``x * (W - 1) / (w - 1)``,
    so the corner pixels of input and output coincide.
    """
    if w < 2 or h < 2:
        raise InvalidTarget(f"target size must be at least 2x2, got {w}x{h}")
    arr = np.asarray(arr, dtype=np.float64)
    src_h, src_w = arr.shape[:2]

    def axis_weights(n_out, n_in):
        if n_in == 1:
            pos = np.zeros(n_out)
        else:
            pos = np.arange(n_out) * ((n_in - 1) / (n_out - 1))
        lo = np.clip(np.floor(pos).astype(int), 0, n_in - 1)
        hi = np.minimum(lo + 1, n_in - 1)
        frac = pos - lo
        return lo, hi, frac

    y0, y1, fy = axis_weights(h, src_h)
    x0, x1, fx = axis_weights(w, src_w)
    if arr.ndim == 3:
        fy = fy[:, None, None]
        fx = fx[None, :, None]
    else:
        fy = fy[:, None]
        fx = fx[None, :]
    top = arr[y0][:, x0] * (1 - fx) + arr[y0][:, x1] * fx
    bottom = arr[y1][:, x0] * (1 - fx) + arr[y1][:, x1] * fx
    out = top * (1 - fy) + bottom * fy
    # constant inputs stay bit-exact constant
    if arr.size and np.all(arr == arr.flat[0]):
        out = np.full(out.shape, arr.flat[0])
    return out


def resize_bilinear(frame: Frame, w: int, h: int) -> Frame:
    return Frame(frame.index, bilinear_resize_array(frame.rgb, w, h))


def _read_image(path: Path) -> np.ndarray:
    from PIL import Image, UnidentifiedImageError

    try:
        with Image.open(path) as im:
            return np.asarray(im.convert("RGB"), dtype=np.float64)
    except (OSError, UnidentifiedImageError, ValueError) as exc:
        raise DecodeError(path, str(exc)) from exc


def read_raw_planar(path) -> list[np.ndarray]:
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise DecodeError(path, str(exc)) from exc
    nl = data.find(b"\n")
    if nl < 0:
        raise DecodeError(path, "missing 'W H N' header line")
    try:
        w, h, n = (int(x) for x in data[:nl].decode("ascii").split())
    except (UnicodeDecodeError, ValueError) as exc:
        raise DecodeError(path, "malformed 'W H N' header") from exc
    body = data[nl + 1:]
    expected = w * h * 3 * n
    if len(body) != expected:
        raise DecodeError(path, f"expected {expected} payload bytes, found {len(body)}")
    if n == 0:
        raise EmptyInput(f"{path} declares zero frames")
    planes = np.frombuffer(body, dtype=np.uint8).reshape(n, 3, h, w)
    return [np.transpose(p, (1, 2, 0)).astype(np.float64) for p in planes]


def write_raw_planar(path, frames: Sequence[np.ndarray]) -> None:
    """Write (H, W, 3) frames in the raw planar layout. Values are rounded to uint8."""
    if len(frames) == 0:
        raise EmptyInput("no frames to write")
    h, w = np.asarray(frames[0]).shape[:2]
    chunks = [f"{w} {h} {len(frames)}\n".encode("ascii")]
    for f in frames:
        f = np.asarray(f)
        if f.shape != (h, w, 3):
            raise DimensionMismatch(f"frame shape {f.shape} != {(h, w, 3)}")
        u8 = np.clip(np.rint(f), 0, 255).astype(np.uint8)
        chunks.append(np.ascontiguousarray(np.transpose(u8, (2, 0, 1))).tobytes())
    Path(path).write_bytes(b"".join(chunks))


def load_frame_sequence(path, config: IngestConfig | None = None) -> FrameSequence:
    config = config or IngestConfig()
    path = Path(path)
    if path.is_dir():
        files = sorted(
            p for p in path.iterdir()
            if p.is_file() and p.suffix.lower() in IMAGE_SUFFIXES
        )
        if not files:
            raise EmptyInput(f"no image files in {path}")
        arrays = [_read_image(p) for p in files]
        names = [p.name for p in files]
    elif path.is_file():
        arrays = read_raw_planar(path)
        names = [f"{path.name}[{i}]" for i in range(len(arrays))]
    else:
        raise EmptyInput(f"{path} does not exist")

    resize = config.target_width is not None or config.target_height is not None
    if resize:
        tw = config.target_width or arrays[0].shape[1]
        th = config.target_height or arrays[0].shape[0]
    else:
        shape0 = arrays[0].shape
        for a, name in zip(arrays, names):
            if a.shape != shape0:
                raise DimensionMismatch(
                    f"{name} is {a.shape[1]}x{a.shape[0]}, expected "
                    f"{shape0[1]}x{shape0[0]}; set target_width/target_height to resize"
                )

    stride = config.effective_stride()
    frames = []
    for i in range(0, len(arrays), stride):
        a = arrays[i]
        if resize and (a.shape[1] != tw or a.shape[0] != th):
            a = bilinear_resize_array(a, tw, th)
        frames.append(Frame(i, a))
    h, w = frames[0].rgb.shape[:2]
    clip_id = config.clip_id if config.clip_id is not None else path.stem
    logger.debug("loaded %d of %d frames from %s (stride %d)", len(frames), len(arrays), path, stride)
    return FrameSequence(tuple(frames), width=w, height=h,
                         source_fps=config.source_fps, clip_id=clip_id)


def save_frame_images(seq_or_frames, out_dir, indices=None, prefix="frame_") -> list[str]:
    """Write selected frames as PNG files named ``frame_XXXX.png``."""
    from PIL import Image

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    frames = list(seq_or_frames)
    wanted = None if indices is None else set(indices)
    written = []
    for f in frames:
        if wanted is not None and f.index not in wanted:
            continue
        u8 = np.clip(np.rint(f.rgb), 0, 255).astype(np.uint8)
        name = f"{prefix}{f.index:04d}.png"
        Image.fromarray(u8, mode="RGB").save(os.fspath(out_dir / name))
        written.append(name)
    return written
