"""Video tensors, on-disk formats, and slice extraction.

A video is a dense (frames, height, width, channels) float array with values
nominally in [0, 1].  Two interchange formats are supported:

* raw ``.vten``: magic ``VTEN``, version u32=1, then T, H, W, C as unsigned
  32-bit little-endian, then 32-bit little-endian floats in (t, h, w, c)
  order.  Lossless for float32-valued data.
* frame directory: 8-bit PNGs named ``frame_%05d.png``.  Loaders map pixel p
  to p/255; savers clamp to [0, 1] before quantizing, so a round trip is
  accurate to 1/255 per value.  Clamping happens only at export: solver
  iterates may transiently leave [0, 1].
"""

from __future__ import annotations

import os
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

RAW_MAGIC = b"VTEN"
RAW_VERSION = 1
_FRAME_EXTS = {".png", ".jpg", ".jpeg", ".bmp", ".tif", ".tiff"}


@dataclass(frozen=True)
class VideoTensor:
    """Dense video array; treat as immutable once constructed."""

    data: np.ndarray  # (frames, height, width, channels), float64

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.float64)
        if arr.ndim != 4:
            raise ValueError(f"video tensor must be 4-D (t,h,w,c), got shape {arr.shape}")
        if min(arr.shape) < 1:
            raise ValueError(f"all dimensions must be >= 1, got shape {arr.shape}")
        object.__setattr__(self, "data", arr)

    @property
    def frames(self) -> int:
        return self.data.shape[0]

    @property
    def height(self) -> int:
        return self.data.shape[1]

    @property
    def width(self) -> int:
        return self.data.shape[2]

    @property
    def channels(self) -> int:
        return self.data.shape[3]

    @property
    def shape(self) -> tuple:
        return self.data.shape


@dataclass(frozen=True)
class SliceImage:
    """Fixed-column slice of a video: rows are image rows, columns are frames."""

    data: np.ndarray  # (height, frames, channels)
    column: int

    @property
    def rows(self) -> int:
        return self.data.shape[0]

    @property
    def cols(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]


def as_video_array(x) -> np.ndarray:
    """Accept a VideoTensor or a bare 4-D array; return float64 ndarray."""
    if isinstance(x, VideoTensor):
        return x.data
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 4:
        raise ValueError(f"expected 4-D (t,h,w,c) array, got shape {arr.shape}")
    return arr


def load_video(path, format: str = "auto") -> VideoTensor:
    """Load a video from a raw file or a frame directory.

    format "auto" resolves to "frame-dir" for directories and "raw" otherwise.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no such path: {path}")
    if format == "auto":
        format = "frame-dir" if path.is_dir() else "raw"
    if format == "frame-dir":
        return _load_frame_dir(path)
    if format == "raw":
        return _load_raw(path)
    raise ValueError(f"unknown format {format!r} (expected 'frame-dir' or 'raw')")


def save_video(x, path, format: str = "auto") -> None:
    """Write a video; raises before touching the filesystem if data is non-finite."""
    arr = as_video_array(x)
    if not np.all(np.isfinite(arr)):
        raise ValueError("refusing to save tensor with NaN/Inf values")
    path = Path(path)
    if format == "auto":
        format = "raw" if path.suffix == ".vten" else "frame-dir"
    if format == "frame-dir":
        _save_frame_dir(arr, path)
    elif format == "raw":
        _save_raw(arr, path)
    else:
        raise ValueError(f"unknown format {format!r} (expected 'frame-dir' or 'raw')")


def slice_extract(x, column: int) -> SliceImage:
    """Fix a column index and return the (row, frame) slice image."""
    arr = as_video_array(x)
    w = arr.shape[2]
    if not 0 <= column < w:
        raise IndexError(f"column {column} out of range for width {w}")
    # out(i, t, c) = x(t, i, column, c)
    return SliceImage(data=np.ascontiguousarray(arr[:, :, column, :].transpose(1, 0, 2)), column=column)


def quantize_u8(arr: np.ndarray) -> np.ndarray:
    """Clamp to [0,1] and round to 8-bit; shared by frame and slice export."""
    return np.clip(np.round(np.clip(arr, 0.0, 1.0) * 255.0), 0, 255).astype(np.uint8)


def save_slice_image(s: SliceImage, path) -> None:
    data = quantize_u8(s.data)
    if data.shape[2] == 1:
        img = Image.fromarray(data[:, :, 0], mode="L")
    else:
        img = Image.fromarray(data, mode="RGB")
    img.save(Path(path))


def _load_raw(path: Path) -> VideoTensor:
    blob = path.read_bytes()
    if len(blob) < 24:
        raise ValueError(f"corrupt header: file too short ({len(blob)} bytes)")
    magic, version, t, h, w, c = struct.unpack_from("<4sIIIII", blob, 0)
    if magic != RAW_MAGIC:
        raise ValueError(f"corrupt header: bad magic {magic!r}")
    if version != RAW_VERSION:
        raise ValueError(f"corrupt header: unsupported version {version}")
    if min(t, h, w, c) < 1:
        raise ValueError(f"corrupt header: degenerate shape ({t},{h},{w},{c})")
    n = t * h * w * c
    expected = 24 + 4 * n
    if len(blob) != expected:
        raise ValueError(f"corrupt payload: expected {expected} bytes, got {len(blob)}")
    flat = np.frombuffer(blob, dtype="<f4", offset=24, count=n)
    if not np.all(np.isfinite(flat)):
        raise ValueError("corrupt payload: non-finite values")
    return VideoTensor(flat.astype(np.float64).reshape(t, h, w, c))


def _save_raw(arr: np.ndarray, path: Path) -> None:
    t, h, w, c = arr.shape
    header = struct.pack("<4sIIIII", RAW_MAGIC, RAW_VERSION, t, h, w, c)
    payload = arr.astype("<f4").tobytes()
    path.write_bytes(header + payload)


def _load_frame_dir(path: Path) -> VideoTensor:
    names = sorted(p for p in path.iterdir() if p.suffix.lower() in _FRAME_EXTS)
    if not names:
        raise ValueError(f"zero frames in directory {path}")
    frames = []
    shape = None
    for p in names:
        img = np.asarray(Image.open(p))
        if img.ndim == 2:
            img = img[:, :, None]
        if shape is None:
            shape = img.shape
        elif img.shape != shape:
            raise ValueError(f"inconsistent frame dimensions: {p.name} is {img.shape}, expected {shape}")
        frames.append(img.astype(np.float64) / 255.0)
    return VideoTensor(np.stack(frames, axis=0))


def _save_frame_dir(arr: np.ndarray, path: Path) -> None:
    os.makedirs(path, exist_ok=True)
    data = quantize_u8(arr)
    for t in range(arr.shape[0]):
        frame = data[t]
        if frame.shape[2] == 1:
            img = Image.fromarray(frame[:, :, 0], mode="L")
        else:
            img = Image.fromarray(frame, mode="RGB")
        img.save(path / f"frame_{t:05d}.png")
