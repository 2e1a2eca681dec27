"""Loading and preprocessing of neutral-to-apex image sequences."""

from __future__ import annotations

import glob
import os
from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Sequence

import numpy as np
from PIL import Image

from .errors import CropOutOfBounds, DimensionMismatch, SequenceIOError, SequenceTooShort

MIN_FRAMES = 2
MAX_FRAMES = 8

# Rec.601 luma weights
LUMA = (0.299, 0.587, 0.114)


class Rect(NamedTuple):
    """Pixel rectangle, half-open: columns [x, x+width), rows [y, y+height)."""

    x: int
    y: int
    width: int
    height: int

    @property
    def x1(self) -> int:
        return self.x + self.width

    @property
    def y1(self) -> int:
        return self.y + self.height


@dataclass(frozen=True)
class GrayFrameSequence:
    frames: tuple
    sequence_id: str = ""
    label: Optional[str] = None
    metadata: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        frames = tuple(np.asarray(f, dtype=np.float64) for f in self.frames)
        if len(frames) < MIN_FRAMES:
            raise SequenceTooShort(f"{self.sequence_id!r}: {len(frames)} frame(s), need >= {MIN_FRAMES}")
        if len(frames) > MAX_FRAMES:
            raise DimensionMismatch(f"{self.sequence_id!r}: {len(frames)} frames, at most {MAX_FRAMES} allowed")
        shape = frames[0].shape
        if len(shape) != 2:
            raise DimensionMismatch(f"frames must be 2-D, got shape {shape}")
        for f in frames:
            if f.shape != shape:
                raise DimensionMismatch(f"{self.sequence_id!r}: frame shape {f.shape} != {shape}")
            if not np.all(np.isfinite(f)) or f.min() < 0.0 or f.max() > 1.0:
                raise ValueError("intensities must be finite and in [0, 1]")
            f.setflags(write=False)
        object.__setattr__(self, "frames", frames)

    @property
    def height(self) -> int:
        return self.frames[0].shape[0]

    @property
    def width(self) -> int:
        return self.frames[0].shape[1]

    def __len__(self):
        return len(self.frames)

    def stack(self) -> np.ndarray:
        return np.stack(self.frames)


def to_gray(pixels: np.ndarray) -> np.ndarray:
    """Convert an 8-bit gray (H, W) or RGB (H, W, 3) array to float intensities in [0, 1].

    Pixels whose three channels are equal keep their value exactly, so gray
    input passes through unchanged whichever layout it arrives in.
    """
    a = np.asarray(pixels)
    scale = 65535.0 if a.dtype == np.uint16 else 255.0
    a = a.astype(np.float64) / scale
    if a.ndim == 2:
        return a
    if a.ndim == 3 and a.shape[2] >= 3:
        r, g, b = a[..., 0], a[..., 1], a[..., 2]
        lum = LUMA[0] * r + LUMA[1] * g + LUMA[2] * b
        gray = np.where((r == g) & (g == b), r, lum)
        return np.clip(gray, 0.0, 1.0)
    raise DimensionMismatch(f"unsupported pixel array shape {a.shape}")


def read_image(path) -> np.ndarray:
    try:
        with Image.open(path) as im:
            if im.mode in ("L", "RGB"):
                arr = np.asarray(im)
            elif im.mode.startswith("I;16"):
                arr = np.asarray(im).astype(np.uint16)
            else:
                arr = np.asarray(im.convert("RGB"))
    except (OSError, ValueError) as exc:
        raise SequenceIOError(path, f"cannot read image ({exc})") from exc
    return to_gray(arr)


def write_image(path, frame: np.ndarray) -> None:
    """Write a [0, 1] frame as 8-bit gray; format follows the extension (.pgm/.png)."""
    a = np.clip(np.rint(np.asarray(frame) * 255.0), 0, 255).astype(np.uint8)
    Image.fromarray(a, mode="L").save(path)


def load_sequence(path_pattern: str, label: Optional[str] = None, sequence_id: Optional[str] = None) -> GrayFrameSequence:
    """Load every image matching ``path_pattern`` as one sequence, in filename order."""
    paths = sorted(glob.glob(path_pattern))
    if len(paths) < MIN_FRAMES:
        raise SequenceTooShort(f"pattern {path_pattern!r} matched {len(paths)} file(s), need >= {MIN_FRAMES}")
    frames = [read_image(p) for p in paths]
    shapes = {f.shape for f in frames}
    if len(shapes) > 1:
        raise DimensionMismatch(f"mixed frame dimensions in {path_pattern!r}: {sorted(shapes)}")
    if sequence_id is None:
        sequence_id = os.path.basename(os.path.dirname(paths[0])) or path_pattern
    return GrayFrameSequence(tuple(frames), sequence_id=sequence_id, label=label, metadata={"paths": paths})


def crop_face(seq: GrayFrameSequence, rect: Sequence[int]) -> GrayFrameSequence:
    """Cut the same rectangle out of every frame."""
    r = Rect(*(int(v) for v in rect))
    if r.width < 1 or r.height < 1 or r.x < 0 or r.y < 0 or r.x1 > seq.width or r.y1 > seq.height:
        raise CropOutOfBounds(f"rect {tuple(r)} not inside {seq.width}x{seq.height} frame")
    frames = tuple(f[r.y:r.y1, r.x:r.x1].copy() for f in seq.frames)
    meta = dict(seq.metadata)
    ox, oy = meta.get("crop_origin", (0, 0))
    meta["crop_origin"] = (ox + r.x, oy + r.y)
    return GrayFrameSequence(frames, sequence_id=seq.sequence_id, label=seq.label, metadata=meta)
