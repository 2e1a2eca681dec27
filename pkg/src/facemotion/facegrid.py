"""Axis-anchored face areas and their rectangular segment grids.

Three horizontal bands (above the eye axis, between eye and mouth axes,
below the mouth axis) split by the vertical midline give six areas:

    1 | 2      top band      (eyebrows / forehead)
    3 | 4      middle band   (eyes to mouth)
    5 | 6      bottom band   (mouth / chin)

Odd areas lie left of the midline in image coordinates.  Each area holds an
``nx x ny`` grid of equal segments anchored at the corner where the
midline meets the band's anchor axis: top grids grow upward from the eye
axis, middle grids downward from the eye axis, bottom grids downward from
the mouth axis, and all of them grow outward from the midline.  Segments
are numbered row-major from that corner (rows moving away from the axis,
columns away from the midline), starting at 1.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from typing import NamedTuple, Optional

import numpy as np

from .errors import LayoutOutOfImage
from .seqio import Rect

N_AREAS = 6
AREA_BAND = {1: "top", 2: "top", 3: "mid", 4: "mid", 5: "bot", 6: "bot"}


@dataclass(frozen=True)
class FaceAxes:
    pupil_left: tuple
    pupil_right: tuple
    mouth_y: float

    def __post_init__(self):
        pl = tuple(float(v) for v in self.pupil_left)
        pr = tuple(float(v) for v in self.pupil_right)
        object.__setattr__(self, "pupil_left", pl)
        object.__setattr__(self, "pupil_right", pr)
        object.__setattr__(self, "mouth_y", float(self.mouth_y))
        if not pl[0] < pr[0]:
            raise ValueError("left pupil must lie left of the right pupil")
        if not self.mouth_y > max(pl[1], pr[1]):
            raise ValueError("mouth axis must lie below both pupils")

    @property
    def eye_y(self) -> int:
        return _round_half_up((self.pupil_left[1] + self.pupil_right[1]) / 2.0)

    @property
    def mid_x(self) -> int:
        return _round_half_up((self.pupil_left[0] + self.pupil_right[0]) / 2.0)

    @property
    def mouth(self) -> int:
        return _round_half_up(self.mouth_y)

    def shifted(self, dx: float, dy: float) -> "FaceAxes":
        return FaceAxes((self.pupil_left[0] + dx, self.pupil_left[1] + dy),
                        (self.pupil_right[0] + dx, self.pupil_right[1] + dy), self.mouth_y + dy)

    def to_dict(self) -> dict:
        return {"pupil_left": list(self.pupil_left), "pupil_right": list(self.pupil_right), "mouth_y": self.mouth_y}

    @classmethod
    def from_dict(cls, d: dict) -> "FaceAxes":
        return cls(tuple(d["pupil_left"]), tuple(d["pupil_right"]), d["mouth_y"])


def _round_half_up(v: float) -> int:
    return int(math.floor(v + 0.5))


@dataclass(frozen=True)
class GridSpec:
    seg_width: int
    seg_height: int
    nx_top: int
    ny_top: int
    nx_mid: int
    ny_mid: int
    nx_bot: int
    ny_bot: int
    situation: Optional[int] = None

    def __post_init__(self):
        if self.seg_width < 1 or self.seg_height < 1:
            raise ValueError("segment width and height must be >= 1 px")
        if min(self.nx_top, self.ny_top, self.nx_mid, self.ny_mid, self.nx_bot, self.ny_bot) < 1:
            raise ValueError("segment counts must be >= 1")

    def counts(self, band: str) -> tuple:
        return {"top": (self.nx_top, self.ny_top), "mid": (self.nx_mid, self.ny_mid),
                "bot": (self.nx_bot, self.ny_bot)}[band]

    def segments_per_area(self, area: int) -> int:
        nx, ny = self.counts(AREA_BAND[area])
        return nx * ny

    @property
    def segment_count(self) -> int:
        return 2 * (self.nx_top * self.ny_top + self.nx_mid * self.ny_mid + self.nx_bot * self.ny_bot)

    @property
    def feature_count(self) -> int:
        return 3 * self.segment_count

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "GridSpec":
        return cls(**{k: d[k] for k in cls.__dataclass_fields__ if k in d})


# seg w, seg h, X1&X4, Y1, X2&X5, Y2, X3&X6, Y3, published feature total
_SITUATIONS = (
    (5, 5, 3, 3, 4, 3, 2, 3, 162),
    (5, 5, 8, 5, 8, 5, 5, 5, 630),
    (5, 15, 2, 1, 3, 1, 2, 1, 42),
    (5, 15, 8, 2, 8, 2, 5, 2, 252),
    (5, 20, 5, 2, 5, 2, 2, 1, 132),
    (10, 10, 5, 4, 5, 4, 5, 3, 330),
    (10, 10, 5, 5, 5, 5, 5, 5, 450),
    (10, 10, 5, 6, 5, 6, 5, 4, 480),
    (10, 15, 5, 3, 5, 3, 3, 2, 216),
    (15, 15, 4, 3, 4, 3, 2, 2, 168),  # published X3&X6 = 3 contradicts the 168 total
    (15, 15, 5, 5, 5, 5, 5, 5, 450),
    (15, 20, 3, 2, 3, 2, 2, 1, 84),
    (20, 20, 5, 5, 5, 5, 5, 5, 450),
    (20, 25, 2, 1, 2, 1, 1, 1, 30),
    (25, 25, 2, 2, 2, 2, 2, 2, 72),
    (25, 25, 4, 4, 4, 4, 4, 4, 288),
    (25, 30, 1, 1, 1, 1, 1, 1, 18),
    (30, 30, 2, 2, 2, 2, 1, 1, 54),
    (30, 30, 2, 2, 2, 2, 2, 2, 72),
    (30, 30, 3, 3, 3, 3, 2, 2, 132),
    (30, 30, 4, 4, 4, 4, 4, 4, 288),
    (35, 35, 3, 3, 3, 3, 3, 3, 162),
    (40, 40, 3, 3, 3, 3, 2, 2, 132),
    (40, 40, 3, 3, 3, 3, 3, 3, 162),
    (50, 50, 2, 2, 2, 2, 1, 1, 54),
)

PUBLISHED_FEATURE_TOTALS = tuple(row[-1] for row in _SITUATIONS)


def situation_table() -> list:
    """The 25 predefined grid configurations, in order (situation ``i`` is ``table[i - 1]``)."""
    return [GridSpec(*row[:8], situation=i) for i, row in enumerate(_SITUATIONS, start=1)]


def situation(index: int) -> GridSpec:
    if not 1 <= index <= len(_SITUATIONS):
        raise ValueError(f"situation must be in 1..{len(_SITUATIONS)}, got {index}")
    return situation_table()[index - 1]


class Segment(NamedTuple):
    area: int
    index: int
    rect: Rect
    truncated: bool


def _clip(x0, y0, x1, y1, bx0, by0, bx1, by1):
    cx0, cy0 = max(x0, bx0), max(y0, by0)
    cx1, cy1 = min(x1, bx1), min(y1, by1)
    if cx1 <= cx0 or cy1 <= cy0:
        return Rect(cx0, cy0, 0, 0), True
    clipped = (cx0, cy0, cx1, cy1) != (x0, y0, x1, y1)
    return Rect(cx0, cy0, cx1 - cx0, cy1 - cy0), clipped


@dataclass(frozen=True)
class SegmentationLayout:
    segments: tuple
    axes: FaceAxes
    spec: GridSpec
    width: int
    height: int

    def __len__(self):
        return len(self.segments)

    @property
    def feature_count(self) -> int:
        return 3 * len(self.segments)

    @property
    def truncated(self) -> list:
        return [(s.area, s.index) for s in self.segments if s.truncated]

    def keys(self) -> list:
        return [(s.area, s.index) for s in self.segments]

    def label_map(self) -> np.ndarray:
        """(H, W) int array: position of the containing segment in ``segments``, or -1."""
        lab = np.full((self.height, self.width), -1, dtype=np.int64)
        for k, s in enumerate(self.segments):
            r = s.rect
            if r.width and r.height:
                lab[r.y:r.y1, r.x:r.x1] = k
        return lab

    def to_dict(self) -> dict:
        return {
            "width": self.width,
            "height": self.height,
            "axes": self.axes.to_dict(),
            "spec": self.spec.to_dict(),
            "anchors": {"eye_y": self.axes.eye_y, "mouth_y": self.axes.mouth, "mid_x": self.axes.mid_x},
            "segments": [
                {"area": s.area, "index": s.index, "x": s.rect.x, "y": s.rect.y,
                 "width": s.rect.width, "height": s.rect.height, "truncated": s.truncated}
                for s in self.segments
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def build_layout(axes: FaceAxes, spec: GridSpec, width: int, height: int) -> SegmentationLayout:
    """Place every area's grid for an image of ``width x height`` px.

    Segments are clipped to their own area and to the image; a clipped
    segment is flagged ``truncated`` (possibly with zero size, in which
    case it simply never contains a vector).
    """
    xc, ye, ym = axes.mid_x, axes.eye_y, axes.mouth
    if not (0 <= xc < width and 0 <= ye < height and 0 <= ym <= height):
        raise LayoutOutOfImage(f"axes (mid_x={xc}, eye_y={ye}, mouth_y={ym}) outside {width}x{height} image")
    w, h = spec.seg_width, spec.seg_height
    band_rows = {"top": (0, ye), "mid": (ye, ym), "bot": (ym, height)}
    segments = []
    for area in range(1, N_AREAS + 1):
        band = AREA_BAND[area]
        nx, ny = spec.counts(band)
        left = area % 2 == 1
        by0, by1 = band_rows[band]
        bx0, bx1 = (0, xc) if left else (xc, width)
        for r in range(ny):
            if band == "top":
                y0, y1 = ye - (r + 1) * h, ye - r * h
            else:
                anchor = ye if band == "mid" else ym
                y0, y1 = anchor + r * h, anchor + (r + 1) * h
            for c in range(nx):
                if left:
                    x0, x1 = xc - (c + 1) * w, xc - c * w
                else:
                    x0, x1 = xc + c * w, xc + (c + 1) * w
                rect, clipped = _clip(x0, y0, x1, y1, bx0, by0, bx1, by1)
                segments.append(Segment(area, r * nx + c + 1, rect, clipped))
    if all(s.rect.width == 0 for s in segments):
        raise LayoutOutOfImage("every segment falls outside the image")
    return SegmentationLayout(tuple(segments), axes, spec, int(width), int(height))


def locate(layout: SegmentationLayout, x: float, y: float):
    """``(area, index)`` of the segment containing pixel (x, y), or None."""
    for s in layout.segments:
        r = s.rect
        if r.x <= x < r.x1 and r.y <= y < r.y1:
            return (s.area, s.index)
    return None
