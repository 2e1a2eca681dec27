"""Phase-based optical flow over a whole neutral-to-apex sequence.

Each frame is filtered with a bank of complex Gabor (quadrature-pair)
filters.  For every filter and sample position the response phase is
tracked through time; a straight line fitted to the unwrapped phase gives
the temporal phase gradient, and its residual measures how trustworthy the
filter is at that spot.  Every reliable filter contributes one linear
constraint ``grad(phase) . v = -dphase/dt`` and the full velocity is the
least-squares intersection of those constraints.

Phase is invariant to a multiplicative change of contrast and, because
the kernels are zero-mean, to an additive brightness offset, which is what
makes the method tolerant of luminance drift.

Validity bound: per-frame motion must stay below half the wavelength of
the highest filter frequency, otherwise the frame-to-frame phase
differences alias.
"""

from __future__ import annotations

import csv
import io
import json
import math
import warnings
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np
from scipy.ndimage import uniform_filter
from scipy.signal import fftconvolve

from .errors import BadFilterSpec, DimensionMismatch, EmptyField, SequenceTooShort
from .seqio import GrayFrameSequence

DEFAULT_ORIENTATIONS = 6
DEFAULT_FREQUENCIES = (0.08, 0.16)
DEFAULT_SUPPORT = 21
AMPLITUDE_FLOOR = 1e-12  # responses below this carry no usable phase


@dataclass(frozen=True)
class GaborPair:
    orientation: float  # radians, direction of the carrier wave vector (x right, y down)
    frequency: float  # cycles/px
    sigma: float
    even: np.ndarray = field(repr=False, compare=False)
    odd: np.ndarray = field(repr=False, compare=False)

    @property
    def support(self) -> int:
        return self.even.shape[0]

    @property
    def kernel(self) -> np.ndarray:
        return self.even + 1j * self.odd


@dataclass(frozen=True)
class FilterBank:
    filters: tuple

    @property
    def support(self) -> int:
        return max(f.support for f in self.filters)

    @property
    def orientations(self) -> list:
        return sorted({f.orientation for f in self.filters})

    def describe(self) -> dict:
        return {
            "orientations": len(self.orientations),
            "frequencies": sorted({f.frequency for f in self.filters}),
            "support": self.support,
            "sigma": sorted({f.sigma for f in self.filters}),
        }


def build_filter_bank(orientations: int = DEFAULT_ORIENTATIONS,
                      frequencies: Sequence[float] = DEFAULT_FREQUENCIES,
                      support: int = DEFAULT_SUPPORT,
                      sigma: float | None = None) -> FilterBank:
    """Zero-mean complex Gabor filters at ``orientations`` evenly spaced angles in [0, pi).

    ``sigma`` (Gaussian envelope, px) defaults to ``support / 6`` so the
    envelope has decayed to about 1% at the kernel edge.
    """
    if orientations < 5:
        raise BadFilterSpec(f"need at least 5 orientations, got {orientations}")
    if support < 3 or support % 2 == 0:
        raise BadFilterSpec(f"support must be an odd size >= 3 px, got {support}")
    freqs = [float(f) for f in frequencies]
    if not freqs:
        raise BadFilterSpec("no frequencies given")
    for f in freqs:
        if not (0.0 < f < 0.5):
            raise BadFilterSpec(f"frequency {f} outside (0, 0.5) cycles/px")
    if sigma is None:
        sigma = support / 6.0
    if sigma <= 0:
        raise BadFilterSpec(f"sigma must be positive, got {sigma}")

    half = support // 2
    ys, xs = np.mgrid[-half:half + 1, -half:half + 1].astype(np.float64)
    env = np.exp(-(xs ** 2 + ys ** 2) / (2.0 * sigma ** 2))
    filters = []
    for f in freqs:
        for k in range(orientations):
            theta = k * math.pi / orientations
            u = xs * math.cos(theta) + ys * math.sin(theta)
            carrier = 2.0 * math.pi * f * u
            even = env * np.cos(carrier)
            even = even - env * (even.sum() / env.sum())
            odd = env * np.sin(carrier)
            # odd part is antisymmetric; remove the rounding residue only
            odd = odd - odd.mean()
            norm = math.sqrt(float((even ** 2).sum() + (odd ** 2).sum()))
            filters.append(GaborPair(theta, f, float(sigma), even / norm, odd / norm))
    return FilterBank(tuple(filters))


def filter_response(image: np.ndarray, pair: GaborPair) -> np.ndarray:
    """Complex response of one quadrature pair, same size as ``image`` (zero padded)."""
    return fftconvolve(np.asarray(image, dtype=np.float64), pair.kernel, mode="same")


@dataclass(frozen=True)
class FlowConfig:
    sample_stride: int = 2
    min_frames: int = 3
    reliability_threshold: float = 0.1  # max mean squared phase-fit residual, rad^2
    min_valid_filters: int = 4
    min_amplitude: float = 0.05  # response magnitude floor, relative to the mean magnitude
    frequency_tolerance: float = 0.5  # allowed relative deviation of the local phase gradient
    min_conditioning: float = 0.05  # smallest/largest eigenvalue ratio of the normal matrix

    def __post_init__(self):
        if self.sample_stride < 1:
            raise ValueError("sample_stride must be >= 1")
        if self.min_valid_filters < 2:
            raise ValueError("min_valid_filters must be >= 2")
        if self.min_frames < 2:
            raise ValueError("min_frames must be >= 2")

    @classmethod
    def from_dict(cls, d: dict) -> "FlowConfig":
        known = {k: d[k] for k in cls.__dataclass_fields__ if k in d}
        return cls(**known)


@dataclass(frozen=True)
class MotionField:
    """Sparse displacement samples; y points down, so upward motion has dy < 0."""

    x: np.ndarray
    y: np.ndarray
    dx: np.ndarray
    dy: np.ndarray
    reliability: np.ndarray
    width: int
    height: int
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        x = np.asarray(self.x, dtype=np.int64).reshape(-1)
        y = np.asarray(self.y, dtype=np.int64).reshape(-1)
        dx = np.asarray(self.dx, dtype=np.float64).reshape(-1)
        dy = np.asarray(self.dy, dtype=np.float64).reshape(-1)
        rel = np.asarray(self.reliability, dtype=np.float64).reshape(-1)
        n = len(x)
        if not all(len(a) == n for a in (y, dx, dy, rel)):
            raise DimensionMismatch("motion field columns differ in length")
        if n:
            if x.min() < 0 or y.min() < 0 or x.max() >= self.width or y.max() >= self.height:
                raise DimensionMismatch("motion vector position outside the image")
            if not (np.all(np.isfinite(dx)) and np.all(np.isfinite(dy)) and np.all(np.isfinite(rel))):
                raise ValueError("non-finite motion vector component")
            if np.any(rel < 0):
                raise ValueError("negative reliability")
            keys = y * int(self.width) + x
            if len(np.unique(keys)) != n:
                raise ValueError("more than one vector at a grid position")
        for name, arr in zip(("x", "y", "dx", "dy", "reliability"), (x, y, dx, dy, rel)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "width", int(self.width))
        object.__setattr__(self, "height", int(self.height))

    def __len__(self):
        return len(self.x)

    @classmethod
    def empty(cls, width: int, height: int, meta: dict | None = None) -> "MotionField":
        z = np.zeros(0)
        return cls(z, z, z, z, z, width, height, meta or {})

    def magnitude(self) -> np.ndarray:
        return np.hypot(self.dx, self.dy)

    def scaled(self, s: float) -> "MotionField":
        return MotionField(self.x, self.y, self.dx * s, self.dy * s, self.reliability,
                           self.width, self.height, dict(self.meta))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["x", "y", "dx", "dy", "reliability"])
        for row in zip(self.x, self.y, self.dx, self.dy, self.reliability):
            w.writerow([int(row[0]), int(row[1]), repr(float(row[2])), repr(float(row[3])), repr(float(row[4]))])
        return buf.getvalue()

    def sidecar(self) -> dict:
        return {"width": self.width, "height": self.height, "count": len(self), **self.meta}

    @classmethod
    def from_csv(cls, text: str, width: int, height: int, meta: dict | None = None) -> "MotionField":
        rows = list(csv.reader(io.StringIO(text)))
        if not rows or [c.strip() for c in rows[0]] != ["x", "y", "dx", "dy", "reliability"]:
            raise ValueError("motion field CSV must start with header x,y,dx,dy,reliability")
        body = [r for r in rows[1:] if r]
        if not body:
            return cls.empty(width, height, meta)
        cols = list(zip(*body))
        return cls(np.array(cols[0], dtype=np.int64), np.array(cols[1], dtype=np.int64),
                   np.array(cols[2], dtype=np.float64), np.array(cols[3], dtype=np.float64),
                   np.array(cols[4], dtype=np.float64), width, height, meta or {})


def save_field(field_: MotionField, csv_path) -> None:
    from .util import atomic_write_text

    atomic_write_text(csv_path, field_.to_csv())
    atomic_write_text(str(csv_path) + ".json", json.dumps(field_.sidecar(), indent=2, sort_keys=True) + "\n")


def load_field(csv_path) -> MotionField:
    with open(str(csv_path) + ".json") as fh:
        side = json.load(fh)
    with open(csv_path) as fh:
        text = fh.read()
    width, height = side.pop("width"), side.pop("height")
    side.pop("count", None)
    return MotionField.from_csv(text, width, height, side)


def sample_grid(width: int, height: int, margin: int, stride: int):
    """Sample positions: multiples of ``stride`` at least ``margin`` px from every border."""
    first_x = -(-margin // stride) * stride
    first_y = -(-margin // stride) * stride
    xs = np.arange(first_x, width - margin, stride)
    ys = np.arange(first_y, height - margin, stride)
    gy, gx = np.meshgrid(ys, xs, indexing="ij")
    return gx.reshape(-1), gy.reshape(-1)


def _wrap(a: np.ndarray) -> np.ndarray:
    return np.angle(np.exp(1j * a))


def component_constraints(frames: np.ndarray, pair: GaborPair, xs: np.ndarray, ys: np.ndarray):
    """Per-sample phase measurements of one filter over the sequence.

    Returns ``(gx, gy, slope, residual, amplitude)`` arrays over the sample
    positions: the spatial phase gradient (rad/px, averaged over frames),
    the temporal phase slope (rad/frame), the mean squared residual of the
    linear phase fit (rad^2) and the smallest response magnitude across
    frames relative to the local mean magnitude of the filtered first frame
    (box window of the filter's support, so the gate does not depend on
    content far from the sample).
    """
    t_count = frames.shape[0]
    r_c = np.empty((t_count, len(xs)), dtype=np.complex128)
    r_xp = np.empty_like(r_c)
    r_xm = np.empty_like(r_c)
    r_yp = np.empty_like(r_c)
    r_ym = np.empty_like(r_c)
    local_mag = None
    for t in range(t_count):
        resp = filter_response(frames[t], pair)
        if t == 0:
            local_mag = uniform_filter(np.abs(resp), size=pair.support, mode="reflect")[ys, xs]
        r_c[t] = resp[ys, xs]
        r_xp[t] = resp[ys, xs + 1]
        r_xm[t] = resp[ys, xs - 1]
        r_yp[t] = resp[ys + 1, xs]
        r_ym[t] = resp[ys - 1, xs]

    gx = np.angle((r_xp * np.conj(r_xm)).sum(axis=0)) / 2.0
    gy = np.angle((r_yp * np.conj(r_ym)).sum(axis=0)) / 2.0

    dphi = np.angle(r_c[1:] * np.conj(r_c[:-1]))  # wrapped into (-pi, pi]
    psi = np.vstack([np.zeros((1, len(xs))), np.cumsum(dphi, axis=0)])
    t = np.arange(t_count, dtype=np.float64)
    tc = t - t.mean()
    slope = (tc[:, None] * psi).sum(axis=0) / (tc ** 2).sum()
    intercept = psi.mean(axis=0)
    resid = psi - (intercept[None, :] + slope[None, :] * tc[:, None])
    residual = (resid ** 2).mean(axis=0)

    amp = np.abs(r_c).min(axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        rel_amp = np.where(local_mag > AMPLITUDE_FLOOR, amp / local_mag, 0.0)
    return gx, gy, slope, residual, rel_amp


def estimate_flow(seq: GrayFrameSequence, bank: FilterBank | None = None,
                  cfg: FlowConfig | None = None) -> MotionField:
    """Cumulative neutral-to-apex displacement at reliable sample positions.

    Warns with ``EmptyField`` (and returns an empty field) when no position
    gathers enough reliable filters.
    """
    bank = bank or build_filter_bank()
    cfg = cfg or FlowConfig()
    n_frames = len(seq)
    if n_frames < cfg.min_frames:
        raise SequenceTooShort(f"{seq.sequence_id!r}: {n_frames} frames, flow needs >= {cfg.min_frames}")

    frames = seq.stack()
    margin = bank.support // 2 + 1
    xs, ys = sample_grid(seq.width, seq.height, margin, cfg.sample_stride)
    meta = {"sequence_id": seq.sequence_id, "frames": n_frames, "config": asdict(cfg), "bank": bank.describe()}
    if len(xs) == 0:
        warnings.warn(EmptyField(f"{seq.sequence_id!r}: image smaller than the filter support"), stacklevel=2)
        return MotionField.empty(seq.width, seq.height, meta)

    a11 = np.zeros(len(xs))
    a12 = np.zeros(len(xs))
    a22 = np.zeros(len(xs))
    b1 = np.zeros(len(xs))
    b2 = np.zeros(len(xs))
    n_valid = np.zeros(len(xs), dtype=np.int64)
    for pair in bank.filters:
        gx, gy, slope, residual, rel_amp = component_constraints(frames, pair, xs, ys)
        tuned = 2.0 * math.pi * pair.frequency
        along = np.abs(gx * math.cos(pair.orientation) + gy * math.sin(pair.orientation))
        gnorm = np.hypot(gx, gy)
        tol = cfg.frequency_tolerance
        ok = (
            (residual <= cfg.reliability_threshold)
            & (rel_amp >= cfg.min_amplitude)
            & (along >= (1.0 - tol) * tuned)
            & (gnorm <= (1.0 + tol) * tuned)
        )
        w = ok.astype(np.float64)
        a11 += w * gx * gx
        a12 += w * gx * gy
        a22 += w * gy * gy
        b1 += w * gx * (-slope)
        b2 += w * gy * (-slope)
        n_valid += ok

    tr = a11 + a22
    det = a11 * a22 - a12 * a12
    disc = np.sqrt(np.maximum((a11 - a22) ** 2 / 4.0 + a12 ** 2, 0.0))
    lam_min = tr / 2.0 - disc
    lam_max = tr / 2.0 + disc
    with np.errstate(divide="ignore", invalid="ignore"):
        cond_ok = lam_max > 0
        cond_ok &= lam_min >= cfg.min_conditioning * np.where(lam_max > 0, lam_max, 1.0)
    keep = (n_valid >= cfg.min_valid_filters) & cond_ok & (det > 0)
    if not np.any(keep):
        warnings.warn(EmptyField(f"{seq.sequence_id!r}: no reliable motion vectors"), stacklevel=2)
        return MotionField.empty(seq.width, seq.height, meta)

    d = det[keep]
    vx = (a22[keep] * b1[keep] - a12[keep] * b2[keep]) / d
    vy = (a11[keep] * b2[keep] - a12[keep] * b1[keep]) / d
    span = float(n_frames - 1)
    reliability = n_valid[keep] / float(len(bank.filters))
    return MotionField(xs[keep], ys[keep], vx * span, vy * span, reliability, seq.width, seq.height, meta)
