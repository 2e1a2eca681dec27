"""Synthetic data: class prototypes, feature-level samples and rendered sequences.

The prototype bank holds the published per-class mean (P, LX, LY) of every
segment of the situation-19 grid.  ``generate_synthetic`` draws noisy
feature records around those means; ``render_sequence`` goes one level
lower and renders a textured image sequence whose segments move by the
prototype displacements, so the whole image-to-report pipeline can run
without the original face recordings.
"""

from __future__ import annotations

import math
import os
import re
from dataclasses import dataclass, field
from importlib import resources
from typing import Optional, Sequence

import numpy as np
from scipy.ndimage import gaussian_filter, map_coordinates

from . import rng as rngmod
from .facegrid import FaceAxes, build_layout, situation
from .features import KINDS, LABELS_12, Dataset, feature_names
from .seqio import GrayFrameSequence, write_image
from .util import write_json

PROTOTYPE_SITUATION = 19
_FEATURE_RE = re.compile(r"^(P|LX|LY)\b")


@dataclass
class PrototypeBank:
    """Mean (P, LX, LY) per (label, area, segment); NaN where a cell was excluded."""

    labels: tuple
    keys: tuple  # (area, segment) in canonical order
    means: np.ndarray  # (labels, segments, 3)
    audit: list = field(default_factory=list)

    def prototype(self, label: str) -> np.ndarray:
        return self.means[self.labels.index(label)].reshape(-1)

    def triplet(self, label: str, area: int, segment: int) -> tuple:
        v = self.means[self.labels.index(label), self.keys.index((area, segment))]
        return tuple(float(x) for x in v)

    @property
    def names(self) -> list:
        return feature_names(self.keys)


def parse_prototype_table(text: str) -> PrototypeBank:
    """Parse the tab-separated prototype table.

    Row groups (P, LX, LY for one segment) are assigned to areas 1..6 and
    segments 1..4 in the order they appear, whatever area number is
    printed.  Cells in the trailing unnamed column, or that fail to parse,
    are recorded in ``audit``; an unparseable named cell leaves that
    (label, segment) pair as NaN rather than guessing.
    """
    labels = LABELS_12
    spec = situation(PROTOTYPE_SITUATION)
    per_area = spec.segments_per_area(1)
    keys = tuple((a, s) for a in range(1, 7) for s in range(1, per_area + 1))
    means = np.full((len(labels), len(keys), 3), np.nan)
    audit = []
    bad = set()
    group = -1
    seen_kinds: set = set()
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip() or line.startswith("#"):
            continue
        cells = line.split("\t")
        fidx = next((i for i, c in enumerate(cells) if _FEATURE_RE.match(c.strip())), None)
        if fidx is None:
            audit.append({"line": lineno, "issue": "no feature column", "text": line})
            continue
        kind = _FEATURE_RE.match(cells[fidx].strip()).group(1)
        if kind == "P" or kind in seen_kinds:
            group += 1
            seen_kinds = set()
        seen_kinds.add(kind)
        if group >= len(keys):
            audit.append({"line": lineno, "issue": "row beyond the expected 24 segments"})
            continue
        area, seg = keys[group]
        printed = [c.strip() for c in cells[:fidx] if c.strip()]
        if kind == "P" and printed and printed[0] != str(area) and len(printed) == 2:
            audit.append({"line": lineno, "issue": "printed area renumbered",
                          "printed": "/".join(printed), "assigned": f"{area}/{seg}"})
        if cells[fidx].strip() != kind:
            audit.append({"line": lineno, "issue": "stray characters in feature name",
                          "printed": cells[fidx].strip(), "assigned": kind})
        values = [c.strip() for c in cells[fidx + 1:] if c.strip()]
        for j, raw in enumerate(values):
            if j >= len(labels):
                audit.append({"line": lineno, "issue": "cell in unnamed column excluded",
                              "segment": f"A{area}S{seg}_{kind}", "value": raw})
                continue
            try:
                means[j, group, KINDS.index(kind)] = float(raw)
            except ValueError:
                audit.append({"line": lineno, "issue": "unparseable cell excluded",
                              "segment": f"A{area}S{seg}", "label": labels[j], "value": raw})
                bad.add((j, group))
        if len(values) < len(labels):
            audit.append({"line": lineno, "issue": "row has too few cells",
                          "segment": f"A{area}S{seg}_{kind}"})
    for j, g in bad:
        means[j, g, :] = np.nan
    return PrototypeBank(labels, keys, means, audit)


def load_prototypes() -> PrototypeBank:
    text = resources.files("facemotion").joinpath("data/prototypes_s19.tsv").read_text()
    return parse_prototype_table(text)


def generate_synthetic(bank: Optional[PrototypeBank] = None, n_per_class: int = 40,
                       noise_sigma: float = 0.05, seed: int = 0) -> Dataset:
    """``n_per_class`` records per label: prototype mean plus i.i.d. Gaussian noise.

    Draw order is fixed (labels in taxonomy order, one ``(n, d)`` block each)
    and P features are clamped at 0.
    """
    if noise_sigma < 0:
        raise ValueError("noise_sigma must be >= 0")
    bank = bank or load_prototypes()
    gen = rngmod.stream(seed, 0)
    rows, labels, ids = [], [], []
    is_p = np.array([k == "P" for _ in bank.keys for k in KINDS])
    for label in bank.labels:
        proto = bank.prototype(label)
        noise = gen.standard_normal((n_per_class, proto.size))
        block = proto[None, :] + noise_sigma * noise
        block[:, is_p] = np.maximum(block[:, is_p], 0.0)
        rows.append(block)
        labels += [label] * n_per_class
        ids += [f"synth-{label}-{i:04d}" for i in range(n_per_class)]
    return Dataset(np.vstack(rows), labels, ids, bank.names)


# -- image-level synthesis ----------------------------------------------------

def band_limited_texture(height: int, width: int, seed: int, cutoff: float = 0.2) -> np.ndarray:
    """Fourier coefficients of a random texture with a Gaussian spectral roll-off."""
    gen = rngmod.stream(seed, 1)
    spec = np.fft.fft2(gen.standard_normal((height, width)))
    fy = np.fft.fftfreq(height)[:, None]
    fx = np.fft.fftfreq(width)[None, :]
    spec *= np.exp(-4.0 * (np.hypot(fx, fy) / cutoff) ** 2)
    return spec


def fourier_shift(spec: np.ndarray, sx: float, sy: float) -> np.ndarray:
    """Exact (periodic) sub-pixel translation of a texture given by its spectrum."""
    h, w = spec.shape
    fy = np.fft.fftfreq(h)[:, None]
    fx = np.fft.fftfreq(w)[None, :]
    return np.real(np.fft.ifft2(spec * np.exp(-2j * math.pi * (fx * sx + fy * sy))))


def _normalise(img: np.ndarray, ref: np.ndarray, lo: float, hi: float) -> np.ndarray:
    a, b = ref.min(), ref.max()
    return np.clip((img - a) / (b - a) * (hi - lo) + lo, 0.0, 1.0)


def translating_sequence(height: int, width: int, velocity: tuple, n_frames: int = 5, seed: int = 0,
                         lo: float = 0.2, hi: float = 0.8) -> GrayFrameSequence:
    """Texture moving rigidly by ``velocity`` = (vx, vy) px per frame."""
    spec = band_limited_texture(height, width, seed)
    base = fourier_shift(spec, 0.0, 0.0)
    frames = tuple(_normalise(fourier_shift(spec, t * velocity[0], t * velocity[1]), base, lo, hi)
                   for t in range(n_frames))
    return GrayFrameSequence(frames, sequence_id=f"translate-{velocity[0]}-{velocity[1]}")


def brightness_ramp_sequence(height: int, width: int, factor: float = 1.1, n_frames: int = 5,
                             seed: int = 0) -> GrayFrameSequence:
    """Static texture whose intensities are multiplied by ``factor`` every frame."""
    spec = band_limited_texture(height, width, seed)
    base = fourier_shift(spec, 0.0, 0.0)
    top = 0.95 / factor ** (n_frames - 1)
    first = _normalise(base, base, 0.1 * top, top)
    frames = tuple(np.clip(first * factor ** t, 0.0, 1.0) for t in range(n_frames))
    return GrayFrameSequence(frames, sequence_id=f"brightness-x{factor}")


# Geometry of rendered faces: eye axis, mouth axis and midline leave room for
# the 2x2 grid of 30 px segments around every axis plus the flow filter margin.
RENDER_WIDTH = 180
RENDER_HEIGHT = 220
RENDER_AXES = FaceAxes((60.0, 75.0), (120.0, 75.0), 145.0)
RENDER_BORDER = 10


def displacement_field(label: str, bank: PrototypeBank, axes: FaceAxes, width: int, height: int,
                       gain: float = 1.0, smooth: float = 3.0) -> np.ndarray:
    """(2, H, W) cumulative displacement: each segment moves by its prototype (LX, LY)."""
    layout = build_layout(axes, situation(PROTOTYPE_SITUATION), width, height)
    proto = bank.means[bank.labels.index(label)]
    disp = np.zeros((2, height, width))
    for k, seg in enumerate(layout.segments):
        r = seg.rect
        _, lx, ly = np.nan_to_num(proto[k])
        disp[0, r.y:r.y1, r.x:r.x1] = gain * lx
        disp[1, r.y:r.y1, r.x:r.x1] = gain * ly
    if smooth > 0:
        disp = np.stack([gaussian_filter(d, smooth, mode="nearest") for d in disp])
    return disp


def render_sequence(label: str, bank: Optional[PrototypeBank] = None, n_frames: int = 5, seed: int = 0,
                    gain: float = 1.0, jitter: float = 0.15, noise: float = 0.004,
                    border: int = RENDER_BORDER) -> tuple:
    """Render one synthetic expression episode.

    Returns ``(frames, axes, crop)`` where the frames include a ``border``
    px frame around the face box, ``axes`` are in full-frame coordinates
    and ``crop`` is the face rectangle (x, y, w, h).  ``jitter`` scales the
    per-episode random variation of the displacement (relative), ``noise``
    is the per-frame sensor noise standard deviation.
    """
    bank = bank or load_prototypes()
    gen = rngmod.stream(seed, 2)
    w, h = RENDER_WIDTH, RENDER_HEIGHT
    disp = displacement_field(label, bank, RENDER_AXES, w, h, gain=gain)
    disp = disp * (1.0 + jitter * gen.standard_normal())
    W, H = w + 2 * border, h + 2 * border
    full = np.zeros((2, H, W))
    full[:, border:border + h, border:border + w] = disp
    tex = np.real(np.fft.ifft2(band_limited_texture(H, W, int(gen.integers(2 ** 31)))))
    tex = _normalise(tex, tex, 0.15, 0.85)
    yy, xx = np.mgrid[0:H, 0:W].astype(np.float64)
    frames = []
    for t in range(n_frames):
        s = t / (n_frames - 1)
        img = map_coordinates(tex, [yy - s * full[1], xx - s * full[0]], order=3, mode="reflect")
        img = img + noise * gen.standard_normal(img.shape)
        frames.append(np.clip(img, 0.0, 1.0))
    axes = RENDER_AXES.shifted(border, border)
    return frames, axes, (border, border, w, h)


def write_synthetic_manifest(out_dir, n_per_class: int = 2, seed: int = 0,
                             labels: Sequence[str] = LABELS_12, n_frames: int = 5, fmt: str = "pgm",
                             situation_id: int = 17, extra: Optional[dict] = None) -> str:
    """Render sequences to ``out_dir/frames/<id>/`` and write ``out_dir/manifest.json``."""
    bank = load_prototypes()
    entries = []
    for li, label in enumerate(labels):
        for i in range(n_per_class):
            sid = f"{label}-{i:03d}"
            frames, axes, crop = render_sequence(label, bank, n_frames=n_frames,
                                                 seed=rngmod.derive_seed(seed, li, i))
            d = os.path.join(out_dir, "frames", sid)
            os.makedirs(d, exist_ok=True)
            for t, f in enumerate(frames):
                write_image(os.path.join(d, f"frame_{t:02d}.{fmt}"), f)
            entries.append({"sequence_id": sid, "frames": f"frames/{sid}/*.{fmt}", "label": label,
                            "axes": axes.to_dict(), "crop": list(crop)})
    manifest = {"sequences": entries, "situation": situation_id, "seed": seed}
    if extra:
        manifest.update(extra)
    path = os.path.join(out_dir, "manifest.json")
    write_json(path, manifest)
    return path
