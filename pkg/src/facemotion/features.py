"""Per-segment motion statistics, dataset cleaning and the emotion taxonomy.

For a motion field with ``N`` vectors and a segment holding ``N_ij`` of
them, the segment contributes three features:

    P  = N_ij / N                      (share of ALL vectors, so sum(P) <= 1)
    LX = mean dx over the segment's vectors
    LY = mean dy over the segment's vectors (y down: upward motion < 0)

A segment without vectors has ``P = 0`` and missing ``LX``/``LY`` (NaN);
cleaning fills missing values with 0.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import DimensionMismatch, EmptyMotionField, FeatureFileError, MissingLabel
from .facegrid import SegmentationLayout
from .optflow import MotionField

LABELS_12 = (
    "AngerT1", "AngerT2", "Disgust", "FearT1", "FearT2", "HappinessT1", "HappinessT2",
    "SadnessT1", "SadnessT2", "SadnessT3", "SadnessT4", "Surprise",
)
LABELS_6 = ("Anger", "Disgust", "Fear", "Happiness", "Sadness", "Surprise")

COLLAPSE = {
    "AngerT1": "Anger", "AngerT2": "Anger",
    "Disgust": "Disgust",
    "FearT1": "Fear", "FearT2": "Fear",
    "HappinessT1": "Happiness", "HappinessT2": "Happiness",
    "SadnessT1": "Sadness", "SadnessT2": "Sadness", "SadnessT3": "Sadness", "SadnessT4": "Sadness",
    "Surprise": "Surprise",
}
# collapsed labels map onto themselves so collapse is idempotent
COLLAPSE.update({c: c for c in LABELS_6})

KINDS = ("P", "LX", "LY")


def check_label(label: Optional[str]) -> Optional[str]:
    if label is None or label == "":
        return None
    if label not in COLLAPSE:
        raise ValueError(f"unknown emotion label {label!r}")
    return label


def collapse_label(label: str) -> str:
    if label is None or label == "":
        raise MissingLabel("cannot collapse an unlabeled record")
    return COLLAPSE[check_label(label)]


def label_order(labels: Iterable[str]) -> list:
    """Labels present, in canonical taxonomy order (unknown labels sorted after)."""
    present = set(labels)
    canon = LABELS_6 if present <= set(LABELS_6) else list(dict.fromkeys(LABELS_12 + LABELS_6))
    known = [c for c in canon if c in present]
    return known + sorted(present - set(known))


def feature_names(layout_keys: Sequence[tuple]) -> list:
    return [f"A{a}S{s}_{k}" for a, s in layout_keys for k in KINDS]


@dataclass
class FeatureRecord:
    values: np.ndarray
    label: Optional[str] = None
    sequence_id: str = ""

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64).reshape(-1)
        self.label = check_label(self.label)


def extract_features(field_: MotionField, layout: SegmentationLayout, label: Optional[str] = None,
                     sequence_id: str = "") -> FeatureRecord:
    if (field_.width, field_.height) != (layout.width, layout.height):
        raise DimensionMismatch(
            f"motion field is {field_.width}x{field_.height}, layout is {layout.width}x{layout.height}")
    n = len(field_)
    if n == 0:
        raise EmptyMotionField(f"{sequence_id or 'field'}: no motion vectors")
    k = len(layout.segments)
    seg = layout.label_map()[field_.y, field_.x]
    inside = seg >= 0
    counts = np.bincount(seg[inside], minlength=k).astype(np.float64)
    sx = np.bincount(seg[inside], weights=field_.dx[inside], minlength=k)
    sy = np.bincount(seg[inside], weights=field_.dy[inside], minlength=k)
    out = np.empty((k, 3))
    out[:, 0] = counts / n
    with np.errstate(invalid="ignore", divide="ignore"):
        out[:, 1] = np.where(counts > 0, sx / counts, np.nan)
        out[:, 2] = np.where(counts > 0, sy / counts, np.nan)
    return FeatureRecord(out.reshape(-1), label, sequence_id or field_.meta.get("sequence_id", ""))


def fill_missing(values: np.ndarray, fill: float = 0.0) -> np.ndarray:
    v = np.array(values, dtype=np.float64, copy=True)
    v[np.isnan(v)] = fill
    return v


@dataclass
class Dataset:
    """Feature matrix plus labels; row order is the record order."""

    X: np.ndarray
    labels: list
    ids: list
    names: list

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=np.float64)
        if self.X.ndim != 2:
            raise DimensionMismatch("feature matrix must be 2-D")
        n, d = self.X.shape
        self.labels = [check_label(lab) for lab in self.labels]
        self.ids = [str(i) for i in self.ids]
        if len(self.labels) != n or len(self.ids) != n:
            raise DimensionMismatch("labels/ids length differs from record count")
        if len(self.names) != d:
            raise DimensionMismatch(f"{len(self.names)} feature names for {d} columns")

    def __len__(self):
        return self.X.shape[0]

    @property
    def n_features(self) -> int:
        return self.X.shape[1]

    @property
    def class_set(self) -> list:
        return label_order(lab for lab in self.labels if lab is not None)

    @classmethod
    def from_records(cls, records: Sequence[FeatureRecord], names: Optional[Sequence[str]] = None) -> "Dataset":
        if not records:
            raise ValueError("no records")
        d = len(records[0].values)
        if any(len(r.values) != d for r in records):
            raise DimensionMismatch("records differ in dimensionality")
        if names is None:
            if d % 3:
                raise DimensionMismatch("feature count is not a multiple of 3")
            names = [f"F{i}" for i in range(d)]
        return cls(np.vstack([r.values for r in records]), [r.label for r in records],
                   [r.sequence_id for r in records], list(names))

    def records(self) -> list:
        return [FeatureRecord(self.X[i].copy(), self.labels[i], self.ids[i]) for i in range(len(self))]

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx, dtype=np.int64)
        return Dataset(self.X[idx], [self.labels[i] for i in idx], [self.ids[i] for i in idx], list(self.names))

    def with_X(self, X: np.ndarray) -> "Dataset":
        return Dataset(X, list(self.labels), list(self.ids), list(self.names))

    def collapsed(self) -> "Dataset":
        return Dataset(self.X.copy(), [collapse_label(lab) for lab in self.labels], list(self.ids), list(self.names))

    def y_index(self, classes: Optional[Sequence[str]] = None) -> np.ndarray:
        classes = list(classes or self.class_set)
        pos = {c: i for i, c in enumerate(classes)}
        if any(lab is None for lab in self.labels):
            raise MissingLabel("dataset contains unlabeled records")
        return np.array([pos[lab] for lab in self.labels], dtype=np.int64)

    def canonical_order(self) -> np.ndarray:
        """Row permutation sorting by (sequence id, raw values); independent of input order."""
        keys = [(self.ids[i], self.X[i].tobytes()) for i in range(len(self))]
        return np.array(sorted(range(len(self)), key=lambda i: keys[i]), dtype=np.int64)


def collapse_labels(record: FeatureRecord) -> FeatureRecord:
    return FeatureRecord(record.values.copy(), collapse_label(record.label), record.sequence_id)


# -- cleaning -----------------------------------------------------------------

@dataclass(frozen=True)
class CleaningPolicy:
    outlier_sigma: float = 3.0
    extreme_sigma: float = 5.0
    missing_fill: float = 0.0

    def __post_init__(self):
        if not (self.extreme_sigma > self.outlier_sigma > 0):
            raise ValueError("need extreme_sigma > outlier_sigma > 0")

    @classmethod
    def from_dict(cls, d: dict) -> "CleaningPolicy":
        return cls(**{k: d[k] for k in cls.__dataclass_fields__ if k in d})


@dataclass
class CleaningStats:
    """Column means and population standard deviations, NaNs ignored."""

    mean: np.ndarray
    std: np.ndarray

    @property
    def zero_variance(self) -> np.ndarray:
        return ~(self.std > 0)

    @classmethod
    def fit(cls, X: np.ndarray) -> "CleaningStats":
        X = np.asarray(X, dtype=np.float64)
        mean = np.zeros(X.shape[1])
        std = np.zeros(X.shape[1])
        present = ~np.all(np.isnan(X), axis=0)
        mean[present] = np.nanmean(X[:, present], axis=0)
        std[present] = np.nanstd(X[:, present], axis=0)
        const = np.zeros(X.shape[1], dtype=bool)
        const[present] = np.nanmax(X[:, present], axis=0) == np.nanmin(X[:, present], axis=0)
        std[const] = 0.0
        return cls(mean, std)


@dataclass
class CleaningAudit:
    names: list
    clamped: np.ndarray
    discarded: np.ndarray
    filled: np.ndarray
    zero_variance: list
    stats: CleaningStats = field(repr=False)

    def to_dict(self) -> dict:
        cols = {}
        for j, name in enumerate(self.names):
            c, d, f = int(self.clamped[j]), int(self.discarded[j]), int(self.filled[j])
            if c or d or f:
                cols[name] = {"clamped": c, "discarded": d, "missing_filled": f}
        return {
            "clamped_total": int(self.clamped.sum()),
            "discarded_total": int(self.discarded.sum()),
            "missing_filled_total": int(self.filled.sum()),
            "zero_variance_columns": list(self.zero_variance),
            "columns": cols,
            "note": "values beyond the extreme limit are discarded (set to the missing fill); records are kept",
        }


def apply_cleaning(X: np.ndarray, stats: CleaningStats, policy: CleaningPolicy = CleaningPolicy()):
    """Clamp outliers, discard extremes and fill missing values using frozen ``stats``.

    Returns ``(X_clean, clamped, discarded, filled)`` with per-column counts.
    A value exactly at ``mean + outlier_sigma * std`` is kept as is.
    """
    X = np.array(X, dtype=np.float64, copy=True)
    active = ~stats.zero_variance
    mean, std = stats.mean[active], stats.std[active]
    sub = X[:, active]
    z = (sub - mean) / std
    absz = np.abs(z)
    with np.errstate(invalid="ignore"):
        extreme = absz > policy.extreme_sigma
        outlier = (absz > policy.outlier_sigma) & ~extreme
    lo = mean - policy.outlier_sigma * std
    hi = mean + policy.outlier_sigma * std
    sub = np.where(outlier & (z > 0), hi, sub)
    sub = np.where(outlier & (z < 0), lo, sub)
    sub = np.where(extreme, np.nan, sub)
    X[:, active] = sub
    clamped = np.zeros(X.shape[1], dtype=np.int64)
    discarded = np.zeros(X.shape[1], dtype=np.int64)
    clamped[active] = outlier.sum(axis=0)
    discarded[active] = extreme.sum(axis=0)
    missing = np.isnan(X)
    filled = missing.sum(axis=0) - discarded
    X[missing] = policy.missing_fill
    return X, clamped, discarded, filled


def clean_dataset(data: Dataset, policy: CleaningPolicy = CleaningPolicy(), stats: Optional[CleaningStats] = None):
    """Clean every column of ``data``; statistics come from ``data`` unless given."""
    if len(data) < 2:
        raise ValueError("cleaning needs at least 2 records")
    stats = stats or CleaningStats.fit(data.X)
    X, clamped, discarded, filled = apply_cleaning(data.X, stats, policy)
    zero_var = [data.names[j] for j in np.flatnonzero(stats.zero_variance)]
    audit = CleaningAudit(list(data.names), clamped, discarded, filled, zero_var, stats)
    return data.with_X(X), audit


# -- CSV interchange ----------------------------------------------------------

def _fmt(v: float) -> str:
    return repr(float(v))


def dataset_to_csv(data: Dataset) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["sequence_id", "label", *data.names])
    for i in range(len(data)):
        w.writerow([data.ids[i], data.labels[i] or "", *(_fmt(v) for v in data.X[i])])
    return buf.getvalue()


def dataset_from_csv(text: str) -> Dataset:
    rows = [r for r in csv.reader(io.StringIO(text)) if r]
    if not rows or rows[0][:2] != ["sequence_id", "label"]:
        raise FeatureFileError("feature CSV must start with columns sequence_id,label")
    names = rows[0][2:]
    body = rows[1:]
    try:
        X = np.array([[float(v) for v in r[2:]] for r in body], dtype=np.float64).reshape(len(body), len(names))
        return Dataset(X, [r[1] or None for r in body], [r[0] for r in body], names)
    except ValueError as exc:
        raise FeatureFileError(f"bad feature CSV: {exc}") from exc


def read_dataset(path) -> Dataset:
    with open(path, newline="") as fh:
        return dataset_from_csv(fh.read())


def write_dataset(path, data: Dataset) -> None:
    from .util import atomic_write_text

    atomic_write_text(path, dataset_to_csv(data))
