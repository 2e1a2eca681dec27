"""Repeated stratified k-fold cross-validation and confusion reporting."""

from __future__ import annotations

import json
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .. import rng as rngmod
from ..errors import FoldFailure, StratificationWarning
from ..features import COLLAPSE, CleaningPolicy, CleaningStats, Dataset, apply_cleaning, label_order
from ..learners import TrainerSpec, fit_model


@dataclass(frozen=True)
class CVConfig:
    folds: int = 10
    repeats: int = 50
    seed: int = 0
    stratified: bool = True
    group_by_subject: bool = False

    def __post_init__(self):
        if self.folds < 2:
            raise ValueError("folds must be >= 2")
        if self.repeats < 1:
            raise ValueError("repeats must be >= 1")

    @classmethod
    def from_dict(cls, d: dict) -> "CVConfig":
        return cls(**{k: d[k] for k in cls.__dataclass_fields__ if k in d})


def stratified_folds(labels, k: int, gen: np.random.Generator) -> list:
    """Partition record indices into ``k`` folds, class by class.

    Members of each class (classes in canonical order) are shuffled and
    dealt round-robin, continuing from the fold where the previous class
    stopped.  Per class, fold counts then differ by at most one, and so do
    the overall fold sizes.  ``labels`` may be a ``Dataset``.
    """
    if isinstance(labels, Dataset):
        labels = labels.labels
    n = len(labels)
    if k > n:
        raise ValueError(f"{k} folds for {n} records")
    labels = list(labels)
    buckets = [[] for _ in range(k)]
    offset = 0
    for c in label_order(labels):
        members = np.array([i for i, lab in enumerate(labels) if lab == c], dtype=np.int64)
        if len(members) < k:
            warnings.warn(StratificationWarning(
                f"class {c!r} has {len(members)} record(s) for {k} folds; {k - len(members)} fold(s) lack it"),
                stacklevel=2)
        for t, idx in enumerate(gen.permutation(members)):
            buckets[(offset + t) % k].append(int(idx))
        offset = (offset + len(members)) % k
    return [np.array(sorted(b), dtype=np.int64) for b in buckets]


def plain_folds(n: int, k: int, gen: np.random.Generator) -> list:
    perm = gen.permutation(n)
    return [np.sort(perm[f::k]) for f in range(k)]


def group_folds(groups: Sequence[str], k: int, gen: np.random.Generator) -> list:
    """Whole groups (e.g. subjects) dealt round-robin to folds after a shuffle."""
    uniq = sorted(set(groups))
    if len(uniq) < k:
        raise ValueError(f"{len(uniq)} groups cannot fill {k} folds")
    fold_of = {g: f % k for f, g in enumerate(uniq[i] for i in gen.permutation(len(uniq)))}
    buckets = [[] for _ in range(k)]
    for i, g in enumerate(groups):
        buckets[fold_of[g]].append(i)
    return [np.array(b, dtype=np.int64) for b in buckets]


def subject_of(sequence_id: str) -> str:
    """Subject key of a sequence id: the part before the first '/' (``S005/001`` -> ``S005``)."""
    return sequence_id.split("/", 1)[0]


def confusion_counts(y_true: np.ndarray, y_pred: np.ndarray, n_classes: int) -> np.ndarray:
    C = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(C, (y_true, y_pred), 1)
    return C


def row_percent(C: np.ndarray) -> np.ndarray:
    rows = C.sum(axis=1, keepdims=True).astype(np.float64)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(rows > 0, 100.0 * C / rows, 0.0)


def _std(a: np.ndarray, axis=0) -> np.ndarray:
    return a.std(axis=axis, ddof=1) if a.shape[axis] > 1 else np.zeros(np.delete(a.shape, axis))


@dataclass
class Summary:
    """Accuracies and confusion statistics over repeats, for one class taxonomy."""

    class_order: list
    per_repeat_accuracy: list
    confusion_mean: np.ndarray
    confusion_std: np.ndarray

    @property
    def mean_accuracy(self) -> float:
        return float(np.mean(self.per_repeat_accuracy))

    @property
    def std_accuracy(self) -> float:
        return float(_std(np.asarray(self.per_repeat_accuracy)))

    @classmethod
    def from_predictions(cls, y_true: np.ndarray, preds: list, classes: list) -> "Summary":
        K = len(classes)
        accs, confs = [], []
        for p in preds:
            accs.append(100.0 * float(np.mean(p == y_true)))
            confs.append(row_percent(confusion_counts(y_true, p, K)))
        confs = np.stack(confs)
        return cls(list(classes), accs, confs.mean(axis=0), _std(confs))

    def to_dict(self) -> dict:
        return {
            "class_order": self.class_order,
            "per_repeat_accuracy": self.per_repeat_accuracy,
            "mean_accuracy": self.mean_accuracy,
            "std_accuracy": self.std_accuracy,
            "confusion_mean": self.confusion_mean.tolist(),
            "confusion_std": self.confusion_std.tolist(),
        }

    def confusion_table(self, digits: int = 1) -> list:
        """Rows of "mean ± std" strings, headed by the class names."""
        rows = [["", *self.class_order]]
        for i, c in enumerate(self.class_order):
            rows.append([c, *(f"{self.confusion_mean[i, j]:.{digits}f} ± {self.confusion_std[i, j]:.{digits}f}"
                              for j in range(len(self.class_order)))])
        return rows


def misclassification_summary(summary: Summary, top: Optional[int] = None) -> list:
    """Largest off-diagonal cell of every confusion row, sorted by rate (descending)."""
    out = []
    M = summary.confusion_mean
    for i, c in enumerate(summary.class_order):
        off = M[i].copy()
        off[i] = -np.inf
        j = int(np.argmax(off))
        if off[j] > 0:
            out.append({"emotion": c, "confused_with": summary.class_order[j], "rate": float(off[j])})
    out.sort(key=lambda r: -r["rate"])
    return out[:top] if top else out


@dataclass
class EvalReport:
    summary: Summary
    collapsed: Optional[Summary] = None
    metadata: dict = field(default_factory=dict)

    @property
    def per_repeat_accuracy(self) -> list:
        return self.summary.per_repeat_accuracy

    @property
    def mean_accuracy(self) -> float:
        return self.summary.mean_accuracy

    @property
    def std_accuracy(self) -> float:
        return self.summary.std_accuracy

    @property
    def class_order(self) -> list:
        return self.summary.class_order

    @property
    def confusion(self) -> np.ndarray:
        return self.summary.confusion_mean

    def to_dict(self) -> dict:
        d = {"metadata": self.metadata, **self.summary.to_dict()}
        if self.collapsed is not None:
            d["collapsed"] = self.collapsed.to_dict()
            d["collapsed"]["misclassifications"] = misclassification_summary(self.collapsed)
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def _can_collapse(classes) -> bool:
    return all(c in COLLAPSE for c in classes) and len({COLLAPSE[c] for c in classes}) < len(classes)


def run_cv(data: Dataset, trainer: TrainerSpec, cv: CVConfig = CVConfig(),
           cleaning: Optional[CleaningPolicy] = CleaningPolicy(), workers: int = 1,
           metadata: Optional[dict] = None) -> EvalReport:
    """Repeated k-fold CV of ``trainer`` on ``data``.

    Records are first put in a canonical order (sequence id, then values),
    so the input order never matters.  Repeat ``r`` draws its folds from
    the stream ``(seed, r)``; the network seed of fold ``f`` is derived from
    ``(seed, r, f)``.  Cleaning statistics and standardization come from
    the training part of each fold only.  Repeats may run on ``workers``
    threads; results are reduced in repeat order.
    """
    order = data.canonical_order()
    D = data.subset(order)
    classes = D.class_set
    if len(classes) < 2:
        raise ValueError("cross-validation needs at least two classes")
    y = D.y_index(classes)
    n = len(D)
    groups = [subject_of(i) for i in D.ids] if cv.group_by_subject else None

    def run_repeat(r: int) -> np.ndarray:
        gen = rngmod.stream(cv.seed, r)
        if groups is not None:
            folds = group_folds(groups, cv.folds, gen)
        elif cv.stratified:
            folds = stratified_folds(D.labels, cv.folds, gen)
        else:
            folds = plain_folds(n, cv.folds, gen)
        pred = np.full(n, -1, dtype=np.int64)
        for f, test in enumerate(folds):
            if len(test) == 0:
                continue
            mask = np.ones(n, dtype=bool)
            mask[test] = False
            train = np.flatnonzero(mask)
            try:
                Xtr, Xte = D.X[train], D.X[test]
                if cleaning is not None:
                    stats = CleaningStats.fit(Xtr)
                    Xtr = apply_cleaning(Xtr, stats, cleaning)[0]
                    Xte = apply_cleaning(Xte, stats, cleaning)[0]
                model = fit_model(trainer, D.subset(train).with_X(Xtr), classes=classes,
                                  seed=rngmod.derive_seed(cv.seed, r, f))
                pred[test] = model.predict_index(Xte)
            except FoldFailure:
                raise
            except Exception as exc:
                raise FoldFailure(r, f, exc) from exc
        return pred

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", StratificationWarning)
        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                preds = list(pool.map(run_repeat, range(cv.repeats)))
        else:
            preds = [run_repeat(r) for r in range(cv.repeats)]
    counts = np.bincount(y, minlength=len(classes))
    if counts.min() < cv.folds and cv.stratified and not cv.group_by_subject:
        warnings.warn(StratificationWarning("some classes are smaller than the fold count"), stacklevel=2)

    summary = Summary.from_predictions(y, preds, classes)
    collapsed = None
    if _can_collapse(classes):
        cclasses = label_order({COLLAPSE[c] for c in classes})
        cmap = np.array([cclasses.index(COLLAPSE[c]) for c in classes])
        collapsed = Summary.from_predictions(cmap[y], [cmap[p] for p in preds], cclasses)
    meta = {
        "trainer": trainer.to_dict(),
        "family": trainer.family,
        "folds": cv.folds,
        "repeats": cv.repeats,
        "seed": cv.seed,
        "stratified": cv.stratified,
        "group_by_subject": cv.group_by_subject,
        "records": n,
        "feature_count": D.n_features,
        "cleaning": None if cleaning is None else {"outlier_sigma": cleaning.outlier_sigma,
                                                   "extreme_sigma": cleaning.extreme_sigma,
                                                   "missing_fill": cleaning.missing_fill},
    }
    meta.update(metadata or {})
    return EvalReport(summary, collapsed, meta)


def report_from_dict(d: dict) -> EvalReport:
    def summ(s):
        return Summary(s["class_order"], s["per_repeat_accuracy"], np.array(s["confusion_mean"]),
                       np.array(s["confusion_std"]))

    return EvalReport(summ(d), summ(d["collapsed"]) if d.get("collapsed") else None, d.get("metadata", {}))
