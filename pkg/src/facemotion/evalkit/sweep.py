"""Situation sweeps: one CV report per (grid spec, trainer), tabulated."""

from __future__ import annotations

import csv
import io
import warnings
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from ..errors import EmptyField
from ..facegrid import FaceAxes, GridSpec, build_layout
from ..features import CleaningPolicy, Dataset, extract_features, feature_names
from ..learners import TrainerSpec
from .cv import CVConfig, run_cv


def pooled_std(stds) -> float:
    """Root mean square of per-cell stds: the spread of an average of equally weighted cells."""
    s = np.asarray(stds, dtype=np.float64)
    return float(np.sqrt(np.mean(s ** 2)))


def _cell(mean: float, std: float, digits: int) -> str:
    return f"{mean:.{digits}f} ± {std:.{digits}f}"


@dataclass
class SweepTable:
    specs: list
    trainers: list
    reports: dict  # (spec index, trainer name) -> EvalReport

    def situation_label(self, i: int) -> str:
        s = self.specs[i].situation
        return str(s if s is not None else i + 1)

    def means(self) -> np.ndarray:
        return np.array([[self.reports[i, t.name].mean_accuracy for t in self.trainers]
                         for i in range(len(self.specs))])

    def stds(self) -> np.ndarray:
        return np.array([[self.reports[i, t.name].std_accuracy for t in self.trainers]
                         for i in range(len(self.specs))])

    def best(self) -> dict:
        """Trainer name -> index of its best spec (first maximum wins)."""
        M = self.means()
        return {t.name: int(np.argmax(M[:, j])) for j, t in enumerate(self.trainers)}

    def overall(self) -> dict:
        M, S = self.means(), self.stds()
        return {
            "per_trainer": {t.name: {"mean": float(M[:, j].mean()), "std": pooled_std(S[:, j])}
                            for j, t in enumerate(self.trainers)},
            "per_situation": [{"mean": float(M[i].mean()), "std": pooled_std(S[i])} for i in range(len(self.specs))],
            "all": {"mean": float(M.mean()), "std": pooled_std(S)},
        }

    def to_csv(self, digits: int = 1) -> str:
        """Rows are situations, columns trainers; cells "mean ± std"; best cell per column starred."""
        M, S = self.means(), self.stds()
        best = self.best()
        ov = self.overall()
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["situation", "feature_count", *[t.name for t in self.trainers], "overall_avg"])
        for i, spec in enumerate(self.specs):
            cells = []
            for j, t in enumerate(self.trainers):
                c = _cell(M[i, j], S[i, j], digits)
                cells.append(c + " *" if best[t.name] == i else c)
            o = ov["per_situation"][i]
            w.writerow([self.situation_label(i), spec.feature_count, *cells, _cell(o["mean"], o["std"], digits)])
        w.writerow(["overall_avg", "",
                    *[_cell(ov["per_trainer"][t.name]["mean"], ov["per_trainer"][t.name]["std"], digits)
                      for t in self.trainers],
                    _cell(ov["all"]["mean"], ov["all"]["std"], digits)])
        return buf.getvalue()

    def series_csv(self) -> str:
        """Accuracy against feature count, one row per (spec, trainer), ordered by feature count."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["feature_count", "trainer", "mean_accuracy"])
        order = sorted(range(len(self.specs)), key=lambda i: (self.specs[i].feature_count, i))
        for i in order:
            for t in self.trainers:
                w.writerow([self.specs[i].feature_count, t.name, repr(float(self.reports[i, t.name].mean_accuracy))])
        return buf.getvalue()

    def to_dict(self) -> dict:
        best = self.best()
        return {
            "situations": [{"situation": self.situation_label(i), "spec": s.to_dict(),
                            "feature_count": s.feature_count} for i, s in enumerate(self.specs)],
            "trainers": [t.to_dict() for t in self.trainers],
            "cells": [{"situation": self.situation_label(i), "trainer": t.name,
                       "mean_accuracy": self.reports[i, t.name].mean_accuracy,
                       "std_accuracy": self.reports[i, t.name].std_accuracy}
                      for i in range(len(self.specs)) for t in self.trainers],
            "best": {name: self.situation_label(i) for name, i in best.items()},
            "overall": self.overall(),
        }


def _as_spec(t) -> TrainerSpec:
    return t if isinstance(t, TrainerSpec) else TrainerSpec(str(t))


def dataset_for_spec(sequences: Sequence[tuple], spec: GridSpec) -> Dataset:
    """Features of every (field, label, axes[, sequence_id]) under one grid spec.

    Sequences whose field is empty are skipped with an ``EmptyField`` warning.
    """
    records, names = [], None
    for k, item in enumerate(sequences):
        fld, label, axes = item[:3]
        sid = item[3] if len(item) > 3 else fld.meta.get("sequence_id", f"seq-{k:04d}")
        if len(fld) == 0:
            warnings.warn(EmptyField(f"{sid}: empty motion field skipped"), stacklevel=2)
            continue
        axes = axes if isinstance(axes, FaceAxes) else FaceAxes.from_dict(axes)
        layout = build_layout(axes, spec, fld.width, fld.height)
        if names is None:
            names = feature_names(layout.keys())
        records.append(extract_features(fld, layout, label, sid))
    if not records:
        raise ValueError("no usable sequences for the sweep")
    return Dataset.from_records(records, names)


def sweep_datasets(items: Sequence[tuple], trainers: Sequence, cv: CVConfig = CVConfig(),
                   cleaning: Optional[CleaningPolicy] = CleaningPolicy(), workers: int = 1) -> SweepTable:
    """``items`` are (GridSpec, Dataset) pairs, already extracted."""
    if not items or not trainers:
        raise ValueError("sweep needs at least one spec and one trainer")
    specs = [_as_spec(t) for t in trainers]
    reports = {}
    for i, (spec, data) in enumerate(items):
        for t in specs:
            reports[i, t.name] = run_cv(data, t, cv, cleaning, workers,
                                        metadata={"situation": spec.situation, "grid": spec.to_dict()})
    return SweepTable([s for s, _ in items], specs, reports)


def sweep_situations(sequences: Sequence[tuple], specs: Sequence[GridSpec], trainers: Sequence,
                     cv: CVConfig = CVConfig(), cleaning: Optional[CleaningPolicy] = CleaningPolicy(),
                     workers: int = 1) -> SweepTable:
    if not sequences or not specs:
        raise ValueError("sweep needs sequences and grid specs")
    return sweep_datasets([(s, dataset_for_spec(sequences, s)) for s in specs], trainers, cv, cleaning, workers)
