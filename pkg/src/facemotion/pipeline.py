"""End-to-end run: manifest -> flow -> layout -> features -> cleaning -> CV reports.

Every stage writes its artifact under the output directory (atomically),
and nothing written depends on absolute paths or wall-clock time, so the
same manifest and seed always reproduce the same bytes.

Output layout::

    flow/<id>.csv (+ .csv.json)   motion field and sidecar per sequence
    layout/<id>.json              segmentation layout per sequence
    features.csv                  raw features (NaN for empty segments)
    features_clean.csv            cleaned with statistics of the full set
    cleaning.json                 cleaning audit and statistics
    reports/<trainer>.json        EvalReport per trainer
    reports/<trainer>_confusion.csv, reports/<trainer>_confusion6.csv
    reports/summary.csv           one line per trainer
    run.json                      resolved configuration and skipped sequences
"""

from __future__ import annotations

import csv
import glob
import io
import logging
import os
import re
import warnings
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from . import util
from .errors import DataError, EmptyField, FacemotionError, ManifestError, NumericError
from .evalkit import CVConfig, EvalReport, run_cv
from .facegrid import FaceAxes, GridSpec, build_layout, situation
from .features import (CleaningPolicy, CleaningStats, Dataset, check_label, clean_dataset, dataset_to_csv,
                       extract_features, feature_names)
from .learners import ALL_TRAINERS, TrainerSpec
from .optflow import FilterBank, FlowConfig, MotionField, build_filter_bank, estimate_flow, save_field
from .seqio import Rect, crop_face, load_sequence

log = logging.getLogger("facemotion.pipeline")

_UNSAFE = re.compile(r"[^A-Za-z0-9._-]")


def safe_name(sequence_id: str) -> str:
    return _UNSAFE.sub("_", sequence_id)


class StageError(FacemotionError):
    """Mixin carrying the failing stage and input id."""


class StageDataError(StageError, DataError):
    pass


class StageNumericError(StageError, NumericError):
    pass


def stage_error(stage: str, input_id: str, exc: BaseException) -> StageError:
    cls = StageNumericError if isinstance(exc, NumericError) else StageDataError
    err = cls(f"stage {stage!r}, input {input_id!r}: {exc}")
    err.stage, err.input_id = stage, input_id
    return err


# -- manifest -----------------------------------------------------------------

@dataclass(frozen=True)
class ManifestEntry:
    sequence_id: str
    frames: str          # absolute glob
    label: Optional[str]
    axes: FaceAxes       # original-frame coordinates
    crop: Optional[Rect]

    def cropped_axes(self) -> FaceAxes:
        if self.crop is None:
            return self.axes
        return self.axes.shifted(-self.crop.x, -self.crop.y)


@dataclass
class Manifest:
    path: str
    entries: list
    raw: dict

    @property
    def base_dir(self) -> str:
        return os.path.dirname(os.path.abspath(self.path))


def load_manifest(path) -> Manifest:
    """Parse and validate a manifest; raises ``ManifestError`` before any work is done."""
    path = os.fspath(path)
    try:
        raw = util.read_json(path)
    except (OSError, ValueError) as exc:
        raise ManifestError(f"cannot read manifest {path!r}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ManifestError("manifest must be a JSON object")
    seqs = raw.get("sequences")
    if not seqs:
        raise ManifestError("manifest lists no sequences")
    base = os.path.dirname(os.path.abspath(path))
    entries, seen = [], set()
    for k, s in enumerate(seqs):
        try:
            sid = str(s["sequence_id"])
            frames = s["frames"]
            axes = FaceAxes.from_dict(s["axes"])
            crop = Rect(*(int(v) for v in s["crop"])) if s.get("crop") is not None else None
            label = check_label(s.get("label"))
        except (KeyError, TypeError, ValueError, DataError) as exc:
            raise ManifestError(f"sequence #{k}: {exc}") from exc
        key = safe_name(sid)
        if key in seen:
            raise ManifestError(f"duplicate sequence id {sid!r}")
        seen.add(key)
        entries.append(ManifestEntry(sid, os.path.join(base, frames), label, axes, crop))
    return Manifest(path, entries, raw)


def grid_from_manifest(raw: dict) -> GridSpec:
    if raw.get("grid") is not None:
        return GridSpec.from_dict(raw["grid"])
    if raw.get("situation") is not None:
        return situation(int(raw["situation"]))
    raise ManifestError("manifest needs 'situation' or 'grid'")


def trainers_from(value) -> list:
    if value is None or value == "all" or value == ["all"]:
        return [TrainerSpec(n) for n in ALL_TRAINERS]
    out = []
    for t in value:
        if isinstance(t, dict):
            out.append(TrainerSpec(t["name"], t.get("cfg", {})))
        elif t == "all":
            out.extend(TrainerSpec(n) for n in ALL_TRAINERS)
        else:
            out.append(TrainerSpec(t))
    return out


# -- configuration ------------------------------------------------------------

@dataclass
class PipelineConfig:
    manifest: str
    out: str
    grid: GridSpec
    flow: FlowConfig = field(default_factory=FlowConfig)
    filters: dict = field(default_factory=dict)
    cleaning: CleaningPolicy = field(default_factory=CleaningPolicy)
    trainers: list = field(default_factory=lambda: [TrainerSpec(n) for n in ALL_TRAINERS])
    cv: CVConfig = field(default_factory=CVConfig)
    workers: int = 1

    @classmethod
    def from_manifest(cls, manifest: str, out: str, situation_id: Optional[int] = None, trainers=None,
                      folds: Optional[int] = None, repeats: Optional[int] = None, seed: Optional[int] = None,
                      workers: int = 1) -> "PipelineConfig":
        """Settings come from the manifest; explicit arguments override them."""
        raw = load_manifest(manifest).raw
        try:
            grid = situation(situation_id) if situation_id is not None else grid_from_manifest(raw)
            cvd = dict(raw.get("cv", {}))
            if "seed" not in cvd and "seed" in raw:
                cvd["seed"] = raw["seed"]
            for k, v in (("folds", folds), ("repeats", repeats), ("seed", seed)):
                if v is not None:
                    cvd[k] = v
            return cls(manifest=manifest, out=out, grid=grid,
                       flow=FlowConfig.from_dict(raw.get("flow", {})),
                       filters=dict(raw.get("filters", {})),
                       cleaning=CleaningPolicy.from_dict(raw.get("cleaning", {})),
                       trainers=trainers_from(trainers if trainers is not None else raw.get("trainers")),
                       cv=CVConfig.from_dict(cvd), workers=workers)
        except (TypeError, ValueError) as exc:
            raise ManifestError(f"bad manifest settings: {exc}") from exc

    def bank(self) -> FilterBank:
        kw = dict(self.filters)
        if "frequencies" in kw:
            kw["frequencies"] = tuple(kw["frequencies"])
        return build_filter_bank(**kw)

    def describe(self) -> dict:
        """Path-free summary written to run.json."""
        return {"manifest": os.path.basename(self.manifest), "grid": self.grid.to_dict(),
                "flow": asdict(self.flow), "filters": self.bank().describe(), "cleaning": asdict(self.cleaning),
                "trainers": [t.to_dict() for t in self.trainers], "cv": asdict(self.cv)}


# -- stages -------------------------------------------------------------------

def flow_for_entry(entry: ManifestEntry, bank: FilterBank, cfg: FlowConfig) -> MotionField:
    """Load, crop and estimate flow; axes (in cropped coordinates) and label go into the field's meta."""
    seq = load_sequence(entry.frames, label=entry.label, sequence_id=entry.sequence_id)
    if entry.crop is not None:
        seq = crop_face(seq, entry.crop)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", EmptyField)
        fld = estimate_flow(seq, bank, cfg)
    meta = dict(fld.meta)
    meta.update({"sequence_id": entry.sequence_id, "label": entry.label,
                 "axes": entry.cropped_axes().to_dict(),
                 "crop": list(entry.crop) if entry.crop is not None else None})
    return MotionField(fld.x, fld.y, fld.dx, fld.dy, fld.reliability, fld.width, fld.height, meta)


def field_axes(fld: MotionField) -> FaceAxes:
    try:
        return FaceAxes.from_dict(fld.meta["axes"])
    except KeyError:
        raise ManifestError(f"motion field {fld.meta.get('sequence_id', '?')!r} carries no face axes") from None


def features_from_fields(fields: list, grid: GridSpec, layout_dir: Optional[str] = None) -> Dataset:
    """One record per (non-empty) field, in the given order."""
    records, names = [], None
    for fld in fields:
        sid = fld.meta.get("sequence_id", "")
        try:
            layout = build_layout(field_axes(fld), grid, fld.width, fld.height)
            if layout_dir is not None:
                util.atomic_write_text(os.path.join(layout_dir, safe_name(sid) + ".json"), layout.to_json())
            keys = feature_names(layout.keys())
            if names is None:
                names = keys
            records.append(extract_features(fld, layout, fld.meta.get("label"), sid))
        except FacemotionError as exc:
            raise stage_error("features", sid, exc) from exc
    if not records:
        raise StageDataError("stage 'features': no usable sequences")
    return Dataset.from_records(records, names)


def cleaning_document(audit, policy: CleaningPolicy) -> dict:
    return {"policy": asdict(policy), "audit": audit.to_dict(),
            "stats": {"mean": audit.stats.mean.tolist(), "std": audit.stats.std.tolist()}}


def stats_from_document(doc: dict) -> CleaningStats:
    return CleaningStats(np.array(doc["stats"]["mean"], dtype=float), np.array(doc["stats"]["std"], dtype=float))


def summary_csv(reports: dict) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["trainer", "mean_accuracy", "std_accuracy", "collapsed_mean_accuracy", "collapsed_std_accuracy"])
    for name, r in reports.items():
        c = r.collapsed
        w.writerow([name, repr(r.mean_accuracy), repr(r.std_accuracy),
                    repr(c.mean_accuracy) if c else "", repr(c.std_accuracy) if c else ""])
    return buf.getvalue()


def table_csv(rows: list) -> str:
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerows(rows)
    return buf.getvalue()


def write_report(out_dir: str, name: str, report: EvalReport) -> None:
    util.atomic_write_text(os.path.join(out_dir, f"{name}.json"), report.to_json())
    util.atomic_write_text(os.path.join(out_dir, f"{name}_confusion.csv"), table_csv(report.summary.confusion_table()))
    if report.collapsed is not None:
        util.atomic_write_text(os.path.join(out_dir, f"{name}_confusion6.csv"),
                               table_csv(report.collapsed.confusion_table()))


@dataclass
class RunResult:
    out: str
    dataset: Dataset
    reports: dict
    skipped: list


def run_pipeline(cfg: PipelineConfig) -> RunResult:
    manifest = load_manifest(cfg.manifest)
    missing = [e.sequence_id for e in manifest.entries if not glob.glob(e.frames)]
    if missing:
        raise ManifestError(f"no frames found for: {', '.join(missing)}")
    out = cfg.out
    os.makedirs(out, exist_ok=True)
    bank = cfg.bank()

    fields, skipped = [], []
    for entry in manifest.entries:
        try:
            fld = flow_for_entry(entry, bank, cfg.flow)
        except FacemotionError as exc:
            raise stage_error("flow", entry.sequence_id, exc) from exc
        save_field(fld, os.path.join(out, "flow", safe_name(entry.sequence_id) + ".csv"))
        if len(fld) == 0:
            log.info("skipping %s: empty motion field", entry.sequence_id)
            skipped.append({"sequence_id": entry.sequence_id, "reason": "empty motion field"})
            continue
        fields.append(fld)
    if not fields:
        raise StageDataError("stage 'flow': every sequence produced an empty motion field")

    data = features_from_fields(fields, cfg.grid, os.path.join(out, "layout"))
    util.atomic_write_text(os.path.join(out, "features.csv"), dataset_to_csv(data))
    try:
        clean, audit = clean_dataset(data, cfg.cleaning)
    except (FacemotionError, ValueError) as exc:
        raise stage_error("clean", "features.csv", exc) from exc
    util.atomic_write_text(os.path.join(out, "features_clean.csv"), dataset_to_csv(clean))
    util.write_json(os.path.join(out, "cleaning.json"), cleaning_document(audit, cfg.cleaning))

    reports = {}
    rdir = os.path.join(out, "reports")
    for t in cfg.trainers:
        try:
            rep = run_cv(data, t, cfg.cv, cfg.cleaning, cfg.workers, metadata={"situation": cfg.grid.situation})
        except (FacemotionError, ValueError) as exc:
            raise stage_error("cv", t.name, exc) from exc
        reports[t.name] = rep
        write_report(rdir, t.name, rep)
        log.info("%s: %.2f +/- %.2f %%", t.name, rep.mean_accuracy, rep.std_accuracy)
    util.atomic_write_text(os.path.join(rdir, "summary.csv"), summary_csv(reports))
    util.write_json(os.path.join(out, "run.json"), {
        "config": cfg.describe(), "sequences": len(manifest.entries), "records": len(data),
        "feature_count": data.n_features, "skipped": skipped,
    })
    return RunResult(out, data, reports, skipped)

