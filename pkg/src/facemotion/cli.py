"""Command-line front end.

Each subcommand reads and writes the documented CSV/JSON artifacts, so the
stages compose through files; ``run`` chains them all from a manifest.

Exit codes: 0 success, 2 usage error, 3 data error, 4 numeric failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
import warnings

import numpy as np

from . import util
from .errors import DataError, NumericError
from .evalkit import (CVConfig, dataset_for_spec, pca_project, rank_information_gain, ranking_csv, run_cv,
                      sweep_datasets)
from .facegrid import FaceAxes, GridSpec, build_layout, situation, situation_table
from .features import CleaningPolicy, clean_dataset, dataset_to_csv, read_dataset
from .learners import ALL_TRAINERS, TrainerSpec, fit_model, model_from_json
from .optflow import FlowConfig, build_filter_bank, load_field, save_field
from .pipeline import (ManifestEntry, PipelineConfig, cleaning_document, features_from_fields, field_axes,
                       flow_for_entry, load_manifest, run_pipeline, safe_name, stats_from_document, trainers_from)
from .seqio import Rect
from .synth import PROTOTYPE_SITUATION, generate_synthetic, write_synthetic_manifest

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4


class UsageError(Exception):
    pass


# -- helpers ------------------------------------------------------------------

def _floats(text: str, n: int, what: str) -> list:
    try:
        vals = [float(v) for v in text.split(",")]
    except ValueError:
        raise UsageError(f"{what}: expected {n} comma-separated numbers") from None
    if len(vals) != n:
        raise UsageError(f"{what}: expected {n} comma-separated numbers")
    return vals


def parse_axes(text: str) -> FaceAxes:
    lx, ly, rx, ry, my = _floats(text, 5, "--axes")
    return FaceAxes((lx, ly), (rx, ry), my)


def parse_params(items) -> dict:
    cfg = {}
    for item in items or []:
        if "=" not in item:
            raise UsageError(f"--param expects key=value, got {item!r}")
        k, v = item.split("=", 1)
        try:
            cfg[k] = json.loads(v)
        except ValueError:
            cfg[k] = v
    return cfg


def parse_situations(text: str) -> list:
    if text == "all":
        return situation_table()
    try:
        return [situation(int(v)) for v in text.split(",")]
    except ValueError as exc:
        raise UsageError(f"--situations: {exc}") from None


def grid_from_args(args) -> GridSpec:
    if getattr(args, "grid", None):
        return GridSpec.from_dict(util.read_json(args.grid))
    if args.situation is None:
        raise UsageError("give --situation or --grid")
    return situation(args.situation)


def emit(text: str, out) -> None:
    if out in (None, "-"):
        sys.stdout.write(text)
    else:
        util.atomic_write_text(out, text)


def field_paths(inputs) -> list:
    paths = []
    for p in inputs:
        if os.path.isdir(p):
            paths += sorted(os.path.join(p, f) for f in os.listdir(p) if f.endswith(".csv"))
        else:
            paths.append(p)
    if not paths:
        raise UsageError("no motion-field CSV files given")
    return paths


def load_data(args):
    """Dataset from ``--features`` or the prototype-based synthetic generator."""
    if args.features and args.synthetic:
        raise UsageError("--features and --synthetic are exclusive")
    if args.features:
        return read_dataset(args.features)
    if getattr(args, "situation", None) not in (None, PROTOTYPE_SITUATION):
        raise UsageError(f"synthetic data exists for situation {PROTOTYPE_SITUATION} only")
    return generate_synthetic(n_per_class=args.n_per_class, noise_sigma=args.noise, seed=args.seed)


def cv_from_args(args) -> CVConfig:
    return CVConfig(folds=args.folds, repeats=args.repeats, seed=args.seed,
                    group_by_subject=getattr(args, "group_by_subject", False))


INPUT_ARGS = ("features", "model", "manifest", "stats", "grid", "field")


def check_inputs(args) -> None:
    """Unknown input paths are usage errors, reported before any work starts."""
    for name in INPUT_ARGS:
        path = getattr(args, name, None)
        if path and not os.path.exists(path):
            raise UsageError(f"--{name}: no such file {path!r}")
    for path in getattr(args, "flow", None) or []:
        if not os.path.exists(path):
            raise UsageError(f"--flow: no such file or directory {path!r}")


# -- subcommands --------------------------------------------------------------

def cmd_flow_extract(args):
    bank = build_filter_bank(orientations=args.orientations, support=args.support)
    cfg = FlowConfig(sample_stride=args.stride, reliability_threshold=args.threshold)
    if args.manifest:
        manifest = load_manifest(args.manifest)
        for entry in manifest.entries:
            fld = flow_for_entry(entry, bank, cfg)
            save_field(fld, os.path.join(args.out, safe_name(entry.sequence_id) + ".csv"))
            if len(fld) == 0:
                logging.getLogger("facemotion").warning("%s: empty motion field", entry.sequence_id)
        return
    if not args.frames:
        raise UsageError("give --manifest or --frames")
    if args.axes is None:
        raise UsageError("--frames needs --axes (left pupil x,y, right pupil x,y, mouth y)")
    sid = args.id or os.path.basename(os.path.dirname(os.path.abspath(args.frames))) or "sequence"
    crop = Rect(*(int(v) for v in _floats(args.crop, 4, "--crop"))) if args.crop else None
    entry = ManifestEntry(sid, os.path.abspath(args.frames), args.label, parse_axes(args.axes), crop)
    save_field(flow_for_entry(entry, bank, cfg), args.out)


def cmd_layout_build(args):
    spec = grid_from_args(args)
    if args.field:
        fld = load_field(args.field)
        axes = field_axes(fld) if args.axes is None else parse_axes(args.axes)
        width, height = fld.width, fld.height
    else:
        if args.axes is None or args.width is None or args.height is None:
            raise UsageError("give --field, or --axes with --width and --height")
        axes, width, height = parse_axes(args.axes), args.width, args.height
    emit(build_layout(axes, spec, width, height).to_json(), args.out)


def cmd_features_extract(args):
    spec = grid_from_args(args)
    fields = [load_field(p) for p in field_paths(args.flow)]
    kept = [f for f in fields if len(f)]
    for f in fields:
        if not len(f):
            logging.getLogger("facemotion").warning("%s: empty motion field skipped", f.meta.get("sequence_id"))
    if not kept:
        raise DataError("every motion field is empty")
    emit(dataset_to_csv(features_from_fields(kept, spec)), args.out)


def cmd_clean(args):
    data = read_dataset(args.features)
    policy = CleaningPolicy(args.outlier_sigma, args.extreme_sigma, args.fill)
    stats = stats_from_document(util.read_json(args.stats)) if args.stats else None
    clean, audit = clean_dataset(data, policy, stats)
    emit(dataset_to_csv(clean), args.out)
    if args.audit:
        util.write_json(args.audit, cleaning_document(audit, policy))


def cmd_train(args):
    data = read_dataset(args.features)
    if args.collapse:
        data = data.collapsed()
    spec = TrainerSpec(args.trainer, parse_params(args.param))
    model = fit_model(spec, data, seed=args.seed if spec.name == "network" else None)
    emit(model.to_json(), args.out)


def cmd_predict(args):
    with open(args.model) as fh:
        model = model_from_json(fh.read())
    data = read_dataset(args.features)
    pred = model.predict(data.X)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["sequence_id", "label", "predicted"])
    for sid, lab, p in zip(data.ids, data.labels, pred):
        w.writerow([sid, lab or "", p])
    emit(buf.getvalue(), args.out)
    labelled = [(lab, p) for lab, p in zip(data.labels, pred) if lab is not None]
    if labelled:
        acc = 100.0 * np.mean([lab == p for lab, p in labelled])
        print(f"accuracy {acc:.2f} % on {len(labelled)} labelled records", file=sys.stderr)


def cmd_eval(args):
    data = load_data(args)
    if args.collapse:
        data = data.collapsed()
    spec = TrainerSpec(args.trainer, parse_params(args.param))
    meta = {"situation": args.situation if args.features else (args.situation or PROTOTYPE_SITUATION)}
    rep = run_cv(data, spec, cv_from_args(args), workers=args.workers, metadata=meta)
    emit(rep.to_json(), args.out)
    print(f"{spec.name}: {rep.mean_accuracy:.2f} ± {rep.std_accuracy:.2f} %", file=sys.stderr)


def cmd_sweep(args):
    specs = parse_situations(args.situations)
    trainers = trainers_from(args.trainers.split(","))
    if args.manifest:
        manifest = load_manifest(args.manifest)
        bank = build_filter_bank()
        fields = [flow_for_entry(e, bank, FlowConfig()) for e in manifest.entries]
    elif args.flow:
        fields = [load_field(p) for p in field_paths(args.flow)]
    else:
        raise UsageError("give --manifest or --flow")
    seqs = [(f, f.meta.get("label"), field_axes(f), f.meta.get("sequence_id", ""))
            for f in fields]
    items = [(s, dataset_for_spec(seqs, s)) for s in specs]
    table = sweep_datasets(items, trainers, cv_from_args(args), workers=args.workers)
    os.makedirs(args.out, exist_ok=True)
    util.atomic_write_text(os.path.join(args.out, "table.csv"), table.to_csv())
    util.atomic_write_text(os.path.join(args.out, "series.csv"), table.series_csv())
    util.write_json(os.path.join(args.out, "sweep.json"), table.to_dict())
    sys.stdout.write(table.to_csv())


def cmd_rank(args):
    ranked = rank_information_gain(load_data(args), bins=args.bins)
    if args.top:
        ranked = ranked[:args.top]
    emit(ranking_csv(ranked), args.out)


def cmd_project(args):
    data = load_data(args)
    res = pca_project(data, dims=args.dims)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["sequence_id", "label", *[f"pc{k + 1}" for k in range(args.dims)]])
    for sid, lab, row in zip(data.ids, data.labels, res.coords):
        w.writerow([sid, lab or "", *[repr(float(v)) for v in row]])
    emit(buf.getvalue(), args.out)
    if args.summary:
        util.write_json(args.summary, res.to_dict())
    print("explained " + ", ".join(f"{v:.4f}" for v in res.explained), file=sys.stderr)


def cmd_synth(args):
    if args.kind == "sequences":
        if not args.out or args.out == "-":
            raise UsageError("synth --kind sequences needs an output directory")
        path = write_synthetic_manifest(args.out, n_per_class=args.n_per_class, seed=args.seed,
                                        situation_id=args.situation or 17)
        print(path)
        return
    data = generate_synthetic(n_per_class=args.n_per_class, noise_sigma=args.noise, seed=args.seed)
    emit(dataset_to_csv(data), args.out)


def cmd_run(args):
    trainers = args.trainer if args.trainer else None
    cfg = PipelineConfig.from_manifest(args.manifest, args.out, situation_id=args.situation, trainers=trainers,
                                       folds=args.folds, repeats=args.repeats, seed=args.seed,
                                       workers=args.workers)
    res = run_pipeline(cfg)
    for name, rep in res.reports.items():
        print(f"{name}: {rep.mean_accuracy:.2f} ± {rep.std_accuracy:.2f} %")


# -- parser -------------------------------------------------------------------

def _data_source(p, default_seed=0):
    p.add_argument("--features", help="feature CSV")
    p.add_argument("--synthetic", action="store_true", help="use the built-in prototype generator")
    p.add_argument("--n-per-class", type=int, default=40)
    p.add_argument("--noise", type=float, default=0.05)
    p.add_argument("--seed", type=int, default=default_seed)


def _cv_flags(p):
    p.add_argument("--folds", type=int, default=10)
    p.add_argument("--repeats", type=int, default=50)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--group-by-subject", action="store_true",
                   help="keep each subject (sequence id prefix before '/') inside one fold")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="facemotion", description="Facial-motion feature pipeline.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    flow = sub.add_parser("flow", help="optical flow").add_subparsers(dest="action", required=True)
    p = flow.add_parser("extract", help="estimate motion fields")
    p.add_argument("--manifest")
    p.add_argument("--frames", help="frame glob of one sequence")
    p.add_argument("--axes", help="lx,ly,rx,ry,mouth_y in original-frame pixels")
    p.add_argument("--crop", help="x,y,w,h")
    p.add_argument("--label")
    p.add_argument("--id")
    p.add_argument("--orientations", type=int, default=6)
    p.add_argument("--support", type=int, default=21)
    p.add_argument("--stride", type=int, default=2)
    p.add_argument("--threshold", type=float, default=0.1)
    p.add_argument("--out", required=True, help="CSV path (one sequence) or directory (manifest)")
    p.set_defaults(func=cmd_flow_extract)

    layout = sub.add_parser("layout", help="face grids").add_subparsers(dest="action", required=True)
    p = layout.add_parser("build", help="export a segmentation layout")
    p.add_argument("--situation", type=int)
    p.add_argument("--grid", help="GridSpec JSON")
    p.add_argument("--field", help="motion field CSV supplying size and axes")
    p.add_argument("--axes")
    p.add_argument("--width", type=int)
    p.add_argument("--height", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_layout_build)

    feats = sub.add_parser("features", help="segment features").add_subparsers(dest="action", required=True)
    p = feats.add_parser("extract", help="P/LX/LY per segment")
    p.add_argument("--flow", nargs="+", required=True, help="motion-field CSVs or directories")
    p.add_argument("--situation", type=int)
    p.add_argument("--grid")
    p.add_argument("--out")
    p.set_defaults(func=cmd_features_extract)

    p = sub.add_parser("clean", help="outlier clamping and missing-value fill")
    p.add_argument("--features", required=True)
    p.add_argument("--outlier-sigma", type=float, default=3.0)
    p.add_argument("--extreme-sigma", type=float, default=5.0)
    p.add_argument("--fill", type=float, default=0.0)
    p.add_argument("--stats", help="cleaning JSON whose statistics to reuse")
    p.add_argument("--audit", help="write cleaning JSON here")
    p.add_argument("--out")
    p.set_defaults(func=cmd_clean)

    p = sub.add_parser("train", help="fit one model")
    p.add_argument("--features", required=True)
    p.add_argument("--trainer", required=True)
    p.add_argument("--param", action="append", help="key=value (JSON value)")
    p.add_argument("--collapse", action="store_true", help="train on the 6 basic emotions")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="apply a saved model")
    p.add_argument("--model", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("eval", help="repeated cross-validation")
    _data_source(p)
    _cv_flags(p)
    p.add_argument("--situation", type=int)
    p.add_argument("--trainer", required=True)
    p.add_argument("--param", action="append")
    p.add_argument("--collapse", action="store_true")
    p.add_argument("--out")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", help="CV over several grid situations")
    p.add_argument("--manifest")
    p.add_argument("--flow", nargs="+")
    p.add_argument("--situations", default="all")
    p.add_argument("--trainers", default="all")
    p.add_argument("--seed", type=int, default=0)
    _cv_flags(p)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("rank", help="information-gain feature ranking")
    _data_source(p)
    p.add_argument("--situation", type=int)
    p.add_argument("--bins", type=int, default=10)
    p.add_argument("--top", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_rank)

    p = sub.add_parser("project", help="PCA projection")
    _data_source(p)
    p.add_argument("--situation", type=int)
    p.add_argument("--dims", type=int, default=3)
    p.add_argument("--summary", help="write axes and explained variance JSON here")
    p.add_argument("--out")
    p.set_defaults(func=cmd_project)

    p = sub.add_parser("synth", help="synthetic data from the built-in prototypes")
    p.add_argument("--kind", choices=("features", "sequences"), default="features")
    p.add_argument("--n-per-class", type=int, default=40)
    p.add_argument("--noise", type=float, default=0.05)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--situation", type=int, help="situation recorded in a sequences manifest")
    p.add_argument("--out")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("run", help="whole pipeline from a manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--situation", type=int)
    p.add_argument("--trainer", action="append", help=f"repeatable; one of {', '.join(ALL_TRAINERS)} or all")
    p.add_argument("--folds", type=int)
    p.add_argument("--repeats", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_run)
    return ap


def _format_warning(message, category, filename, lineno, line=None):
    return f"facemotion: warning: {category.__name__}: {message}\n"


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    warnings.formatwarning = _format_warning
    try:
        check_inputs(args)
        args.func(args)
    except UsageError as exc:
        print(f"facemotion: usage: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericError as exc:
        print(f"facemotion: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (DataError, OSError) as exc:
        print(f"facemotion: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (ValueError, KeyError) as exc:
        print(f"facemotion: usage: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
