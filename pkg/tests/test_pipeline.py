import hashlib
import json
import os

import pytest

from facemotion.cli import main
from facemotion.errors import ManifestError
from facemotion.pipeline import PipelineConfig, load_manifest, run_pipeline


def _digest(root):
    out = {}
    for d, _, files in os.walk(root):
        for f in files:
            p = os.path.join(d, f)
            with open(p, "rb") as fh:
                out[os.path.relpath(p, root)] = hashlib.sha256(fh.read()).hexdigest()
    return out


@pytest.fixture(scope="module")
def first_run(synth_manifest, tmp_path_factory):
    out = str(tmp_path_factory.mktemp("run1"))
    result = run_pipeline(PipelineConfig.from_manifest(synth_manifest, out))
    return out, result


def test_situation_17_gives_18_columns(first_run):
    out, result = first_run
    header = open(os.path.join(out, "features.csv")).readline().strip().split(",")
    assert header[:2] == ["sequence_id", "label"]
    assert len(header) - 2 == 18
    assert result.dataset.n_features == 18
    assert len(result.dataset) == 24


def test_outputs_present(first_run):
    out, result = first_run
    for rel in ("features_clean.csv", "cleaning.json", "run.json", "reports/summary.csv",
                "reports/discriminant.json", "reports/entropy.json", "reports/discriminant_confusion6.csv"):
        assert os.path.exists(os.path.join(out, rel)), rel
    rep = json.load(open(os.path.join(out, "reports", "discriminant.json")))
    assert rep["metadata"]["situation"] == 17
    assert rep["metadata"]["folds"] == 2 and rep["metadata"]["repeats"] == 2
    assert sorted(result.reports) == ["discriminant", "entropy"]


def test_rerun_is_byte_identical(first_run, synth_manifest, tmp_path):
    out, _ = first_run
    run_pipeline(PipelineConfig.from_manifest(synth_manifest, str(tmp_path)))
    assert _digest(out) == _digest(str(tmp_path))


def test_manual_stages_match_pipeline(first_run, synth_manifest, tmp_path):
    out, _ = first_run
    flow_dir, feats = tmp_path / "flow", tmp_path / "features.csv"
    assert main(["flow", "extract", "--manifest", synth_manifest, "--out", str(flow_dir)]) == 0
    assert main(["features", "extract", "--flow", str(flow_dir), "--situation", "17", "--out", str(feats)]) == 0
    assert feats.read_bytes() == open(os.path.join(out, "features.csv"), "rb").read()
    rep = tmp_path / "disc.json"
    assert main(["eval", "--features", str(feats), "--situation", "17", "--trainer", "discriminant",
                 "--folds", "2", "--repeats", "2", "--seed", "1", "--out", str(rep)]) == 0
    assert rep.read_bytes() == open(os.path.join(out, "reports", "discriminant.json"), "rb").read()


def test_empty_manifest_fails_before_work(tmp_path):
    m = tmp_path / "m.json"
    m.write_text(json.dumps({"sequences": [], "situation": 17}))
    with pytest.raises(ManifestError):
        load_manifest(str(m))
    assert main(["run", "--manifest", str(m), "--out", str(tmp_path / "o")]) == 3
    assert not (tmp_path / "o").exists()


def test_manifest_validation(tmp_path):
    m = tmp_path / "m.json"
    m.write_text(json.dumps({"sequences": [{"sequence_id": "a", "frames": "x/*.pgm", "label": "Surprise",
                                            "axes": {"left_eye": [1, 2]}}]}))
    with pytest.raises(ManifestError):
        load_manifest(str(m))
    m.write_text("{not json")
    with pytest.raises(ManifestError):
        load_manifest(str(m))
