import warnings

import numpy as np
import pytest

from facemotion import learners
from facemotion import rng as rngmod
from facemotion.errors import FoldFailure, StratificationWarning
from facemotion.evalkit import (CVConfig, group_folds, misclassification_summary, report_from_dict,
                                run_cv, stratified_folds, subject_of)
from facemotion.features import LABELS_6, Dataset
from facemotion.learners import TrainerSpec
from facemotion.learners.base import Model


class _Constant(Model):
    family = "Constant"

    def _predict_index(self, X):
        return np.zeros(len(X), dtype=np.int64)


def _train_constant(data, classes=None):
    classes = list(classes or data.class_set)
    return _Constant(classes, data.n_features)


class _Boom(Model):
    family = "Boom"


def _train_boom(data, classes=None):
    raise RuntimeError("kaboom")


@pytest.fixture
def stub_trainers(monkeypatch):
    monkeypatch.setitem(learners.FAMILIES, "constant", ("Constant", _train_constant, False))
    monkeypatch.setitem(learners.FAMILIES, "boom", ("Boom", _train_boom, False))


def _balanced6(n=10, d=4, seed=0, sep=0.0):
    rng = np.random.default_rng(seed)
    X = np.vstack([rng.normal(size=(n, d)) + sep * k for k in range(6)])
    labels = [c for c in LABELS_6 for _ in range(n)]
    return Dataset(X, labels, [f"s{k:03d}" for k in range(len(X))], [f"f{j}" for j in range(d)])


def test_twenty_records_two_classes():
    labels = ["AngerT1"] * 10 + ["Disgust"] * 10
    folds = stratified_folds(labels, 10, rngmod.stream(0, 0))
    for f in folds:
        assert sorted(labels[i] for i in f) == ["AngerT1", "Disgust"]


def test_475_records_partition():
    rng = np.random.default_rng(1)
    labels = list(rng.choice(list(LABELS_6), size=475))
    folds = stratified_folds(labels, 10, rngmod.stream(7, 0))
    sizes = sorted(len(f) for f in folds)
    assert set(sizes) <= {47, 48}
    assert np.array_equal(np.sort(np.concatenate(folds)), np.arange(475))
    for c in set(labels):
        per = [sum(labels[i] == c for i in f) for f in folds]
        assert max(per) - min(per) <= 1


def test_small_class_absent_from_three_folds():
    labels = ["Disgust"] * 7 + ["Surprise"] * 30
    with pytest.warns(StratificationWarning):
        folds = stratified_folds(labels, 10, rngmod.stream(3, 0))
    lacking = sum(1 for f in folds if not any(labels[i] == "Disgust" for i in f))
    assert lacking == 3


def test_folds_depend_only_on_stream():
    labels = list(np.random.default_rng(2).choice(["A", "B"], size=50))
    a = stratified_folds(labels, 5, rngmod.stream(11, 4))
    b = stratified_folds(labels, 5, rngmod.stream(11, 4))
    assert all(np.array_equal(x, y) for x, y in zip(a, b))
    with pytest.raises(ValueError):
        stratified_folds(labels[:3], 5, rngmod.stream(0))


def test_group_folds_keep_subjects_together():
    ids = [f"S{k % 12:03d}/{k:03d}" for k in range(60)]
    groups = [subject_of(i) for i in ids]
    folds = group_folds(groups, 4, rngmod.stream(0, 0))
    owner = {}
    for f, idx in enumerate(folds):
        for i in idx:
            assert owner.setdefault(groups[i], f) == f
    assert subject_of("S005/001") == "S005"


def test_cv_config_validation():
    with pytest.raises(ValueError):
        CVConfig(folds=1)
    with pytest.raises(ValueError):
        CVConfig(repeats=0)


def test_constant_learner_baseline(stub_trainers):
    rep = run_cv(_balanced6(), TrainerSpec("constant"), CVConfig(folds=5, repeats=4, seed=0))
    assert rep.mean_accuracy == pytest.approx(100 / 6, abs=1e-9)
    assert rep.std_accuracy == pytest.approx(0.0, abs=1e-9)


@pytest.mark.parametrize("name", ["svm", "discriminant"])
def test_duplicated_separable_prototypes(name):
    d = _balanced6(n=1, d=6, seed=0)
    d = Dataset(np.eye(6) * 10, list(LABELS_6), [f"p{k}" for k in range(6)], d.names)
    dup = Dataset(np.repeat(d.X, 10, axis=0), [c for c in d.labels for _ in range(10)],
                  [f"p{k // 10}-{k % 10}" for k in range(60)], d.names)
    rep = run_cv(dup, TrainerSpec(name), CVConfig(folds=10, repeats=3, seed=2))
    assert rep.mean_accuracy == 100.0
    assert rep.std_accuracy == 0.0


def test_record_order_does_not_matter():
    d = _balanced6(n=8, sep=1.5, seed=4)
    perm = np.random.default_rng(9).permutation(len(d))
    cv = CVConfig(folds=4, repeats=3, seed=5)
    a = run_cv(d, TrainerSpec("gini"), cv)
    b = run_cv(d.subset(perm), TrainerSpec("gini"), cv)
    assert a.to_json() == b.to_json()


def test_workers_do_not_change_results():
    d = _balanced6(n=8, sep=1.5, seed=4)
    cv = CVConfig(folds=4, repeats=4, seed=1)
    a = run_cv(d, TrainerSpec("network", {"epochs": 5}), cv, workers=1)
    b = run_cv(d, TrainerSpec("network", {"epochs": 5}), cv, workers=3)
    assert a.to_json() == b.to_json()


def test_report_consistency():
    d = _balanced6(n=8, sep=1.0, seed=6)
    rep = run_cv(d, TrainerSpec("discriminant"), CVConfig(folds=4, repeats=5, seed=3))
    assert len(rep.per_repeat_accuracy) == 5
    assert abs(rep.mean_accuracy - sum(rep.per_repeat_accuracy) / 5) <= 1e-12
    assert np.allclose(rep.confusion.sum(axis=1), 100.0, atol=1e-6)
    assert rep.std_accuracy == pytest.approx(np.std(rep.per_repeat_accuracy, ddof=1))
    assert rep.metadata["family"] == "Discriminant" and rep.metadata["feature_count"] == 4
    back = report_from_dict(rep.to_dict())
    assert back.to_json() == rep.to_json()


def test_collapsed_summary_for_subtypes():
    rng = np.random.default_rng(0)
    labels = ["HappinessT1", "HappinessT2", "Surprise"]
    X = np.vstack([rng.normal(size=(10, 2)) + [0, 0], rng.normal(size=(10, 2)) + [0.2, 0], rng.normal(size=(10, 2)) + [8, 8]])
    d = Dataset(X, [c for c in labels for _ in range(10)], [f"r{k:02d}" for k in range(30)], ["a", "b"])
    rep = run_cv(d, TrainerSpec("discriminant"), CVConfig(folds=5, repeats=3))
    assert rep.collapsed.class_order == ["Happiness", "Surprise"]
    assert rep.collapsed.mean_accuracy >= rep.mean_accuracy
    assert rep.collapsed.mean_accuracy == 100.0
    assert misclassification_summary(rep.collapsed) == []


def test_fold_failure_coordinates(stub_trainers):
    with pytest.raises(FoldFailure) as info:
        run_cv(_balanced6(), TrainerSpec("boom"), CVConfig(folds=3, repeats=2))
    assert (info.value.repeat, info.value.fold) == (0, 0)


def test_needs_two_classes():
    d = Dataset(np.zeros((6, 2)), ["Disgust"] * 6, [str(i) for i in range(6)], ["a", "b"])
    with pytest.raises(ValueError):
        run_cv(d, TrainerSpec("gini"), CVConfig(folds=2, repeats=1))


def test_small_class_warns_once():
    d = _balanced6(n=3, sep=3.0)
    with warnings.catch_warnings(record=True) as w:
        warnings.simplefilter("always")
        run_cv(d, TrainerSpec("discriminant"), CVConfig(folds=5, repeats=2))
    assert sum(isinstance(x.message, StratificationWarning) for x in w) == 1
