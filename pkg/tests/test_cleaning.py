import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from facemotion.features import CleaningPolicy, CleaningStats, Dataset, apply_cleaning, clean_dataset


def _ds(col):
    col = np.asarray(col, dtype=float)
    return Dataset(col[:, None], ["AngerT1"] * len(col), [f"r{i}" for i in range(len(col))], ["A1S1_P"])


def test_constant_column_untouched():
    out, audit = clean_dataset(_ds([0.7] * 7))
    assert np.all(out.X == 0.7)
    assert audit.zero_variance == ["A1S1_P"]


def test_ten_value_column_sits_on_the_boundary():
    # {0 x 9, 100}: mean 10, population std 30, so the 100 has z = 3 exactly -> kept
    stats = CleaningStats.fit(np.array([[0.0]] * 9 + [[100.0]]))
    assert stats.mean[0] == 10.0 and stats.std[0] == 30.0
    out, audit = clean_dataset(_ds([0.0] * 9 + [100.0]))
    assert out.X[-1, 0] == 100.0
    assert audit.clamped.sum() == 0


def test_outlier_clamped_to_three_sigma():
    # {0 x 19, 100}: mean 5, std sqrt(475), z = sqrt(19) ~ 4.36 -> clamped to 70.3834841531101
    out, audit = clean_dataset(_ds([0.0] * 19 + [100.0]))
    assert out.X[-1, 0] == pytest.approx(70.3834841531101, abs=1e-12)
    assert audit.clamped[0] == 1 and audit.discarded[0] == 0


def test_extreme_value_discarded_to_zero():
    # {0 x 29, 100}: z = sqrt(29) ~ 5.39 > 5 -> discarded, filled with 0, record kept
    out, audit = clean_dataset(_ds([0.0] * 29 + [100.0]))
    assert len(out) == 30
    assert out.X[-1, 0] == 0.0
    assert audit.discarded[0] == 1 and audit.clamped[0] == 0


def test_negative_side_clamp():
    out, _ = clean_dataset(_ds([0.0] * 19 + [-100.0]))
    assert out.X[-1, 0] == pytest.approx(-70.3834841531101, abs=1e-12)


def test_missing_filled_with_zero():
    out, audit = clean_dataset(_ds([1.0, np.nan, 2.0, 3.0]))
    assert out.X[1, 0] == 0.0
    assert audit.filled[0] == 1
    assert np.all(np.isfinite(out.X))


def test_policy_validation():
    with pytest.raises(ValueError):
        CleaningPolicy(outlier_sigma=5, extreme_sigma=3)
    with pytest.raises(ValueError):
        CleaningPolicy(outlier_sigma=0)


def test_needs_two_records():
    with pytest.raises(ValueError):
        clean_dataset(_ds([1.0]))


def test_frozen_statistics_apply_to_new_rows():
    stats = CleaningStats.fit(np.array([[0.0]] * 19 + [[100.0]]))
    X = np.array([[100.0], [5.0], [-1000.0]])
    out, clamped, discarded, _ = apply_cleaning(X, stats)
    assert out[0, 0] == pytest.approx(70.3834841531101)
    assert out[1, 0] == 5.0
    assert out[2, 0] == 0.0
    assert clamped[0] == 1 and discarded[0] == 1


@settings(max_examples=60, deadline=None)
@given(arrays(np.float64, (12, 3), elements=st.floats(-1e3, 1e3, allow_nan=False)))
def test_idempotent_with_frozen_stats(X):
    d = Dataset(X, ["AngerT1"] * 12, [str(i) for i in range(12)], ["a", "b", "c"])
    once, audit = clean_dataset(d)
    twice, _ = clean_dataset(once, stats=audit.stats)
    assert np.array_equal(once.X, twice.X)
    assert np.all(np.isfinite(once.X))
