import numpy as np
import pytest

from facemotion.features import LABELS_12
from facemotion.synth import generate_synthetic, load_prototypes, parse_prototype_table


def test_bank_shape_and_values():
    bank = load_prototypes()
    assert bank.means.shape == (12, 24, 3)
    assert list(bank.labels) == list(LABELS_12)
    assert np.all(np.isfinite(bank.means))
    assert np.all(bank.means[:, :, 0] >= 0)


def test_published_prototypes():
    bank = load_prototypes()
    assert bank.triplet("Surprise", 1, 1) == pytest.approx((0.02, 0.01, -1.21))
    assert bank.triplet("AngerT1", 1, 1) == pytest.approx((0.02, 0.13, 0.43))


def test_noise_free_records_equal_prototypes():
    bank = load_prototypes()
    d = generate_synthetic(bank, n_per_class=2, noise_sigma=0.0, seed=0)
    for lab, row in zip(d.labels, d.X):
        assert np.array_equal(row, bank.prototype(lab))
    i = d.labels.index("Surprise")
    assert tuple(d.X[i, :3]) == pytest.approx((0.02, 0.01, -1.21))


def test_counts():
    d = generate_synthetic(n_per_class=3, noise_sigma=0.05, seed=1)
    assert d.X.shape == (36, 72)
    assert d.names[:3] == ["A1S1_P", "A1S1_LX", "A1S1_LY"]


def test_reproducible_and_p_clamped():
    a = generate_synthetic(n_per_class=5, noise_sigma=0.5, seed=9)
    b = generate_synthetic(n_per_class=5, noise_sigma=0.5, seed=9)
    c = generate_synthetic(n_per_class=5, noise_sigma=0.5, seed=10)
    assert np.array_equal(a.X, b.X)
    assert not np.array_equal(a.X, c.X)
    assert np.all(a.X[:, 0::3] >= 0)


def test_negative_noise_rejected():
    with pytest.raises(ValueError):
        generate_synthetic(n_per_class=1, noise_sigma=-0.1)


def test_table_artifacts_are_audited():
    audit = load_prototypes().audit
    text = " ".join(str(a) for a in audit).lower()
    assert audit, "the shipped table has known typesetting artifacts"
    assert "column" in text or "cell" in text


def test_unparseable_cell_excludes_pair():
    header = "# area\tsegment\tfeature\t" + "\t".join(LABELS_12)
    rows = [header]
    for area in range(1, 7):
        for seg in range(1, 5):
            for kind in ("P", "LX", "LY"):
                cells = ["0.1"] * 12
                if (area, seg, kind) == (2, 3, "LX"):
                    cells[4] = "n/a"
                rows.append("\t".join([str(area), str(seg), kind, *cells]))
    bank = parse_prototype_table("\n".join(rows) + "\n")
    bad = np.argwhere(np.isnan(bank.means))
    assert bad.tolist() == [[4, 6, 0], [4, 6, 1], [4, 6, 2]]
    assert any("n/a" in str(a) for a in bank.audit)
