"""Information-gain ranking of features over equal-frequency bins."""

from __future__ import annotations

import re
from dataclasses import asdict, dataclass

import numpy as np

from ..features import Dataset

_SUB = str.maketrans("0123456789", "₀₁₂₃₄₅₆₇₈₉")
_NAME_RE = re.compile(r"^A(\d+)S(\d+)_(P|LX|LY)$")


def display_name(name: str) -> str:
    """``A1S4_LY`` -> ``LY₁₄`` (kind, then area and segment as subscripts)."""
    m = _NAME_RE.match(name)
    if not m:
        return name
    return f"{m.group(3)}{(m.group(1) + m.group(2)).translate(_SUB)}"


def entropy_bits(y: np.ndarray, n_classes: int | None = None) -> float:
    counts = np.bincount(y, minlength=n_classes or 0)
    p = counts[counts > 0] / len(y)
    return float(-(p * np.log2(p)).sum())


def equal_frequency_bins(x: np.ndarray, bins: int) -> np.ndarray:
    """Bin index per value; quantile edges with duplicates merged, right-closed search."""
    x = np.asarray(x, dtype=np.float64)
    edges = np.quantile(x, np.linspace(0.0, 1.0, bins + 1))
    interior = np.unique(edges[1:-1])
    return np.searchsorted(interior, x, side="right")


def information_gain(x: np.ndarray, y: np.ndarray, bins: int = 10) -> float:
    b = equal_frequency_bins(x, bins)
    n = len(y)
    cond = 0.0
    for v in np.unique(b):
        m = b == v
        cond += m.sum() / n * entropy_bits(y[m])
    return float(max(0.0, entropy_bits(y) - cond))


@dataclass(frozen=True)
class RankedFeature:
    rank: int
    index: int
    name: str
    display: str
    ig: float

    def to_dict(self) -> dict:
        return asdict(self)


def rank_information_gain(data: Dataset, bins: int = 10) -> list:
    """Features sorted by information gain (bits), descending; ties by column index."""
    if bins < 2:
        raise ValueError("bins must be >= 2")
    y = data.y_index()
    gains = [information_gain(data.X[:, j], y, bins) for j in range(data.n_features)]
    order = sorted(range(data.n_features), key=lambda j: (-gains[j], j))
    return [RankedFeature(r + 1, j, data.names[j], display_name(data.names[j]), gains[j])
            for r, j in enumerate(order)]


def ranking_csv(ranked: list) -> str:
    lines = ["rank,feature,display,information_gain"]
    lines += [f"{r.rank},{r.name},{r.display},{r.ig!r}" for r in ranked]
    return "\n".join(lines) + "\n"
