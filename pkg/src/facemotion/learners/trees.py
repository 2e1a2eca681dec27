"""Binary threshold decision trees.

Two flavours share one grower:

* entropy tree: splits maximise the information gain ratio, then the tree
  is pruned bottom-up with the pessimistic (upper confidence bound) error
  estimate at ``prune_confidence``;
* Gini tree: splits maximise the Gini impurity decrease, then weakest-link
  cost-complexity pruning removes every subtree whose per-leaf error
  reduction is at most ``alpha``.

Candidate thresholds are midpoints between consecutive distinct values of
a feature; a sample goes left when ``x <= threshold``.  Among equally good
splits the lowest feature index wins, then the lowest threshold.
"""

from __future__ import annotations

import numpy as np
from scipy.stats import beta

from ..features import Dataset
from .base import Model, register

TIE_EPS = 1e-12


def entropy(counts: np.ndarray) -> np.ndarray:
    """Shannon entropy (bits) of count vectors along the last axis."""
    counts = np.asarray(counts, dtype=np.float64)
    n = counts.sum(axis=-1, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        p = np.where(n > 0, counts / n, 0.0)
        terms = np.where(p > 0, p * np.log2(np.where(p > 0, p, 1.0)), 0.0)
    return -terms.sum(axis=-1)


def gini(counts: np.ndarray) -> np.ndarray:
    counts = np.asarray(counts, dtype=np.float64)
    n = counts.sum(axis=-1, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        p = np.where(n > 0, counts / n, 0.0)
    return 1.0 - (p ** 2).sum(axis=-1)


def split_scores(x: np.ndarray, Y: np.ndarray, criterion: str, min_leaf: int):
    """All admissible cuts of one feature.

    ``Y`` is the (n, K) one-hot class matrix.  Returns ``(thresholds,
    scores)`` in ascending threshold order; ``scores`` are gain ratios
    (``"entropy"``) or impurity decreases (``"gini"``).  Zero-gain cuts stay
    admissible so that interactions such as XOR can still be split; pruning
    removes them again when they do not pay off.
    """
    order = np.argsort(x, kind="stable")
    xs = x[order]
    n = len(xs)
    left = np.cumsum(Y[order], axis=0)[:-1]  # counts left of cut after position i
    total = Y.sum(axis=0)
    nl = np.arange(1, n, dtype=np.float64)
    ok = (xs[1:] > xs[:-1]) & (nl >= min_leaf) & (n - nl >= min_leaf)
    if not np.any(ok):
        return np.zeros(0), np.zeros(0)
    left = left[ok]
    nl = nl[ok]
    right = total[None, :] - left
    nr = n - nl
    thresholds = (xs[:-1][ok] + xs[1:][ok]) / 2.0
    if criterion == "entropy":
        gain = entropy(total) - (nl * entropy(left) + nr * entropy(right)) / n
        split_info = entropy(np.stack([nl, nr], axis=1))
        score = gain / split_info
    else:
        gain = gini(total) - (nl * gini(left) + nr * gini(right)) / n
        score = gain
    keep = gain > -TIE_EPS
    return thresholds[keep], np.maximum(score[keep], 0.0)


def best_split(X: np.ndarray, Y: np.ndarray, criterion: str, min_leaf: int):
    """``(feature, threshold, score)`` of the best cut over all features, or None."""
    best = None
    for j in range(X.shape[1]):
        thr, score = split_scores(X[:, j], Y, criterion, min_leaf)
        if len(score) == 0:
            continue
        k = int(np.argmax(score))  # first maximum = lowest threshold
        if best is None or score[k] > best[2] + TIE_EPS:
            best = (j, float(thr[k]), float(score[k]))
    return best


class _Grower:
    def __init__(self, X, y, n_classes, criterion, min_leaf, max_depth):
        self.X, self.y = X, y
        self.Y = np.eye(n_classes)[y]
        self.criterion = criterion
        self.min_leaf = min_leaf
        self.max_depth = max_depth
        self.feature, self.threshold, self.left, self.right, self.counts = [], [], [], [], []

    def _new(self, counts):
        self.feature.append(-1)
        self.threshold.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        self.counts.append(counts)
        return len(self.feature) - 1

    def grow(self, idx, depth=0):
        counts = self.Y[idx].sum(axis=0)
        node = self._new(counts)
        if depth >= self.max_depth or np.count_nonzero(counts) <= 1 or len(idx) < 2 * self.min_leaf:
            return node
        split = best_split(self.X[idx], self.Y[idx], self.criterion, self.min_leaf)
        if split is None:
            return node
        j, thr, _ = split
        go_left = self.X[idx, j] <= thr
        self.feature[node] = j
        self.threshold[node] = thr
        self.left[node] = self.grow(idx[go_left], depth + 1)
        self.right[node] = self.grow(idx[~go_left], depth + 1)
        return node


class TreeModel(Model):
    def __init__(self, classes, n_features, feature, threshold, left, right, counts, **kw):
        super().__init__(classes, n_features, **kw)
        self.feature = np.asarray(feature, dtype=np.int64)
        self.threshold = np.asarray(threshold, dtype=np.float64)
        self.left = np.asarray(left, dtype=np.int64)
        self.right = np.asarray(right, dtype=np.int64)
        self.counts = np.asarray(counts, dtype=np.float64).reshape(len(self.feature), len(self.classes))
        self.klass = np.argmax(self.counts, axis=1)  # ties -> lowest class index

    @property
    def n_leaves(self) -> int:
        return int(np.sum(self.feature < 0))

    def depth(self, node: int = 0) -> int:
        if self.feature[node] < 0:
            return 0
        return 1 + max(self.depth(self.left[node]), self.depth(self.right[node]))

    def _predict_index(self, X):
        node = np.zeros(len(X), dtype=np.int64)
        while True:
            f = self.feature[node]
            inner = f >= 0
            if not np.any(inner):
                return self.klass[node]
            rows = np.flatnonzero(inner)
            go_left = X[rows, f[rows]] <= self.threshold[node[rows]]
            node[rows] = np.where(go_left, self.left[node[rows]], self.right[node[rows]])

    def _params(self):
        return {"feature": self.feature.tolist(), "threshold": self.threshold.tolist(),
                "left": self.left.tolist(), "right": self.right.tolist(), "counts": self.counts.tolist()}

    @classmethod
    def _from_params(cls, p, classes, n_features):
        return cls(classes, n_features, p["feature"], p["threshold"], p["left"], p["right"], p["counts"])


def _compact(feature, threshold, left, right, counts):
    """Drop nodes unreachable from the root and renumber in pre-order."""
    new_f, new_t, new_l, new_r, new_c = [], [], [], [], []

    def visit(n):
        k = len(new_f)
        new_f.append(feature[n])
        new_t.append(threshold[n])
        new_l.append(-1)
        new_r.append(-1)
        new_c.append(counts[n])
        if feature[n] >= 0:
            new_l[k] = visit(left[n])
            new_r[k] = visit(right[n])
        return k

    visit(0)
    return new_f, new_t, new_l, new_r, new_c


def _make_leaf(g, node):
    g.feature[node] = -1
    g.threshold[node] = 0.0
    g.left[node] = -1
    g.right[node] = -1


def pessimistic_errors(n: float, errors: float, confidence: float) -> float:
    """``n`` times the upper confidence limit of the binomial error rate."""
    if n <= 0:
        return 0.0
    if errors >= n:
        return float(n)
    return float(n * beta.ppf(1.0 - confidence, errors + 1.0, n - errors))


def _prune_pessimistic(g, confidence):
    def visit(node):
        counts = g.counts[node]
        n = counts.sum()
        as_leaf = pessimistic_errors(n, n - counts.max(), confidence)
        if g.feature[node] < 0:
            return as_leaf
        subtree = visit(g.left[node]) + visit(g.right[node])
        if as_leaf <= subtree + TIE_EPS:
            _make_leaf(g, node)
            return as_leaf
        return subtree

    visit(0)


def _prune_cost_complexity(g, alpha, n_total):
    while True:
        stats = {}

        def visit(node):
            counts = g.counts[node]
            r_leaf = (counts.sum() - counts.max()) / n_total
            if g.feature[node] < 0:
                return r_leaf, 1
            rl, ll = visit(g.left[node])
            rr, lr = visit(g.right[node])
            r_sub, leaves = rl + rr, ll + lr
            stats[node] = (r_leaf - r_sub) / (leaves - 1)
            return r_sub, leaves

        visit(0)
        if not stats:
            return
        weakest = min(stats.values())
        if weakest > alpha + TIE_EPS:
            return
        for node, gval in stats.items():
            if gval <= weakest + TIE_EPS:
                _make_leaf(g, node)


def _train_tree(data: Dataset, criterion, min_leaf, max_depth, classes=None):
    classes = list(classes or data.class_set)
    y = data.y_index(classes)
    g = _Grower(data.X, y, len(classes), criterion, int(min_leaf), int(max_depth))
    g.grow(np.arange(len(y)))
    return g, classes


@register
class EntropyTree(TreeModel):
    family = "EntropyTree"


@register
class GiniTree(TreeModel):
    family = "GiniTree"


def train_entropy_tree(data: Dataset, min_leaf: int = 2, max_depth: int = 25,
                       prune_confidence: float = 0.25, classes=None) -> EntropyTree:
    if not 0.0 < prune_confidence <= 1.0:
        raise ValueError("prune_confidence must be in (0, 1]; 1 disables pruning")
    g, classes = _train_tree(data, "entropy", min_leaf, max_depth, classes)
    if prune_confidence < 1.0:
        _prune_pessimistic(g, prune_confidence)
    parts = _compact(g.feature, g.threshold, g.left, g.right, g.counts)
    return EntropyTree(classes, data.n_features, *parts,
                       meta={"min_leaf": min_leaf, "max_depth": max_depth, "prune_confidence": prune_confidence})


def train_gini_tree(data: Dataset, min_leaf: int = 2, max_depth: int = 25, alpha: float = 0.0,
                    classes=None) -> GiniTree:
    if alpha < 0:
        raise ValueError("alpha must be >= 0")
    g, classes = _train_tree(data, "gini", min_leaf, max_depth, classes)
    _prune_cost_complexity(g, alpha, float(len(data)))
    parts = _compact(g.feature, g.threshold, g.left, g.right, g.counts)
    return GiniTree(classes, data.n_features, *parts,
                    meta={"min_leaf": min_leaf, "max_depth": max_depth, "alpha": alpha})
