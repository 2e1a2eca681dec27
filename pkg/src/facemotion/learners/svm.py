"""Linear soft-margin SVM, one-vs-one, trained in the dual by SMO.

Each pairwise machine solves

    min_a  1/2 a'Qa - sum(a)   s.t.  0 <= a_i <= C,  sum(y_i a_i) = 0,
    Q_ij = y_i y_j <x_i, x_j>

by repeatedly optimising the maximal violating pair (first-order working
set selection) until the KKT gap ``m(a) - M(a)`` drops to ``tol``.  The
primal weight vector ``w = sum(a_i y_i x_i)`` is kept for prediction.

Multiclass prediction is a majority vote over all pairs; tied classes are
separated by their summed decision values (each pair credits its winner
with ``|f|`` and its loser with ``-|f|``), then by class order.
"""

from __future__ import annotations

import warnings
from itertools import combinations

import numpy as np

from ..errors import ConvergenceWarning
from ..features import Dataset
from .base import Model, as_list, register

TAU = 1e-12


def smo_dual(K: np.ndarray, y: np.ndarray, C: float, tol: float = 1e-3, max_iter: int = 100000):
    """Solve the binary dual for kernel matrix ``K`` and labels ``y`` in {-1, +1}.

    Returns ``(alpha, b, iterations, converged)``; the decision function is
    ``sum_i alpha_i y_i K(x_i, x) + b``.
    """
    y = np.asarray(y, dtype=np.float64)
    n = len(y)
    Q = (y[:, None] * y[None, :]) * K
    alpha = np.zeros(n)
    G = -np.ones(n)  # gradient Q a - e
    diagQ = np.diag(Q).copy()
    converged = False
    it = 0
    while it < max_iter:
        yG = -y * G
        up = ((y > 0) & (alpha < C)) | ((y < 0) & (alpha > 0))
        low = ((y < 0) & (alpha < C)) | ((y > 0) & (alpha > 0))
        if not up.any() or not low.any():
            converged = True
            break
        i = int(np.flatnonzero(up)[np.argmax(yG[up])])
        j = int(np.flatnonzero(low)[np.argmin(yG[low])])
        if yG[i] - yG[j] <= tol:
            converged = True
            break
        it += 1
        ai, aj = alpha[i], alpha[j]
        if y[i] != y[j]:
            quad = max(diagQ[i] + diagQ[j] + 2.0 * Q[i, j], TAU)
            delta = (-G[i] - G[j]) / quad
            diff = ai - aj
            ai_new, aj_new = ai + delta, aj + delta
            if diff > 0:
                if aj_new < 0:
                    aj_new, ai_new = 0.0, diff
            else:
                if ai_new < 0:
                    ai_new, aj_new = 0.0, -diff
            if diff > 0:
                if ai_new > C:
                    ai_new, aj_new = C, C - diff
            else:
                if aj_new > C:
                    aj_new, ai_new = C, C + diff
        else:
            quad = max(diagQ[i] + diagQ[j] - 2.0 * Q[i, j], TAU)
            delta = (G[i] - G[j]) / quad
            total = ai + aj
            ai_new, aj_new = ai - delta, aj + delta
            if total > C:
                if ai_new > C:
                    ai_new, aj_new = C, total - C
            else:
                if aj_new < 0:
                    aj_new, ai_new = 0.0, total
            if total > C:
                if aj_new > C:
                    aj_new, ai_new = C, total - C
            else:
                if ai_new < 0:
                    ai_new, aj_new = 0.0, total
        G += Q[:, i] * (ai_new - ai) + Q[:, j] * (aj_new - aj)
        alpha[i], alpha[j] = ai_new, aj_new

    yG = -y * G
    free = (alpha > 0) & (alpha < C)
    if free.any():
        rho = float(np.mean(y[free] * G[free]))
    else:
        up = ((y > 0) & (alpha < C)) | ((y < 0) & (alpha > 0))
        low = ((y < 0) & (alpha < C)) | ((y > 0) & (alpha > 0))
        m = yG[up].max() if up.any() else 0.0
        M = yG[low].min() if low.any() else 0.0
        rho = -float(m + M) / 2.0
    return alpha, -rho, it, converged


def kkt_residual(K: np.ndarray, y: np.ndarray, alpha: np.ndarray, b: float, C: float) -> float:
    """Largest violation of the soft-margin KKT conditions in margin units."""
    y = np.asarray(y, dtype=np.float64)
    f = K @ (alpha * y) + b
    m = y * f
    eps = 1e-9 * C
    at_zero = alpha <= eps
    at_c = alpha >= C - eps
    free = ~at_zero & ~at_c
    r = np.zeros_like(m)
    r[at_zero] = np.maximum(0.0, 1.0 - m[at_zero])
    r[at_c] = np.maximum(0.0, m[at_c] - 1.0)
    r[free] = np.abs(m[free] - 1.0)
    return float(max(r.max(initial=0.0), abs(float(alpha @ y))))


@register
class LinearSVM(Model):
    family = "LinearSVM"

    def __init__(self, classes, n_features, pairs, W, b, **kw):
        super().__init__(classes, n_features, **kw)
        self.pairs = [tuple(int(v) for v in p) for p in pairs]
        self.W = np.asarray(W, dtype=np.float64).reshape(len(self.pairs), n_features)
        self.b = np.asarray(b, dtype=np.float64).reshape(len(self.pairs))

    def decision_values(self, X) -> np.ndarray:
        """(n, pairs) signed margins, positive favouring the first class of each pair."""
        return X @ self.W.T + self.b

    def _predict_index(self, X):
        K = len(self.classes)
        if K == 1:
            return np.zeros(len(X), dtype=np.int64)
        F = self.decision_values(X)
        votes = np.zeros((len(X), K))
        margin = np.zeros((len(X), K))
        for p, (a, c) in enumerate(self.pairs):
            win_a = F[:, p] > 0
            votes[:, a] += win_a
            votes[:, c] += ~win_a
            margin[:, a] += F[:, p]
            margin[:, c] -= F[:, p]
        out = np.empty(len(X), dtype=np.int64)
        for r in range(len(X)):
            tied = np.flatnonzero(votes[r] == votes[r].max())
            out[r] = tied[np.argmax(margin[r, tied])] if len(tied) > 1 else tied[0]
        return out

    def _params(self):
        return {"pairs": [list(p) for p in self.pairs], "W": self.W.tolist(), "b": as_list(self.b)}

    @classmethod
    def _from_params(cls, p, classes, n_features):
        return cls(classes, n_features, p["pairs"], p["W"], p["b"])


def train_linear_svm(data: Dataset, C: float = 1.0, tol: float = 1e-3, max_passes: int = 200,
                     classes=None) -> LinearSVM:
    """One-vs-one linear SVM; expects standardized features.

    ``max_passes`` caps the SMO iterations of each pair at ``max_passes``
    times the pair's sample count.  Pairs that hit the cap are listed in
    ``model.meta["unconverged"]`` and a ``ConvergenceWarning`` is issued.
    """
    if C <= 0:
        raise ValueError("C must be positive")
    classes = list(classes or data.class_set)
    yi = data.y_index(classes)
    X = data.X
    pairs, W, b = [], [], []
    unconverged = []
    max_kkt = 0.0
    for a, c in combinations(range(len(classes)), 2):
        idx = np.flatnonzero((yi == a) | (yi == c))
        pairs.append((a, c))
        if len(idx) == 0 or not (yi[idx] == a).any() or not (yi[idx] == c).any():
            # one side absent from the training data: constant vote for the present side
            W.append(np.zeros(X.shape[1]))
            b.append(1.0 if (yi[idx] == a).any() else -1.0)
            continue
        Xp = X[idx]
        yp = np.where(yi[idx] == a, 1.0, -1.0)
        Kp = Xp @ Xp.T
        alpha, bias, _, ok = smo_dual(Kp, yp, C, tol, max_iter=max_passes * len(idx))
        if not ok:
            unconverged.append([classes[a], classes[c]])
        max_kkt = max(max_kkt, kkt_residual(Kp, yp, alpha, bias, C))
        W.append((alpha * yp) @ Xp)
        b.append(bias)
    if unconverged:
        warnings.warn(ConvergenceWarning(f"SMO hit the iteration cap for {len(unconverged)} pair(s)"),
                      stacklevel=2)
    meta = {"C": C, "tol": tol, "max_passes": max_passes, "unconverged": unconverged,
            "max_kkt_residual": max_kkt}
    return LinearSVM(classes, X.shape[1], pairs, np.array(W).reshape(len(pairs), X.shape[1]), b, meta=meta)
