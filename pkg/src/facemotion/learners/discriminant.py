"""Linear discriminant analysis with a ridge-regularised pooled covariance."""

from __future__ import annotations

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from ..features import Dataset
from .base import Model, as_list, register


@register
class Discriminant(Model):
    family = "Discriminant"

    def __init__(self, classes, n_features, coef, intercept, **kw):
        super().__init__(classes, n_features, **kw)
        self.coef = np.asarray(coef, dtype=np.float64).reshape(n_features, len(self.classes))
        self.intercept = np.asarray(intercept, dtype=np.float64).reshape(len(self.classes))

    def scores(self, X) -> np.ndarray:
        return X @ self.coef + self.intercept

    def _predict_index(self, X):
        return np.argmax(self.scores(X), axis=1)  # ties -> class order

    def _params(self):
        return {"coef": self.coef.tolist(), "intercept": as_list(self.intercept)}

    @classmethod
    def _from_params(cls, p, classes, n_features):
        return cls(classes, n_features, p["coef"], p["intercept"])


def pooled_covariance(X: np.ndarray, y: np.ndarray, n_classes: int) -> np.ndarray:
    """Within-class scatter divided by ``n - K`` (or ``n`` when that is not positive)."""
    d = X.shape[1]
    S = np.zeros((d, d))
    for k in range(n_classes):
        Xk = X[y == k]
        if len(Xk):
            D = Xk - Xk.mean(axis=0)
            S += D.T @ D
    dof = len(X) - n_classes
    return S / (dof if dof > 0 else len(X))


def train_discriminant(data: Dataset, ridge: float = 1e-6, classes=None) -> Discriminant:
    """Scores ``x' S^-1 mu_k - mu_k' S^-1 mu_k / 2 + log prior_k`` with ``S`` pooled + ridge * I."""
    if ridge < 0:
        raise ValueError("ridge must be >= 0")
    classes = list(classes or data.class_set)
    y = data.y_index(classes)
    X = data.X
    K, d = len(classes), X.shape[1]
    counts = np.bincount(y, minlength=K).astype(np.float64)
    means = np.zeros((K, d))
    for k in range(K):
        if counts[k]:
            means[k] = X[y == k].mean(axis=0)
    S = pooled_covariance(X, y, K) + ridge * np.eye(d)
    try:
        coef = cho_solve(cho_factor(S), means.T)
    except np.linalg.LinAlgError:
        # ridge 0 with a singular scatter; fall back to the pseudo-inverse
        coef = np.linalg.pinv(S) @ means.T
    with np.errstate(divide="ignore"):
        log_prior = np.where(counts > 0, np.log(counts / counts.sum()), -np.inf)
    intercept = -0.5 * np.einsum("kd,dk->k", means, coef) + log_prior
    intercept = np.where(np.isfinite(intercept), intercept, -1e300)
    return Discriminant(classes, d, coef, intercept, meta={"ridge": ridge})
