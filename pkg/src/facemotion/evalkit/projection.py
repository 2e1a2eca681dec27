"""Principal component projection of feature matrices."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..features import Dataset

RANK_TOL = 1e-10


@dataclass
class PCAResult:
    mean: np.ndarray        # (d,)
    components: np.ndarray  # (dims, d), rows are unit axes
    eigenvalues: np.ndarray  # (dims,)
    explained: np.ndarray   # fraction of total variance per axis
    zero_variance: np.ndarray  # bool per axis, true beyond the data's rank
    coords: np.ndarray      # (n, dims)

    def transform(self, X: np.ndarray) -> np.ndarray:
        Z = (np.asarray(X, dtype=np.float64) - self.mean) @ self.components.T
        Z[:, self.zero_variance] = 0.0
        return Z

    def to_dict(self) -> dict:
        return {"mean": self.mean.tolist(), "components": self.components.tolist(),
                "eigenvalues": self.eigenvalues.tolist(), "explained": self.explained.tolist(),
                "zero_variance": self.zero_variance.tolist()}


def pca_project(data, dims: int = 3) -> PCAResult:
    """Project mean-centred rows on the top ``dims`` eigenvectors of the sample covariance.

    Each axis is signed so its largest-magnitude loading is positive.
    Axes past the rank of the data are flagged in ``zero_variance`` and
    their coordinates set to 0.
    """
    X = data.X if isinstance(data, Dataset) else np.asarray(data, dtype=np.float64)
    n, d = X.shape
    if not 1 <= dims <= d:
        raise ValueError(f"dims must be in 1..{d}")
    if n < dims + 1:
        raise ValueError(f"need at least {dims + 1} records for {dims} components")
    mean = X.mean(axis=0)
    Xc = X - mean
    cov = Xc.T @ Xc / (n - 1)
    vals, vecs = np.linalg.eigh(cov)
    vals = np.clip(vals[::-1], 0.0, None)
    vecs = vecs[:, ::-1]
    comps = vecs[:, :dims].T.copy()
    for k in range(dims):
        if comps[k, np.argmax(np.abs(comps[k]))] < 0:
            comps[k] = -comps[k]
    total = vals.sum()
    explained = vals[:dims] / total if total > 0 else np.zeros(dims)
    zero = vals[:dims] <= RANK_TOL * max(vals[0], np.finfo(float).tiny)
    res = PCAResult(mean, comps, vals[:dims].copy(), explained, zero, np.empty((n, dims)))
    res.coords = res.transform(X)
    return res
