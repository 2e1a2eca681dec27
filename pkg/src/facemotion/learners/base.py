"""Shared model plumbing: label bookkeeping, feature scaling and JSON round-trip."""

from __future__ import annotations

import json
from typing import Optional

import numpy as np

from ..errors import DimensionMismatch

FORMAT_VERSION = 1
_REGISTRY: dict = {}


def register(cls):
    _REGISTRY[cls.family] = cls
    return cls


def as_list(a) -> list:
    return np.asarray(a, dtype=np.float64).tolist()


class Standardizer:
    """Zero mean / unit variance from training data; zero-variance columns map to 0."""

    def __init__(self, mean, scale):
        self.mean = np.asarray(mean, dtype=np.float64)
        self.scale = np.asarray(scale, dtype=np.float64)

    @classmethod
    def fit(cls, X: np.ndarray) -> "Standardizer":
        X = np.asarray(X, dtype=np.float64)
        # constant columns can show a rounding-level std; pin them to exactly 0
        const = X.max(axis=0) == X.min(axis=0)
        return cls(X.mean(axis=0), np.where(const, 0.0, X.std(axis=0)))

    @property
    def active(self) -> np.ndarray:
        return self.scale > 0

    def transform(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        out = np.zeros_like(X)
        a = self.active
        out[:, a] = (X[:, a] - self.mean[a]) / self.scale[a]
        return out

    def to_dict(self) -> dict:
        return {"mean": as_list(self.mean), "scale": as_list(self.scale)}

    @classmethod
    def from_dict(cls, d: dict) -> "Standardizer":
        return cls(d["mean"], d["scale"])


class Model:
    """A trained classifier over a fixed, ordered class list."""

    family = "base"

    def __init__(self, classes, n_features: int, scaler: Optional[Standardizer] = None,
                 meta: Optional[dict] = None):
        self.classes = list(classes)
        self.n_features = int(n_features)
        self.scaler = scaler
        self.meta = dict(meta or {})

    # subclasses implement these on already-scaled inputs
    def _predict_index(self, X: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _params(self) -> dict:
        raise NotImplementedError

    @classmethod
    def _from_params(cls, params: dict, classes, n_features):
        raise NotImplementedError

    def _prepare(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X[None, :]
        if X.shape[1] != self.n_features:
            raise DimensionMismatch(f"model expects {self.n_features} features, got {X.shape[1]}")
        return self.scaler.transform(X) if self.scaler is not None else X

    def predict_index(self, X) -> np.ndarray:
        return self._predict_index(self._prepare(X))

    def predict(self, X) -> list:
        return [self.classes[i] for i in self.predict_index(X)]

    def predict_one(self, values) -> str:
        return self.predict(np.asarray(values, dtype=np.float64)[None, :])[0]

    def to_dict(self) -> dict:
        return {
            "format": "facemotion-model",
            "version": FORMAT_VERSION,
            "family": self.family,
            "classes": self.classes,
            "n_features": self.n_features,
            "scaler": self.scaler.to_dict() if self.scaler is not None else None,
            "meta": self.meta,
            "params": self._params(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True) + "\n"


def model_from_dict(d: dict) -> Model:
    if d.get("format") != "facemotion-model":
        raise ValueError("not a facemotion model document")
    if d.get("version") != FORMAT_VERSION:
        raise ValueError(f"unsupported model format version {d.get('version')}")
    cls = _REGISTRY[d["family"]]
    model = cls._from_params(d["params"], d["classes"], d["n_features"])
    model.scaler = Standardizer.from_dict(d["scaler"]) if d.get("scaler") else None
    model.meta = dict(d.get("meta") or {})
    return model


def model_from_json(text: str) -> Model:
    return model_from_dict(json.loads(text))
