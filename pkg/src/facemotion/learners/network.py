"""Fully connected feed-forward classifier: ReLU hidden layers, softmax output.

Trained with mini-batch gradient descent (classical momentum) on the mean
cross-entropy plus ``l2 / 2 * sum(W**2)`` over the weight matrices.  Every
random draw (initialisation and per-epoch shuffles) comes from one PCG64
stream seeded with ``seed``, so training is bit-reproducible.
"""

from __future__ import annotations

import numpy as np

from .. import rng as rngmod
from ..errors import TrainingDiverged
from ..features import Dataset
from .base import Model, register


def init_params(sizes, gen: np.random.Generator) -> list:
    """He-normal weights, zero biases; returns ``[W1, b1, W2, b2, ...]``."""
    params = []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        params.append(gen.standard_normal((fan_in, fan_out)) * np.sqrt(2.0 / fan_in))
        params.append(np.zeros(fan_out))
    return params


def forward(params, X):
    """Logits and the list of layer inputs (post-activation) needed by backprop."""
    acts = [X]
    h = X
    n_layers = len(params) // 2
    for k in range(n_layers):
        z = h @ params[2 * k] + params[2 * k + 1]
        if k < n_layers - 1:
            h = np.maximum(z, 0.0)
            acts.append(h)
        else:
            h = z
    return h, acts


def softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def loss_and_grads(params, X, y, l2: float = 0.0):
    """Mean cross-entropy (+ L2 on weights) and its gradient w.r.t. every parameter."""
    n = len(X)
    logits, acts = forward(params, X)
    z = logits - logits.max(axis=1, keepdims=True)
    logp = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    loss = -logp[np.arange(n), y].mean()
    n_layers = len(params) // 2
    loss += 0.5 * l2 * sum(float((params[2 * k] ** 2).sum()) for k in range(n_layers))

    delta = np.exp(logp)
    delta[np.arange(n), y] -= 1.0
    delta /= n
    grads = [None] * len(params)
    for k in range(n_layers - 1, -1, -1):
        grads[2 * k] = acts[k].T @ delta + l2 * params[2 * k]
        grads[2 * k + 1] = delta.sum(axis=0)
        if k > 0:
            delta = (delta @ params[2 * k].T) * (acts[k] > 0)
    return float(loss), grads


@register
class Network(Model):
    family = "Network"

    def __init__(self, classes, n_features, params, **kw):
        super().__init__(classes, n_features, **kw)
        self.params = [np.asarray(p, dtype=np.float64) for p in params]

    @property
    def layer_sizes(self) -> list:
        return [self.params[0].shape[0]] + [self.params[2 * k].shape[1] for k in range(len(self.params) // 2)]

    def probabilities(self, X) -> np.ndarray:
        return softmax(forward(self.params, X)[0])

    def _predict_index(self, X):
        return np.argmax(forward(self.params, X)[0], axis=1)

    def _params(self):
        return {"layers": [{"W": self.params[2 * k].tolist(), "b": self.params[2 * k + 1].tolist()}
                           for k in range(len(self.params) // 2)]}

    @classmethod
    def _from_params(cls, p, classes, n_features):
        params = []
        for layer in p["layers"]:
            W = np.asarray(layer["W"], dtype=np.float64)
            params += [W.reshape(-1, len(layer["b"])), np.asarray(layer["b"], dtype=np.float64)]
        return cls(classes, n_features, params)


def train_network(data: Dataset, hidden=(64, 32), epochs: int = 60, learning_rate: float = 0.05,
                  batch: int = 32, seed: int = 0, l2: float = 1e-4, momentum: float = 0.9,
                  classes=None) -> Network:
    """Train on standardized features; raises ``TrainingDiverged`` if the loss stops being finite."""
    classes = list(classes or data.class_set)
    y = data.y_index(classes)
    X = data.X
    sizes = [X.shape[1], *[int(h) for h in hidden], len(classes)]
    gen = rngmod.stream(seed, 0)
    params = init_params(sizes, gen)
    velocity = [np.zeros_like(p) for p in params]
    n = len(X)
    batch = max(1, min(int(batch), n))
    history = []
    for epoch in range(int(epochs)):
        order = gen.permutation(n)
        total = 0.0
        for start in range(0, n, batch):
            idx = order[start:start + batch]
            with np.errstate(over="ignore", invalid="ignore"):
                loss, grads = loss_and_grads(params, X[idx], y[idx], l2)
            if not np.isfinite(loss):
                raise TrainingDiverged(epoch)
            total += loss * len(idx)
            for p, v, g in zip(params, velocity, grads):
                v *= momentum
                v -= learning_rate * g
                p += v
        history.append(total / n)
        if not all(np.all(np.isfinite(p)) for p in params):
            raise TrainingDiverged(epoch)
    meta = {"hidden": list(sizes[1:-1]), "epochs": epochs, "learning_rate": learning_rate, "batch": batch,
            "seed": seed, "l2": l2, "momentum": momentum,
            "final_loss": history[-1] if history else None}
    return Network(classes, X.shape[1], params, meta=meta)
