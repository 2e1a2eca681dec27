"""Classifier families and the common training entry point."""

from __future__ import annotations

from dataclasses import dataclass, field

from ..features import Dataset
from .base import Model, Standardizer, model_from_dict, model_from_json
from .discriminant import Discriminant, train_discriminant
from .network import Network, train_network
from .svm import LinearSVM, train_linear_svm
from .trees import EntropyTree, GiniTree, train_entropy_tree, train_gini_tree

# short name -> (family, trainer, needs standardized input)
FAMILIES = {
    "entropy": ("EntropyTree", train_entropy_tree, False),
    "gini": ("GiniTree", train_gini_tree, False),
    "svm": ("LinearSVM", train_linear_svm, True),
    "discriminant": ("Discriminant", train_discriminant, True),
    "network": ("Network", train_network, True),
}
ALIASES = {"c5.0": "entropy", "c50": "entropy", "crt": "gini", "cart": "gini", "lda": "discriminant",
           "dl": "network", "mlp": "network"}
ALL_TRAINERS = tuple(FAMILIES)


def canonical_name(name: str) -> str:
    key = name.strip().lower()
    key = ALIASES.get(key, key)
    if key not in FAMILIES:
        raise ValueError(f"unknown trainer {name!r}; choose from {', '.join(ALL_TRAINERS)}")
    return key


@dataclass(frozen=True)
class TrainerSpec:
    name: str
    cfg: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "name", canonical_name(self.name))
        object.__setattr__(self, "cfg", dict(self.cfg))

    @property
    def family(self) -> str:
        return FAMILIES[self.name][0]

    @property
    def standardize(self) -> bool:
        return FAMILIES[self.name][2]

    def to_dict(self) -> dict:
        return {"name": self.name, "family": self.family, "cfg": dict(sorted(self.cfg.items()))}


def fit_model(spec: TrainerSpec, data: Dataset, classes=None, seed: int | None = None) -> Model:
    """Train ``spec`` on ``data``; standardization (train statistics) is folded into the model.

    ``seed`` overrides the network's ``seed`` setting (the CV harness passes
    a per-fold seed); other families ignore it.
    """
    _, trainer, standardize = FAMILIES[spec.name]
    cfg = dict(spec.cfg)
    if spec.name == "network" and seed is not None:
        cfg["seed"] = seed
    scaler = None
    if standardize:
        scaler = Standardizer.fit(data.X)
        data = data.with_X(scaler.transform(data.X))
    model = trainer(data, classes=classes, **cfg)
    model.scaler = scaler
    return model


__all__ = [
    "ALL_TRAINERS", "Discriminant", "EntropyTree", "FAMILIES", "GiniTree", "LinearSVM", "Model", "Network",
    "Standardizer", "TrainerSpec", "canonical_name", "fit_model", "model_from_dict", "model_from_json",
    "train_discriminant", "train_entropy_tree", "train_gini_tree", "train_linear_svm", "train_network",
]
