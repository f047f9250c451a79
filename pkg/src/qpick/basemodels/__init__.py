"""The nine base classifiers behind one train/predict-probability interface.

All models are implemented here from scratch on numpy, are deterministic
given (kind, data, seed), score in [0, 1], and serialize to JSON-able dicts.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .bayes import GaussianNb
from .common import check_fit_inputs
from .linear import LinearSvm, LogisticRegression
from .neighbors import Knn
from .svm import PolySvm
from .trees import AdaBoost, DecisionTree, RandomForest

__all__ = [
    "AdaBoost", "BaseModelKind", "Dataset", "DecisionTree", "GaussianNb", "Knn",
    "LinearSvm", "LogisticRegression", "PolySvm", "RandomForest",
    "fit", "model_from_dict", "model_to_dict", "predict_proba",
]


class BaseModelKind(enum.Enum):
    SVM_LINEAR = "svm_linear"
    SVM_POLY = "svm_poly"
    TREE_GINI = "tree_gini"
    TREE_ENTROPY = "tree_entropy"
    KNN = "knn"
    RANDOM_FOREST = "random_forest"
    ADABOOST = "adaboost"
    LOGISTIC_REGRESSION = "logistic_regression"
    GAUSSIAN_NB = "gaussian_nb"


@dataclass(frozen=True)
class Dataset:
    """n x d feature matrix with binary labels."""

    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        x, y = check_fit_inputs(self.x, self.y)
        x.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y.astype(np.int64))

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def d(self) -> int:
        return self.x.shape[1]


_FACTORIES = {
    BaseModelKind.SVM_LINEAR: LinearSvm,
    BaseModelKind.SVM_POLY: PolySvm,
    BaseModelKind.TREE_GINI: lambda: DecisionTree("gini"),
    BaseModelKind.TREE_ENTROPY: lambda: DecisionTree("entropy"),
    BaseModelKind.KNN: Knn,
    BaseModelKind.RANDOM_FOREST: RandomForest,
    BaseModelKind.ADABOOST: AdaBoost,
    BaseModelKind.LOGISTIC_REGRESSION: LogisticRegression,
    BaseModelKind.GAUSSIAN_NB: GaussianNb,
}

_CLASSES = {
    "svm_linear": LinearSvm,
    "svm_poly": PolySvm,
    "tree": DecisionTree,
    "knn": Knn,
    "random_forest": RandomForest,
    "adaboost": AdaBoost,
    "logistic_regression": LogisticRegression,
    "gaussian_nb": GaussianNb,
}

_TAGS = {
    LinearSvm: "svm_linear",
    PolySvm: "svm_poly",
    DecisionTree: "tree",
    Knn: "knn",
    RandomForest: "random_forest",
    AdaBoost: "adaboost",
    LogisticRegression: "logistic_regression",
    GaussianNb: "gaussian_nb",
}


def factory(kind: BaseModelKind) -> callable:
    """Constructor for an untrained model of the given kind (default hyperparameters)."""
    return _FACTORIES[kind]


def fit(kind: BaseModelKind, data: Dataset, seed: int = 0):
    """Train a fresh model of the given kind with its default hyperparameters."""
    model = _FACTORIES[kind]()
    model.fit(data.x, data.y, seed=seed)
    return model


def predict_proba(model, x: np.ndarray) -> np.ndarray:
    """Probability-like scores in [0, 1], one per row of x."""
    return np.clip(model.predict_proba(np.atleast_2d(np.asarray(x, dtype=np.float64))), 0.0, 1.0)


def model_to_dict(model) -> dict:
    tag = _TAGS.get(type(model))
    if tag is None:
        raise TypeError(f"cannot serialize model of type {type(model).__name__}")
    return {"type": tag, "params": model.to_dict()}


def model_from_dict(d: dict):
    cls = _CLASSES.get(d.get("type"))
    if cls is None:
        raise ValueError(f"unknown serialized model type {d.get('type')!r}")
    return cls.from_dict(d["params"])
