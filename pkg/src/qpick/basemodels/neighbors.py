"""k-nearest-neighbors classifier with Laplace-smoothed vote scores."""

from __future__ import annotations

import numpy as np

from .common import check_fit_inputs, check_predict_input


class Knn:
    """Euclidean k-NN; exact distance ties break toward the lower sample index,
    and with fewer than k rows every row votes."""

    def __init__(self, k: int = 5):
        self.k = k
        self.x: np.ndarray | None = None
        self.y: np.ndarray | None = None

    def fit(self, x: np.ndarray, y: np.ndarray, seed: int = 0) -> "Knn":
        self.x, self.y = check_fit_inputs(x, y)
        return self

    def predict_proba(self, x: np.ndarray) -> np.ndarray:
        x = check_predict_input(x, self.x.shape[1])
        k_eff = min(self.k, self.x.shape[0])
        d2 = np.sum((x[:, None, :] - self.x[None, :, :]) ** 2, axis=2)
        nearest = np.argsort(d2, axis=1, kind="stable")[:, :k_eff]
        votes = self.y[nearest].sum(axis=1)
        return (votes + 0.5) / (k_eff + 1.0)

    def to_dict(self) -> dict:
        return {"k": self.k, "x": self.x.tolist(), "y": self.y.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "Knn":
        model = cls(d["k"])
        model.x = np.array(d["x"], dtype=np.float64)
        model.y = np.array(d["y"], dtype=np.float64)
        return model
