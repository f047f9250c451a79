"""Gaussian naive Bayes with a relative variance floor."""

from __future__ import annotations

import numpy as np

from .common import check_fit_inputs, check_predict_input


class GaussianNb:
    """Per-feature class-conditional Gaussians; variances are floored at
    var_floor_rel times the largest pooled feature variance so constant
    features cannot blow up the likelihood."""

    def __init__(self, var_floor_rel: float = 1e-9):
        self.var_floor_rel = var_floor_rel
        self.log_prior: np.ndarray | None = None  # (2,)
        self.mean: np.ndarray | None = None       # (2, d)
        self.var: np.ndarray | None = None        # (2, d)

    def fit(self, x: np.ndarray, y: np.ndarray, seed: int = 0) -> "GaussianNb":
        x, y = check_fit_inputs(x, y)
        n, d = x.shape
        pooled_var = x.var(axis=0)
        floor = self.var_floor_rel * float(pooled_var.max())
        if floor <= 0:
            floor = 1e-12
        mean = np.empty((2, d))
        var = np.empty((2, d))
        prior = np.empty(2)
        for cls in (0, 1):
            rows = x[y == cls]
            prior[cls] = rows.shape[0] / n
            mean[cls] = rows.mean(axis=0)
            var[cls] = np.maximum(rows.var(axis=0), floor)
        self.log_prior = np.log(prior)
        self.mean, self.var = mean, var
        return self

    def _log_likelihood(self, x: np.ndarray, cls: int) -> np.ndarray:
        m, v = self.mean[cls], self.var[cls]
        return -0.5 * np.sum(np.log(2.0 * np.pi * v) + (x - m) ** 2 / v, axis=1)

    def predict_proba(self, x: np.ndarray) -> np.ndarray:
        x = check_predict_input(x, self.mean.shape[1])
        ll0 = self._log_likelihood(x, 0) + self.log_prior[0]
        ll1 = self._log_likelihood(x, 1) + self.log_prior[1]
        return np.exp(ll1 - np.logaddexp(ll0, ll1))

    def to_dict(self) -> dict:
        return {"var_floor_rel": self.var_floor_rel, "log_prior": self.log_prior.tolist(),
                "mean": self.mean.tolist(), "var": self.var.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "GaussianNb":
        model = cls(d["var_floor_rel"])
        model.log_prior = np.array(d["log_prior"])
        model.mean = np.array(d["mean"])
        model.var = np.array(d["var"])
        return model
