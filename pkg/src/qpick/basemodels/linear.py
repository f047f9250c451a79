"""Logistic regression and the linear-kernel SVM."""

from __future__ import annotations

import numpy as np

from .common import check_fit_inputs, check_predict_input, sigmoid


class LogisticRegression:
    """L2-regularized logistic regression trained by full-batch gradient
    descent with backtracking line search."""

    def __init__(self, l2: float = 1e-4, max_iter: int = 500, tol: float = 1e-8):
        self.l2 = l2
        self.max_iter = max_iter
        self.tol = tol
        self.w: np.ndarray | None = None
        self.b: float = 0.0

    def _loss(self, x, y_signed, w, b):
        z = x @ w + b
        return float(np.mean(np.logaddexp(0.0, -y_signed * z)) + 0.5 * self.l2 * (w @ w))

    def fit(self, x: np.ndarray, y: np.ndarray, seed: int = 0) -> "LogisticRegression":
        x, y = check_fit_inputs(x, y)
        n, d = x.shape
        y_signed = 2.0 * y - 1.0
        w = np.zeros(d)
        b = 0.0
        for _ in range(self.max_iter):
            p = sigmoid(x @ w + b)
            gw = x.T @ (p - y) / n + self.l2 * w
            gb = float(np.mean(p - y))
            gnorm2 = float(gw @ gw) + gb * gb
            if np.sqrt(gnorm2) <= self.tol:
                break
            f0 = self._loss(x, y_signed, w, b)
            step = 1.0
            for _ in range(50):
                w1 = w - step * gw
                b1 = b - step * gb
                if self._loss(x, y_signed, w1, b1) <= f0 - 1e-4 * step * gnorm2:
                    break
                step *= 0.5
            w, b = w1, b1
        self.w, self.b = w, b
        return self

    def decision(self, x: np.ndarray) -> np.ndarray:
        x = check_predict_input(x, self.w.size)
        return x @ self.w + self.b

    def predict_proba(self, x: np.ndarray) -> np.ndarray:
        return sigmoid(self.decision(x))

    def to_dict(self) -> dict:
        return {"l2": self.l2, "max_iter": self.max_iter, "tol": self.tol,
                "w": self.w.tolist(), "b": self.b}

    @classmethod
    def from_dict(cls, d: dict) -> "LogisticRegression":
        model = cls(d["l2"], d["max_iter"], d["tol"])
        model.w = np.array(d["w"])
        model.b = float(d["b"])
        return model


class LinearSvm:
    """Hinge-loss linear SVM trained by deterministic full-batch subgradient
    descent (200 epochs, eta_t = 1/sqrt(t+1)), keeping the best-objective
    iterate. Scores map through a fixed-scale sigmoid of the margin."""

    def __init__(self, c: float = 1.0, epochs: int = 200):
        self.c = c
        self.epochs = epochs
        self.w: np.ndarray | None = None
        self.b: float = 0.0

    def fit(self, x: np.ndarray, y: np.ndarray, seed: int = 0) -> "LinearSvm":
        x, y = check_fit_inputs(x, y)
        n, d = x.shape
        y_signed = 2.0 * y - 1.0
        lam = 1.0 / (self.c * n)
        w = np.zeros(d)
        b = 0.0

        def objective(w, b):
            margins = 1.0 - y_signed * (x @ w + b)
            return 0.5 * lam * float(w @ w) + float(np.mean(np.maximum(margins, 0.0)))

        best = (objective(w, b), w.copy(), b)
        for t in range(self.epochs):
            viol = y_signed * (x @ w + b) < 1.0
            gw = lam * w - (y_signed[viol] @ x[viol]) / n
            gb = -float(np.sum(y_signed[viol])) / n
            eta = 1.0 / np.sqrt(t + 1.0)
            w = w - eta * gw
            b = b - eta * gb
            obj = objective(w, b)
            if obj < best[0]:
                best = (obj, w.copy(), b)
        _, self.w, self.b = best
        return self

    def decision(self, x: np.ndarray) -> np.ndarray:
        x = check_predict_input(x, self.w.size)
        return x @ self.w + self.b

    def predict_proba(self, x: np.ndarray) -> np.ndarray:
        return sigmoid(self.decision(x))

    def to_dict(self) -> dict:
        return {"c": self.c, "epochs": self.epochs, "w": self.w.tolist(), "b": self.b}

    @classmethod
    def from_dict(cls, d: dict) -> "LinearSvm":
        model = cls(d["c"], d["epochs"])
        model.w = np.array(d["w"])
        model.b = float(d["b"])
        return model
