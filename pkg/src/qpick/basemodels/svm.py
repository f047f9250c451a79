"""Degree-3 polynomial-kernel SVM trained by simplified SMO.

The partner index j is drawn from the seeded generator, so training is
deterministic for a fixed (data, seed). The optimization is capped at 10*n
inner steps (ten full sweeps) and stops early after three sweeps without an
alpha update.
"""

from __future__ import annotations

import numpy as np

from .common import check_fit_inputs, check_predict_input, sigmoid


class PolySvm:
    def __init__(self, c: float = 1.0, degree: int = 3, coef0: float = 1.0, tol: float = 1e-3):
        self.c = c
        self.degree = degree
        self.coef0 = coef0
        self.tol = tol
        self.x: np.ndarray | None = None
        self.alpha_y: np.ndarray | None = None  # alpha_i * y_i, support rows only
        self.b: float = 0.0

    def _gamma(self, d: int) -> float:
        return 1.0 / d

    def _kernel(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        return (a @ b.T * self._gamma(a.shape[1]) + self.coef0) ** self.degree

    def fit(self, x: np.ndarray, y: np.ndarray, seed: int = 0) -> "PolySvm":
        x, y = check_fit_inputs(x, y)
        n = x.shape[0]
        ys = 2.0 * y - 1.0
        rng = np.random.default_rng(seed)
        k = self._kernel(x, x)
        alpha = np.zeros(n)
        b = 0.0
        max_steps = 10 * n
        steps = 0
        quiet_sweeps = 0
        while steps < max_steps and quiet_sweeps < 3:
            changed = 0
            for i in range(n):
                steps += 1
                if steps > max_steps:
                    break
                ei = float((alpha * ys) @ k[:, i]) + b - ys[i]
                if not ((ys[i] * ei < -self.tol and alpha[i] < self.c)
                        or (ys[i] * ei > self.tol and alpha[i] > 0)):
                    continue
                j = int(rng.integers(0, n - 1))
                if j >= i:
                    j += 1
                ej = float((alpha * ys) @ k[:, j]) + b - ys[j]
                ai_old, aj_old = alpha[i], alpha[j]
                if ys[i] != ys[j]:
                    lo, hi = max(0.0, aj_old - ai_old), min(self.c, self.c + aj_old - ai_old)
                else:
                    lo, hi = max(0.0, ai_old + aj_old - self.c), min(self.c, ai_old + aj_old)
                if lo >= hi:
                    continue
                eta = 2.0 * k[i, j] - k[i, i] - k[j, j]
                if eta >= 0:
                    continue
                aj = aj_old - ys[j] * (ei - ej) / eta
                aj = min(max(aj, lo), hi)
                if abs(aj - aj_old) < 1e-5:
                    continue
                ai = ai_old + ys[i] * ys[j] * (aj_old - aj)
                alpha[i], alpha[j] = ai, aj
                b1 = b - ei - ys[i] * (ai - ai_old) * k[i, i] - ys[j] * (aj - aj_old) * k[i, j]
                b2 = b - ej - ys[i] * (ai - ai_old) * k[i, j] - ys[j] * (aj - aj_old) * k[j, j]
                if 0 < ai < self.c:
                    b = b1
                elif 0 < aj < self.c:
                    b = b2
                else:
                    b = 0.5 * (b1 + b2)
                changed += 1
            quiet_sweeps = quiet_sweeps + 1 if changed == 0 else 0
        support = alpha > 0
        self.x = x[support]
        self.alpha_y = alpha[support] * ys[support]
        self.b = float(b)
        self._d = x.shape[1]
        return self

    def decision(self, x: np.ndarray) -> np.ndarray:
        x = check_predict_input(x, self._d)
        if self.x.shape[0] == 0:
            return np.full(x.shape[0], self.b)
        return self._kernel(x, self.x) @ self.alpha_y + self.b

    def predict_proba(self, x: np.ndarray) -> np.ndarray:
        return sigmoid(self.decision(x))

    def to_dict(self) -> dict:
        return {"c": self.c, "degree": self.degree, "coef0": self.coef0, "tol": self.tol,
                "d": self._d, "x": self.x.tolist(), "alpha_y": self.alpha_y.tolist(), "b": self.b}

    @classmethod
    def from_dict(cls, d: dict) -> "PolySvm":
        model = cls(d["c"], d["degree"], d["coef0"], d["tol"])
        model.x = np.array(d["x"]).reshape(-1, d["d"])
        model.alpha_y = np.array(d["alpha_y"])
        model.b = float(d["b"])
        model._d = d["d"]
        return model
