"""Shared helpers for the from-scratch classifiers."""

from __future__ import annotations

import numpy as np


def sigmoid(z: np.ndarray | float) -> np.ndarray | float:
    return 1.0 / (1.0 + np.exp(-np.clip(z, -500.0, 500.0)))


def check_fit_inputs(x, y, require_both_classes: bool = True) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y)
    if x.ndim != 2 or x.shape[1] == 0:
        raise ValueError("x must be a non-degenerate (n, d) matrix")
    if y.shape != (x.shape[0],):
        raise ValueError("y must be one label per row")
    if not np.isin(y, (0, 1)).all():
        raise ValueError("labels must be 0/1")
    y = y.astype(np.float64)
    if require_both_classes and (y.min() == y.max() or len(y) < 2):
        raise ValueError("need at least 2 rows with both classes present")
    return x, y


def check_predict_input(x, d: int) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != d:
        raise ValueError(f"expected feature dimension {d}, got shape {x.shape}")
    return x
