"""Stage 2b: the stacked ensemble.

Training fits a per-feature standardizer on the whole training set, builds an
out-of-fold judgement matrix with stratified inner folds (every judgement
comes from a base model that never saw that row), fits a logistic-regression
meta-model on the judgements, and refits every base model on the full set.
Per-(fold, model) seeds are derived positionally from the root seed, so any
parallel schedule over the fold x model grid reproduces the serial bundle
bitwise.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from . import basemodels as bm
from .basemodels.common import sigmoid
from .basemodels.linear import LogisticRegression
from .features import FeatureVector

META_L2 = 1e-6

DEFAULT_MODEL_ORDER = tuple(bm.BaseModelKind)

BUNDLE_FORMAT_VERSION = 1


@dataclass(frozen=True)
class StackConfig:
    inner_folds: int = 5
    threshold: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.inner_folds < 2:
            raise ValueError("inner_folds must be >= 2")
        if not 0.0 < self.threshold < 1.0:
            raise ValueError("threshold must be in (0, 1)")


@dataclass(frozen=True)
class Standardizer:
    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def fit(cls, x: np.ndarray) -> "Standardizer":
        mean = x.mean(axis=0)
        std = x.std(axis=0)
        std = np.where(std > 0.0, std, 1.0)  # constant features pass through
        return cls(mean, std)

    def transform(self, x: np.ndarray) -> np.ndarray:
        return (np.asarray(x, dtype=np.float64) - self.mean) / self.std


@dataclass(frozen=True)
class ModelBundle:
    standardizer: Standardizer
    model_names: tuple[str, ...]
    base_models: tuple
    meta_weights: np.ndarray
    meta_intercept: float
    feature_names: tuple[str, ...]
    config: dict
    format_version: int = BUNDLE_FORMAT_VERSION

    def __post_init__(self):
        if not (len(self.model_names) == len(self.base_models) == self.meta_weights.size):
            raise ValueError("model names / models / meta weights length mismatch")
        if len(self.feature_names) != self.standardizer.mean.size:
            raise ValueError("feature names / standardizer length mismatch")


def stratified_folds(y: np.ndarray, n_folds: int, seed: int) -> np.ndarray:
    """Fold id per row; each class is shuffled and dealt round-robin."""
    y = np.asarray(y)
    folds = np.empty(len(y), dtype=np.int64)
    rng = np.random.default_rng(seed)
    for cls in (0, 1):
        idx = np.nonzero(y == cls)[0]
        if idx.size < n_folds:
            raise ValueError(f"class {cls} has {idx.size} rows, fewer than {n_folds} folds")
        rng.shuffle(idx)
        folds[idx] = np.arange(idx.size) % n_folds
    return folds


def _model_seeds(seed: int, n_folds: int, n_models: int) -> list[int]:
    children = np.random.SeedSequence(seed).spawn(n_folds * n_models + n_models + 1)
    return [int(c.generate_state(1)[0]) for c in children]


ModelSpec = tuple[str, Callable[[], object]]


def default_model_specs() -> list[ModelSpec]:
    return [(kind.value, bm.factory(kind)) for kind in DEFAULT_MODEL_ORDER]


def train_stack(data: bm.Dataset, cfg: StackConfig,
                feature_names: Sequence[str] | None = None,
                model_specs: Sequence[ModelSpec] | None = None,
                n_workers: int = 1) -> ModelBundle:
    """Train the full ensemble; see the module docstring for the procedure."""
    specs = list(model_specs) if model_specs is not None else default_model_specs()
    names = tuple(feature_names) if feature_names is not None \
        else tuple(f"f{i:04d}" for i in range(data.d))
    if len(names) != data.d:
        raise ValueError("feature_names length must match data dimensionality")

    std = Standardizer.fit(data.x)
    xs = std.transform(data.x)
    y = data.y
    n, m = data.n, len(specs)

    folds = stratified_folds(y, cfg.inner_folds, cfg.seed)
    seeds = _model_seeds(cfg.seed, cfg.inner_folds, m)

    def fit_fold_model(f: int, mi: int):
        train_idx = np.nonzero(folds != f)[0]
        model = specs[mi][1]()
        model.fit(xs[train_idx], y[train_idx], seed=seeds[f * m + mi])
        return model

    jobs = [(f, mi) for f in range(cfg.inner_folds) for mi in range(m)]
    if n_workers > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            fold_models = list(pool.map(lambda fm: fit_fold_model(*fm), jobs))
    else:
        fold_models = [fit_fold_model(f, mi) for f, mi in jobs]

    judgements = np.full((n, m), np.nan)
    seen_by = np.full((n, m), -1, dtype=np.int64)  # out-of-fold bookkeeping
    for (f, mi), model in zip(jobs, fold_models):
        test_idx = np.nonzero(folds == f)[0]
        judgements[test_idx, mi] = bm.predict_proba(model, xs[test_idx])
        seen_by[test_idx, mi] = f
    assert np.isfinite(judgements).all(), "out-of-fold matrix has gaps"
    assert (seen_by == folds[:, None]).all(), "a judgement came from a model that saw its row"

    meta = LogisticRegression(l2=META_L2)
    meta.fit(judgements, y)

    def fit_final(mi: int):
        model = specs[mi][1]()
        model.fit(xs, y, seed=seeds[cfg.inner_folds * m + mi])
        return model

    if n_workers > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            finals = tuple(pool.map(fit_final, range(m)))
    else:
        finals = tuple(fit_final(mi) for mi in range(m))

    return ModelBundle(
        standardizer=std,
        model_names=tuple(name for name, _ in specs),
        base_models=finals,
        meta_weights=meta.w.copy(),
        meta_intercept=float(meta.b),
        feature_names=names,
        config={"inner_folds": cfg.inner_folds, "threshold": cfg.threshold, "seed": cfg.seed},
    )


def base_scores(bundle: ModelBundle, x: np.ndarray, n_workers: int = 1) -> np.ndarray:
    """(n, n_models) base-model judgements for standardized-input rows."""
    xs = bundle.standardizer.transform(np.atleast_2d(x))
    if n_workers > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            cols = list(pool.map(lambda model: bm.predict_proba(model, xs), bundle.base_models))
    else:
        cols = [bm.predict_proba(model, xs) for model in bundle.base_models]
    return np.stack(cols, axis=1)


def confidence_batch(bundle: ModelBundle, x: np.ndarray, n_workers: int = 1) -> np.ndarray:
    scores = base_scores(bundle, x, n_workers=n_workers)
    return sigmoid(scores @ bundle.meta_weights + bundle.meta_intercept)


def confidence(bundle: ModelBundle, fv: FeatureVector) -> float:
    """Ensemble confidence in [0, 1] for one feature vector."""
    if fv.names != bundle.feature_names:
        raise ValueError("feature names do not match the bundle")
    return float(confidence_batch(bundle, fv.values[None, :])[0])


def classify(bundle: ModelBundle, fv: FeatureVector, threshold: float | None = None) -> bool:
    """Strictly-greater-than-threshold acceptance."""
    thr = bundle.config["threshold"] if threshold is None else threshold
    return confidence(bundle, fv) > thr


# ---------------------------------------------------------------------------
# bundle persistence: one versioned JSON document
# ---------------------------------------------------------------------------


def bundle_to_json(bundle: ModelBundle) -> str:
    doc = {
        "format_version": bundle.format_version,
        "standardizer": {"mean": bundle.standardizer.mean.tolist(),
                         "std": bundle.standardizer.std.tolist()},
        "model_names": list(bundle.model_names),
        "base_models": [bm.model_to_dict(model) for model in bundle.base_models],
        "meta": {"weights": bundle.meta_weights.tolist(), "intercept": bundle.meta_intercept},
        "feature_names": list(bundle.feature_names),
        "config": bundle.config,
    }
    return json.dumps(doc)


def bundle_from_json(text: str) -> ModelBundle:
    doc = json.loads(text)
    if doc.get("format_version") != BUNDLE_FORMAT_VERSION:
        raise ValueError(f"unsupported bundle format version {doc.get('format_version')!r}")
    return ModelBundle(
        standardizer=Standardizer(np.array(doc["standardizer"]["mean"]),
                                  np.array(doc["standardizer"]["std"])),
        model_names=tuple(doc["model_names"]),
        base_models=tuple(bm.model_from_dict(d) for d in doc["base_models"]),
        meta_weights=np.array(doc["meta"]["weights"]),
        meta_intercept=float(doc["meta"]["intercept"]),
        feature_names=tuple(doc["feature_names"]),
        config=doc["config"],
        format_version=doc["format_version"],
    )


def save_bundle(bundle: ModelBundle, path) -> None:
    with open(path, "w", encoding="ascii") as fh:
        fh.write(bundle_to_json(bundle))


def load_bundle(path) -> ModelBundle:
    with open(path, "r", encoding="ascii") as fh:
        return bundle_from_json(fh.read())
