"""CART decision trees plus the two tree ensembles (random forest, AdaBoost).

The split search is vectorized: per node, candidate feature columns are
stable-argsorted, label prefix sums give child impurities for every cut in
one pass, and ties break on the lowest feature index, then the lowest
threshold. Sample weights are only used by the boosting stumps.
"""

from __future__ import annotations

import numpy as np

from .common import check_fit_inputs, sigmoid

_GINI = "gini"
_ENTROPY = "entropy"


def _column_best_splits(x: np.ndarray, y: np.ndarray, w: np.ndarray,
                        criterion: str, min_leaf: int) -> tuple[np.ndarray, np.ndarray]:
    """Best (impurity, threshold) per column; +inf impurity when unsplittable."""
    n, d = x.shape
    order = np.argsort(x, axis=0, kind="stable")
    xs = np.take_along_axis(x, order, axis=0)
    ys = y[order]
    ws = w[order]
    wy = ws * ys
    cw = np.cumsum(ws, axis=0)
    cwy = np.cumsum(wy, axis=0)
    tot_w = cw[-1]
    tot_wy = cwy[-1]

    lw = cw[:-1]                      # left weight after cutting below row i+1
    lwy = cwy[:-1]
    rw = tot_w - lw
    rwy = tot_wy - lwy

    with np.errstate(divide="ignore", invalid="ignore"):
        pl = lwy / lw
        pr = rwy / rw
        if criterion == _GINI:
            il = 2.0 * pl * (1.0 - pl)
            ir = 2.0 * pr * (1.0 - pr)
        else:
            il = -(_xlogx(pl) + _xlogx(1.0 - pl))
            ir = -(_xlogx(pr) + _xlogx(1.0 - pr))
        imp = (lw * il + rw * ir) / tot_w

    counts = np.arange(1, n)[:, None]
    invalid = (xs[:-1] >= xs[1:]) | (counts < min_leaf) | (n - counts < min_leaf)
    imp = np.where(invalid | ~np.isfinite(imp), np.inf, imp)

    best_pos = np.argmin(imp, axis=0)  # first minimum -> lowest threshold
    cols = np.arange(d)
    best_imp = imp[best_pos, cols]
    thr = 0.5 * (xs[best_pos, cols] + xs[best_pos + 1, cols])
    return best_imp, thr


def _xlogx(p: np.ndarray) -> np.ndarray:
    out = np.zeros_like(p)
    mask = p > 0
    out[mask] = p[mask] * np.log2(p[mask])
    return out


def _node_impurity(y: np.ndarray, w: np.ndarray, criterion: str) -> float:
    tw = w.sum()
    p = float((w * y).sum() / tw)
    if criterion == _GINI:
        return 2.0 * p * (1.0 - p)
    return float(-(_xlogx(np.array([p])) + _xlogx(np.array([1.0 - p])))[0])


class DecisionTree:
    """Binary CART classifier; leaves store the positive-class fraction."""

    def __init__(self, criterion: str = _GINI, max_depth: int = 12, min_leaf: int = 5,
                 max_features: int | None = None):
        if criterion not in (_GINI, _ENTROPY):
            raise ValueError("criterion must be 'gini' or 'entropy'")
        self.criterion = criterion
        self.max_depth = max_depth
        self.min_leaf = min_leaf
        self.max_features = max_features
        # flat node arrays: feature < 0 marks a leaf, prob holds its estimate
        self.feature: np.ndarray | None = None
        self.threshold: np.ndarray | None = None
        self.left: np.ndarray | None = None
        self.right: np.ndarray | None = None
        self.prob: np.ndarray | None = None

    def fit(self, x: np.ndarray, y: np.ndarray, seed: int = 0,
            sample_weight: np.ndarray | None = None,
            rng: np.random.Generator | None = None) -> "DecisionTree":
        x, y = check_fit_inputs(x, y, require_both_classes=False)
        if rng is None and self.max_features is not None:
            rng = np.random.default_rng(seed)
        w = np.ones(len(y)) if sample_weight is None else np.asarray(sample_weight, dtype=np.float64)
        feat, thr, left, right, prob = [], [], [], [], []

        def grow(idx: np.ndarray, depth: int) -> int:
            node = len(feat)
            feat.append(-1)
            thr.append(0.0)
            left.append(-1)
            right.append(-1)
            yn, wn = y[idx], w[idx]
            prob.append(float((wn * yn).sum() / wn.sum()))
            n_node = idx.size
            if depth >= self.max_depth or n_node < 2 * self.min_leaf or yn.min() == yn.max():
                return node
            d = x.shape[1]
            if self.max_features is not None and self.max_features < d:
                cols = np.sort(rng.choice(d, size=self.max_features, replace=False))
            else:
                cols = np.arange(d)
            imps, thrs = _column_best_splits(x[np.ix_(idx, cols)], yn, wn,
                                             self.criterion, self.min_leaf)
            best = int(np.argmin(imps))  # first minimum -> lowest feature index
            if not np.isfinite(imps[best]):
                return node
            if imps[best] >= _node_impurity(yn, wn, self.criterion) - 1e-12:
                return node
            f_global = int(cols[best])
            t = float(thrs[best])
            mask = x[idx, f_global] <= t
            feat[node] = f_global
            thr[node] = t
            left[node] = grow(idx[mask], depth + 1)
            right[node] = grow(idx[~mask], depth + 1)
            return node

        grow(np.arange(len(y)), 0)
        self.feature = np.array(feat, dtype=np.int64)
        self.threshold = np.array(thr)
        self.left = np.array(left, dtype=np.int64)
        self.right = np.array(right, dtype=np.int64)
        self.prob = np.array(prob)
        return self

    def predict_proba(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        node = np.zeros(x.shape[0], dtype=np.int64)
        for _ in range(self.max_depth + 1):
            f = self.feature[node]
            active = f >= 0
            if not active.any():
                break
            go_left = np.zeros_like(active)
            go_left[active] = x[np.nonzero(active)[0], f[active]] <= self.threshold[node[active]]
            node = np.where(active & go_left, self.left[node],
                            np.where(active, self.right[node], node))
        return self.prob[node]

    def to_dict(self) -> dict:
        return {
            "criterion": self.criterion,
            "max_depth": self.max_depth,
            "min_leaf": self.min_leaf,
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "prob": self.prob.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DecisionTree":
        tree = cls(d["criterion"], d["max_depth"], d["min_leaf"])
        tree.feature = np.array(d["feature"], dtype=np.int64)
        tree.threshold = np.array(d["threshold"])
        tree.left = np.array(d["left"], dtype=np.int64)
        tree.right = np.array(d["right"], dtype=np.int64)
        tree.prob = np.array(d["prob"])
        return tree


class RandomForest:
    """Bagged CART ensemble; per-tree seeds derive from one root seed."""

    def __init__(self, n_trees: int = 100, max_depth: int = 12, min_leaf: int = 5,
                 bootstrap: bool = True, feature_fraction: str | float = "sqrt"):
        self.n_trees = n_trees
        self.max_depth = max_depth
        self.min_leaf = min_leaf
        self.bootstrap = bootstrap
        self.feature_fraction = feature_fraction
        self.trees: list[DecisionTree] = []

    def _max_features(self, d: int) -> int | None:
        if self.feature_fraction == "sqrt":
            return max(1, int(round(np.sqrt(d))))
        if self.feature_fraction is None or self.feature_fraction >= 1.0:
            return None
        return max(1, int(round(self.feature_fraction * d)))

    def fit(self, x: np.ndarray, y: np.ndarray, seed: int = 0) -> "RandomForest":
        x, y = check_fit_inputs(x, y)
        n, d = x.shape
        child_seeds = np.random.SeedSequence(seed).spawn(self.n_trees)
        self.trees = []
        for ss in child_seeds:
            rng = np.random.default_rng(ss)
            idx = rng.integers(0, n, size=n) if self.bootstrap else np.arange(n)
            tree = DecisionTree(_GINI, self.max_depth, self.min_leaf, self._max_features(d))
            tree.fit(x[idx], y[idx], rng=rng)
            self.trees.append(tree)
        return self

    def predict_proba(self, x: np.ndarray) -> np.ndarray:
        acc = np.zeros(np.asarray(x).shape[0])
        for tree in self.trees:
            acc += tree.predict_proba(x)
        return acc / len(self.trees)

    def to_dict(self) -> dict:
        return {
            "n_trees": self.n_trees,
            "max_depth": self.max_depth,
            "min_leaf": self.min_leaf,
            "bootstrap": self.bootstrap,
            "feature_fraction": self.feature_fraction,
            "trees": [t.to_dict() for t in self.trees],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RandomForest":
        rf = cls(d["n_trees"], d["max_depth"], d["min_leaf"], d["bootstrap"], d["feature_fraction"])
        rf.trees = [DecisionTree.from_dict(t) for t in d["trees"]]
        return rf


class AdaBoost:
    """Real-valued boosting of depth-1 stumps; score is a sigmoid of the margin sum."""

    _CLIP = 1e-6

    def __init__(self, n_stumps: int = 50):
        self.n_stumps = n_stumps
        self.stumps: list[DecisionTree] = []

    def fit(self, x: np.ndarray, y: np.ndarray, seed: int = 0) -> "AdaBoost":
        x, y = check_fit_inputs(x, y)
        n = len(y)
        y_signed = 2.0 * y - 1.0
        w = np.full(n, 1.0 / n)
        self.stumps = []
        for _ in range(self.n_stumps):
            stump = DecisionTree(_GINI, max_depth=1, min_leaf=1)
            stump.fit(x, y, sample_weight=w)
            p = np.clip(stump.predict_proba(x), self._CLIP, 1.0 - self._CLIP)
            h = 0.5 * (np.log(p) - np.log1p(-p))
            self.stumps.append(stump)
            w = w * np.exp(-y_signed * h)
            total = w.sum()
            if not np.isfinite(total) or total <= 0:
                break
            w = w / total
            w = np.maximum(w, 1e-12 * w.max())  # keep every split weighted
        return self

    def decision(self, x: np.ndarray) -> np.ndarray:
        acc = np.zeros(np.asarray(x).shape[0])
        for stump in self.stumps:
            p = np.clip(stump.predict_proba(x), self._CLIP, 1.0 - self._CLIP)
            acc += 0.5 * (np.log(p) - np.log1p(-p))
        return acc

    def predict_proba(self, x: np.ndarray) -> np.ndarray:
        return sigmoid(self.decision(x))

    def to_dict(self) -> dict:
        return {"n_stumps": self.n_stumps, "stumps": [s.to_dict() for s in self.stumps]}

    @classmethod
    def from_dict(cls, d: dict) -> "AdaBoost":
        model = cls(d["n_stumps"])
        model.stumps = [DecisionTree.from_dict(s) for s in d["stumps"]]
        return model
