"""Metrics, cross-validation harness, sensitivity sweeps, and the
station-weight clustering analysis.

A pick counts as correct when it lands strictly within the tolerance of an
unused label on the same station; matching is greedy in ascending |dt|
(ties toward the earlier label, then the earlier pick), which makes the
matched set grow monotonically with the tolerance.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from . import pipeline as pl
from . import stacking as st
from .basemodels import Dataset
from .waveform import LabeledArrival, Pick, US_PER_S


@dataclass(frozen=True)
class Matching:
    pairs: tuple[tuple[Pick, LabeledArrival], ...]
    unmatched_picks: tuple[Pick, ...]
    unmatched_labels: tuple[LabeledArrival, ...]
    tolerance_s: float


@dataclass(frozen=True)
class EvalReport:
    precision: float
    recall: float
    f_score: float
    matching: Matching

    @property
    def tolerance_s(self) -> float:
        return self.matching.tolerance_s

    def to_dict(self) -> dict:
        return {"precision": self.precision, "recall": self.recall, "f": self.f_score}


def match_picks(picks: Sequence[Pick], labels: Sequence[LabeledArrival],
                tol_s: float = 0.4) -> Matching:
    """One-to-one greedy per-station matching of picks to labels within tol_s."""
    tol_us = tol_s * US_PER_S
    by_station_labels: dict[str, list[int]] = {}
    for li, lab in enumerate(labels):
        by_station_labels.setdefault(lab.station_id, []).append(li)

    cand: list[tuple[int, int, int, int, int]] = []  # |dt|, label time, pick time, pi, li
    for pi, p in enumerate(picks):
        for li in by_station_labels.get(p.station_id, ()):
            dt = abs(p.time_us - labels[li].time_us)
            if dt < tol_us:
                cand.append((dt, labels[li].time_us, p.time_us, pi, li))
    cand.sort()

    used_p: set[int] = set()
    used_l: set[int] = set()
    pairs = []
    for _, _, _, pi, li in cand:
        if pi in used_p or li in used_l:
            continue
        used_p.add(pi)
        used_l.add(li)
        pairs.append((picks[pi], labels[li]))
    return Matching(
        pairs=tuple(pairs),
        unmatched_picks=tuple(p for i, p in enumerate(picks) if i not in used_p),
        unmatched_labels=tuple(l for i, l in enumerate(labels) if i not in used_l),
        tolerance_s=tol_s,
    )


def prf(matching: Matching) -> EvalReport:
    n_match = len(matching.pairs)
    n_picks = n_match + len(matching.unmatched_picks)
    n_labels = n_match + len(matching.unmatched_labels)
    p = n_match / n_picks if n_picks else 0.0
    r = n_match / n_labels if n_labels else 0.0
    f = 2.0 * p * r / (p + r) if p + r > 0 else 0.0
    return EvalReport(p, r, f, matching)


def evaluate(picks: Sequence[Pick], labels: Sequence[LabeledArrival],
             tol_s: float = 0.4) -> EvalReport:
    return prf(match_picks(picks, labels, tol_s))


def tolerance_sweep(picks: Sequence[Pick], labels: Sequence[LabeledArrival],
                    grid: Sequence[float]) -> list[dict]:
    """(tol, precision, recall) curve; both metrics are checked non-decreasing."""
    grid = list(grid)
    if sorted(grid) != grid:
        raise ValueError("tolerance grid must be ascending")
    curve = []
    last_p = last_r = -1.0
    for tol in grid:
        rep = evaluate(picks, labels, tol)
        if rep.precision < last_p - 1e-12 or rep.recall < last_r - 1e-12:
            raise AssertionError("matching lost monotonicity; greedy order broken")
        last_p, last_r = rep.precision, rep.recall
        curve.append({"tol": tol, "p": rep.precision, "r": rep.recall})
    return curve


# ---------------------------------------------------------------------------
# k-fold-by-block harness
# ---------------------------------------------------------------------------


@dataclass
class FoldOutcome:
    fold: int
    report: EvalReport
    n_train_rows: int


def kfold_by_block(blocks: Sequence, stations: Mapping, pipe_cfg: pl.PipelineConfig,
                   stack_cfg: st.StackConfig, tol_s: float = 0.4,
                   n_workers: int = 1) -> tuple[list[FoldOutcome], dict]:
    """Hold out each time block in turn: train the stack on the rest, run the
    pipeline on the held-out block, evaluate. Blocks need streams/labels
    attributes (synth.SynthBlock works)."""
    for b in blocks:
        if not b.labels:
            raise ValueError(f"block {b.index} has no positive labels")
    from .features import feature_names
    outcomes = []
    names = feature_names(pipe_cfg.feature)
    for test in blocks:
        xs, ys = [], []
        # mining seed and row order are keyed to each block's own tag, so
        # reordering the block list cannot change any fold's report
        for b in sorted(blocks, key=lambda b: b.index):
            if b.index == test.index:
                continue
            x, y, _ = pl.build_training_set(b.streams, b.labels, pipe_cfg,
                                            tol_s=tol_s, seed=stack_cfg.seed + b.index)
            if len(y):
                xs.append(x)
                ys.append(y)
        x_all = np.concatenate(xs)
        y_all = np.concatenate(ys)
        bundle = st.train_stack(Dataset(x_all, y_all), stack_cfg, feature_names=names,
                                n_workers=n_workers)
        result = pl.run_stream(test.streams, bundle, stations, pipe_cfg, n_workers=n_workers)
        outcomes.append(FoldOutcome(test.index, evaluate(result.picks, test.labels, tol_s),
                                    n_train_rows=len(y_all)))
    mean = {
        "precision": float(np.mean([o.report.precision for o in outcomes])),
        "recall": float(np.mean([o.report.recall for o in outcomes])),
        "f": float(np.mean([o.report.f_score for o in outcomes])),
    }
    return outcomes, mean


# ---------------------------------------------------------------------------
# k-means over per-station ensemble weights
# ---------------------------------------------------------------------------


def _kmeans_once(x: np.ndarray, k: int, rng: np.random.Generator,
                 max_iter: int = 100) -> tuple[np.ndarray, np.ndarray, float]:
    n = x.shape[0]
    # k-means++ seeding
    centers = np.empty((k, x.shape[1]))
    centers[0] = x[rng.integers(n)]
    d2 = np.sum((x - centers[0]) ** 2, axis=1)
    for j in range(1, k):
        total = d2.sum()
        if total <= 0:
            centers[j] = x[rng.integers(n)]
        else:
            centers[j] = x[np.searchsorted(np.cumsum(d2 / total), rng.random())]
        d2 = np.minimum(d2, np.sum((x - centers[j]) ** 2, axis=1))

    assign = np.full(n, -1)
    for _ in range(max_iter):
        dist = np.sum((x[:, None, :] - centers[None, :, :]) ** 2, axis=2)
        new_assign = np.argmin(dist, axis=1)
        for j in range(k):
            members = x[new_assign == j]
            if len(members):
                centers[j] = members.mean(axis=0)
            else:  # re-seed an empty cluster on the farthest point
                centers[j] = x[int(np.argmax(np.min(dist, axis=1)))]
        if np.array_equal(new_assign, assign):
            break
        assign = new_assign
    dist = np.sum((x[:, None, :] - centers[None, :, :]) ** 2, axis=2)
    assign = np.argmin(dist, axis=1)
    wcss = float(dist[np.arange(n), assign].sum())
    return assign, centers, wcss


def kmeans(x: np.ndarray, k: int, seed: int = 0, restarts: int = 50) -> tuple[np.ndarray, np.ndarray, float]:
    """Best-of-restarts Lloyd's k-means with k-means++ seeding."""
    x = np.asarray(x, dtype=np.float64)
    if k > x.shape[0]:
        raise ValueError(f"k={k} exceeds the number of points {x.shape[0]}")
    best = None
    for child in np.random.SeedSequence(seed).spawn(restarts):
        out = _kmeans_once(x, k, np.random.default_rng(child))
        if best is None or out[2] < best[2]:
            best = out
    return best


@dataclass(frozen=True)
class ClusterResult:
    assignments: dict[str, int]
    centers: np.ndarray
    wcss: float
    weights: np.ndarray
    station_ids: tuple[str, ...]

    def to_dict(self) -> dict:
        return {"assignments": dict(self.assignments), "wcss": self.wcss,
                "weights": self.weights.tolist(), "stations": list(self.station_ids)}


def cluster_station_weights(bundles: Mapping[str, st.ModelBundle], k: int = 4,
                            seed: int = 0, restarts: int = 50) -> ClusterResult:
    """k-means over the per-station meta-model weight vectors."""
    sids = tuple(sorted(bundles))
    weights = np.stack([bundles[s].meta_weights for s in sids])
    assign, centers, wcss = kmeans(weights, k, seed=seed, restarts=restarts)
    return ClusterResult({s: int(a) for s, a in zip(sids, assign)},
                         centers, wcss, weights, sids)
