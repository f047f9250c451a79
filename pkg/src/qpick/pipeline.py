"""Orchestration: per-station streaming trigger -> classifier -> refiner,
global association, counters/benchmarking, and training-set mining.

A pick for onset t is final once its station has delivered t + post_s +
aic_half_window_s of signal; chunk boundaries never change the output, and
worker-parallel runs are bitwise-identical to serial ones. Association runs
in sliding 120 s batches with 30 s overlap; overlap duplicates are
deduplicated by (station, time).
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import features as ft
from . import refiner as rf
from . import stacking as st
from .trigger import StreamingTrigger, TriggerConfig, detect_triggers
from .waveform import (LabeledArrival, Pick, Stage, Station, TriTrace,
                       US_PER_S, make_tritrace, sample_offset_us)

ASSOC_BATCH_S = 120.0
ASSOC_STRIDE_S = 90.0  # 30 s overlap


@dataclass(frozen=True)
class PipelineConfig:
    trigger: TriggerConfig = TriggerConfig()
    feature: ft.FeatureConfig = ft.FeatureConfig()
    refiner: rf.RefinerConfig = rf.RefinerConfig()
    stack_threshold: float = 0.5
    chunk_s: float = 30.0

    def __post_init__(self):
        if not 0.0 < self.stack_threshold < 1.0:
            raise ValueError("stack_threshold must be in (0, 1)")
        if self.chunk_s <= 0:
            raise ValueError("chunk_s must be positive")


def _check_bundle(bundle: st.ModelBundle, cfg: PipelineConfig) -> None:
    if bundle.feature_names != ft.feature_names(cfg.feature):
        raise ValueError("bundle/config mismatch: feature names differ "
                         f"(bundle d={len(bundle.feature_names)}, config d={cfg.feature.n_features})")


class _TriBuffer:
    """Append-only three-channel sample buffer with absolute indexing."""

    def __init__(self, station_id: str, rate_hz: float, start_us: int):
        self.station_id = station_id
        self.rate_hz = rate_hz
        self.start_us = start_us
        self._chunks: list[np.ndarray] = []  # each (3, n)
        self._base = 0  # absolute index of the first retained sample
        self.end = 0    # absolute index one past the last sample

    def append(self, tri: TriTrace) -> None:
        self._chunks.append(tri.as_matrix())
        self.end += tri.n_samples

    def trim(self, keep_from: int) -> None:
        while self._chunks and self._base + self._chunks[0].shape[1] <= keep_from:
            self._base += self._chunks[0].shape[1]
            self._chunks.pop(0)

    def cut(self, i0: int, i1: int) -> TriTrace | None:
        if i0 < self._base or i1 > self.end or i0 >= i1:
            return None
        m = np.concatenate(self._chunks, axis=1) if len(self._chunks) > 1 else self._chunks[0]
        a, b = i0 - self._base, i1 - self._base
        start = self.start_us + sample_offset_us(i0, self.rate_hz)
        return make_tritrace(self.station_id, self.rate_hz, start, m[0, a:b], m[1, a:b], m[2, a:b])


@dataclass
class StageCounters:
    samples: int = 0
    candidates: int = 0
    classified: int = 0
    refined: int = 0
    dropped_edge: int = 0
    nonfinite: int = 0
    trigger_s: float = 0.0
    classify_s: float = 0.0
    refine_s: float = 0.0

    def merge(self, other: "StageCounters") -> None:
        for name in ("samples", "candidates", "classified", "refined",
                     "dropped_edge", "nonfinite"):
            setattr(self, name, getattr(self, name) + getattr(other, name))
        for name in ("trigger_s", "classify_s", "refine_s"):
            setattr(self, name, getattr(self, name) + getattr(other, name))


class StationWorker:
    """Streaming per-station pipeline: triggers are featurized, scored and
    AIC-refined as soon as their post-window material arrives."""

    def __init__(self, station_id: str, rate_hz: float, start_us: int,
                 bundle: st.ModelBundle, cfg: PipelineConfig, collect_features: bool = False):
        self.cfg = cfg
        self.bundle = bundle
        self.rate_hz = rate_hz
        self.station_id = station_id
        self._trigger = StreamingTrigger(cfg.trigger, rate_hz, station_id, start_us)
        self._buffer = _TriBuffer(station_id, rate_hz, start_us)
        self._pending: list[Pick] = []
        self._n_pre = int(round(cfg.feature.pre_s * rate_hz))
        self._n_post = int(round(cfg.feature.post_s * rate_hz))
        self._n_final = self._n_post + int(round(cfg.refiner.aic_half_window_s * rate_hz))
        self.counters = StageCounters()
        self.picks: list[Pick] = []
        self.features: list[np.ndarray] | None = [] if collect_features else None
        self._feature_meta: list[Pick] = []

    def push(self, tri: TriTrace) -> list[Pick]:
        if tri.sample_rate_hz != self.rate_hz:
            raise ValueError("stream rate mismatch")
        self._buffer.append(tri)
        t0 = time.perf_counter()
        new = self._trigger.push(tri.z.samples)
        self.counters.trigger_s += time.perf_counter() - t0
        self.counters.samples += tri.n_samples
        self.counters.candidates += len(new)
        self._pending.extend(new)
        return self._drain(final=False)

    def finish(self) -> list[Pick]:
        return self._drain(final=True)

    def _drain(self, final: bool) -> list[Pick]:
        emitted: list[Pick] = []
        still: list[Pick] = []
        for cand in self._pending:
            i_c = self._buffer_index(cand.time_us)
            if i_c + self._n_final >= self._buffer.end:
                if final:
                    self.counters.dropped_edge += 1
                else:
                    still.append(cand)
                continue
            pick = self._process(cand, i_c)
            if pick is not None:
                emitted.append(pick)
        if final:
            self._pending = []
        else:
            self._pending = still
            if still:
                horizon = self._buffer_index(still[0].time_us) - self._n_pre
            else:
                horizon = self._buffer.end - (self._n_pre + self._n_final)
            self._buffer.trim(max(0, horizon))
        self.picks.extend(emitted)
        return emitted

    def _buffer_index(self, t_us: int) -> int:
        return int(round((t_us - self._buffer.start_us) * self.rate_hz / US_PER_S))

    def _process(self, cand: Pick, i_c: int) -> Pick | None:
        win = self._buffer.cut(i_c - self._n_pre, i_c + self._n_post)
        if win is None:
            self.counters.dropped_edge += 1
            return None
        t0 = time.perf_counter()
        guard = {"nonfinite": 0}
        fv = ft.assemble(win, self.cfg.feature, counters=guard)
        conf = st.confidence(self.bundle, fv)
        self.counters.classify_s += time.perf_counter() - t0
        self.counters.nonfinite += guard["nonfinite"]
        if self.features is not None:
            self.features.append(fv.values)
            self._feature_meta.append(cand)
        if not conf > self.cfg.stack_threshold:
            return None
        self.counters.classified += 1
        classified = cand.advanced(Stage.CLASSIFIED, confidence=conf)
        half_n = int(round(self.cfg.refiner.aic_half_window_s * self.rate_hz))
        ctx = self._buffer.cut(i_c - half_n, i_c + half_n + 1)
        t0 = time.perf_counter()
        refined = rf.refine_pick(ctx, classified, self.cfg.refiner) if ctx is not None \
            else classified.advanced(Stage.REFINED, low_contrast=True)
        self.counters.refine_s += time.perf_counter() - t0
        self.counters.refined += 1
        return refined


def _chunk_iter(tri: TriTrace, chunk_s: float) -> Iterable[TriTrace]:
    n = tri.n_samples
    step = max(1, int(round(chunk_s * tri.sample_rate_hz)))
    for i0 in range(0, n, step):
        yield tri.cut(i0, min(n, i0 + step))


def associate_batched(picks: Sequence[Pick], stations: Mapping[str, Station],
                      cfg: rf.RefinerConfig) -> list[Pick]:
    """Sliding-batch association + pruning; event ids renumbered by first appearance."""
    if not picks:
        return []
    ordered = sorted(picks, key=lambda p: (p.time_us, p.station_id))
    t_min = ordered[0].time_us
    stride_us = int(ASSOC_STRIDE_S * US_PER_S)
    batch_us = int(ASSOC_BATCH_S * US_PER_S)
    kept: dict[tuple[str, int], Pick] = {}
    k = 0
    while t_min + k * stride_us <= ordered[-1].time_us:
        lo = t_min + k * stride_us
        hi = lo + batch_us
        batch = [p for p in ordered if lo <= p.time_us < hi]
        k += 1
        if not batch:
            continue
        grouped = rf.associate(batch, stations, cfg)
        for bp in rf.prune_singletons(grouped, cfg):
            key = (bp.station_id, bp.time_us)
            if key not in kept:
                # namespace the batch-local component id before renumbering
                kept[key] = replace(bp, event_id=(k - 1) * len(ordered) + bp.event_id)
    out = sorted(kept.values(), key=lambda p: (p.time_us, p.station_id))
    seen: dict[int, int] = {}
    final = []
    for p in out:
        if p.event_id not in seen:
            seen[p.event_id] = len(seen)
        final.append(replace(p, event_id=seen[p.event_id]))
    return final


@dataclass
class PipelineResult:
    picks: list[Pick]
    counters: StageCounters
    feature_rows: np.ndarray | None = None
    feature_meta: list[Pick] = field(default_factory=list)


def run_stream(streams: Mapping[str, TriTrace | Sequence[TriTrace]],
               bundle: st.ModelBundle, stations: Mapping[str, Station],
               cfg: PipelineConfig, n_workers: int = 1,
               collect_features: bool = False) -> PipelineResult:
    """Run the full pipeline over per-station streams.

    streams maps station id to a whole TriTrace or a pre-chunked sequence;
    whole traces are ingested in cfg.chunk_s chunks. Output picks are sorted
    by (time, station) and independent of n_workers and chunking.
    """
    _check_bundle(bundle, cfg)
    rates = set()
    jobs: dict[str, list[TriTrace]] = {}
    for sid, src in streams.items():
        if sid not in stations:
            raise KeyError(f"unknown station id {sid!r}")
        chunks = list(_chunk_iter(src, cfg.chunk_s)) if isinstance(src, TriTrace) else list(src)
        if not chunks:
            continue
        rates.add(chunks[0].sample_rate_hz)
        jobs[sid] = chunks
    if len(rates) > 1:
        raise ValueError(f"stream rate mismatch across stations: {sorted(rates)}")

    def run_station(sid: str) -> StationWorker:
        chunks = jobs[sid]
        worker = StationWorker(sid, chunks[0].sample_rate_hz, chunks[0].start_us,
                               bundle, cfg, collect_features=collect_features)
        for chunk in chunks:
            worker.push(chunk)
        worker.finish()
        return worker

    sids = sorted(jobs)
    if n_workers > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            workers = list(pool.map(run_station, sids))
    else:
        workers = [run_station(sid) for sid in sids]

    counters = StageCounters()
    station_picks: list[Pick] = []
    rows: list[np.ndarray] = []
    meta: list[Pick] = []
    for w in workers:
        counters.merge(w.counters)
        station_picks.extend(w.picks)
        if collect_features and w.features is not None:
            rows.extend(w.features)
            meta.extend(w._feature_meta)
    final = associate_batched(station_picks, stations, cfg.refiner)
    return PipelineResult(
        picks=final,
        counters=counters,
        feature_rows=np.array(rows) if collect_features and rows else None,
        feature_meta=meta,
    )


def run_trigger_refiner(streams: Mapping[str, TriTrace], stations: Mapping[str, Station],
                        cfg: PipelineConfig) -> list[Pick]:
    """Classifier-bypassed baseline: triggers go straight to AIC + association."""
    picks: list[Pick] = []
    for sid in sorted(streams):
        tri = streams[sid]
        for cand in detect_triggers(tri.z, cfg.trigger):
            i_c = tri.index_at(cand.time_us)
            half_n = int(round(cfg.refiner.aic_half_window_s * tri.sample_rate_hz))
            if i_c - half_n < 0 or i_c + half_n + 1 > tri.n_samples:
                continue
            ctx = tri.cut(i_c - half_n, i_c + half_n + 1)
            picks.append(rf.refine_pick(ctx, cand, cfg.refiner))
    return associate_batched(picks, stations, cfg.refiner)


# ---------------------------------------------------------------------------
# training-set mining
# ---------------------------------------------------------------------------


def build_training_set(streams: Mapping[str, TriTrace], labels: Sequence[LabeledArrival],
                       cfg: PipelineConfig, tol_s: float = 0.4, neg_ratio: float = 5.0,
                       seed: int = 0) -> tuple[np.ndarray, np.ndarray, list[tuple[str, int, int]]]:
    """Mine a labeled training set from continuous streams.

    Positive windows are cut at the trigger candidate matched to each label
    (within tol_s), falling back to the label time when the trigger missed;
    cutting at the candidate time keeps the training alignment identical to
    what the classifier sees in deployment. Negatives are trigger candidates
    more than tol_s from every label, subsampled to neg_ratio per positive.

    Returns (feature matrix, labels, per-row (station, time_us, label)).
    """
    tol_us = int(round(tol_s * US_PER_S))
    by_station: dict[str, list[int]] = {}
    for lab in labels:
        by_station.setdefault(lab.station_id, []).append(lab.time_us)

    rows: list[np.ndarray] = []
    ys: list[int] = []
    meta: list[tuple[str, int, int]] = []
    neg_pool: list[tuple[str, int, np.ndarray]] = []
    for sid in sorted(streams):
        tri = streams[sid]
        lab_times = np.array(sorted(by_station.get(sid, [])), dtype=np.int64)
        cand_times = np.array([c.time_us for c in detect_triggers(tri.z, cfg.trigger)],
                              dtype=np.int64)
        for t_us in lab_times:
            cut_at = int(t_us)
            if cand_times.size:
                k = int(np.abs(cand_times - t_us).argmin())
                if abs(int(cand_times[k]) - int(t_us)) <= tol_us:
                    cut_at = int(cand_times[k])
            try:
                win = ft.cut_window(tri, cut_at, cfg.feature)
            except ValueError:
                continue
            rows.append(ft.assemble(win, cfg.feature).values)
            ys.append(1)
            meta.append((sid, cut_at, 1))
        for t_cand in cand_times:
            if lab_times.size and np.min(np.abs(lab_times - t_cand)) <= tol_us:
                continue
            try:
                win = ft.cut_window(tri, int(t_cand), cfg.feature)
            except ValueError:
                continue
            neg_pool.append((sid, int(t_cand), ft.assemble(win, cfg.feature).values))

    n_pos = sum(ys)
    n_neg = min(len(neg_pool), int(round(neg_ratio * n_pos))) if n_pos else len(neg_pool)
    rng = np.random.default_rng(seed)
    chosen = sorted(rng.choice(len(neg_pool), size=n_neg, replace=False)) if neg_pool else []
    for i in chosen:
        sid, t_us, vals = neg_pool[i]
        rows.append(vals)
        ys.append(0)
        meta.append((sid, t_us, 0))
    return np.array(rows), np.array(ys, dtype=np.int64), meta


# ---------------------------------------------------------------------------
# benchmarking
# ---------------------------------------------------------------------------


def bench(streams: Mapping[str, TriTrace], bundle: st.ModelBundle,
          stations: Mapping[str, Station], cfg: PipelineConfig,
          n_workers: int = 4) -> dict:
    """Timing/counter report; also checks serial == parallel pick equality."""
    t0 = time.perf_counter()
    serial = run_stream(streams, bundle, stations, cfg, n_workers=1, collect_features=True)
    serial_s = time.perf_counter() - t0
    t0 = time.perf_counter()
    parallel = run_stream(streams, bundle, stations, cfg, n_workers=n_workers)
    parallel_s = time.perf_counter() - t0
    if serial.picks != parallel.picks:
        raise AssertionError("parallel run diverged from serial run")

    c = serial.counters
    fan_serial_s = fan_parallel_s = 0.0
    if serial.feature_rows is not None and len(serial.feature_rows):
        rows = serial.feature_rows
        t0 = time.perf_counter()
        ser_scores = st.confidence_batch(bundle, rows, n_workers=1)
        fan_serial_s = time.perf_counter() - t0
        t0 = time.perf_counter()
        par_scores = st.confidence_batch(bundle, rows, n_workers=min(9, n_workers))
        fan_parallel_s = time.perf_counter() - t0
        if not np.array_equal(ser_scores, par_scores):
            raise AssertionError("parallel base-model fan-out diverged")

    def per(total_s: float, count: int) -> float:
        return total_s / count if count else 0.0

    return {
        "counts": {"samples": c.samples, "candidates": c.candidates,
                   "classified": c.classified, "refined": c.refined,
                   "final_picks": len(serial.picks), "dropped_edge": c.dropped_edge},
        "per_item_s": {"trigger_per_sample": per(c.trigger_s, c.samples),
                       "classify_per_candidate": per(c.classify_s, c.candidates),
                       "refine_per_pick": per(c.refine_s, c.refined)},
        "classifier_fanout_s": {"serial": fan_serial_s, "parallel": fan_parallel_s},
        "wall_s": {"serial": serial_s, "parallel": parallel_s, "workers": n_workers},
    }
