"""Synthetic multi-station aftershock corpus with exact ground truth.

Events are Poisson in time with random epicenters near a station ring. Each
event contributes, per station, a Ricker P wavelet on the vertical channel
(arriving at origin + distance/vp, amplitude decaying as 1/distance), a
slower and stronger S wavelet concentrated on the horizontals (arriving at
origin + distance/vs), and short decaying codas. Noise is Gaussian with
optional AR(1) coloration; impulsive noise bursts are single-station by
construction so multi-station pruning has true negatives to remove.

Generation is deterministic given the seed: station noise, event parameters,
and per-(event, station) codas all draw from positionally derived substreams,
so stations can be generated in parallel without changing the output.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field, replace
import numpy as np
from scipy import signal

from .refiner import haversine_km
from .waveform import (LabeledArrival, Station, TriTrace, US_PER_S, make_tritrace,
                       write_labels, write_stations, write_trace)

KM_PER_DEG_LAT = 111.19


def ring_of_stations(n: int, center: tuple[float, float] = (36.0, -117.6),
                     radius_km: float = 30.0) -> tuple[Station, ...]:
    lat0, lon0 = center
    km_per_deg_lon = KM_PER_DEG_LAT * math.cos(math.radians(lat0))
    out = []
    for i in range(n):
        ang = 2.0 * math.pi * i / n
        lat = lat0 + radius_km * math.sin(ang) / KM_PER_DEG_LAT
        lon = lon0 + radius_km * math.cos(ang) / km_per_deg_lon
        out.append(Station(f"ST{i:02d}", lat, lon))
    return tuple(out)


@dataclass(frozen=True)
class SynthConfig:
    stations: tuple[Station, ...] = field(default_factory=lambda: ring_of_stations(3))
    sample_rate_hz: float = 100.0
    block_duration_s: float = 600.0
    n_blocks: int = 1
    event_rate_hz: float = 0.02
    snr_range: tuple[float, float] = (1.0, 30.0)       # log-uniform per event
    wavelet_freq_hz: tuple[float, float] = (3.0, 15.0)  # uniform per event
    vp_km_s: float = 5.5
    vs_km_s: float = 3.2
    epicenter_spread_km: float = 40.0
    distance_ref_km: float = 25.0                       # 1/D decay reference
    noise_sigma: float = 1.0
    ar_coeff: float = 0.3
    burst_rate_hz: float = 0.0
    burst_amp_range: tuple[float, float] = (6.0, 20.0)
    burst_wobble_frac: float = 0.4  # fraction of bursts shaped like slow wavelets
    label_min_snr: float = 0.0
    min_event_gap_s: float = 0.0  # thin the Poisson schedule below this spacing
    seed: int = 0

    def __post_init__(self):
        if self.event_rate_hz < 0 or self.burst_rate_hz < 0:
            raise ValueError("rates must be non-negative")
        if not self.vp_km_s > self.vs_km_s > 0:
            raise ValueError("need vp > vs > 0")
        if self.n_blocks < 1 or self.block_duration_s <= 0:
            raise ValueError("need at least one block of positive duration")


def regime_b(cfg: SynthConfig) -> SynthConfig:
    """Transfer-test profile: heavier noise coloration, lower wavelet band."""
    return replace(cfg, ar_coeff=0.65, wavelet_freq_hz=(2.5, 8.0))


@dataclass(frozen=True)
class SynthEvent:
    origin_s: float
    lat: float
    lon: float
    snr: float
    freq_hz: float


@dataclass
class SynthBlock:
    index: int
    streams: dict[str, TriTrace]
    labels: list[LabeledArrival]
    label_meta: list[dict]  # station, time_us, event index, per-station snr
    events: list[SynthEvent]


@dataclass
class SynthCorpus:
    config: SynthConfig
    stations: tuple[Station, ...]
    blocks: list[SynthBlock]

    def all_labels(self) -> list[LabeledArrival]:
        out = []
        for b in self.blocks:
            out.extend(b.labels)
        return sorted(out, key=lambda a: (a.station_id, a.time_us))


def ricker(freq_hz: float, rate_hz: float) -> np.ndarray:
    """Ricker wavelet starting at its onset (first sample is the arrival).

    The support is +-1/f around the peak; the truncated tails are below 0.1%
    of the peak, so the onset ramp starts effectively at the first sample.
    """
    half = 1.0 / freq_hz
    t = np.arange(0.0, 2.0 * half, 1.0 / rate_hz) - half
    a = (np.pi * freq_hz * t) ** 2
    return (1.0 - 2.0 * a) * np.exp(-a)


def _coda(rng: np.random.Generator, n: int, rate_hz: float, decay_s: float) -> np.ndarray:
    """Exponentially decaying band-limited noise tail."""
    raw = rng.standard_normal(n)
    smooth = signal.lfilter([1.0], [1.0, -0.5], raw)
    return smooth * np.exp(-np.arange(n) / (decay_s * rate_hz))


def _add(buf: np.ndarray, start: int, wave: np.ndarray) -> None:
    if start >= buf.size:
        return
    end = min(buf.size, start + wave.size)
    if start < 0:
        wave = wave[-start:]
        start = 0
        end = min(buf.size, start + wave.size)
    buf[start:end] += wave[:end - start]


def _station_distance_km(ev: SynthEvent, st: Station) -> float:
    return haversine_km(Station("_ev", ev.lat, ev.lon), st)


def gen_event(cfg: SynthConfig, ev: SynthEvent, station: Station,
              buffers: tuple[np.ndarray, np.ndarray, np.ndarray],
              rng: np.random.Generator, block_start_us: int) -> dict | None:
    """Render one event into a station's channel buffers; returns label metadata."""
    rate = cfg.sample_rate_hz
    e_buf, n_buf, z_buf = buffers
    d_km = _station_distance_km(ev, station)
    tp_s = ev.origin_s + d_km / cfg.vp_km_s
    ts_s = ev.origin_s + d_km / cfg.vs_km_s
    decay = cfg.distance_ref_km / max(d_km, cfg.distance_ref_km)
    amp = ev.snr * cfg.noise_sigma * decay

    ip = int(round(tp_s * rate))
    i_s = int(round(ts_s * rate))
    p_wave = ricker(ev.freq_hz, rate) * amp
    s_wave = ricker(0.6 * ev.freq_hz, rate) * (1.8 * amp)

    _add(z_buf, ip, p_wave)
    _add(e_buf, ip, 0.3 * p_wave)
    _add(n_buf, ip, 0.3 * p_wave)
    _add(e_buf, i_s, s_wave)
    _add(n_buf, i_s, 0.9 * s_wave)
    _add(z_buf, i_s, 0.5 * s_wave)

    coda_n = int(round(4.0 * rate))
    _add(z_buf, ip, _coda(rng, coda_n, rate, 1.5) * 0.35 * amp)
    coda_s = _coda(rng, coda_n, rate, 2.0) * 0.5 * amp
    _add(e_buf, i_s, coda_s)
    _add(n_buf, i_s, _coda(rng, coda_n, rate, 2.0) * 0.5 * amp)

    snr_eff = amp / cfg.noise_sigma
    if snr_eff < cfg.label_min_snr:
        return None
    t_us = block_start_us + int(round(tp_s * US_PER_S))
    return {"station": station.station_id, "time_us": t_us,
            "snr": snr_eff, "distance_km": d_km}


def _noise(rng: np.random.Generator, n: int, sigma: float, ar: float) -> np.ndarray:
    g = rng.standard_normal(n) * sigma
    if ar <= 0:
        return g
    return signal.lfilter([1.0], [1.0, -ar], g * np.sqrt(1.0 - ar * ar))


def gen_block(cfg: SynthConfig, block_idx: int) -> SynthBlock:
    rate = cfg.sample_rate_hz
    n = int(round(cfg.block_duration_s * rate))
    block_start_us = int(round(block_idx * cfg.block_duration_s * US_PER_S))
    root = np.random.SeedSequence(entropy=cfg.seed, spawn_key=(block_idx,))
    n_st = len(cfg.stations)
    # substreams: [0] events, [1..n_st] station noise+bursts, then per-event coda
    children = root.spawn(1 + n_st)
    ev_rng = np.random.default_rng(children[0])

    # event schedule: Poisson count, origins inside the renderable span,
    # leaving room for detector warm-up plus the feature pre-window up front
    max_d = 2.0 * (cfg.epicenter_spread_km + 60.0)
    t_lo = 16.0
    t_hi = cfg.block_duration_s - 30.0 - max_d / cfg.vs_km_s
    if t_hi <= t_lo:
        raise ValueError("block too short for the event geometry")
    n_events = int(ev_rng.poisson(cfg.event_rate_hz * cfg.block_duration_s))
    lat0 = float(np.mean([s.latitude_deg for s in cfg.stations]))
    lon0 = float(np.mean([s.longitude_deg for s in cfg.stations]))
    km_per_deg_lon = KM_PER_DEG_LAT * math.cos(math.radians(lat0))
    events = []
    for _ in range(n_events):
        origin = float(ev_rng.uniform(t_lo, t_hi))
        dlat = float(ev_rng.uniform(-1, 1)) * cfg.epicenter_spread_km / KM_PER_DEG_LAT
        dlon = float(ev_rng.uniform(-1, 1)) * cfg.epicenter_spread_km / km_per_deg_lon
        snr = float(np.exp(ev_rng.uniform(np.log(cfg.snr_range[0]), np.log(cfg.snr_range[1]))))
        freq = float(ev_rng.uniform(*cfg.wavelet_freq_hz))
        events.append(SynthEvent(origin, lat0 + dlat, lon0 + dlon, snr, freq))
    events.sort(key=lambda e: e.origin_s)
    if cfg.min_event_gap_s > 0:
        spaced: list[SynthEvent] = []
        for ev in events:
            if not spaced or ev.origin_s - spaced[-1].origin_s >= cfg.min_event_gap_s:
                spaced.append(ev)
        events = spaced

    streams: dict[str, TriTrace] = {}
    labels: list[LabeledArrival] = []
    meta: list[dict] = []
    for si, st in enumerate(cfg.stations):
        st_root = children[1 + si]
        noise_rng, burst_rng, coda_root = (np.random.default_rng(s) for s in st_root.spawn(3))
        e_buf = _noise(noise_rng, n, cfg.noise_sigma, cfg.ar_coeff)
        n_buf = _noise(noise_rng, n, cfg.noise_sigma, cfg.ar_coeff)
        z_buf = _noise(noise_rng, n, cfg.noise_sigma, cfg.ar_coeff)

        coda_rngs = [np.random.default_rng(s) for s in coda_root.spawn(max(1, len(events)))]
        for ei, ev in enumerate(events):
            lab = gen_event(cfg, ev, st, (e_buf, n_buf, z_buf), coda_rngs[ei], block_start_us)
            if lab is not None:
                lab["event"] = ei + 1000 * block_idx
                labels.append(LabeledArrival(lab["station"], lab["time_us"]))
                meta.append(lab)

        # single-station impulsive noise: high-frequency clicks plus slower
        # wavelet-shaped wobbles that mimic an onset without any S phase
        n_bursts = int(burst_rng.poisson(cfg.burst_rate_hz * cfg.block_duration_s))
        for _ in range(n_bursts):
            t0 = float(burst_rng.uniform(2.0, cfg.block_duration_s - 4.0))
            amp = float(burst_rng.uniform(*cfg.burst_amp_range)) * cfg.noise_sigma
            if float(burst_rng.uniform()) < cfg.burst_wobble_frac:
                freq = float(burst_rng.uniform(2.5, 8.0))
                burst = ricker(freq, rate) * (1.0 if burst_rng.uniform() < 0.5 else -1.0)
                i0 = int(round(t0 * rate))
                _add(z_buf, i0, burst * amp)
                _add(z_buf, i0 + burst.size, _coda(burst_rng, int(round(1.5 * rate)), rate, 0.6) * 0.3 * amp)
                _add(e_buf, i0, 0.25 * amp * burst)
                _add(n_buf, i0, 0.25 * amp * burst)
                # echo pulse: S-like in time but vertical-dominant, wrong channel ratios
                echo = ricker(0.7 * freq, rate) * float(burst_rng.uniform(0.8, 1.6)) * amp
                i1 = i0 + int(round(float(burst_rng.uniform(1.5, 4.0)) * rate))
                _add(z_buf, i1, echo)
                _add(e_buf, i1, 0.3 * echo)
                _add(n_buf, i1, 0.3 * echo)
            else:
                dur_n = int(round(float(burst_rng.uniform(0.1, 0.35)) * rate))
                shape = burst_rng.standard_normal(dur_n) * np.hanning(dur_n)
                sos = signal.butter(2, [8.0, 24.0], btype="bandpass", fs=rate, output="sos")
                click = signal.sosfilt(sos, shape)
                peak = np.max(np.abs(click))
                if peak > 0:
                    _add(z_buf, int(round(t0 * rate)), click * (amp / peak))

        streams[st.station_id] = make_tritrace(st.station_id, rate, block_start_us,
                                               e_buf, n_buf, z_buf)

    labels.sort(key=lambda a: (a.station_id, a.time_us))
    meta.sort(key=lambda d: (d["station"], d["time_us"]))
    return SynthBlock(block_idx, streams, labels, meta, events)


def gen_corpus(cfg: SynthConfig) -> SynthCorpus:
    return SynthCorpus(cfg, cfg.stations, [gen_block(cfg, b) for b in range(cfg.n_blocks)])


def write_corpus(corpus: SynthCorpus, out_dir) -> None:
    """stations.csv at the root, one block_NN/ dir with traces + labels + meta."""
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "stations.csv"), "wb") as fh:
        write_stations(corpus.stations, fh)
    for block in corpus.blocks:
        bdir = os.path.join(out_dir, f"block_{block.index:02d}")
        os.makedirs(bdir, exist_ok=True)
        for sid, tri in sorted(block.streams.items()):
            with open(os.path.join(bdir, f"{sid}.bin"), "wb") as fh:
                write_trace(tri, fh, "bin")
        with open(os.path.join(bdir, "labels.csv"), "wb") as fh:
            write_labels(block.labels, fh)
        with open(os.path.join(bdir, "meta.json"), "w") as fh:
            json.dump({"label_meta": block.label_meta,
                       "n_events": len(block.events)}, fh, indent=1)
