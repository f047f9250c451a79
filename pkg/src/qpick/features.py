"""Stage 2a: cut a [-pre, +AN] window around a candidate and featurize it.

Four feature families are computed on causally bandpassed copies of the
window: amplitude-fluctuation statistics over coarse sub-windows, the
post-arrival amplitude maximum and its neighborhood, a waterfall of band
statistics over nested sub-windows around the arrival, and
ratio/slope/polarization descriptors. Sub-window times are seconds relative
to the arrival, mapped to half-open sample ranges.

The total feature count is 679 + 12*(AN/5 - 1) for AN in {5, 10, 15, 20}.
Feature names are frozen per config so trained bundles can check alignment.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np

from . import dsp
from .waveform import FormatError, TriTrace

FLUCT_BANDS = ((2.0, 10.0), (10.0, 20.0))

WATERFALL_BANDS = (
    (0.5, 0.833),
    (0.833, 1.389),
    (1.389, 2.314),
    (2.314, 3.858),
    (3.858, 6.430),
    (6.430, 10.717),
    (10.717, 17.816),
    (17.816, 29.768),
    (29.768, 49.615),
)

OTHER_BANDS = WATERFALL_BANDS[2:7]

WATERFALL_WINDOWS = (
    (-0.2, 0.0), (0.0, 0.2),
    (-0.4, 0.0), (0.0, 0.4),
    (-0.6, 0.0), (0.0, 0.6),
    (-0.8, 0.0), (0.0, 0.8),
    (-1.0, 0.0), (0.0, 1.0),
)

_CHANNEL_KEYS = ("e", "n", "z")

ALLOWED_POST_S = (5.0, 10.0, 15.0, 20.0)


@dataclass(frozen=True)
class FeatureConfig:
    pre_s: float = 5.0
    post_s: float = 20.0
    fluct_bands: tuple = FLUCT_BANDS
    waterfall_bands: tuple = WATERFALL_BANDS
    other_bands: tuple = OTHER_BANDS
    filter_order: int = 4

    def __post_init__(self):
        if self.pre_s != 5.0:
            raise ValueError("pre-window is fixed at 5 s")
        if self.post_s not in ALLOWED_POST_S:
            raise ValueError(f"post_s must be one of {ALLOWED_POST_S}")
        if (self.fluct_bands, self.waterfall_bands, self.other_bands) != \
                (FLUCT_BANDS, WATERFALL_BANDS, OTHER_BANDS):
            raise ValueError("band tables are fixed")

    @property
    def n_segments(self) -> int:
        return int(self.post_s // 5)

    @property
    def n_features(self) -> int:
        return 679 + 12 * (self.n_segments - 1)


def _btok(band: tuple[float, float]) -> str:
    return f"{band[0]:g}-{band[1]:g}"


def _fluct_windows(cfg: FeatureConfig) -> list[tuple[str, float, float]]:
    wins = [
        ("pre5", -5.0, 0.0),
        ("post", 0.0, cfg.post_s),
        ("pre1", -1.0, 0.0),
        ("post1", 0.0, 1.0),
    ]
    wins += [(f"seg{i}", 5.0 * (i - 1), 5.0 * i) for i in range(1, cfg.n_segments + 1)]
    return wins


@lru_cache(maxsize=16)
def _names_for(post_s: float) -> tuple[str, ...]:
    cfg = FeatureConfig(post_s=post_s)
    names: list[str] = []
    for wtok, _, _ in _fluct_windows(cfg):
        for band in cfg.fluct_bands:
            for ch in _CHANNEL_KEYS:
                for stat in ("mean", "var"):
                    names.append(f"fluct_{wtok}_{_btok(band)}_{ch}_{stat}")
    for band in cfg.fluct_bands:
        for ch in ("e", "n"):
            for stat in ("max", "near_mean", "near_var"):
                names.append(f"maxamp_{_btok(band)}_{ch}_{stat}")
        names.append(f"maxamp_{_btok(band)}_z_max")
    for lo, hi in WATERFALL_WINDOWS:
        wtok = f"{'m' if lo < 0 else 'p'}{abs(lo) + abs(hi):g}"
        for band in cfg.waterfall_bands:
            for ch in _CHANNEL_KEYS:
                for stat in ("mean", "var"):
                    names.append(f"wf_{wtok}_{_btok(band)}_{ch}_{stat}")
    for band in cfg.other_bands:
        for ch in _CHANNEL_KEYS:
            for stat in ("rmsratio", "meandiff", "envslope_pre", "envslope_post"):
                names.append(f"other_{_btok(band)}_{ch}_{stat}")
    for band in cfg.other_bands:
        names.append(f"other_{_btok(band)}_polarization")
    return tuple(names)


def feature_names(cfg: FeatureConfig) -> tuple[str, ...]:
    """Frozen, order-stable feature names for this config."""
    return _names_for(cfg.post_s)


@dataclass(frozen=True)
class FeatureVector:
    values: np.ndarray
    names: tuple[str, ...]

    def __post_init__(self):
        arr = np.ascontiguousarray(self.values, dtype=np.float64)
        if arr.ndim != 1 or arr.size != len(self.names):
            raise ValueError("values/names length mismatch")
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)


def cut_window(stream: TriTrace, t_us: int, cfg: FeatureConfig) -> TriTrace:
    """Cut the [t - pre_s, t + post_s) window; sample pre_s*rate lands on t."""
    rate = stream.sample_rate_hz
    i_t = stream.index_at(t_us)
    i0 = i_t - int(round(cfg.pre_s * rate))
    i1 = i_t + int(round(cfg.post_s * rate))
    if i0 < 0 or i1 > stream.n_samples:
        raise ValueError(f"stream does not cover [{-cfg.pre_s:+}, {cfg.post_s:+}] s around t")
    return stream.cut(i0, i1)


class _BandCache:
    """Per-window cache of causally filtered (3, n) channel matrices."""

    def __init__(self, win: TriTrace, order: int):
        self._raw = win.as_matrix()
        self._rate = win.sample_rate_hz
        self._order = order
        self._cache: dict[tuple[float, float], np.ndarray] = {}

    def get(self, band: tuple[float, float]) -> np.ndarray:
        out = self._cache.get(band)
        if out is None:
            spec = dsp.BandpassSpec(band[0], band[1], self._order)
            out = np.stack([dsp.bandpass(row, self._rate, spec) for row in self._raw])
            self._cache[band] = out
        return out


def _span(cfg: FeatureConfig, rate: float, lo_s: float, hi_s: float) -> tuple[int, int]:
    off = cfg.pre_s
    return int(round((lo_s + off) * rate)), int(round((hi_s + off) * rate))


def amplitude_fluctuation(win: TriTrace, cfg: FeatureConfig, bands: _BandCache | None = None) -> np.ndarray:
    bands = bands or _BandCache(win, cfg.filter_order)
    rate = win.sample_rate_hz
    vals: list[float] = []
    for _, lo, hi in _fluct_windows(cfg):
        i0, i1 = _span(cfg, rate, lo, hi)
        for band in cfg.fluct_bands:
            m = bands.get(band)
            for ch in range(3):
                vals.extend(dsp.window_stats(m[ch, i0:i1]))
    return np.array(vals)


def maximal_amplitude(win: TriTrace, cfg: FeatureConfig, bands: _BandCache | None = None) -> np.ndarray:
    bands = bands or _BandCache(win, cfg.filter_order)
    rate = win.sample_rate_hz
    i0, i1 = _span(cfg, rate, 2.0, cfg.post_s)
    nbr = int(round(rate))  # +-1 s, inclusive, clipped to the sub-window
    vals: list[float] = []
    for band in cfg.fluct_bands:
        m = bands.get(band)
        for ch in (0, 1):  # E, N
            seg = np.abs(m[ch, i0:i1])
            k = int(np.argmax(seg))
            lo, hi = max(0, k - nbr), min(seg.size, k + nbr + 1)
            mean, var = dsp.window_stats(m[ch, i0 + lo:i0 + hi])
            vals.extend((float(seg[k]), mean, var))
        vals.append(float(np.max(np.abs(m[2, i0:i1]))))
    return np.array(vals)


def spectral_waterfall(win: TriTrace, cfg: FeatureConfig, bands: _BandCache | None = None) -> np.ndarray:
    bands = bands or _BandCache(win, cfg.filter_order)
    rate = win.sample_rate_hz
    vals: list[float] = []
    for lo, hi in WATERFALL_WINDOWS:
        i0, i1 = _span(cfg, rate, lo, hi)
        for band in cfg.waterfall_bands:
            m = bands.get(band)
            for ch in range(3):
                vals.extend(dsp.window_stats(m[ch, i0:i1]))
    return np.array(vals)


def other_features(win: TriTrace, cfg: FeatureConfig, bands: _BandCache | None = None) -> np.ndarray:
    bands = bands or _BandCache(win, cfg.filter_order)
    rate = win.sample_rate_hz
    f0, f1 = _span(cfg, rate, -5.0, 5.0)
    p0, p1 = _span(cfg, rate, 0.0, 5.0)
    vals: list[float] = []
    for band in cfg.other_bands:
        m = bands.get(band)
        for ch in range(3):
            full = m[ch, f0:f1]
            post = m[ch, p0:p1]
            den = float(np.sum(full * full))
            vals.append(dsp.rms_amplitude_ratio(post, full) if den > 0 else 0.0)
            vals.append(dsp.mean_difference(post, full))
            vals.extend(dsp.envelope_slope(full, rate))
    for band in cfg.other_bands:
        m = bands.get(band)
        e, n, z = m[0, f0:f1], m[1, f0:f1], m[2, f0:f1]
        try:
            vals.append(dsp.polarization_slope(e, n, z))
        except ValueError:
            vals.append(0.0)  # degenerate all-zero window convention
    return np.array(vals)


def assemble(win: TriTrace, cfg: FeatureConfig, counters: dict | None = None) -> FeatureVector:
    """Full feature vector in frozen family order; non-finite values become 0."""
    expect = int(round((cfg.pre_s + cfg.post_s) * win.sample_rate_hz))
    if win.n_samples != expect:
        raise ValueError(f"window must hold {expect} samples, got {win.n_samples}")
    bands = _BandCache(win, cfg.filter_order)
    values = np.concatenate([
        amplitude_fluctuation(win, cfg, bands),
        maximal_amplitude(win, cfg, bands),
        spectral_waterfall(win, cfg, bands),
        other_features(win, cfg, bands),
    ])
    bad = ~np.isfinite(values)
    if bad.any():
        values = np.where(bad, 0.0, values)
        if counters is not None:
            counters["nonfinite"] = counters.get("nonfinite", 0) + int(bad.sum())
    names = feature_names(cfg)
    assert values.size == len(names) == cfg.n_features
    return FeatureVector(values, names)


# ---------------------------------------------------------------------------
# training-export feature matrix CSV: station,time_us,label,<feature names...>
# ---------------------------------------------------------------------------


def write_feature_csv(sink, names: Sequence[str], rows: np.ndarray,
                      meta: Sequence[tuple[str, int, int]]) -> None:
    rows = np.asarray(rows, dtype=np.float64)
    if rows.shape[0] != len(meta) or (rows.size and rows.shape[1] != len(names)):
        raise ValueError("rows/meta/names shape mismatch")
    out = io.StringIO()
    out.write("station,time_us,label," + ",".join(names) + "\n")
    for (sid, t_us, label), row in zip(meta, rows):
        out.write(f"{sid},{t_us},{label}," + ",".join(repr(v) for v in row.tolist()) + "\n")
    sink.write(out.getvalue().encode("ascii"))


def load_feature_csv(source) -> tuple[tuple[str, ...], np.ndarray, list[tuple[str, int, int]]]:
    """Returns (feature names, value matrix, per-row (station, time_us, label))."""
    data = source.read() if hasattr(source, "read") else source
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    lines = [ln for ln in data.splitlines() if ln.strip()]
    if not lines or not lines[0].startswith("station,time_us,label"):
        raise FormatError("malformed header: not a feature CSV")
    names = tuple(lines[0].split(",")[3:])
    meta: list[tuple[str, int, int]] = []
    rows = np.empty((len(lines) - 1, len(names)))
    for i, ln in enumerate(lines[1:]):
        parts = ln.split(",")
        if len(parts) != 3 + len(names):
            raise FormatError(f"malformed row {i + 2}: wrong field count")
        meta.append((parts[0], int(parts[1]), int(parts[2])))
        rows[i] = [float(v) for v in parts[3:]]
    return names, rows, meta
