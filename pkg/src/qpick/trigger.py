"""Stage 1: causal multi-band characteristic-function detector.

Per band, the vertical channel is bandpassed (causal SOS), squared, smoothed
into a short-term average energy, and scored as the excess of that
short-term average over an exponentially decaying long-term mean, in units
of that mean; the characteristic function is the max over bands. The
short-term constant scales with the band (sta_s for the lowest band,
shrinking as low-edge frequency grows) so every band integrates a comparable
number of cycles. The ratio normalization keeps the detector quiet on noise
at the working thresholds (squared-amplitude tails are chi-square heavy) and
recovers quickly after large events, where variance-based scales stay
inflated for many decay constants. The long-term mean lags one sample so an
onset never feeds its own baseline, and the CF is held at zero for the first
lta_decay_s while the baseline settles.

A time t triggers when CF(t) > s1, the mean CF over (t, t + t_up_s] exceeds
s2, and no trigger fired in the preceding refractory window. The decision for
t is final once t + t_up_s of signal has been seen; chunked invocation emits
bitwise-identical triggers to a one-shot run.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import signal

from .dsp import BandpassSpec, StreamingBandpass
from .waveform import Pick, Stage, Trace, sample_offset_us

_EPS = 1e-12

DEFAULT_BANDS = (
    BandpassSpec(2.5, 5.0),
    BandpassSpec(5.0, 10.0),
    BandpassSpec(10.0, 20.0),
)


@dataclass(frozen=True)
class TriggerConfig:
    bands: tuple[BandpassSpec, ...] = DEFAULT_BANDS
    s1: float = 6.0
    s2: float = 2.0
    t_up_s: float = 0.3
    sta_s: float = 0.25
    lta_decay_s: float = 10.0
    refractory_s: float = 1.0

    def __post_init__(self):
        if not self.bands:
            raise ValueError("bands must be non-empty")
        if not (self.s1 > self.s2 > 0):
            raise ValueError("need s1 > s2 > 0")
        if min(self.t_up_s, self.sta_s, self.lta_decay_s) <= 0 or self.refractory_s < 0:
            raise ValueError("time constants must be positive")
        if self.sta_s >= self.lta_decay_s:
            raise ValueError("sta_s must be well below lta_decay_s")


class _BandState:
    """Filter + lagged exponential moment state for one band.

    Moments start at zero and are bias-corrected by 1 - (1-alpha)^t, so the
    baseline converges quickly without seeding artifacts; correction factors
    depend only on the absolute sample index, keeping chunked runs bitwise
    identical to one-shot runs.
    """

    def __init__(self, spec: BandpassSpec, rate_hz: float, alpha_sta: float, alpha_lta: float):
        self.filt = StreamingBandpass(spec, rate_hz)
        self.alpha_sta = alpha_sta
        self.alpha_lta = alpha_lta
        self.sta_last = 0.0  # raw short-term EMA of squared amplitude
        self.lta_last = 0.0  # lagged raw long-term EMA of squared amplitude

    def push(self, chunk: np.ndarray, t_base: int) -> np.ndarray:
        """Return the normalized excess short-term energy for this chunk."""
        f = self.filt.push(chunk)
        e = f * f
        a_s, a_l = self.alpha_sta, self.alpha_lta
        sta_raw, _ = signal.lfilter([a_s], [1.0, a_s - 1.0], e,
                                    zi=np.array([(1.0 - a_s) * self.sta_last]))
        self.sta_last = float(sta_raw[-1])
        t = t_base + np.arange(f.size, dtype=np.float64)
        sta = sta_raw / np.maximum(1.0 - np.power(1.0 - a_s, t + 1.0), a_s)

        lta_raw, _ = signal.lfilter([a_l], [1.0, a_l - 1.0], e,
                                    zi=np.array([(1.0 - a_l) * self.lta_last]))
        # lagged baseline: sample t is compared against the mean of e[.. t-1]
        lta_prev = np.concatenate(([self.lta_last], lta_raw[:-1]))
        self.lta_last = float(lta_raw[-1])
        corr = np.maximum(1.0 - np.power(1.0 - a_l, t), a_l)  # t=0 guarded; masked by warm-up
        lta = lta_prev / corr
        return (sta - lta) / (lta + _EPS)


class StreamingTrigger:
    """Stateful per-station detector; feed vertical-channel chunks in order."""

    def __init__(self, cfg: TriggerConfig, rate_hz: float, station_id: str, start_us: int):
        if rate_hz <= 0:
            raise ValueError("rate must be positive")
        for b in cfg.bands:
            b.validate_for_rate(rate_hz)
        self.cfg = cfg
        self.rate_hz = rate_hz
        self.station_id = station_id
        self.start_us = start_us
        alpha_lta = 1.0 - float(np.exp(-1.0 / (rate_hz * cfg.lta_decay_s)))
        min_low = min(b.low_hz for b in cfg.bands)
        self._bands = []
        for b in cfg.bands:
            sta_b = max(cfg.sta_s * (min_low / b.low_hz), 2.0 / rate_hz)
            alpha_sta = 1.0 - float(np.exp(-1.0 / (rate_hz * sta_b)))
            self._bands.append(_BandState(b, rate_hz, alpha_sta, alpha_lta))
        self._n_up = max(1, int(round(cfg.t_up_s * rate_hz)))
        self._refr_n = int(round(cfg.refractory_s * rate_hz))
        self._warmup_n = int(round(cfg.lta_decay_s * rate_hz))
        self._cf_tail = np.empty(0)     # undecided CF values
        self._tail_base = 0             # absolute index of _cf_tail[0]
        self._last_emit: int | None = None
        self.n_samples = 0

    def _time_of(self, i: int) -> int:
        return self.start_us + sample_offset_us(i, self.rate_hz)

    def push_cf(self, chunk: np.ndarray) -> np.ndarray:
        """Advance the characteristic function by one chunk and return its values."""
        chunk = np.asarray(chunk, dtype=np.float64)
        if chunk.size == 0:
            return chunk
        t_base = self.n_samples
        cf = self._bands[0].push(chunk, t_base)
        for band in self._bands[1:]:
            cf = np.maximum(cf, band.push(chunk, t_base))
        self.n_samples += chunk.size
        if t_base < self._warmup_n:  # baseline not settled yet: hold CF at zero
            cf[:min(cf.size, self._warmup_n - t_base)] = 0.0
        return cf

    def push(self, chunk: np.ndarray) -> list[Pick]:
        """Ingest samples; return triggers whose decision window is now complete."""
        cf = self.push_cf(chunk)
        if cf.size:
            self._cf_tail = np.concatenate((self._cf_tail, cf))
        tail, base, n_up = self._cf_tail, self._tail_base, self._n_up
        n_decidable = tail.size - n_up  # i needs mean over (i, i+n_up]
        if n_decidable <= 0:
            return []
        picks = []
        for rel in np.nonzero(tail[:n_decidable] > self.cfg.s1)[0]:
            # the mean is summed over the fixed 30-sample window itself, not
            # via running prefix sums, so the result cannot depend on where a
            # chunk boundary fell
            rel = int(rel)
            up_mean = float(np.sum(tail[rel + 1:rel + n_up + 1])) / n_up
            if not up_mean > self.cfg.s2:
                continue
            i = base + rel
            if self._last_emit is not None and i - self._last_emit < self._refr_n:
                continue
            self._last_emit = i
            picks.append(Pick(self.station_id, self._time_of(i), 0.0, Stage.TRIGGERED))
        self._cf_tail = tail[n_decidable:]
        self._tail_base = base + n_decidable
        return picks


def characteristic_function(z: Trace, cfg: TriggerConfig) -> np.ndarray:
    """One-shot CF over a vertical-channel trace."""
    if z.n < 2:
        raise ValueError("trace too short for a characteristic function")
    det = StreamingTrigger(cfg, z.sample_rate_hz, z.station_id, z.start_us)
    return det.push_cf(z.samples)


def detect_triggers(z: Trace, cfg: TriggerConfig) -> list[Pick]:
    """One-shot trigger scan of a vertical-channel trace, sorted by time."""
    if z.n < 2:
        raise ValueError("trace too short to scan")
    det = StreamingTrigger(cfg, z.sample_rate_hz, z.station_id, z.start_us)
    return det.push(z.samples)
