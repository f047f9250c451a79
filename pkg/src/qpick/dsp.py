"""Signal kernels shared by the trigger and the feature extractor.

Everything here is causal: filters run forward only, so the streaming
pipeline can apply them chunk by chunk with carried state. Window statistics
follow the absolute-amplitude convention (mean/variance of |x|) except for
zscore, which normalizes the raw samples.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import signal


@dataclass(frozen=True)
class BandpassSpec:
    """Butterworth bandpass band; order is the total pole count (even)."""

    low_hz: float
    high_hz: float
    order: int = 4

    def __post_init__(self):
        if self.order < 2 or self.order % 2:
            raise ValueError("order must be a positive even integer")
        if not (0 < self.low_hz < self.high_hz):
            raise ValueError("need 0 < low_hz < high_hz")

    def validate_for_rate(self, rate_hz: float) -> None:
        if not self.high_hz < rate_hz / 2:
            raise ValueError(f"band {self.low_hz}-{self.high_hz} Hz exceeds Nyquist for {rate_hz} Hz")


@lru_cache(maxsize=256)
def _sos(low_hz: float, high_hz: float, order: int, rate_hz: float) -> np.ndarray:
    # sosfilt wants writable buffers, so the cache hands out private copies
    return signal.butter(order // 2, [low_hz, high_hz], btype="bandpass",
                         fs=rate_hz, output="sos")


def _writable(x) -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64)
    return arr.copy() if not arr.flags.writeable else arr


def bandpass(x: np.ndarray, rate_hz: float, spec: BandpassSpec) -> np.ndarray:
    """Causal Butterworth bandpass (cascaded second-order sections), zero initial state."""
    spec.validate_for_rate(rate_hz)
    return signal.sosfilt(_sos(spec.low_hz, spec.high_hz, spec.order, rate_hz), _writable(x))


class StreamingBandpass:
    """Stateful causal bandpass: push(chunk) concatenates to one long filter run."""

    def __init__(self, spec: BandpassSpec, rate_hz: float):
        spec.validate_for_rate(rate_hz)
        self._sos = _sos(spec.low_hz, spec.high_hz, spec.order, rate_hz)
        self._zi = np.zeros((self._sos.shape[0], 2))

    def push(self, chunk: np.ndarray) -> np.ndarray:
        y, self._zi = signal.sosfilt(self._sos, _writable(chunk), zi=self._zi)
        return y


def window_stats(x: np.ndarray) -> tuple[float, float]:
    """(mean, population variance) of the absolute amplitudes in the window."""
    x = np.asarray(x, dtype=np.float64)
    if x.size == 0:
        raise ValueError("empty window")
    a = np.abs(x)
    m = float(a.mean())
    v = float(np.mean((a - m) ** 2))
    return m, v


def zscore(x: np.ndarray) -> np.ndarray:
    """(x - mean(x)) / sqrt(var(x)) on the raw samples; zero variance is an error."""
    x = np.asarray(x, dtype=np.float64)
    if x.size == 0:
        raise ValueError("empty window")
    m = x.mean()
    v = np.mean((x - m) ** 2)
    if v <= 0:
        raise ValueError("zero-variance window")
    return (x - m) / np.sqrt(v)


def rms_amplitude_ratio(x: np.ndarray, y: np.ndarray) -> float:
    """sum(x^2) / sum(y^2); the denominator must carry energy."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    den = float(np.sum(y * y))
    if den <= 0:
        raise ValueError("all-zero denominator window")
    return float(np.sum(x * x)) / den


def mean_difference(x: np.ndarray, y: np.ndarray) -> float:
    """mean(|x|) - mean(|y|)."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.size == 0 or y.size == 0:
        raise ValueError("empty window")
    return float(np.mean(np.abs(x)) - np.mean(np.abs(y)))


# envelope_slope sub-ranges, seconds relative to the arrival at 0
_PRE_RANGE = (-5.0, -1.5)
_POST_RANGE = (1.5, 5.0)
_CENTER_RANGE = (-0.5, 0.5)


def envelope_slope(x: np.ndarray, rate_hz: float) -> tuple[float, float]:
    """Slopes from the pre-arrival and post-arrival envelope maxima to the central one.

    x must cover exactly [-5 s, 5 s) around the arrival. The envelope is |x|.
    With a = max over [-5, -1.5] s at time ta, b = max over [1.5, 5] s at tb,
    c = max over [-0.5, 0.5] s at tc (times in seconds relative to the
    arrival, earliest index winning ties), returns
    ((c - a)/(tc - ta), (c - b)/(100 (tc - tb))); a degenerate denominator
    yields slope 0.
    """
    x = np.asarray(x, dtype=np.float64)
    n_expected = int(round(10.0 * rate_hz))
    if x.size != n_expected:
        raise ValueError(f"window must span [-5 s, 5 s): expected {n_expected} samples, got {x.size}")
    env = np.abs(x)

    def peak(lo_s: float, hi_s: float) -> tuple[float, float]:
        i0 = int(round((lo_s + 5.0) * rate_hz))
        i1 = int(round((hi_s + 5.0) * rate_hz))
        seg = env[i0:i1]
        k = int(np.argmax(seg))
        return float(seg[k]), (i0 + k) / rate_hz - 5.0

    a, ta = peak(*_PRE_RANGE)
    b, tb = peak(*_POST_RANGE)
    c, tc = peak(*_CENTER_RANGE)
    pre = (c - a) / (tc - ta) if tc != ta else 0.0
    post = (c - b) / (100.0 * (tc - tb)) if tc != tb else 0.0
    return pre, post


def polarization_slope(e_win: np.ndarray, n_win: np.ndarray, z_win: np.ndarray) -> float:
    """Rectilinearity of three-channel motion from covariance eigenvalues.

    With eigenvalues (a, b, c) of the 3x3 channel covariance, returns
    ((a-b)^2 + (a-c)^2 + (b-c)^2) / (2 (a+b+c)^2), in [0, 1]; 0 for
    isotropic motion, 1 for purely linear motion. All-zero windows are an
    error (a+b+c = 0).
    """
    try:
        m = np.stack([np.asarray(e_win, dtype=np.float64),
                      np.asarray(n_win, dtype=np.float64),
                      np.asarray(z_win, dtype=np.float64)])
    except ValueError as exc:
        raise ValueError("windows must have equal length") from exc
    if m.shape[1] < 2:
        raise ValueError("windows must hold at least 2 samples")
    cov = np.cov(m, bias=True)
    eig = np.maximum(np.linalg.eigvalsh(cov), 0.0)
    trace = float(eig.sum())
    if trace <= 0:
        raise ValueError("degenerate all-zero windows")
    a, b, c = eig
    val = ((a - b) ** 2 + (a - c) ** 2 + (b - c) ** 2) / (2.0 * trace * trace)
    return float(min(max(val, 0.0), 1.0))
