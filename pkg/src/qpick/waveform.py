"""Core waveform/pick data types, microsecond time arithmetic, and file I/O.

Timestamps are integer microseconds since the epoch throughout; float time
only ever appears as durations in seconds. All types are immutable after
construction and safe to share between workers.
"""

from __future__ import annotations

import enum
import io
import struct
from dataclasses import dataclass, replace
from typing import BinaryIO, Iterable, Sequence

import numpy as np

US_PER_S = 1_000_000

CHANNELS = ("E", "N", "Z")

TRACE_MAGIC = b"QPK1"


class FormatError(ValueError):
    """Raised when a byte stream does not conform to one of the file formats."""


class Stage(enum.Enum):
    TRIGGERED = "triggered"
    CLASSIFIED = "classified"
    REFINED = "refined"


_STAGE_ORDER = {Stage.TRIGGERED: 0, Stage.CLASSIFIED: 1, Stage.REFINED: 2}


def sample_offset_us(i: int, rate_hz: float) -> int:
    """Time offset of sample i at the given rate, rounded to 1 us.

    Exact for rates that divide 1e6 (e.g. the canonical 100 Hz), since
    i * 1e6 / rate stays an integer below 2**53.
    """
    return int(round(i * US_PER_S / rate_hz))


@dataclass(frozen=True)
class Trace:
    """Single-channel fixed-rate waveform segment with absolute start time."""

    station_id: str
    channel: str
    sample_rate_hz: float
    start_us: int
    samples: np.ndarray

    def __post_init__(self):
        if self.channel not in CHANNELS:
            raise ValueError(f"channel must be one of {CHANNELS}, got {self.channel!r}")
        if not (self.sample_rate_hz > 0 and np.isfinite(self.sample_rate_hz)):
            raise ValueError("sample_rate_hz must be a positive finite real")
        arr = np.ascontiguousarray(self.samples, dtype=np.float64)
        if arr.ndim != 1 or arr.size == 0:
            raise ValueError("samples must be a non-empty 1-D sequence")
        arr = arr.copy() if arr is self.samples else arr
        arr.setflags(write=False)
        object.__setattr__(self, "samples", arr)
        object.__setattr__(self, "start_us", int(self.start_us))

    @property
    def n(self) -> int:
        return self.samples.size

    @property
    def duration_s(self) -> float:
        return self.n / self.sample_rate_hz

    @property
    def end_us(self) -> int:
        """Time of the first sample past the end."""
        return self.time_of(self.n)

    def time_of(self, i: int) -> int:
        return self.start_us + sample_offset_us(i, self.sample_rate_hz)

    def index_at(self, t_us: int) -> int:
        """Nearest sample index for an absolute time (may fall outside [0, n))."""
        return int(round((t_us - self.start_us) * self.sample_rate_hz / US_PER_S))

    def slice(self, i0: int, i1: int) -> "Trace":
        if not (0 <= i0 < i1 <= self.n):
            raise ValueError(f"slice [{i0}, {i1}) out of range for {self.n} samples")
        return Trace(self.station_id, self.channel, self.sample_rate_hz,
                     self.time_of(i0), self.samples[i0:i1])


@dataclass(frozen=True)
class TriTrace:
    """Aligned three-channel (E, N, Z) trace for one station."""

    e: Trace
    n: Trace
    z: Trace

    def __post_init__(self):
        a, b, c = self.e, self.n, self.z
        if (a.channel, b.channel, c.channel) != CHANNELS:
            raise ValueError("TriTrace channels must be (E, N, Z) in order")
        if not (a.station_id == b.station_id == c.station_id):
            raise ValueError("channel station ids differ")
        if not (a.sample_rate_hz == b.sample_rate_hz == c.sample_rate_hz):
            raise ValueError("channel sample rates differ")
        if not (a.start_us == b.start_us == c.start_us):
            raise ValueError("channel start times differ")
        if not (a.n == b.n == c.n):
            raise FormatError("channel length mismatch")

    @property
    def station_id(self) -> str:
        return self.z.station_id

    @property
    def sample_rate_hz(self) -> float:
        return self.z.sample_rate_hz

    @property
    def start_us(self) -> int:
        return self.z.start_us

    @property
    def n_samples(self) -> int:
        return self.z.n

    @property
    def end_us(self) -> int:
        return self.z.end_us

    def channel(self, name: str) -> Trace:
        return {"E": self.e, "N": self.n, "Z": self.z}[name]

    def time_of(self, i: int) -> int:
        return self.z.time_of(i)

    def index_at(self, t_us: int) -> int:
        return self.z.index_at(t_us)

    def cut(self, i0: int, i1: int) -> "TriTrace":
        return TriTrace(self.e.slice(i0, i1), self.n.slice(i0, i1), self.z.slice(i0, i1))

    def as_matrix(self) -> np.ndarray:
        """(3, n) view-free copy in channel order E, N, Z."""
        return np.stack([self.e.samples, self.n.samples, self.z.samples])


def make_tritrace(station_id: str, rate_hz: float, start_us: int,
                  e: np.ndarray, n: np.ndarray, z: np.ndarray) -> TriTrace:
    return TriTrace(
        Trace(station_id, "E", rate_hz, start_us, e),
        Trace(station_id, "N", rate_hz, start_us, n),
        Trace(station_id, "Z", rate_hz, start_us, z),
    )


@dataclass(frozen=True)
class Pick:
    """A tentative or confirmed P-phase arrival.

    event_id / n_stations are set by multi-station association and
    low_contrast by AIC refinement; they stay at their defaults before that.
    """

    station_id: str
    time_us: int
    confidence: float
    stage: Stage
    event_id: int | None = None
    n_stations: int | None = None
    low_contrast: bool = False

    def __post_init__(self):
        if not (0.0 <= self.confidence <= 1.0):
            raise ValueError(f"confidence must be in [0, 1], got {self.confidence}")
        if not isinstance(self.stage, Stage):
            raise ValueError("stage must be a Stage")
        object.__setattr__(self, "time_us", int(self.time_us))

    def advanced(self, stage: Stage, **changes) -> "Pick":
        """Evolve to a later stage; transitions only run forward."""
        if _STAGE_ORDER[stage] <= _STAGE_ORDER[self.stage]:
            raise ValueError(f"stage transition {self.stage.value} -> {stage.value} not allowed")
        return replace(self, stage=stage, **changes)


@dataclass(frozen=True)
class Station:
    station_id: str
    latitude_deg: float
    longitude_deg: float

    def __post_init__(self):
        if not abs(self.latitude_deg) <= 90.0:
            raise ValueError("latitude out of range")
        if not abs(self.longitude_deg) <= 180.0:
            raise ValueError("longitude out of range")


@dataclass(frozen=True)
class LabeledArrival:
    station_id: str
    time_us: int

    def __post_init__(self):
        object.__setattr__(self, "time_us", int(self.time_us))


# ---------------------------------------------------------------------------
# trace I/O
#
# CSV layout (self-describing, two header lines):
#   station,rate_hz,start_us
#   <station>,<rate>,<start_us>
#   e,n,z
#   <e>,<n>,<z>          one row per sample
#
# bin layout, all little-endian:
#   magic "QPK1" | u32 station-id byte length | station id utf-8
#   | f64 rate_hz | i64 start_us | i64 n | 3*n f32 channel-major (E, N, Z)
# ---------------------------------------------------------------------------


def _as_reader(source) -> io.BufferedIOBase:
    if isinstance(source, (bytes, bytearray)):
        return io.BytesIO(source)
    return source


def write_trace(tri: TriTrace, sink: BinaryIO, fmt: str = "bin") -> None:
    if fmt == "bin":
        _write_trace_bin(tri, sink)
    elif fmt == "csv":
        _write_trace_csv(tri, sink)
    else:
        raise ValueError(f"unsupported trace format {fmt!r}")


def parse_trace(source, fmt: str = "bin") -> TriTrace:
    """Parse a trace byte stream in the given format ('csv' or 'bin')."""
    stream = _as_reader(source)
    if fmt == "bin":
        return _parse_trace_bin(stream)
    if fmt == "csv":
        return _parse_trace_csv(stream)
    raise ValueError(f"unsupported trace format {fmt!r}")


def _write_trace_bin(tri: TriTrace, sink: BinaryIO) -> None:
    sid = tri.station_id.encode("utf-8")
    sink.write(TRACE_MAGIC)
    sink.write(struct.pack("<I", len(sid)))
    sink.write(sid)
    sink.write(struct.pack("<dqq", tri.sample_rate_hz, tri.start_us, tri.n_samples))
    for ch in (tri.e, tri.n, tri.z):
        sink.write(ch.samples.astype("<f4").tobytes())


def _parse_trace_bin(stream: io.BufferedIOBase) -> TriTrace:
    def take(k: int) -> bytes:
        buf = stream.read(k)
        if len(buf) != k:
            raise FormatError("truncated bin trace")
        return buf

    if take(4) != TRACE_MAGIC:
        raise FormatError("malformed header: bad magic")
    (sid_len,) = struct.unpack("<I", take(4))
    if sid_len > 1 << 16:
        raise FormatError("malformed header: implausible station id length")
    sid = take(sid_len).decode("utf-8")
    rate, start_us, n = struct.unpack("<dqq", take(24))
    if not (rate > 0 and np.isfinite(rate)):
        raise FormatError("unsupported sample rate")
    if n <= 0:
        raise FormatError("malformed header: non-positive sample count")
    raw = take(3 * n * 4)
    flat = np.frombuffer(raw, dtype="<f4").astype(np.float64)
    return make_tritrace(sid, rate, start_us, flat[:n], flat[n:2 * n], flat[2 * n:])


def _write_trace_csv(tri: TriTrace, sink: BinaryIO) -> None:
    out = io.StringIO()
    out.write("station,rate_hz,start_us\n")
    out.write(f"{tri.station_id},{tri.sample_rate_hz!r},{tri.start_us}\n")
    out.write("e,n,z\n")
    for ev, nv, zv in zip(tri.e.samples.tolist(), tri.n.samples.tolist(),
                          tri.z.samples.tolist()):
        out.write(f"{ev!r},{nv!r},{zv!r}\n")
    sink.write(out.getvalue().encode("ascii"))


def _parse_trace_csv(stream: io.BufferedIOBase) -> TriTrace:
    lines = stream.read().decode("utf-8").splitlines()
    lines = [ln for ln in lines if ln.strip()]
    if len(lines) < 4 or lines[0].strip() != "station,rate_hz,start_us":
        raise FormatError("malformed header: expected 'station,rate_hz,start_us'")
    meta = lines[1].split(",")
    if len(meta) != 3:
        raise FormatError("malformed header: metadata row needs 3 fields")
    sid = meta[0]
    try:
        rate = float(meta[1])
        start_us = int(meta[2])
    except ValueError as exc:
        raise FormatError(f"malformed header: {exc}") from exc
    if not (rate > 0 and np.isfinite(rate)):
        raise FormatError("unsupported sample rate")
    if lines[2].strip() != "e,n,z":
        raise FormatError("malformed header: expected 'e,n,z'")
    rows = lines[3:]
    cols = np.empty((len(rows), 3))
    for i, ln in enumerate(rows):
        parts = ln.split(",")
        if len(parts) != 3:
            raise FormatError(f"channel length mismatch at row {i + 1}")
        try:
            cols[i] = [float(p) for p in parts]
        except ValueError as exc:
            raise FormatError(f"malformed row {i + 1}: {exc}") from exc
    return make_tritrace(sid, rate, start_us, cols[:, 0], cols[:, 1], cols[:, 2])


# ---------------------------------------------------------------------------
# picks / labels / stations CSV
# ---------------------------------------------------------------------------

_PICK_HEADER = "station,time_us,confidence,stage"
_PICK_HEADER_EXT = _PICK_HEADER + ",event_id,n_stations,low_contrast"


def write_picks(picks: Sequence[Pick], sink: BinaryIO, extended: bool | None = None) -> None:
    """Write picks as CSV, sorted by (station, time) if not already.

    The extended schema (event_id, n_stations, low_contrast columns) is used
    automatically when any pick carries refinement/association annotations.
    """
    ordered = sorted(picks, key=lambda p: (p.station_id, p.time_us))
    if extended is None:
        extended = any(p.event_id is not None or p.n_stations is not None or p.low_contrast
                       for p in ordered)
    out = io.StringIO()
    out.write((_PICK_HEADER_EXT if extended else _PICK_HEADER) + "\n")
    for p in ordered:
        row = f"{p.station_id},{p.time_us},{float(p.confidence)!r},{p.stage.value}"
        if extended:
            ev = "" if p.event_id is None else str(p.event_id)
            ns = "" if p.n_stations is None else str(p.n_stations)
            row += f",{ev},{ns},{int(p.low_contrast)}"
        out.write(row + "\n")
    sink.write(out.getvalue().encode("ascii"))


def load_picks(source) -> list[Pick]:
    lines = _as_reader(source).read().decode("utf-8").splitlines()
    lines = [ln for ln in lines if ln.strip()]
    if not lines or lines[0].strip() not in (_PICK_HEADER, _PICK_HEADER_EXT):
        raise FormatError("malformed header: not a picks CSV")
    extended = lines[0].strip() == _PICK_HEADER_EXT
    picks = []
    for i, ln in enumerate(lines[1:], start=2):
        parts = ln.split(",")
        if len(parts) != (7 if extended else 4):
            raise FormatError(f"malformed row {i}: wrong field count")
        try:
            stage = Stage(parts[3])
            kw = {}
            if extended:
                kw = dict(
                    event_id=int(parts[4]) if parts[4] else None,
                    n_stations=int(parts[5]) if parts[5] else None,
                    low_contrast=bool(int(parts[6])),
                )
            picks.append(Pick(parts[0], int(parts[1]), float(parts[2]), stage, **kw))
        except ValueError as exc:
            raise FormatError(f"malformed row {i}: {exc}") from exc
    return picks


def write_labels(labels: Iterable[LabeledArrival], sink: BinaryIO) -> None:
    out = io.StringIO()
    out.write("station,time_us\n")
    for lab in sorted(labels, key=lambda a: (a.station_id, a.time_us)):
        out.write(f"{lab.station_id},{lab.time_us}\n")
    sink.write(out.getvalue().encode("ascii"))


def load_labels(source) -> list[LabeledArrival]:
    """Load a label catalog, sorted by (station, time); exact duplicates rejected."""
    lines = _as_reader(source).read().decode("utf-8").splitlines()
    lines = [ln for ln in lines if ln.strip()]
    if not lines or lines[0].strip() != "station,time_us":
        raise FormatError("malformed header: not a labels CSV")
    arrivals = []
    for i, ln in enumerate(lines[1:], start=2):
        parts = ln.split(",")
        if len(parts) != 2:
            raise FormatError(f"malformed row {i}: wrong field count")
        try:
            arrivals.append(LabeledArrival(parts[0], int(parts[1])))
        except ValueError as exc:
            raise FormatError(f"malformed row {i}: {exc}") from exc
    arrivals.sort(key=lambda a: (a.station_id, a.time_us))
    for a, b in zip(arrivals, arrivals[1:]):
        if a == b:
            raise FormatError(f"duplicate label row {a.station_id},{a.time_us}")
    return arrivals


def write_stations(stations: Iterable[Station], sink: BinaryIO) -> None:
    out = io.StringIO()
    out.write("station,lat,lon\n")
    for st in sorted(stations, key=lambda s: s.station_id):
        out.write(f"{st.station_id},{float(st.latitude_deg)!r},{float(st.longitude_deg)!r}\n")
    sink.write(out.getvalue().encode("ascii"))


def load_stations(source) -> dict[str, Station]:
    lines = _as_reader(source).read().decode("utf-8").splitlines()
    lines = [ln for ln in lines if ln.strip()]
    if not lines or lines[0].strip() != "station,lat,lon":
        raise FormatError("malformed header: not a stations CSV")
    catalog: dict[str, Station] = {}
    for i, ln in enumerate(lines[1:], start=2):
        parts = ln.split(",")
        if len(parts) != 3:
            raise FormatError(f"malformed row {i}: wrong field count")
        try:
            st = Station(parts[0], float(parts[1]), float(parts[2]))
        except ValueError as exc:
            raise FormatError(f"malformed row {i}: {exc}") from exc
        if st.station_id in catalog:
            raise FormatError(f"duplicate station id {st.station_id!r}")
        catalog[st.station_id] = st
    return catalog


def load_trace_file(path) -> TriTrace:
    """Load a trace file, format inferred from the extension (.bin / .csv)."""
    p = str(path)
    fmt = "csv" if p.endswith(".csv") else "bin"
    with open(p, "rb") as fh:
        return parse_trace(fh, fmt)
