import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qpick.waveform import (FormatError, LabeledArrival, Pick, Stage, Station,
                            Trace, TriTrace, load_labels, load_picks,
                            load_stations, make_tritrace, parse_trace,
                            write_labels, write_picks, write_stations,
                            write_trace)


def tri(n=300, rate=100.0, start_us=0, station="ST01", seed=0):
    rng = np.random.default_rng(seed)
    chans = rng.standard_normal((3, n))
    return make_tritrace(station, rate, start_us, *chans)


class TestTrace:
    def test_time_of_is_exact_over_a_day_at_100hz(self):
        t = Trace("S", "Z", 100.0, 123, np.zeros(10))
        day_samples = 24 * 3600 * 100
        assert t.time_of(day_samples) == 123 + 24 * 3600 * 1_000_000
        assert t.time_of(1) - t.time_of(0) == 10_000

    def test_time_grid_strictly_increasing(self):
        t = Trace("S", "Z", 250.0, 0, np.zeros(10))
        times = [t.time_of(i) for i in range(5000)]
        assert all(b > a for a, b in zip(times, times[1:]))

    def test_rejects_empty_and_bad_rate(self):
        with pytest.raises(ValueError):
            Trace("S", "Z", 100.0, 0, np.array([]))
        with pytest.raises(ValueError):
            Trace("S", "Z", 0.0, 0, np.zeros(5))
        with pytest.raises(ValueError):
            Trace("S", "Q", 100.0, 0, np.zeros(5))

    def test_samples_immutable(self):
        t = Trace("S", "Z", 100.0, 0, np.zeros(5))
        with pytest.raises(ValueError):
            t.samples[0] = 1.0

    def test_slice_shifts_start(self):
        t = Trace("S", "Z", 100.0, 0, np.arange(10.0))
        s = t.slice(3, 7)
        assert s.start_us == 30_000
        assert list(s.samples) == [3.0, 4.0, 5.0, 6.0]


class TestTriTrace:
    def test_channel_length_mismatch(self):
        with pytest.raises(FormatError, match="length mismatch"):
            TriTrace(
                Trace("S", "E", 100.0, 0, np.zeros(4)),
                Trace("S", "N", 100.0, 0, np.zeros(3)),
                Trace("S", "Z", 100.0, 0, np.zeros(4)),
            )

    def test_mixed_metadata_rejected(self):
        with pytest.raises(ValueError):
            TriTrace(
                Trace("A", "E", 100.0, 0, np.zeros(4)),
                Trace("B", "N", 100.0, 0, np.zeros(4)),
                Trace("A", "Z", 100.0, 0, np.zeros(4)),
            )


class TestPick:
    def test_confidence_range(self):
        with pytest.raises(ValueError):
            Pick("S", 0, 1.5, Stage.TRIGGERED)

    def test_stage_only_moves_forward(self):
        p = Pick("S", 0, 0.0, Stage.TRIGGERED)
        c = p.advanced(Stage.CLASSIFIED, confidence=0.9)
        r = c.advanced(Stage.REFINED, time_us=100)
        assert r.stage is Stage.REFINED and r.confidence == 0.9
        with pytest.raises(ValueError):
            r.advanced(Stage.CLASSIFIED)
        with pytest.raises(ValueError):
            p.advanced(Stage.TRIGGERED)


class TestStation:
    def test_coordinate_bounds(self):
        with pytest.raises(ValueError):
            Station("S", 91.0, 0.0)
        with pytest.raises(ValueError):
            Station("S", 0.0, -181.0)


class TestTraceIO:
    def test_csv_roundtrip_duration(self):
        t = tri(n=300)
        buf = io.BytesIO()
        write_trace(t, buf, "csv")
        back = parse_trace(buf.getvalue(), "csv")
        assert back.z.duration_s == pytest.approx(3.0)
        assert back.station_id == "ST01"
        np.testing.assert_array_equal(back.e.samples, t.e.samples)

    def test_csv_channel_mismatch_detected(self):
        text = "station,rate_hz,start_us\nS,100.0,0\ne,n,z\n1.0,2.0\n"
        with pytest.raises(FormatError, match="length mismatch"):
            parse_trace(text.encode(), "csv")

    def test_csv_bad_header(self):
        with pytest.raises(FormatError, match="malformed header"):
            parse_trace(b"nope\n1,2,3\n", "csv")

    def test_csv_bad_rate(self):
        text = "station,rate_hz,start_us\nS,-5,0\ne,n,z\n1,2,3\n"
        with pytest.raises(FormatError, match="unsupported sample rate"):
            parse_trace(text.encode(), "csv")

    def test_bin_truncation_detected(self):
        t = tri(n=50)
        buf = io.BytesIO()
        write_trace(t, buf, "bin")
        with pytest.raises(FormatError, match="truncated"):
            parse_trace(buf.getvalue()[:-7], "bin")

    def test_bin_magic_checked(self):
        with pytest.raises(FormatError, match="magic"):
            parse_trace(b"NOPE" + b"\0" * 64, "bin")

    @settings(max_examples=25, deadline=None)
    @given(st.integers(1, 400), st.integers(0, 2**31), st.integers(0, 10_000))
    def test_bin_roundtrip_bit_identical(self, n, seed, start_us):
        rng = np.random.default_rng(seed)
        # float32-representable samples survive the 32-bit file format exactly
        chans = rng.standard_normal((3, n)).astype(np.float32).astype(np.float64)
        t = make_tritrace("ST42", 100.0, start_us, *chans)
        buf = io.BytesIO()
        write_trace(t, buf, "bin")
        back = parse_trace(buf.getvalue(), "bin")
        assert back.start_us == start_us
        for ch in "enz":
            np.testing.assert_array_equal(getattr(back, ch).samples,
                                          getattr(t, ch).samples)


class TestPicksIO:
    def test_empty_list_header_only(self):
        buf = io.BytesIO()
        write_picks([], buf)
        assert buf.getvalue() == b"station,time_us,confidence,stage\n"

    def test_single_pick_row(self):
        buf = io.BytesIO()
        write_picks([Pick("ST01", 10_000_000, 0.75, Stage.REFINED)], buf)
        lines = buf.getvalue().decode().splitlines()
        assert lines[1] == "ST01,10000000,0.75,refined"

    def test_unsorted_input_sorted_on_write(self):
        picks = [Pick("B", 5, 0.5, Stage.TRIGGERED), Pick("A", 9, 0.5, Stage.TRIGGERED)]
        buf = io.BytesIO()
        write_picks(picks, buf)
        rows = buf.getvalue().decode().splitlines()[1:]
        assert rows[0].startswith("A,") and rows[1].startswith("B,")

    def test_extended_columns_roundtrip(self):
        p = Pick("S", 123, 0.9, Stage.REFINED, event_id=4, n_stations=3, low_contrast=True)
        buf = io.BytesIO()
        write_picks([p], buf)
        assert load_picks(buf.getvalue()) == [p]

    @settings(max_examples=20, deadline=None)
    @given(st.lists(
        st.tuples(st.sampled_from(["A", "B", "C"]),
                  st.integers(0, 10**15),
                  st.floats(0, 1, allow_nan=False),
                  st.sampled_from(list(Stage))),
        max_size=60))
    def test_roundtrip_random_picks(self, rows):
        picks = [Pick(s, t, c, stage) for s, t, c, stage in rows]
        buf = io.BytesIO()
        write_picks(picks, buf)
        back = load_picks(buf.getvalue())
        assert back == sorted(picks, key=lambda p: (p.station_id, p.time_us))


class TestLabelsIO:
    def test_sorted_on_load(self):
        data = b"station,time_us\nB,5\nA,9\nA,2\n"
        labs = load_labels(data)
        assert [(l.station_id, l.time_us) for l in labs] == [("A", 2), ("A", 9), ("B", 5)]

    def test_duplicate_rejected(self):
        data = b"station,time_us\nA,5\nA,5\n"
        with pytest.raises(FormatError, match="duplicate"):
            load_labels(data)

    def test_roundtrip(self):
        labs = [LabeledArrival("X", 7), LabeledArrival("Y", 3)]
        buf = io.BytesIO()
        write_labels(labs, buf)
        assert load_labels(buf.getvalue()) == sorted(labs, key=lambda a: a.station_id)


class TestStationsIO:
    def test_roundtrip(self):
        stations = [Station("A", 10.5, -120.25), Station("B", -3.0, 44.0)]
        buf = io.BytesIO()
        write_stations(stations, buf)
        back = load_stations(buf.getvalue())
        assert back == {"A": stations[0], "B": stations[1]}

    def test_duplicate_station_rejected(self):
        data = b"station,lat,lon\nA,1,2\nA,3,4\n"
        with pytest.raises(FormatError, match="duplicate"):
            load_stations(data)
