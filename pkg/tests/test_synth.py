import numpy as np
import pytest

from qpick import synth
from qpick.refiner import haversine_km
from qpick.waveform import Station, load_labels, load_stations, load_trace_file


def small_cfg(**kw):
    base = dict(block_duration_s=240.0, event_rate_hz=0.02, seed=0,
                stations=synth.ring_of_stations(2))
    base.update(kw)
    return synth.SynthConfig(**base)


class TestConfig:
    def test_velocity_ordering(self):
        with pytest.raises(ValueError):
            small_cfg(vp_km_s=3.0, vs_km_s=5.0)

    def test_negative_rate_rejected(self):
        with pytest.raises(ValueError):
            small_cfg(event_rate_hz=-1.0)


class TestEventGeometry:
    def test_equidistant_stations_identical_onsets(self):
        # two stations mirrored about the epicenter longitude
        sts = (Station("L", 36.0, -117.0), Station("R", 36.0, -116.0))
        cfg = small_cfg(stations=sts, event_rate_hz=0.0)
        ev = synth.SynthEvent(origin_s=50.0, lat=36.0, lon=-116.5, snr=10.0, freq_hz=6.0)
        n = int(cfg.block_duration_s * cfg.sample_rate_hz)
        rng = np.random.default_rng(0)
        labs = [synth.gen_event(cfg, ev, s, tuple(np.zeros((3, n))), rng, 0) for s in sts]
        assert labs[0]["time_us"] == labs[1]["time_us"]

    def test_p_lag_is_distance_over_vp(self):
        st0 = Station("A", 36.0, -117.0)
        st1 = Station("B", 36.0 + 55.0 / synth.KM_PER_DEG_LAT, -117.0)  # 55 km north
        cfg = small_cfg(stations=(st0, st1), event_rate_hz=0.0)
        ev = synth.SynthEvent(origin_s=50.0, lat=36.0, lon=-117.0, snr=10.0, freq_hz=6.0)
        n = int(cfg.block_duration_s * cfg.sample_rate_hz)
        rng = np.random.default_rng(0)
        lab0 = synth.gen_event(cfg, ev, st0, tuple(np.zeros((3, n))), rng, 0)
        lab1 = synth.gen_event(cfg, ev, st1, tuple(np.zeros((3, n))), rng, 0)
        assert lab0["time_us"] == 50_000_000  # zero distance
        assert lab1["time_us"] == pytest.approx(50_000_000 + 10_000_000, abs=2000)

    def test_labels_reproduce_travel_time_closed_form(self):
        cfg = small_cfg(seed=3, event_rate_hz=0.03)
        block = synth.gen_block(cfg, 0)
        by_station = {s.station_id: s for s in cfg.stations}
        for meta, ev_idx in [(m, m["event"]) for m in block.label_meta]:
            ev = block.events[ev_idx]
            d = haversine_km(Station("_e", ev.lat, ev.lon), by_station[meta["station"]])
            expect_us = (ev.origin_s + d / cfg.vp_km_s) * 1e6
            assert abs(meta["time_us"] - expect_us) <= 10_000  # one sample


class TestDeterminism:
    def test_seeded_corpus_bitwise_identical(self):
        a = synth.gen_corpus(small_cfg(seed=9, burst_rate_hz=0.05))
        b = synth.gen_corpus(small_cfg(seed=9, burst_rate_hz=0.05))
        assert a.blocks[0].labels == b.blocks[0].labels
        for sid in a.blocks[0].streams:
            np.testing.assert_array_equal(a.blocks[0].streams[sid].z.samples,
                                          b.blocks[0].streams[sid].z.samples)

    def test_different_seeds_differ(self):
        a = synth.gen_block(small_cfg(seed=1), 0)
        b = synth.gen_block(small_cfg(seed=2), 0)
        assert not np.array_equal(a.streams["ST00"].z.samples, b.streams["ST00"].z.samples)


class TestSchedule:
    def test_poisson_count_tail(self):
        # lambda*T = 100: counts land in [60, 140] except with ~6e-5 probability
        cfg = small_cfg(block_duration_s=5000.0, event_rate_hz=0.02,
                        stations=synth.ring_of_stations(1))
        for seed in range(12):
            block = synth.gen_block(synth.SynthConfig(
                block_duration_s=5000.0, event_rate_hz=0.02, seed=seed,
                stations=synth.ring_of_stations(1)), 0)
            assert 60 <= len(block.events) <= 140

    def test_zero_rate_no_labels(self):
        block = synth.gen_block(small_cfg(event_rate_hz=0.0), 0)
        assert block.labels == [] and block.events == []

    def test_min_gap_thins_schedule(self):
        cfg = small_cfg(seed=5, event_rate_hz=0.1, min_event_gap_s=20.0,
                        block_duration_s=600.0)
        block = synth.gen_block(cfg, 0)
        origins = [e.origin_s for e in block.events]
        assert all(b - a >= 20.0 for a, b in zip(origins, origins[1:]))

    def test_label_min_snr_filters(self):
        strong = synth.gen_block(small_cfg(seed=6, label_min_snr=0.0, distance_ref_km=10.0), 0)
        weak = synth.gen_block(small_cfg(seed=6, label_min_snr=8.0, distance_ref_km=10.0), 0)
        assert len(weak.labels) <= len(strong.labels)
        assert all(m["snr"] >= 8.0 for m in weak.label_meta)


class TestCoverage:
    def test_labels_leave_room_for_windows(self):
        cfg = small_cfg(seed=7, event_rate_hz=0.04, block_duration_s=600.0)
        block = synth.gen_block(cfg, 0)
        assert block.labels, "corpus should contain events"
        for lab in block.labels:
            tri = block.streams[lab.station_id]
            i = tri.index_at(lab.time_us)
            assert i - 5 * 100 >= 0
            assert i + 21 * 100 <= tri.n_samples


class TestWriteCorpus:
    def test_files_readable_in_core_formats(self, tmp_path):
        corpus = synth.gen_corpus(small_cfg(seed=8, n_blocks=2, event_rate_hz=0.03))
        synth.write_corpus(corpus, tmp_path)
        stations = load_stations(open(tmp_path / "stations.csv", "rb"))
        assert set(stations) == {"ST00", "ST01"}
        for b in range(2):
            bdir = tmp_path / f"block_{b:02d}"
            labels = load_labels(open(bdir / "labels.csv", "rb"))
            assert labels == corpus.blocks[b].labels
            tri = load_trace_file(bdir / "ST00.bin")
            assert tri.station_id == "ST00"
            assert tri.n_samples == corpus.blocks[b].streams["ST00"].n_samples

    def test_regime_b_profile_differs(self):
        cfg = small_cfg(seed=10)
        b_cfg = synth.regime_b(cfg)
        assert b_cfg.ar_coeff != cfg.ar_coeff
        assert b_cfg.wavelet_freq_hz != cfg.wavelet_freq_hz
        a = synth.gen_block(cfg, 0)
        b = synth.gen_block(b_cfg, 0)
        assert not np.array_equal(a.streams["ST00"].z.samples, b.streams["ST00"].z.samples)
