import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qpick.refiner import (RefinerConfig, aic_curve, associate, haversine_km,
                           prune_singletons, refine_pick)
from qpick.waveform import Pick, Stage, Station, make_tritrace

RATE = 100.0


def two_regime(n=400, k0=200, ratio=16.0, seed=0):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(n)
    x[k0:] *= np.sqrt(ratio)
    return x


def onset_stream(onset_s=30.0, duration_s=60.0, snr=8.0, seed=0):
    rng = np.random.default_rng(seed)
    n = int(duration_s * RATE)
    chans = rng.standard_normal((3, n))
    i0 = int(onset_s * RATE)
    burst = rng.standard_normal(n - i0) * snr
    for c in chans:
        c[i0:] += burst * rng.uniform(0.5, 1.0)
    return make_tritrace("S", RATE, 0, *chans)


class TestAicCurve:
    def test_variance_change_found(self):
        x = two_regime()
        aic = aic_curve(x)
        assert abs(int(np.argmin(aic)) - 200) <= 5

    def test_stationary_noise_finite_inside_guard(self):
        aic = aic_curve(np.random.default_rng(1).standard_normal(400), guard=5)
        assert np.isfinite(aic[5:396]).all()
        assert np.isinf(aic[:5]).all() and np.isinf(aic[396:]).all()

    def test_constant_signal_all_equal_first_index_argmin(self):
        aic = aic_curve(np.full(400, 3.7), guard=5)
        interior = aic[np.isfinite(aic)]
        assert np.all(interior == interior[0])
        assert int(np.argmin(aic)) == 5

    def test_short_input_rejected(self):
        with pytest.raises(ValueError):
            aic_curve(np.zeros(19))

    def test_accuracy_over_100_seeds(self):
        hits = 0
        for seed in range(100):
            x = two_regime(seed=seed)
            if abs(int(np.argmin(aic_curve(x))) - 200) <= 5:
                hits += 1
        assert hits >= 95


class TestRefinePick:
    def test_recovers_late_candidate(self):
        stream = onset_stream(onset_s=30.0, seed=2)
        cand = Pick("S", int(30.3e6), 0.9, Stage.CLASSIFIED)
        refined = refine_pick(stream, cand, RefinerConfig())
        assert refined.stage is Stage.REFINED
        assert refined.confidence == 0.9
        assert abs(refined.time_us - 30.0e6) <= 0.05e6

    def test_candidate_at_onset_stays_close(self):
        stream = onset_stream(onset_s=30.0, seed=3)
        cand = Pick("S", int(30.0e6), 0.5, Stage.CLASSIFIED)
        refined = refine_pick(stream, cand, RefinerConfig())
        assert abs(refined.time_us - 30.0e6) <= 0.05e6

    def test_never_moves_beyond_half_window(self):
        cfg = RefinerConfig()
        for seed in range(10):
            stream = onset_stream(onset_s=30.0, seed=seed)
            cand = Pick("S", int(30.4e6), 0.5, Stage.CLASSIFIED)
            refined = refine_pick(stream, cand, cfg)
            assert abs(refined.time_us - cand.time_us) <= cfg.aic_half_window_s * 1e6

    def test_pure_noise_flagged_low_contrast_or_bounded(self):
        rng = np.random.default_rng(5)
        stream = make_tritrace("S", RATE, 0, *rng.standard_normal((3, 6000)))
        cand = Pick("S", int(30.0e6), 0.5, Stage.CLASSIFIED)
        refined = refine_pick(stream, cand, RefinerConfig())
        assert abs(refined.time_us - cand.time_us) <= 1e6

    def test_insufficient_coverage_passthrough_flagged(self):
        rng = np.random.default_rng(6)
        stream = make_tritrace("S", RATE, 0, *rng.standard_normal((3, 500)))
        cand = Pick("S", int(0.2e6), 0.5, Stage.CLASSIFIED)
        refined = refine_pick(stream, cand, RefinerConfig())
        assert refined.time_us == cand.time_us
        assert refined.low_contrast


def _stations_55km():
    # ~55 km apart along a meridian: 55 / 111.19 degrees of latitude
    a = Station("A", 30.0, 100.0)
    b = Station("B", 30.0 + 55.0 / 111.19, 100.0)
    return a, b


class TestAssociate:
    def test_distance_oracle(self):
        a, b = _stations_55km()
        assert haversine_km(a, b) == pytest.approx(55.0, rel=1e-3)

    def test_edge_within_travel_time(self):
        a, b = _stations_55km()
        cfg = RefinerConfig()
        stations = {"A": a, "B": b}
        picks = [Pick("A", 0, 0.9, Stage.REFINED), Pick("B", 5_000_000, 0.9, Stage.REFINED)]
        out = associate(picks, stations, cfg)
        assert out[0].event_id == out[1].event_id  # 5 s <= 55/5.5 = 10 s
        assert all(p.n_stations == 2 for p in out)

    def test_no_edge_beyond_travel_time(self):
        a, b = _stations_55km()
        stations = {"A": a, "B": b}
        picks = [Pick("A", 0, 0.9, Stage.REFINED), Pick("B", 15_000_000, 0.9, Stage.REFINED)]
        out = associate(picks, stations, RefinerConfig())
        assert out[0].event_id != out[1].event_id

    def test_singleton_component(self):
        a, b = _stations_55km()
        out = associate([Pick("A", 0, 0.9, Stage.REFINED)], {"A": a, "B": b}, RefinerConfig())
        assert out[0].event_id == 0 and out[0].n_stations == 1

    def test_same_station_never_directly_linked(self):
        a, b = _stations_55km()
        picks = [Pick("A", 0, 0.9, Stage.REFINED), Pick("A", 1_000_000, 0.9, Stage.REFINED)]
        out = associate(picks, {"A": a, "B": b}, RefinerConfig())
        assert out[0].event_id != out[1].event_id

    def test_unknown_station_rejected(self):
        a, b = _stations_55km()
        with pytest.raises(KeyError):
            associate([Pick("X", 0, 0.9, Stage.REFINED)], {"A": a, "B": b}, RefinerConfig())

    @settings(max_examples=25, deadline=None)
    @given(st.permutations(list(range(6))))
    def test_grouping_independent_of_input_order(self, perm):
        a, b = _stations_55km()
        c = Station("C", 30.0, 100.0 + 55.0 / (111.19 * np.cos(np.radians(30.0))))
        stations = {"A": a, "B": b, "C": c}
        base = [Pick("A", 0, 0.9, Stage.REFINED),
                Pick("B", 4_000_000, 0.9, Stage.REFINED),
                Pick("C", 60_000_000, 0.9, Stage.REFINED),
                Pick("A", 61_000_000, 0.9, Stage.REFINED),
                Pick("B", 200_000_000, 0.9, Stage.REFINED),
                Pick("C", 300_000_000, 0.9, Stage.REFINED)]
        ref = associate(base, stations, RefinerConfig())
        shuffled = associate([base[i] for i in perm], stations, RefinerConfig())
        assert ref == shuffled


class TestPrune:
    def _grouped(self):
        a, b = _stations_55km()
        stations = {"A": a, "B": b}
        picks = [Pick("A", 0, 0.9, Stage.REFINED),
                 Pick("B", 3_000_000, 0.9, Stage.REFINED),
                 Pick("A", 99_000_000, 0.9, Stage.REFINED)]
        return associate(picks, stations, RefinerConfig())

    def test_single_station_component_dropped(self):
        kept = prune_singletons(self._grouped(), RefinerConfig())
        assert len(kept) == 2
        assert {p.station_id for p in kept} == {"A", "B"}

    def test_two_picks_same_station_still_dropped(self):
        a, b = _stations_55km()
        picks = [Pick("A", 0, 0.9, Stage.REFINED), Pick("A", 90_000_000, 0.9, Stage.REFINED)]
        grouped = associate(picks, {"A": a, "B": b}, RefinerConfig())
        assert prune_singletons(grouped, RefinerConfig()) == []

    def test_idempotent_and_subset(self):
        grouped = self._grouped()
        once = prune_singletons(grouped, RefinerConfig())
        twice = prune_singletons(once, RefinerConfig())
        assert once == twice
        assert set((p.station_id, p.time_us) for p in once) <= \
            set((p.station_id, p.time_us) for p in grouped)

    def test_three_station_component_kept(self):
        a, b = _stations_55km()
        c = Station("C", 30.0 + 27.0 / 111.19, 100.0)
        stations = {"A": a, "B": b, "C": c}
        picks = [Pick("A", 0, 0.9, Stage.REFINED),
                 Pick("B", 5_000_000, 0.9, Stage.REFINED),
                 Pick("C", 2_000_000, 0.9, Stage.REFINED)]
        kept = prune_singletons(associate(picks, stations, RefinerConfig()), RefinerConfig())
        assert len(kept) == 3
        assert all(p.n_stations == 3 for p in kept)
