import json

import pytest

from qpick.cli import main
from qpick.features import load_feature_csv
from qpick.waveform import load_picks


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    return tmp_path_factory.mktemp("cli")


@pytest.fixture(scope="module")
def corpus_dir(workdir):
    cfg = workdir / "synth.toml"
    cfg.write_text(
        "[synth]\n"
        "n_stations = 2\n"
        "n_blocks = 2\n"
        "block_duration_s = 420.0\n"
        "event_rate_hz = 0.04\n"
        "snr_range = [5.0, 25.0]\n"
        "label_min_snr = 4.0\n"
        "burst_rate_hz = 0.02\n"
        "distance_ref_km = 60.0\n"
        "seed = 13\n"
    )
    out = workdir / "data"
    assert main(["synth", "--config", str(cfg), "--out-dir", str(out)]) == 0
    return out


def block_traces(corpus_dir, block):
    bdir = corpus_dir / f"block_{block:02d}"
    return sorted(str(p) for p in bdir.glob("*.bin"))


class TestSynthCommand:
    def test_layout(self, corpus_dir):
        assert (corpus_dir / "stations.csv").exists()
        for b in range(2):
            bdir = corpus_dir / f"block_{b:02d}"
            assert (bdir / "labels.csv").exists()
            assert len(list(bdir.glob("*.bin"))) == 2

    def test_deterministic_regeneration(self, corpus_dir, workdir):
        cfg = workdir / "synth.toml"
        out2 = workdir / "data2"
        assert main(["synth", "--config", str(cfg), "--out-dir", str(out2)]) == 0
        a = (corpus_dir / "block_00" / "ST00.bin").read_bytes()
        b = (out2 / "block_00" / "ST00.bin").read_bytes()
        assert a == b


@pytest.fixture(scope="module")
def features_csv(workdir, corpus_dir):
    out = workdir / "features.csv"
    args = ["features", "--in"] + block_traces(corpus_dir, 0) + [
        "--candidates", "auto-trigger",
        "--labels", str(corpus_dir / "block_00" / "labels.csv"),
        "--out", str(out), "--post-s", "10.0", "--seed", "3",
    ]
    assert main(args) == 0
    return out


@pytest.fixture(scope="module")
def bundle_path(workdir, features_csv):
    out = workdir / "bundle.json"
    assert main(["train", "--features", str(features_csv), "--out", str(out),
                 "--folds", "5", "--seed", "1"]) == 0
    return out


class TestFeaturesCommand:
    def test_matrix_shape_and_labels(self, features_csv):
        names, rows, meta = load_feature_csv(open(features_csv, "rb"))
        assert len(names) == 691  # 10 s post-window
        assert rows.shape == (len(meta), 691)
        labels = {m[2] for m in meta}
        assert labels <= {0, 1}
        assert 1 in labels

    def test_candidates_from_picks_csv(self, workdir, corpus_dir, bundle_path):
        picks_out = workdir / "cand_picks.csv"
        args = ["pick", "--bundle", str(bundle_path),
                "--stations", str(corpus_dir / "stations.csv"),
                "--in"] + block_traces(corpus_dir, 1) + ["--out", str(picks_out)]
        assert main(args) == 0
        feat_out = workdir / "features_from_picks.csv"
        args = ["features", "--in"] + block_traces(corpus_dir, 1) + [
            "--candidates", str(picks_out),
            "--labels", str(corpus_dir / "block_01" / "labels.csv"),
            "--out", str(feat_out), "--post-s", "10.0",
        ]
        assert main(args) == 0
        names, rows, meta = load_feature_csv(open(feat_out, "rb"))
        assert rows.shape[1] == 691


class TestTrainCommand:
    def test_bundle_written(self, bundle_path):
        doc = json.loads(bundle_path.read_text())
        assert doc["format_version"] == 1
        assert len(doc["base_models"]) == 9
        assert len(doc["meta"]["weights"]) == 9


@pytest.fixture(scope="module")
def picks_csv(workdir, corpus_dir, bundle_path):
    out = workdir / "picks.csv"
    args = ["pick", "--bundle", str(bundle_path),
            "--stations", str(corpus_dir / "stations.csv"),
            "--in"] + block_traces(corpus_dir, 1) + [
        "--out", str(out), "--threshold", "0.5", "--parallel", "2"]
    assert main(args) == 0
    return out


class TestPickCommand:
    def test_picks_readable_and_annotated(self, picks_csv):
        picks = load_picks(open(picks_csv, "rb"))
        for p in picks:
            assert p.event_id is not None
            assert p.n_stations >= 2


class TestEvalCommand:
    def test_report_schema(self, workdir, corpus_dir, picks_csv):
        report = workdir / "report.json"
        assert main(["eval", "--picks", str(picks_csv),
                     "--labels", str(corpus_dir / "block_01" / "labels.csv"),
                     "--tol-s", "0.4", "--sweep", "0:1:0.1",
                     "--report", str(report)]) == 0
        doc = json.loads(report.read_text())
        assert set(doc) >= {"folds", "mean", "sweep", "clusters"}
        assert len(doc["sweep"]) == 11
        ps = [s["p"] for s in doc["sweep"]]
        assert ps == sorted(ps)
        assert doc["mean"]["precision"] >= 0.0


class TestBenchCommand:
    def test_bench_report(self, workdir, corpus_dir, bundle_path):
        report = workdir / "bench.json"
        args = ["bench", "--bundle", str(bundle_path),
                "--stations", str(corpus_dir / "stations.csv"),
                "--in"] + block_traces(corpus_dir, 1) + [
            "--report", str(report), "--parallel", "2"]
        assert main(args) == 0
        doc = json.loads(report.read_text())
        c = doc["counts"]
        assert c["samples"] >= c["candidates"] >= c["classified"] >= c["refined"]
