"""Command-line front end: train / pick / eval / synth / features / bench."""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

try:
    import tomllib  # Python >= 3.11
except ModuleNotFoundError:  # pragma: no cover
    import tomli as tomllib

from . import evalbench as eb
from . import features as ft
from . import pipeline as pl
from . import stacking as st
from . import synth
from .basemodels import Dataset
from .refiner import RefinerConfig
from .trigger import TriggerConfig
from .dsp import BandpassSpec
from .waveform import (Station, load_labels, load_picks, load_stations,
                       load_trace_file, write_picks)


def _load_toml(path) -> dict:
    with open(path, "rb") as fh:
        return tomllib.load(fh)


def _pipeline_config(doc: dict, post_s: float | None = None,
                     threshold: float | None = None) -> pl.PipelineConfig:
    trig = doc.get("trigger", {})
    bands = trig.get("bands")
    trig_kwargs = {k: trig[k] for k in ("s1", "s2", "t_up_s", "sta_s", "lta_decay_s",
                                        "refractory_s") if k in trig}
    if bands is not None:
        trig_kwargs["bands"] = tuple(BandpassSpec(lo, hi) for lo, hi in bands)
    feat = doc.get("feature", {})
    feat_kwargs = {}
    if post_s is not None:
        feat_kwargs["post_s"] = float(post_s)
    elif "post_s" in feat:
        feat_kwargs["post_s"] = float(feat["post_s"])
    ref = doc.get("refiner", {})
    ref_kwargs = {k: ref[k] for k in ("aic_half_window_s", "vp_km_s", "min_stations",
                                      "guard_s", "low_contrast_range") if k in ref}
    pipe = doc.get("pipeline", {})
    return pl.PipelineConfig(
        trigger=TriggerConfig(**trig_kwargs),
        feature=ft.FeatureConfig(**feat_kwargs),
        refiner=RefinerConfig(**ref_kwargs),
        stack_threshold=float(threshold if threshold is not None
                              else pipe.get("stack_threshold", 0.5)),
        chunk_s=float(pipe.get("chunk_s", 30.0)),
    )


def _cmd_train(args) -> int:
    with open(args.features, "rb") as fh:
        names, x, meta = ft.load_feature_csv(fh)
    y = np.array([label for _, _, label in meta], dtype=np.int64)
    if (y < 0).any():
        print("error: feature CSV contains unlabeled rows (label -1)", file=sys.stderr)
        return 2
    cfg = st.StackConfig(inner_folds=args.folds, seed=args.seed)
    bundle = st.train_stack(Dataset(x, y), cfg, feature_names=names, n_workers=args.parallel)
    st.save_bundle(bundle, args.out)
    w = ", ".join(f"{n}={v:+.3f}" for n, v in zip(bundle.model_names, bundle.meta_weights))
    print(f"trained on {len(y)} rows ({int(y.sum())} positive); meta weights: {w}")
    print(f"bundle written to {args.out}")
    return 0


def _infer_post_s(names: tuple[str, ...]) -> float:
    for post_s in ft.ALLOWED_POST_S:
        if ft.feature_names(ft.FeatureConfig(post_s=post_s)) == names:
            return post_s
    raise SystemExit("bundle feature names do not match any known window length")


def _cmd_pick(args) -> int:
    bundle = st.load_bundle(args.bundle)
    doc = _load_toml(args.config) if args.config else {}
    cfg = _pipeline_config(doc, post_s=_infer_post_s(bundle.feature_names),
                           threshold=args.threshold)
    with open(args.stations, "rb") as fh:
        stations = load_stations(fh)
    streams = {}
    for path in args.inputs:
        tri = load_trace_file(path)
        if tri.station_id in streams:
            raise SystemExit(f"duplicate stream for station {tri.station_id}")
        streams[tri.station_id] = tri
    result = pl.run_stream(streams, bundle, stations, cfg, n_workers=args.parallel)
    with open(args.out, "wb") as fh:
        write_picks(result.picks, fh, extended=True)
    c = result.counters
    print(f"{c.samples} samples -> {c.candidates} candidates -> "
          f"{c.classified} classified -> {len(result.picks)} picks")
    print(f"picks written to {args.out}")
    return 0


def _parse_sweep(spec: str) -> list[float]:
    lo, hi, step = (float(v) for v in spec.split(":"))
    if step <= 0 or hi < lo:
        raise SystemExit("sweep must be start:stop:step with positive step")
    return [round(lo + i * step, 9) for i in range(int(round((hi - lo) / step)) + 1)]


def _cmd_eval(args) -> int:
    with open(args.picks, "rb") as fh:
        picks = load_picks(fh)
    with open(args.labels, "rb") as fh:
        labels = load_labels(fh)
    report = eb.evaluate(picks, labels, args.tol_s)
    doc = {
        "folds": [report.to_dict()],
        "mean": report.to_dict(),
        "sweep": eb.tolerance_sweep(picks, labels, _parse_sweep(args.sweep)) if args.sweep else [],
        "clusters": None,
        "tolerance_s": args.tol_s,
    }
    with open(args.report, "w") as fh:
        json.dump(doc, fh, indent=1)
    print(f"precision={report.precision:.4f} recall={report.recall:.4f} f={report.f_score:.4f} "
          f"(tol {args.tol_s}s; {len(report.matching.pairs)} matched)")
    print(f"report written to {args.report}")
    return 0


def _synth_config(doc: dict, seed: int | None) -> synth.SynthConfig:
    sec = doc.get("synth", doc)
    kwargs = {}
    for key in ("sample_rate_hz", "block_duration_s", "n_blocks", "event_rate_hz",
                "vp_km_s", "vs_km_s", "epicenter_spread_km", "distance_ref_km",
                "noise_sigma", "ar_coeff", "burst_rate_hz", "label_min_snr", "seed"):
        if key in sec:
            kwargs[key] = sec[key]
    for key in ("snr_range", "wavelet_freq_hz", "burst_amp_range"):
        if key in sec:
            kwargs[key] = tuple(sec[key])
    if "stations" in sec:
        kwargs["stations"] = tuple(Station(s["id"], s["lat"], s["lon"]) for s in sec["stations"])
    elif "n_stations" in sec:
        kwargs["stations"] = synth.ring_of_stations(int(sec["n_stations"]))
    if seed is not None:
        kwargs["seed"] = seed
    cfg = synth.SynthConfig(**kwargs)
    if sec.get("regime", "a").lower() == "b":
        cfg = synth.regime_b(cfg)
    return cfg


def _cmd_synth(args) -> int:
    cfg = _synth_config(_load_toml(args.config) if args.config else {}, args.seed)
    corpus = synth.gen_corpus(cfg)
    synth.write_corpus(corpus, args.out_dir)
    n_labels = sum(len(b.labels) for b in corpus.blocks)
    print(f"wrote {cfg.n_blocks} block(s), {len(cfg.stations)} stations, "
          f"{n_labels} labeled arrivals to {args.out_dir}")
    return 0


def _cmd_features(args) -> int:
    doc = _load_toml(args.config) if args.config else {}
    cfg = _pipeline_config(doc, post_s=args.post_s)
    streams = {}
    for path in args.inputs:
        tri = load_trace_file(path)
        streams[tri.station_id] = tri
    labels = []
    if args.labels:
        with open(args.labels, "rb") as fh:
            labels = load_labels(fh)

    if args.candidates == "auto-trigger":
        if labels:
            x, y, meta = pl.build_training_set(streams, labels, cfg, tol_s=args.tol_s,
                                               neg_ratio=args.neg_ratio, seed=args.seed)
        else:
            rows, meta_rows = [], []
            from .trigger import detect_triggers
            for sid in sorted(streams):
                tri = streams[sid]
                for cand in detect_triggers(tri.z, cfg.trigger):
                    try:
                        win = ft.cut_window(tri, cand.time_us, cfg.feature)
                    except ValueError:
                        continue
                    rows.append(ft.assemble(win, cfg.feature).values)
                    meta_rows.append((sid, cand.time_us, -1))
            x, meta = np.array(rows), meta_rows
    else:
        with open(args.candidates, "rb") as fh:
            cand_picks = load_picks(fh)
        rows, meta = [], []
        for p in cand_picks:
            tri = streams.get(p.station_id)
            if tri is None:
                continue
            try:
                win = ft.cut_window(tri, p.time_us, cfg.feature)
            except ValueError:
                continue
            rows.append(ft.assemble(win, cfg.feature).values)
            lab = _label_for(p, labels, args.tol_s) if labels else -1
            meta.append((p.station_id, p.time_us, lab))
        x = np.array(rows)

    names = ft.feature_names(cfg.feature)
    with open(args.out, "wb") as fh:
        ft.write_feature_csv(fh, names, x, meta)
    print(f"wrote {len(meta)} rows x {len(names)} features to {args.out}")
    return 0


def _label_for(pick, labels, tol_s: float) -> int:
    tol_us = tol_s * 1e6
    near = [l for l in labels if l.station_id == pick.station_id
            and abs(l.time_us - pick.time_us) < tol_us]
    return 1 if near else 0


def _cmd_bench(args) -> int:
    bundle = st.load_bundle(args.bundle)
    doc = _load_toml(args.config) if args.config else {}
    cfg = _pipeline_config(doc, post_s=_infer_post_s(bundle.feature_names))
    with open(args.stations, "rb") as fh:
        stations = load_stations(fh)
    streams = {}
    for path in args.inputs:
        tri = load_trace_file(path)
        streams[tri.station_id] = tri
    report = pl.bench(streams, bundle, stations, cfg, n_workers=args.parallel)
    with open(args.report, "w") as fh:
        json.dump(report, fh, indent=1)
    counts = report["counts"]
    print("counts: " + " >= ".join(f"{k}={counts[k]}"
                                   for k in ("samples", "candidates", "classified", "refined")))
    print(f"report written to {args.report}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="qpick",
                                 description="Streaming P-phase picker toolkit")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train an ensemble bundle from a feature CSV")
    p.add_argument("--features", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--parallel", type=int, default=1)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("pick", help="run the full pipeline over trace files")
    p.add_argument("--bundle", required=True)
    p.add_argument("--stations", required=True)
    p.add_argument("--in", dest="inputs", nargs="+", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--threshold", type=float, default=None)
    p.add_argument("--config", default=None)
    p.add_argument("--parallel", type=int, default=1)
    p.set_defaults(func=_cmd_pick)

    p = sub.add_parser("eval", help="score picks against labels")
    p.add_argument("--picks", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--tol-s", type=float, default=0.4)
    p.add_argument("--sweep", default=None, metavar="LO:HI:STEP")
    p.add_argument("--report", required=True)
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("synth", help="generate a synthetic labeled corpus")
    p.add_argument("--config", default=None)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("features", help="export a training feature matrix")
    p.add_argument("--in", dest="inputs", nargs="+", required=True)
    p.add_argument("--candidates", required=True,
                   help="picks CSV path or the literal 'auto-trigger'")
    p.add_argument("--out", required=True)
    p.add_argument("--labels", default=None)
    p.add_argument("--post-s", type=float, default=None,
                   help="post-window seconds (default: config file value or 20)")
    p.add_argument("--tol-s", type=float, default=0.4)
    p.add_argument("--neg-ratio", type=float, default=5.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--config", default=None)
    p.set_defaults(func=_cmd_features)

    p = sub.add_parser("bench", help="timing/counter report over a corpus")
    p.add_argument("--bundle", required=True)
    p.add_argument("--stations", required=True)
    p.add_argument("--in", dest="inputs", nargs="+", required=True)
    p.add_argument("--report", required=True)
    p.add_argument("--config", default=None)
    p.add_argument("--parallel", type=int, default=4)
    p.set_defaults(func=_cmd_bench)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
