"""Per-station ensemble weights clustered by k-means.

Trains one stack per station on that station's own stream, collects the
meta-model weight vectors (one 9-dim vector per station), and groups the
stations into k clusters. Stations whose noise/signal character differs get
visibly different preferred base models.

Usage: python scripts/station_clustering.py [--stations 8] [--k 4]
"""

import argparse

import numpy as np

from qpick import evalbench as eb
from qpick import features as ft
from qpick import pipeline as pl
from qpick import stacking as stk
from qpick import synth
from qpick.basemodels import Dataset


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--stations", type=int, default=8)
    ap.add_argument("--k", type=int, default=4)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--block-s", type=float, default=900.0)
    ap.add_argument("--workers", type=int, default=4)
    args = ap.parse_args()

    pcfg = pl.PipelineConfig()
    bundles = {}
    for si in range(args.stations):
        # per-station regime: alternate noise coloration and burst mixture so
        # the learned weights genuinely differ between station groups
        regime = si % args.k
        cfg = synth.SynthConfig(
            block_duration_s=args.block_s, n_blocks=2, event_rate_hz=0.03,
            snr_range=(3.0, 30.0), seed=args.seed + si,
            ar_coeff=(0.0, 0.3, 0.65, 0.85)[regime],
            burst_rate_hz=(0.02, 0.1, 0.02, 0.1)[regime],
            burst_wobble_frac=(0.1, 0.1, 0.8, 0.8)[regime],
            label_min_snr=3.0, stations=synth.ring_of_stations(3),
            distance_ref_km=40.0)
        corpus = synth.gen_corpus(cfg)
        xs, ys = [], []
        for block in corpus.blocks:
            x, y, _ = pl.build_training_set(block.streams, block.labels, pcfg, seed=3)
            xs.append(x)
            ys.append(y)
        bundle = stk.train_stack(Dataset(np.concatenate(xs), np.concatenate(ys)),
                                 stk.StackConfig(seed=args.seed),
                                 feature_names=ft.feature_names(pcfg.feature),
                                 n_workers=args.workers)
        sid = f"S{si:02d}"
        bundles[sid] = bundle
        print(f"{sid} (regime {regime}): weights "
              + " ".join(f"{w:+.2f}" for w in bundle.meta_weights))

    result = eb.cluster_station_weights(bundles, k=args.k, seed=args.seed, restarts=50)
    print(f"\nclusters (k={args.k}, wcss={result.wcss:.3f}):")
    by_cluster = {}
    for sid, cid in result.assignments.items():
        by_cluster.setdefault(cid, []).append(sid)
    names = list(stk.DEFAULT_MODEL_ORDER)
    for cid in sorted(by_cluster):
        members = ", ".join(sorted(by_cluster[cid]))
        center = result.centers[cid]
        top = sorted(range(9), key=lambda i: -abs(center[i]))[:3]
        favs = ", ".join(names[i].value for i in top)
        print(f"  cluster {cid}: [{members}]  preferred models: {favs}")


if __name__ == "__main__":
    main()
