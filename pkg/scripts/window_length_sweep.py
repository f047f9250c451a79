"""Classifier sensitivity to the post-window length: train and score the
ensemble at AN = 5, 10, 15, 20 s on a fixed synthetic corpus.

Usage: python scripts/window_length_sweep.py [--seed 7]
"""

import argparse

import numpy as np

from qpick import features as ft
from qpick import pipeline as pl
from qpick import stacking as stk
from qpick import synth
from qpick.basemodels import Dataset


def f_score(pred, y):
    tp = int(((pred == 1) & (y == 1)).sum())
    fp = int(((pred == 1) & (y == 0)).sum())
    fn = int(((pred == 0) & (y == 1)).sum())
    p = tp / (tp + fp) if tp + fp else 0.0
    r = tp / (tp + fn) if tp + fn else 0.0
    return p, r, (2 * p * r / (p + r) if p + r else 0.0)


def mine(corpus, cfg, seed):
    xs, ys = [], []
    for block in corpus.blocks:
        x, y, _ = pl.build_training_set(block.streams, block.labels, cfg, seed=seed)
        xs.append(x)
        ys.append(y)
    return np.concatenate(xs), np.concatenate(ys)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--workers", type=int, default=4)
    args = ap.parse_args()

    def corpus(seed, n_blocks):
        return synth.gen_corpus(synth.SynthConfig(
            block_duration_s=900.0, n_blocks=n_blocks, event_rate_hz=0.03,
            snr_range=(3.0, 30.0), burst_rate_hz=0.05, seed=seed, label_min_snr=3.0,
            stations=synth.ring_of_stations(3), distance_ref_km=40.0))

    train_corpus = corpus(args.seed, 2)
    eval_corpus = corpus(args.seed + 1, 1)

    print("AN/s   n_feat  precision  recall    F")
    for post_s in (5.0, 10.0, 15.0, 20.0):
        cfg = pl.PipelineConfig(feature=ft.FeatureConfig(post_s=post_s))
        x, y = mine(train_corpus, cfg, seed=3)
        bundle = stk.train_stack(Dataset(x, y), stk.StackConfig(seed=0),
                                 feature_names=ft.feature_names(cfg.feature),
                                 n_workers=args.workers)
        xe, ye = mine(eval_corpus, cfg, seed=4)
        conf = stk.confidence_batch(bundle, xe)
        p, r, f = f_score((conf > 0.5).astype(int), ye)
        print(f"{post_s:4.0f}   {cfg.feature.n_features:6d}  {p:9.3f}  {r:6.3f}  {f:.3f}")


if __name__ == "__main__":
    main()
