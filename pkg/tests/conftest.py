"""Shared fixtures: session-scoped synthetic corpora and a trained bundle.

The heavy artifacts (mined feature corpus, trained ensemble) are built once
per session and reused by module tests and the acceptance suite to stay
inside the runtime budget.
"""

from __future__ import annotations

import numpy as np
import pytest

from qpick import features as ft
from qpick import pipeline as pl
from qpick import stacking as st
from qpick import synth
from qpick.basemodels import Dataset


def make_corpus(seed: int = 7, n_blocks: int = 3, burst_rate: float = 0.05,
                rate: float = 0.03, block_s: float = 900.0) -> synth.SynthCorpus:
    cfg = synth.SynthConfig(block_duration_s=block_s, n_blocks=n_blocks,
                            event_rate_hz=rate, snr_range=(3.0, 30.0),
                            burst_rate_hz=burst_rate, seed=seed, label_min_snr=3.0,
                            stations=synth.ring_of_stations(3), distance_ref_km=40.0)
    return synth.gen_corpus(cfg)


def mine_features(corpus: synth.SynthCorpus, pcfg: pl.PipelineConfig, seed: int = 3):
    xs, ys = [], []
    for block in corpus.blocks:
        x, y, _ = pl.build_training_set(block.streams, block.labels, pcfg, seed=seed)
        xs.append(x)
        ys.append(y)
    return np.concatenate(xs), np.concatenate(ys)


@pytest.fixture(scope="session")
def pipe_cfg() -> pl.PipelineConfig:
    return pl.PipelineConfig()


@pytest.fixture(scope="session")
def corpus_train():
    return make_corpus(seed=7, n_blocks=3)


@pytest.fixture(scope="session")
def corpus_eval():
    return make_corpus(seed=8, n_blocks=2)


@pytest.fixture(scope="session")
def feature_pool(corpus_train, pipe_cfg):
    return mine_features(corpus_train, pipe_cfg)


@pytest.fixture(scope="session")
def feature_eval(corpus_eval, pipe_cfg):
    return mine_features(corpus_eval, pipe_cfg)


@pytest.fixture(scope="session")
def trained_bundle(feature_pool, pipe_cfg) -> st.ModelBundle:
    x, y = feature_pool
    return st.train_stack(Dataset(x, y), st.StackConfig(seed=0),
                          feature_names=ft.feature_names(pipe_cfg.feature))


@pytest.fixture(scope="session")
def stations_train(corpus_train):
    return {s.station_id: s for s in corpus_train.stations}
