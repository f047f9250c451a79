"""Streaming seismic P-phase picker: cheap multi-band triggering, a stacked
ensemble of nine classifiers, and AIC + multi-station refinement, with
training, evaluation, synthetic-data and benchmarking tooling."""

from .dsp import BandpassSpec
from .features import FeatureConfig, FeatureVector, assemble, cut_window, feature_names
from .pipeline import PipelineConfig, PipelineResult, run_stream
from .refiner import RefinerConfig, aic_curve, associate, prune_singletons, refine_pick
from .stacking import ModelBundle, StackConfig, classify, confidence, load_bundle, save_bundle, train_stack
from .trigger import TriggerConfig, characteristic_function, detect_triggers
from .waveform import (LabeledArrival, Pick, Stage, Station, Trace, TriTrace,
                       load_labels, load_picks, load_stations, parse_trace,
                       write_picks, write_trace)

__version__ = "0.1.0"

__all__ = [
    "BandpassSpec", "FeatureConfig", "FeatureVector", "LabeledArrival",
    "ModelBundle", "Pick", "PipelineConfig", "PipelineResult", "RefinerConfig",
    "Stage", "StackConfig", "Station", "Trace", "TriTrace", "TriggerConfig",
    "aic_curve", "assemble", "associate", "characteristic_function", "classify",
    "confidence", "cut_window", "detect_triggers", "feature_names",
    "load_bundle", "load_labels", "load_picks", "load_stations", "parse_trace",
    "prune_singletons", "refine_pick", "run_stream", "save_bundle",
    "train_stack", "write_picks", "write_trace",
]
