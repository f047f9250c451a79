import numpy as np
import pytest

from qpick.basemodels import Dataset
from qpick.features import FeatureVector
from qpick.stacking import (ModelBundle, StackConfig, Standardizer,
                            bundle_from_json, bundle_to_json, classify,
                            confidence, confidence_batch, default_model_specs,
                            stratified_folds, train_stack)


def blobs(n=150, d=4, sep=1.5, seed=0):
    rng = np.random.default_rng(seed)
    half = n // 2
    x = rng.standard_normal((n, d))
    x[half:] += sep
    y = np.repeat([0, 1], half)
    perm = rng.permutation(n)
    return Dataset(x[perm], y[perm])


class _ConstantHalf:
    """Test double: scores 0.5 everywhere."""

    def fit(self, x, y, seed=0):
        self.d = x.shape[1]
        return self

    def predict_proba(self, x):
        return np.full(np.atleast_2d(x).shape[0], 0.5)


class _Oracle:
    """Label-leaking test hook: looks the true label up by row content."""

    def __init__(self, table):
        self.table = table

    def fit(self, x, y, seed=0):
        return self

    def predict_proba(self, x):
        return np.array([self.table.get(row.tobytes(), 0.5) for row in np.atleast_2d(x)])


class TestStackConfig:
    def test_validation(self):
        with pytest.raises(ValueError):
            StackConfig(inner_folds=1)
        with pytest.raises(ValueError):
            StackConfig(threshold=1.0)


class TestStratifiedFolds:
    def test_every_fold_has_both_classes(self):
        y = np.array([0] * 25 + [1] * 10)
        folds = stratified_folds(y, 5, seed=0)
        for f in range(5):
            members = y[folds == f]
            assert set(members) == {0, 1}

    def test_class_smaller_than_folds_rejected(self):
        y = np.array([0] * 20 + [1] * 3)
        with pytest.raises(ValueError):
            stratified_folds(y, 5, seed=0)


class TestTrainStack:
    def test_same_seed_bitwise_identical_bundle(self):
        data = blobs()
        cfg = StackConfig(seed=11)
        a = train_stack(data, cfg)
        b = train_stack(data, cfg)
        assert bundle_to_json(a) == bundle_to_json(b)

    def test_parallel_training_matches_serial(self):
        data = blobs(seed=1)
        cfg = StackConfig(seed=2)
        serial = train_stack(data, cfg, n_workers=1)
        parallel = train_stack(data, cfg, n_workers=6)
        assert bundle_to_json(serial) == bundle_to_json(parallel)

    def test_oracle_model_gets_largest_weight(self):
        data = blobs(sep=1.0, seed=3)  # overlapping classes: real models err
        table = {}
        std = Standardizer.fit(data.x)
        xs = std.transform(data.x)
        for row, label in zip(xs, data.y):
            table[row.tobytes()] = float(label)
        specs = default_model_specs() + [("oracle", lambda: _Oracle(table))]
        bundle = train_stack(data, StackConfig(seed=4), model_specs=specs)
        widx = int(np.argmax(np.abs(bundle.meta_weights)))
        assert bundle.model_names[widx] == "oracle"

    def test_nine_models_by_default(self):
        bundle = train_stack(blobs(seed=5), StackConfig(seed=0))
        assert len(bundle.base_models) == len(bundle.meta_weights) == 9


class TestConfidence:
    def _neutral_bundle(self, d=3):
        std = Standardizer(np.zeros(d), np.ones(d))
        names = tuple(f"f{i}" for i in range(d))
        model = _ConstantHalf()
        model.d = d
        return ModelBundle(std, ("const",), (model,), np.zeros(1), 0.0, names,
                           {"threshold": 0.5})

    def test_all_half_scores_zero_weights_gives_half(self):
        bundle = self._neutral_bundle()
        fv = FeatureVector(np.zeros(3), bundle.feature_names)
        assert confidence(bundle, fv) == 0.5

    def test_duplicate_vector_identical_confidence(self, trained_bundle, feature_eval):
        x, _ = feature_eval
        fv = FeatureVector(x[0], trained_bundle.feature_names)
        assert confidence(trained_bundle, fv) == confidence(trained_bundle, fv)

    def test_name_mismatch_rejected(self):
        bundle = self._neutral_bundle()
        fv = FeatureVector(np.zeros(3), ("a", "b", "c"))
        with pytest.raises(ValueError):
            confidence(bundle, fv)

    def test_heldout_auc(self, trained_bundle, feature_eval):
        x, y = feature_eval
        conf = confidence_batch(trained_bundle, x)
        order = np.argsort(-conf)
        tp = np.cumsum(y[order])
        fp = np.cumsum(1 - y[order])
        auc = float(np.trapezoid(tp / tp[-1], fp / fp[-1]))
        assert auc >= 0.95

    def test_parallel_fanout_bitwise(self, trained_bundle, feature_eval):
        x, _ = feature_eval
        a = confidence_batch(trained_bundle, x[:40], n_workers=1)
        b = confidence_batch(trained_bundle, x[:40], n_workers=9)
        np.testing.assert_array_equal(a, b)


class TestClassify:
    def test_strictly_greater_semantics(self):
        bundle = TestConfidence()._neutral_bundle()
        fv = FeatureVector(np.zeros(3), bundle.feature_names)
        assert classify(bundle, fv, threshold=0.5) is False  # exactly 0.5
        assert classify(bundle, fv, threshold=0.49) is True

    def test_threshold_monotonicity(self, trained_bundle, feature_eval):
        x, _ = feature_eval
        conf = confidence_batch(trained_bundle, x)
        prev = None
        for thr in (0.2, 0.4, 0.6, 0.8):
            accepted = {i for i in range(len(conf)) if conf[i] > thr}
            if prev is not None:
                assert accepted <= prev
            prev = accepted


class TestBundleIO:
    def test_json_roundtrip_identical_confidences(self, trained_bundle, feature_eval):
        x, _ = feature_eval
        back = bundle_from_json(bundle_to_json(trained_bundle))
        np.testing.assert_array_equal(confidence_batch(trained_bundle, x[:30]),
                                      confidence_batch(back, x[:30]))

    def test_version_checked(self):
        with pytest.raises(ValueError):
            bundle_from_json('{"format_version": 999}')
