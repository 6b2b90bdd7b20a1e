"""Scorer: pooling, training loop, prediction, interpolation."""

import numpy as np
import pytest

from conftest import make_feature_set, ordinal_blobs, separable_blobs
from gopctc import metrics, scorer
from gopctc.errors import CompatibilityError, InputError
from gopctc.scorer import (
    Prediction,
    ScorerModel,
    TrainConfig,
    interpolate,
    optimize_interpolation,
    pool_utterance,
    predict,
    predict_many,
    train,
    train_detailed,
)


def zero_model(dim: int) -> ScorerModel:
    return ScorerModel(
        feature_mean=np.zeros(dim),
        feature_std=np.ones(dim),
        weights=np.zeros((5, dim)),
        bias=np.zeros(5),
    )


class TestPooling:
    def test_single_row_identity(self):
        fs = make_feature_set("u", 1.0, np.array([[0.5, -1.0, 2.0, 0.0]]), [0.3], [2])
        mean = np.zeros(10)
        std = np.ones(10)
        pooled = pool_utterance(fs, mean, std)
        np.testing.assert_allclose(pooled, fs.feature_matrix()[0])

    def test_dominated_rows(self):
        low = np.array([0.0, 0.0, 0.0, 0.0])
        high = low + 1.0
        fs = make_feature_set("u", 2.0, np.vstack([low, high]), [0.1, 0.4], [1, 1])
        pooled = pool_utterance(fs, np.zeros(10), np.ones(10))
        np.testing.assert_allclose(pooled, np.max(fs.feature_matrix(), axis=0))

    def test_mixed_rows_elementwise(self):
        rng = np.random.default_rng(0)
        sub = rng.normal(size=(3, 4))
        fs = make_feature_set("u", 0.5, sub, rng.normal(size=3), [1, 2, 3])
        mean = rng.normal(size=10)
        std = np.abs(rng.normal(size=10)) + 0.5
        pooled = pool_utterance(fs, mean, std)
        direct = ((fs.feature_matrix() - mean) / std).max(axis=0)
        np.testing.assert_allclose(pooled, direct, atol=1e-12)

    def test_dim_mismatch(self):
        fs = make_feature_set("u", 0.0, np.zeros((1, 4)), [0.0], [1])
        with pytest.raises(CompatibilityError):
            pool_utterance(fs, np.zeros(8), np.ones(8))

    def test_standardization_idempotent(self):
        rng = np.random.default_rng(1)
        sub = rng.normal(size=(2, 4))
        fs = make_feature_set("u", 0.2, sub, rng.normal(size=2), [1, 4])
        raw = fs.feature_matrix()
        once = (raw - np.zeros(10)) / np.ones(10)
        np.testing.assert_allclose(once, raw, atol=1e-12)


class TestPredict:
    def test_zero_model_uniform_and_tie_break(self):
        fs = make_feature_set("u", 0.3, np.ones((1, 4)), [0.1], [2])
        pred = predict(zero_model(10), fs)
        np.testing.assert_allclose(pred.posterior, np.full(5, 0.2), atol=1e-12)
        assert pred.predicted_class == 1

    def test_dominant_logit(self):
        fs = make_feature_set("u", 1.0, np.zeros((1, 4)), [0.0], [1])
        model = ScorerModel(
            feature_mean=np.zeros(10),
            feature_std=np.ones(10),
            weights=np.zeros((5, 10)),
            bias=np.array([0.0, 0.0, 0.0, 0.0, 10.0]),
        )
        pred = predict(model, fs)
        assert pred.predicted_class == 5
        assert pred.posterior[4] > 0.99

    def test_posterior_sums_to_one(self):
        rng = np.random.default_rng(2)
        model = ScorerModel(
            feature_mean=rng.normal(size=10),
            feature_std=np.abs(rng.normal(size=10)) + 0.5,
            weights=rng.normal(size=(5, 10)),
            bias=rng.normal(size=5),
        )
        for _ in range(10):
            fs = make_feature_set(
                "u", rng.normal(), rng.normal(size=(2, 4)), rng.normal(size=2), [1, 3]
            )
            pred = predict(model, fs)
            assert pred.posterior.sum() == pytest.approx(1.0, abs=1e-9)
            assert np.all(pred.posterior >= 0)


class TestTrain:
    def test_separable_reaches_high_uar(self):
        train_set = separable_blobs(0, 100)
        dev_set = separable_blobs(1, 30, prefix="d")
        model, stats = train_detailed(train_set, dev_set, TrainConfig())
        assert max(s.dev_uar for s in stats) >= 99.0
        preds = predict_many(model, [fs for fs, _ in train_set])
        report = metrics.evaluate([y for _, y in train_set], [p.predicted_class for p in preds])
        assert report.uar >= 99.0

    def test_loss_non_increasing_first_five_epochs(self):
        train_set = separable_blobs(2, 100)
        _, stats = train_detailed(train_set, None, TrainConfig(epochs=5))
        losses = [s.mean_loss for s in stats]
        assert all(a >= b for a, b in zip(losses, losses[1:]))

    def test_zero_epochs_returns_zero_model(self):
        train_set = separable_blobs(3, 10)
        model = train(train_set, None, TrainConfig(epochs=0))
        assert np.all(model.weights == 0) and np.all(model.bias == 0)
        pred = predict(model, train_set[0][0])
        np.testing.assert_allclose(pred.posterior, np.full(5, 0.2), atol=1e-12)

    def test_deterministic_given_seed(self):
        train_set = separable_blobs(4, 40)
        dev_set = separable_blobs(5, 10, prefix="d")
        cfg = TrainConfig(seed=7, epochs=4)
        a = train(train_set, dev_set, cfg)
        b = train(train_set, dev_set, cfg)
        assert np.array_equal(a.weights, b.weights)
        assert np.array_equal(a.bias, b.bias)
        assert np.array_equal(a.feature_mean, b.feature_mean)

    def test_weight_scaling_with_lr_compensation(self):
        # scaling class weights by k while dividing lr by k leaves the
        # gradient-descent trajectory unchanged
        train_set = separable_blobs(6, 40)
        w = np.array([1.0, 2.0, 0.5, 1.5, 1.0])
        a = train(train_set, None, TrainConfig(class_weights=w, lr=0.1, epochs=3, seed=1))
        b = train(train_set, None, TrainConfig(class_weights=2 * w, lr=0.05, epochs=3, seed=1))
        np.testing.assert_allclose(a.weights, b.weights, atol=1e-9)
        np.testing.assert_allclose(a.bias, b.bias, atol=1e-9)

    def test_ordinal_beats_ce_on_mae(self):
        data = ordinal_blobs(1, 100)
        train_set, dev_set = data[::2], data[1::2]

        def mae_for(loss):
            cfg = TrainConfig(alpha=0.5, loss=loss)
            model = train(train_set, dev_set, cfg)
            preds = predict_many(model, [fs for fs, _ in train_set])
            return metrics.evaluate(
                [y for _, y in train_set], [p.predicted_class for p in preds]
            ).mae

        assert mae_for("ordinal") <= mae_for("ce")

    def test_empty_train_set(self):
        with pytest.raises(InputError):
            train([], None, TrainConfig())

    def test_bad_label(self):
        fs = make_feature_set("u", 0.0, np.zeros((1, 4)), [0.0], [1])
        with pytest.raises(InputError):
            train([(fs, 6)], None, TrainConfig())

    def test_mixed_dims_rejected(self):
        a = make_feature_set("a", 0.0, np.zeros((1, 4)), [0.0], [1])
        b = make_feature_set("b", 0.0, np.zeros((1, 3)), [0.0], [1])
        with pytest.raises(CompatibilityError):
            train([(a, 1), (b, 2)], None, TrainConfig())


class TestInterpolate:
    def make_system(self, mapping):
        return {u: np.asarray(p, dtype=float) for u, p in mapping.items()}

    def test_paper_weights_fixture(self):
        a = self.make_system({"u": [1, 0, 0, 0, 0]})
        b = self.make_system({"u": [0, 1, 0, 0, 0]})
        out = interpolate([a, b], [0.1, 0.9])
        np.testing.assert_allclose(out[0].posterior, [0.1, 0.9, 0, 0, 0], atol=1e-12)
        assert out[0].predicted_class == 2

    def test_identity_weight(self):
        a = self.make_system({"u": [0.4, 0.3, 0.1, 0.1, 0.1]})
        b = self.make_system({"u": [0.1, 0.1, 0.1, 0.3, 0.4]})
        out = interpolate([a, b], [1.0, 0.0])
        np.testing.assert_allclose(out[0].posterior, a["u"], atol=1e-12)

    def test_three_way_mean(self):
        systems = [
            self.make_system({"u": [1, 0, 0, 0, 0]}),
            self.make_system({"u": [0, 1, 0, 0, 0]}),
            self.make_system({"u": [0, 0, 1, 0, 0]}),
        ]
        out = interpolate(systems, [1 / 3, 1 / 3, 1 / 3])
        np.testing.assert_allclose(out[0].posterior, [1 / 3, 1 / 3, 1 / 3, 0, 0], atol=1e-12)

    def test_id_mismatch(self):
        a = self.make_system({"u1": [1, 0, 0, 0, 0]})
        b = self.make_system({"u2": [1, 0, 0, 0, 0]})
        with pytest.raises(InputError):
            interpolate([a, b], [0.5, 0.5])

    def test_bad_weight_sum(self):
        a = self.make_system({"u": [1, 0, 0, 0, 0]})
        b = self.make_system({"u": [0, 1, 0, 0, 0]})
        with pytest.raises(InputError):
            interpolate([a, b], [0.5, 0.6])


class TestOptimizeInterpolation:
    def one_hot(self, c):
        p = np.zeros(5)
        p[c - 1] = 1.0
        return p

    def test_dominant_system_gets_weight_one(self):
        # the good system is right but only narrowly, so any weight on the
        # confidently-wrong system flips predictions: only (1, 0) is optimal
        refs = {f"u{i}": (i % 5) + 1 for i in range(10)}
        good, bad = {}, {}
        for u, y in refs.items():
            other = (y % 5) + 1
            p = np.zeros(5)
            p[y - 1] = 0.55
            p[other - 1] = 0.45
            good[u] = p
            bad[u] = self.one_hot(other)
        w = optimize_interpolation([good, bad], refs, step=0.1)
        np.testing.assert_allclose(w, [1.0, 0.0])

    def test_identical_systems_lexicographic(self):
        refs = {f"u{i}": (i % 5) + 1 for i in range(10)}
        sys_a = {u: self.one_hot(y) for u, y in refs.items()}
        w = optimize_interpolation([sys_a, dict(sys_a)], refs, step=0.5)
        np.testing.assert_allclose(w, [0.0, 1.0])

    def test_complementary_mix_beats_pure(self):
        # system 1 is confidently right on the first half, weakly wrong on the
        # second; system 2 mirrors it, so a mix fixes both error sets
        refs = {}
        sys1 = {}
        sys2 = {}
        for i in range(10):
            y = (i % 5) + 1
            other = (y % 5) + 1
            u = f"u{i}"
            refs[u] = y
            right = np.full(5, 0.02)
            right[y - 1] = 0.92
            weak_wrong = np.full(5, 0.18)
            weak_wrong[other - 1] = 0.28
            if i < 5:
                sys1[u], sys2[u] = right, weak_wrong
            else:
                sys1[u], sys2[u] = weak_wrong, right
        w = optimize_interpolation([sys1, sys2], refs, step=0.1)
        mixed = interpolate([sys1, sys2], w)
        uar_mixed = metrics.evaluate(
            [refs[p.utt_id] for p in mixed], [p.predicted_class for p in mixed]
        ).uar
        for pure in ([1.0, 0.0], [0.0, 1.0]):
            out = interpolate([sys1, sys2], pure)
            uar_pure = metrics.evaluate(
                [refs[p.utt_id] for p in out], [p.predicted_class for p in out]
            ).uar
            assert uar_mixed > uar_pure
        assert 0.0 < w[0] < 1.0

    def test_bad_step(self):
        refs = {"u": 1}
        sys_a = {"u": self.one_hot(1)}
        with pytest.raises(InputError):
            optimize_interpolation([sys_a, dict(sys_a)], refs, step=0.7)


class TestModelType:
    def test_std_floor_enforced(self):
        with pytest.raises(InputError):
            ScorerModel(
                feature_mean=np.zeros(3),
                feature_std=np.zeros(3),
                weights=np.zeros((5, 3)),
                bias=np.zeros(5),
            )

    def test_shape_checks(self):
        with pytest.raises(InputError):
            ScorerModel(
                feature_mean=np.zeros(3),
                feature_std=np.ones(4),
                weights=np.zeros((5, 3)),
                bias=np.zeros(5),
            )
