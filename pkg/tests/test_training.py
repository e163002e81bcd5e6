import json

import numpy as np
import pytest

from conftest import build_random_model
from qsann import data, gradients, model as model_mod
from qsann.errors import ConfigurationError, EmptySequenceError, TrainingAborted
from qsann.training import AdamState, TrainConfig, adam_step, evaluate, train


def toy_dataset(seed=0, n_samples=40, ratios=(0.7, 0.3)):
    corpus = data.make_separable_corpus(seed=seed, n_samples=n_samples)
    return data.build_splits(corpus, ratios, seed=seed)


class TestTrainConfig:
    def test_zero_epochs_rejected(self):
        with pytest.raises(ConfigurationError):
            TrainConfig(learning_rate=0.01, epochs=0)

    def test_bad_learning_rate(self):
        with pytest.raises(ConfigurationError):
            TrainConfig(learning_rate=0.0, epochs=1)

    def test_bad_batch(self):
        with pytest.raises(ConfigurationError):
            TrainConfig(learning_rate=0.1, epochs=1, batch_size=0)


class TestAdam:
    def test_zero_gradient_no_move(self):
        params = {"x": np.array([1.0, -2.0])}
        state = AdamState()
        adam_step(params, {"x": np.zeros(2)}, state, 0.1)
        assert np.array_equal(params["x"], [1.0, -2.0])
        assert state.step == 1

    def test_first_step_magnitude(self):
        for g in (0.3, -5.0, 1e-4):
            params = {"x": np.array([0.0])}
            adam_step(params, {"x": np.array([g])}, AdamState(), 0.01)
            # first bias-corrected step is -lr * g / (|g| + eps), i.e. about
            # -lr * sign(g) up to the eps/|g| correction
            assert params["x"][0] == pytest.approx(
                -0.01 * g / (abs(g) + 1e-8), abs=1e-15
            )
            assert abs(params["x"][0]) == pytest.approx(0.01, rel=1e-3)

    def test_deterministic(self):
        def run():
            params = {"x": np.array([0.5, 0.5])}
            state = AdamState()
            for _ in range(5):
                adam_step(params, {"x": np.array([0.1, -0.2])}, state, 0.05)
            return params["x"].copy()

        assert np.array_equal(run(), run())

    def test_non_finite_gradient_aborts(self):
        params = {"x": np.array([1.0])}
        with pytest.raises(TrainingAborted, match="x"):
            adam_step(params, {"x": np.array([np.nan])}, AdamState(), 0.1)
        assert params["x"][0] == 1.0  # untouched

    def test_hand_computed_second_step(self):
        params = {"x": np.array([0.0])}
        state = AdamState()
        g1, g2, lr = 1.0, 2.0, 0.1
        adam_step(params, {"x": np.array([g1])}, state, lr)
        x1 = params["x"][0]
        adam_step(params, {"x": np.array([g2])}, state, lr)
        m2 = 0.9 * (0.1 * g1) + 0.1 * g2
        v2 = 0.999 * (0.001 * g1**2) + 0.001 * g2**2
        m_hat = m2 / (1 - 0.9**2)
        v_hat = v2 / (1 - 0.999**2)
        expected = x1 - lr * m_hat / (np.sqrt(v_hat) + 1e-8)
        assert params["x"][0] == pytest.approx(expected, abs=1e-12)


class TestEvaluate:
    def test_all_correct(self, rng):
        model = build_random_model(rng)
        samples = [([1], 1), ([2], 0)]
        pred1 = model_mod.forward([1], model).label
        forced = [([1], pred1), ([2], model_mod.forward([2], model).label)]
        acc, _ = evaluate(forced, model)
        assert acc == 1.0

    def test_zero_head_accuracy_is_positive_fraction(self, rng):
        model = build_random_model(rng)
        model.head_w[...] = 0.0
        model.head_b[...] = 0.0
        samples = [([1], 1), ([2], 0), ([3], 1), ([4], 1)]
        acc, _ = evaluate(samples, model)
        assert acc == 0.75  # y_hat = 0.5 maps to label 1

    def test_order_invariant(self, rng):
        model = build_random_model(rng)
        samples = [([1], 1), ([2], 0), ([3], 1)]
        acc_a, loss_a = evaluate(samples, model)
        acc_b, loss_b = evaluate(samples[::-1], model)
        assert acc_a == acc_b and loss_a == pytest.approx(loss_b, abs=1e-15)

    def test_empty(self, rng):
        with pytest.raises(EmptySequenceError):
            evaluate([], build_random_model(rng))


class TestTrainLoop:
    def test_seed_reproducibility(self):
        ds = toy_dataset()
        cfg = model_mod.ModelConfig(2, 1, 1, 1)
        tc = TrainConfig(learning_rate=0.01, epochs=3, seed=5)
        runs = []
        for _ in range(2):
            model = model_mod.init_model(cfg, ds.vocabulary.size, np.random.default_rng(0))
            result = train(ds, model, tc)
            runs.append(json.dumps(result.metrics, sort_keys=True))
        assert runs[0] == runs[1]

    def test_different_seeds_differ(self):
        ds = toy_dataset()
        cfg = model_mod.ModelConfig(2, 1, 1, 1)
        finals = []
        for seed in (0, 1):
            model = model_mod.init_model(cfg, ds.vocabulary.size, np.random.default_rng(0))
            result = train(ds, model, TrainConfig(learning_rate=0.01, epochs=2, seed=seed))
            finals.append(result.metrics[-1]["train_loss"])
        assert finals[0] != finals[1]

    def test_separable_toy_reaches_perfect_training_accuracy(self):
        ds = toy_dataset(seed=3, n_samples=20, ratios=(0.9, 0.1))
        model = model_mod.init_model(
            model_mod.ModelConfig(2, 1, 1, 1), ds.vocabulary.size, np.random.default_rng(0)
        )
        result = train(ds, model, TrainConfig(learning_rate=0.008, epochs=50, seed=0))
        assert any(row["train_acc"] == 1.0 for row in result.metrics)
        assert result.metrics[-1]["train_loss"] < result.metrics[0]["train_loss"]

    def test_metrics_schema(self):
        ds = toy_dataset(ratios=(0.6, 0.2, 0.2))
        model = model_mod.init_model(
            model_mod.ModelConfig(2, 1, 1, 1), ds.vocabulary.size, np.random.default_rng(0)
        )
        result = train(ds, model, TrainConfig(learning_rate=0.01, epochs=2, seed=0))
        assert result.metrics[0]["epoch"] == 0
        assert len(result.metrics) == 3
        for row in result.metrics:
            assert {"epoch", "train_loss", "train_acc", "test_acc", "dev_acc", "dev_loss"} <= set(row)

    def test_abort_on_non_finite_gradient(self, monkeypatch):
        ds = toy_dataset()
        model = model_mod.init_model(
            model_mod.ModelConfig(2, 1, 1, 1), ds.vocabulary.size, np.random.default_rng(0)
        )

        calls = {"n": 0}
        original = gradients.backward

        def poisoned(sample, mdl, noise=None):
            calls["n"] += 1
            bundle = original(sample, mdl, noise)
            if calls["n"] > 10:
                bundle.d_w[0] = np.nan
            return bundle

        monkeypatch.setattr(gradients, "backward", poisoned)
        result = train(ds, model, TrainConfig(learning_rate=0.01, epochs=4, seed=0))
        assert result.aborted
        assert np.all(np.isfinite(model.head_w))  # restored to the last good state

    def test_early_stop_on_flat_loss(self, monkeypatch):
        ds = toy_dataset()
        model = model_mod.init_model(
            model_mod.ModelConfig(2, 1, 1, 1), ds.vocabulary.size, np.random.default_rng(0)
        )
        # tiny learning rate: loss barely moves, the window rule must fire
        tc = TrainConfig(
            learning_rate=1e-12, epochs=50, seed=0, stop_window=3, stop_tol=1e-4
        )
        result = train(ds, model, tc)
        assert result.stopped_epoch is not None
        assert result.stopped_epoch < 50

    def test_dev_early_stop_flag(self):
        ds = toy_dataset(ratios=(0.6, 0.2, 0.2))
        model = model_mod.init_model(
            model_mod.ModelConfig(2, 1, 1, 1), ds.vocabulary.size, np.random.default_rng(0)
        )
        tc = TrainConfig(
            learning_rate=1e-12, epochs=30, seed=0, stop_window=3, dev_early_stop=True
        )
        result = train(ds, model, tc)
        assert result.stopped_epoch is not None

    def test_empty_training_set(self, rng):
        ds = toy_dataset()
        ds.train.clear()
        with pytest.raises(EmptySequenceError):
            train(ds, build_random_model(rng, vocab_size=ds.vocabulary.size),
                  TrainConfig(learning_rate=0.01, epochs=1))

    def test_batched_updates_run(self):
        ds = toy_dataset()
        model = model_mod.init_model(
            model_mod.ModelConfig(2, 1, 1, 1), ds.vocabulary.size, np.random.default_rng(0)
        )
        result = train(ds, model, TrainConfig(learning_rate=0.01, epochs=2, seed=0, batch_size=8))
        assert len(result.metrics) == 3
