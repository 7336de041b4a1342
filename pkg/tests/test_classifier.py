"""Softmax classifier: closed-form checks, finite-difference gradient oracle,
training behavior, and serialization."""

from __future__ import annotations

import math
import random

import numpy as np
import pytest

from tdockit.classifier import (
    Hyperparams,
    ModelParams,
    TrainingError,
    load_model,
    loss_and_grad,
    predict,
    predict_proba,
    save_model,
    train,
)
from tdockit.features import FeatureConfig, FeatureVector, fit_vocabulary, transform_many

FP = "test-fingerprint"


def vec(pairs: dict[int, float], fp: str = FP) -> FeatureVector:
    idx = sorted(pairs)
    return FeatureVector(
        indices=np.asarray(idx, dtype=np.int32),
        values=np.asarray([pairs[i] for i in idx], dtype=np.float64),
        norm=1.0 if pairs else 0.0,
        vocab_fingerprint=fp,
    )


def zero_params(K: int, V: int, l2: float = 0.0, **hp_kwargs) -> ModelParams:
    return ModelParams(
        W=np.zeros((K, V)),
        b=np.zeros(K),
        label_set=[f"L{i}" for i in range(K)],
        trained_config=Hyperparams(l2=l2, **hp_kwargs),
        vocab_fingerprint=FP,
    )


def random_params(rng: np.random.Generator, K: int, V: int, l2: float) -> ModelParams:
    params = zero_params(K, V, l2=l2)
    params.W = rng.normal(size=(K, V))
    params.b = rng.normal(size=K)
    return params


def random_batch(rng: np.random.Generator, K: int, V: int, n: int) -> list[tuple[FeatureVector, int]]:
    batch = []
    for _ in range(n):
        nnz = int(rng.integers(0, V + 1))
        idx = sorted(rng.choice(V, size=nnz, replace=False).tolist())
        batch.append((vec({i: float(rng.normal()) for i in idx}), int(rng.integers(0, K))))
    return batch


class TestLossAndGrad:
    def test_uniform_softmax_loss_is_log_k(self):
        for K in (2, 3, 7):
            params = zero_params(K, 4)
            batch = [(vec({0: 0.5, 2: 1.0}), 0), (vec({}), K - 1)]
            loss, _ = loss_and_grad(params, batch)
            assert loss == pytest.approx(math.log(K), abs=1e-12)

    def test_bias_gradient_closed_form_on_zero_vector(self):
        K = 4
        params = zero_params(K, 3)
        _, (dW, db) = loss_and_grad(params, [(vec({}), 1)])
        expected = np.full(K, 1.0 / K)
        expected[1] -= 1.0
        assert np.allclose(db, expected, atol=1e-15)
        assert np.allclose(dW, 0.0)

    def test_matches_central_finite_differences(self):
        rng = np.random.default_rng(12345)
        step = 1e-6
        worst = 0.0
        for trial in range(20):
            K = int(rng.integers(2, 6))
            V = int(rng.integers(1, 21))
            l2 = float(rng.choice([0.0, 0.01, 0.3]))
            params = random_params(rng, K, V, l2)
            batch = random_batch(rng, K, V, 4)
            _, (dW, db) = loss_and_grad(params, batch)

            def loss_at(W: np.ndarray, b: np.ndarray) -> float:
                probe = ModelParams(
                    W=W, b=b, label_set=params.label_set,
                    trained_config=params.trained_config,
                    vocab_fingerprint=params.vocab_fingerprint,
                )
                return loss_and_grad(probe, batch)[0]

            numeric_W = np.zeros_like(dW)
            for i in range(K):
                for j in range(V):
                    up, down = params.W.copy(), params.W.copy()
                    up[i, j] += step
                    down[i, j] -= step
                    numeric_W[i, j] = (loss_at(up, params.b) - loss_at(down, params.b)) / (2 * step)
            numeric_b = np.zeros_like(db)
            for i in range(K):
                up, down = params.b.copy(), params.b.copy()
                up[i] += step
                down[i] -= step
                numeric_b[i] = (loss_at(params.W, up) - loss_at(params.W, down)) / (2 * step)

            scale = max(1.0, float(np.abs(numeric_W).max()), float(np.abs(numeric_b).max()))
            err = max(float(np.abs(dW - numeric_W).max()), float(np.abs(db - numeric_b).max()))
            worst = max(worst, err / scale)
        assert worst <= 1e-6

    def test_rejects_empty_batch_and_bad_labels(self):
        params = zero_params(3, 2)
        with pytest.raises(ValueError):
            loss_and_grad(params, [])
        with pytest.raises(ValueError):
            loss_and_grad(params, [(vec({0: 1.0}), 3)])

    def test_rejects_non_finite_features(self):
        params = zero_params(2, 2)
        with pytest.raises(ValueError):
            loss_and_grad(params, [(vec({0: float("nan")}), 0)])

    def test_single_step_never_increases_convex_loss(self):
        rng = np.random.default_rng(7)
        for _ in range(10):
            params = random_params(rng, 3, 6, l2=0.0)
            batch = random_batch(rng, 3, 6, 5)
            loss0, (dW, db) = loss_and_grad(params, batch)
            params.W -= 1e-3 * dW
            params.b -= 1e-3 * db
            loss1, _ = loss_and_grad(params, batch)
            assert loss1 <= loss0 + 1e-12

    def test_l2_pulls_weights_toward_zero_without_signal(self):
        rng = np.random.default_rng(3)
        params = random_params(rng, 3, 5, l2=0.5)
        batch = [(vec({}), 0), (vec({}), 1)]
        norms = [float(np.linalg.norm(params.W))]
        for _ in range(25):
            _, (dW, db) = loss_and_grad(params, batch)
            params.W -= 0.1 * dW
            params.b -= 0.1 * db
            norms.append(float(np.linalg.norm(params.W)))
        assert all(b < a for a, b in zip(norms, norms[1:]))


class TestPredict:
    def test_zero_params_uniform_probabilities(self):
        params = zero_params(5, 3)
        p = predict_proba(params, vec({0: 1.0}))
        assert np.allclose(p, 0.2, atol=1e-15)
        assert abs(p.sum() - 1.0) < 1e-12

    def test_biased_logits_closed_form(self):
        # softmax with b = (10, 0, ..., 0): p0 = 1 / (1 + (K-1) e^-10)
        for K in (2, 3, 10, 20):
            params = zero_params(K, 2)
            params.b[0] = 10.0
            p = predict_proba(params, vec({}))
            expected = 1.0 / (1.0 + (K - 1) * math.exp(-10.0))
            assert p[0] == pytest.approx(expected, abs=1e-12)
            assert p[0] >= 0.999

    def test_probabilities_sum_to_one_for_random_inputs(self):
        rng = np.random.default_rng(11)
        for _ in range(50):
            params = random_params(rng, int(rng.integers(2, 8)), 6, l2=0.0)
            x = random_batch(rng, 2, 6, 1)[0][0]
            assert abs(predict_proba(params, x).sum() - 1.0) < 1e-12

    def test_tie_breaks_to_lowest_index(self):
        params = zero_params(4, 2)
        assert predict(params, vec({0: 1.0})) == 0

    def test_shift_invariance(self):
        rng = np.random.default_rng(5)
        params = random_params(rng, 4, 6, l2=0.0)
        xs = [random_batch(rng, 4, 6, 1)[0][0] for _ in range(20)]
        before = [predict(params, x) for x in xs]
        params.b += 123.456
        assert [predict(params, x) for x in xs] == before

    def test_fingerprint_mismatch_rejected(self):
        params = zero_params(2, 2)
        with pytest.raises(ValueError):
            predict_proba(params, vec({0: 1.0}, fp="other"))

    def test_stability_with_large_logits(self):
        params = zero_params(2, 1)
        params.W[0, 0] = 1000.0
        p = predict_proba(params, vec({0: 1.0}))
        assert np.isfinite(p).all() and abs(p.sum() - 1.0) < 1e-12


def _featurized_corpus(texts_labels: list[tuple[str, int]], min_df: int = 1):
    vocab = fit_vocabulary((t for t, _ in texts_labels), FeatureConfig(min_df=min_df))
    xs = transform_many((t for t, _ in texts_labels), vocab)
    return vocab, [(x, y) for x, (_, y) in zip(xs, texts_labels)]


class TestTrain:
    def _separable(self, n_per_class: int = 40):
        rng = random.Random(0)
        rows = []
        for i in range(n_per_class):
            rows.append((" ".join(rng.choice(["apple", "banana", "cherry"]) for _ in range(12)), 0))
            rows.append((" ".join(rng.choice(["xylem", "yeast", "zinc"]) for _ in range(12)), 1))
        return rows

    def test_separable_reaches_full_training_accuracy(self):
        rows = self._separable()
        vocab, data = _featurized_corpus(rows)
        params, log = train(data, data, vocab, ["A", "B"], Hyperparams(epochs=10, seed=1))
        assert sum(1 for x, y in data if predict(params, x) == y) == len(data)
        assert log.best_epoch >= 0

    def test_chance_level_on_label_independent_text(self):
        rng = random.Random(42)
        words = [f"t{i}" for i in range(60)]
        rows = [(" ".join(rng.choice(words) for _ in range(30)), rng.randrange(3)) for _ in range(2500)]
        vocab, data = _featurized_corpus(rows)
        train_data, val_data = data[:1500], data[1500:]
        params, _ = train(train_data, val_data, vocab, ["A", "B", "C"], Hyperparams(epochs=5, seed=0))
        val_acc = sum(1 for x, y in val_data if predict(params, x) == y) / len(val_data)
        assert abs(val_acc - 1 / 3) <= 0.05

    def test_same_seed_identical_params(self):
        rows = self._separable(20)
        vocab, data = _featurized_corpus(rows)
        hp = Hyperparams(epochs=4, seed=9)
        a, _ = train(data, data, vocab, ["A", "B"], hp)
        b, _ = train(data, data, vocab, ["A", "B"], hp)
        assert np.array_equal(a.W, b.W) and np.array_equal(a.b, b.b)

    def test_different_seeds_differ(self):
        rows = self._separable(20)
        vocab, data = _featurized_corpus(rows)
        a, _ = train(data, data, vocab, ["A", "B"], Hyperparams(epochs=2, seed=0))
        b, _ = train(data, data, vocab, ["A", "B"], Hyperparams(epochs=2, seed=1))
        assert not np.array_equal(a.W, b.W)

    def test_empty_sets_rejected(self):
        rows = self._separable(4)
        vocab, data = _featurized_corpus(rows)
        with pytest.raises(TrainingError):
            train([], data, vocab, ["A", "B"])
        with pytest.raises(TrainingError):
            train(data, [], vocab, ["A", "B"])

    def test_divergence_reports_epoch_and_batch(self):
        rows = self._separable(10)
        vocab, data = _featurized_corpus(rows)
        with np.errstate(over="ignore"), pytest.raises(TrainingError, match="epoch"):
            train(data, data, vocab, ["A", "B"], Hyperparams(epochs=3, seed=0, learning_rate=1e300))

    def test_adam_opt_in_converges_and_is_deterministic(self):
        rows = self._separable(20)
        vocab, data = _featurized_corpus(rows)
        hp = Hyperparams(epochs=6, seed=3, optimizer="adam", learning_rate=0.05)
        a, _ = train(data, data, vocab, ["A", "B"], hp)
        b, _ = train(data, data, vocab, ["A", "B"], hp)
        assert np.array_equal(a.W, b.W)
        assert sum(1 for x, y in data if predict(a, x) == y) == len(data)
        with pytest.raises(ValueError):
            Hyperparams(optimizer="sgd-momentum")

    def test_early_stopping_respects_patience(self):
        rows = self._separable(15)
        vocab, data = _featurized_corpus(rows)
        params, log = train(data, data, vocab, ["A", "B"], Hyperparams(epochs=50, seed=2, early_stop_patience=2))
        # once validation accuracy saturates at 1.0, two stale epochs end training
        assert log.stopped_early
        assert len(log.epochs) < 50


class TestSerialization:
    def test_round_trip_exact(self, tmp_path):
        rows = [("alpha beta", 0), ("gamma delta", 1), ("alpha gamma", 0)]
        vocab, data = _featurized_corpus(rows)
        params, _ = train(data, data, vocab, ["A", "B"], Hyperparams(epochs=2, seed=0))
        save_model(params, tmp_path / "model.json")
        loaded = load_model(tmp_path / "model.json")
        assert np.array_equal(loaded.W, params.W)
        assert np.array_equal(loaded.b, params.b)
        assert loaded.label_set == params.label_set
        assert loaded.trained_config == params.trained_config
        assert loaded.vocab_fingerprint == params.vocab_fingerprint
