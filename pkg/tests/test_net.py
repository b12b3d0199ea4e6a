import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tagclust.net import (
    Gradients,
    adam_step,
    backward,
    forward,
    init_adam,
    init_model,
    load_model,
    save_model,
    softmax,
)
from oracles import finite_difference_model, model_params_flat


def zero_grads(model):
    return Gradients([np.zeros_like(w) for w in model.weights],
                     [np.zeros_like(b) for b in model.biases])


class TestInit:
    def test_deterministic(self):
        a = init_model(5, 3, seed=7, hidden_widths=(8, 8))
        b = init_model(5, 3, seed=7, hidden_widths=(8, 8))
        for wa, wb in zip(a.weights, b.weights):
            np.testing.assert_array_equal(wa, wb)

    def test_k_one_degenerate_softmax(self):
        model = init_model(3, 1, seed=0, hidden_widths=(4,))
        probs, _ = forward(model, np.random.default_rng(0).normal(size=(5, 3)))
        np.testing.assert_allclose(probs, 1.0)

    def test_fan_in_bound(self):
        model = init_model(9, 2, seed=1, hidden_widths=(16,))
        for w in model.weights:
            limit = np.sqrt(6.0 / w.shape[0])
            assert np.abs(w).max() <= limit

    def test_biases_zero(self):
        model = init_model(4, 2, seed=3, hidden_widths=(5, 5))
        for b in model.biases:
            np.testing.assert_array_equal(b, 0.0)


class TestForward:
    def test_zero_weights_uniform(self):
        model = init_model(3, 4, seed=0, hidden_widths=(6,))
        for w in model.weights:
            w[:] = 0.0
        probs, _ = forward(model, np.ones((2, 3)))
        np.testing.assert_allclose(probs, 0.25)

    def test_duplicate_rows_identical(self):
        model = init_model(3, 2, seed=5, hidden_widths=(4,))
        x = np.array([[1.0, -2.0, 0.5]])
        probs, _ = forward(model, np.vstack([x, x]))
        np.testing.assert_array_equal(probs[0], probs[1])

    def test_huge_logits_stable(self):
        # Weights engineered so the logits are [1000, 0].
        model = init_model(1, 2, seed=0, hidden_widths=(1,))
        model.weights[0][:] = 1.0
        model.weights[1][:] = np.array([[1000.0, 0.0]])
        model.biases[0][:] = 0.0
        model.biases[1][:] = 0.0
        probs, _ = forward(model, np.array([[1.0]]))
        assert np.all(np.isfinite(probs))
        assert probs[0, 0] == pytest.approx(1.0)
        assert probs[0, 1] == pytest.approx(0.0, abs=1e-300)

    def test_dimension_mismatch(self):
        model = init_model(3, 2, seed=0, hidden_widths=(4,))
        with pytest.raises(ValueError):
            forward(model, np.zeros((2, 4)))

    def test_softmax_rows_sum_to_one(self):
        logits = np.random.default_rng(1).normal(scale=20, size=(30, 5))
        probs = softmax(logits)
        np.testing.assert_allclose(probs.sum(axis=1), 1.0, atol=1e-9)
        assert np.all(probs >= 0.0)


class TestBackward:
    def test_zero_upstream_zero_grads(self):
        model = init_model(3, 2, seed=2, hidden_widths=(4,))
        probs, cache = forward(model, np.random.default_rng(2).normal(size=(5, 3)))
        grads = backward(model, cache, np.zeros_like(probs))
        for g in grads.weights + grads.biases:
            np.testing.assert_array_equal(g, 0.0)

    def test_linearity_in_upstream(self):
        model = init_model(3, 2, seed=4, hidden_widths=(4,))
        rng = np.random.default_rng(4)
        probs, cache = forward(model, rng.normal(size=(5, 3)))
        upstream = rng.normal(size=probs.shape)
        g1 = backward(model, cache, upstream)
        g2 = backward(model, cache, 2.0 * upstream)
        for a, b in zip(g1.weights, g2.weights):
            np.testing.assert_allclose(2.0 * a, b, atol=1e-12)

    @pytest.mark.parametrize("seed", range(5))
    def test_matches_finite_differences(self, seed):
        # Generic evaluation points: biases perturbed off zero so no ReLU
        # pre-activation sits exactly on its kink.
        rng = np.random.default_rng(seed)
        model = init_model(3, 2, seed=seed, hidden_widths=(4, 4))
        for b in model.biases:
            b += rng.normal(0, 0.3, size=b.shape)
        x = rng.normal(size=(6, 3))
        weights = rng.normal(size=(6, 2))  # arbitrary linear functional of probs

        def loss_of_model(m):
            p, _ = forward(m, x)
            return float((p * weights).sum())

        probs, cache = forward(model, x)
        grads = backward(model, cache, weights)
        analytic = np.concatenate([g.ravel() for g in grads.weights + grads.biases])
        numeric = finite_difference_model(model, loss_of_model, step=1e-5)
        rel = np.linalg.norm(analytic - numeric) / (np.linalg.norm(numeric) + 1e-12)
        assert rel < 1e-4

    def test_mismatched_cache_rejected(self):
        deep = init_model(3, 2, seed=0, hidden_widths=(4, 4))
        shallow = init_model(3, 2, seed=0, hidden_widths=(4,))
        probs, cache = forward(shallow, np.zeros((2, 3)))
        with pytest.raises(ValueError):
            backward(deep, cache, np.zeros_like(probs))


class TestAdam:
    def test_zero_gradient_fixed_point(self):
        model = init_model(3, 2, seed=0, hidden_widths=(4,))
        state = init_adam(model)
        before = model_params_flat(model).copy()
        adam_step(model, zero_grads(model), state)
        np.testing.assert_array_equal(before, model_params_flat(model))
        assert state.step_count == 1

    def test_first_step_magnitude_near_lr(self):
        # Bias correction makes the first update ~= lr * sign(g) per coordinate.
        model = init_model(2, 2, seed=1, hidden_widths=(3,))
        state = init_adam(model, learning_rate=1e-3)
        rng = np.random.default_rng(1)
        grads = Gradients(
            [rng.uniform(0.5, 2.0, w.shape) * rng.choice([-1, 1], w.shape)
             for w in model.weights],
            [rng.uniform(0.5, 2.0, b.shape) * rng.choice([-1, 1], b.shape)
             for b in model.biases],
        )
        before = model_params_flat(model).copy()
        adam_step(model, grads, state)
        delta = model_params_flat(model) - before
        signs = np.concatenate([g.ravel() for g in grads.weights + grads.biases])
        np.testing.assert_allclose(delta, -1e-3 * np.sign(signs), rtol=1e-4)

    def test_two_steps_replay_identically(self):
        def fresh():
            model = init_model(2, 2, seed=9, hidden_widths=(3,))
            return model, init_adam(model)

        rng = np.random.default_rng(9)
        model_a, state_a = fresh()
        gs = []
        for _ in range(2):
            g = Gradients([rng.normal(size=w.shape) for w in model_a.weights],
                          [rng.normal(size=b.shape) for b in model_a.biases])
            gs.append(g)
            adam_step(model_a, g, state_a)
        model_b, state_b = fresh()
        for g in gs:
            adam_step(model_b, g, state_b)
        np.testing.assert_array_equal(model_params_flat(model_a), model_params_flat(model_b))


class TestCheckpoint:
    def test_roundtrip(self, tmp_path):
        model = init_model(4, 3, seed=11, hidden_widths=(6, 5))
        path = tmp_path / "model.npz"
        save_model(model, path)
        loaded = load_model(path)
        assert loaded.k == model.k
        assert loaded.layer_sizes == model.layer_sizes
        for a, b in zip(model.weights, loaded.weights):
            np.testing.assert_array_equal(a, b)
        for a, b in zip(model.biases, loaded.biases):
            np.testing.assert_array_equal(a, b)


@given(st.integers(0, 10_000), st.integers(1, 6), st.integers(2, 5), st.integers(1, 12))
@settings(max_examples=40, deadline=None)
def test_probability_rows_valid(seed, d, k, n_rows):
    rng = np.random.default_rng(seed)
    model = init_model(d, k, seed=seed, hidden_widths=(5,))
    for b in model.biases:
        b += rng.normal(0, 1.0, size=b.shape)
    probs, _ = forward(model, rng.normal(scale=3.0, size=(n_rows, d)))
    assert np.all(probs >= 0.0)
    np.testing.assert_allclose(probs.sum(axis=1), 1.0, atol=1e-9)
