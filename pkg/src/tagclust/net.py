"""Fully connected clustering network with a softmax head.

Forward, backward, and Adam updates are written out explicitly in float64
so analytic gradients can be pinned against finite differences.  The
architecture is a fixed stack of linear layers with ReLU between them and a
K-way softmax on top.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "MlpModel",
    "ForwardCache",
    "Gradients",
    "AdamState",
    "init_model",
    "init_adam",
    "forward",
    "backward",
    "adam_step",
    "softmax",
    "save_model",
    "load_model",
]

CHECKPOINT_VERSION = 1


@dataclass
class MlpModel:
    """Layer parameters; weights[i] has shape (fan_in, fan_out), row-major."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]
    k: int

    @property
    def input_dim(self) -> int:
        return self.weights[0].shape[0]

    @property
    def layer_sizes(self) -> list[int]:
        return [self.input_dim] + [w.shape[1] for w in self.weights]


@dataclass
class ForwardCache:
    """Intermediate values of one forward pass, consumed by backward()."""

    inputs: np.ndarray
    pre_activations: list[np.ndarray]
    hidden_activations: list[np.ndarray]
    probs: np.ndarray


@dataclass
class Gradients:
    weights: list[np.ndarray]
    biases: list[np.ndarray]


@dataclass
class AdamState:
    m_weights: list[np.ndarray]
    v_weights: list[np.ndarray]
    m_biases: list[np.ndarray]
    v_biases: list[np.ndarray]
    step_count: int = 0
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8


def init_model(d: int, k: int, seed: int, hidden_widths=(1200, 1200)) -> MlpModel:
    """Seeded fan-in-scaled uniform init (ReLU-appropriate); biases zero."""
    if d < 1 or k < 1:
        raise ValueError("d and k must be at least 1")
    rng = np.random.default_rng(seed)
    sizes = [d, *hidden_widths, k]
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        limit = np.sqrt(6.0 / fan_in)
        weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return MlpModel(weights=weights, biases=biases, k=k)


def init_adam(model: MlpModel, learning_rate: float = 1e-3, beta1: float = 0.9,
              beta2: float = 0.999, epsilon: float = 1e-8) -> AdamState:
    return AdamState(
        m_weights=[np.zeros_like(w) for w in model.weights],
        v_weights=[np.zeros_like(w) for w in model.weights],
        m_biases=[np.zeros_like(b) for b in model.biases],
        v_biases=[np.zeros_like(b) for b in model.biases],
        learning_rate=learning_rate,
        beta1=beta1,
        beta2=beta2,
        epsilon=epsilon,
    )


def softmax(logits: np.ndarray) -> np.ndarray:
    """Row-wise softmax with max-shift for overflow safety."""
    shifted = logits - logits.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=1, keepdims=True)


def forward(model: MlpModel, batch: np.ndarray):
    """Run the network on a batch; returns (probs, cache).

    probs is N_B x K with non-negative rows summing to 1.
    """
    batch = np.asarray(batch, dtype=np.float64)
    if batch.ndim != 2 or batch.shape[1] != model.input_dim:
        raise ValueError(
            f"batch shape {batch.shape} incompatible with input dim {model.input_dim}"
        )
    a = batch
    pre, hidden = [], []
    for w, b in zip(model.weights[:-1], model.biases[:-1]):
        z = a @ w + b
        pre.append(z)
        a = np.maximum(z, 0.0)
        hidden.append(a)
    logits = a @ model.weights[-1] + model.biases[-1]
    probs = softmax(logits)
    return probs, ForwardCache(batch, pre, hidden, probs)


def backward(model: MlpModel, cache: ForwardCache, grad_probs: np.ndarray) -> Gradients:
    """Exact parameter gradients given dLoss/dprobs from a matching forward."""
    n_layers = len(model.weights)
    if len(cache.pre_activations) != n_layers - 1:
        raise ValueError("forward cache does not match model depth")
    if grad_probs.shape != cache.probs.shape:
        raise ValueError("grad_probs shape does not match cached probabilities")
    if cache.inputs.shape[1] != model.input_dim:
        raise ValueError("stale forward cache: input width mismatch")

    p = cache.probs
    # Chain through softmax: dL/dlogit_k = p_k * (g_k - sum_j g_j p_j).
    inner = (grad_probs * p).sum(axis=1, keepdims=True)
    delta = p * (grad_probs - inner)

    gw = [None] * n_layers
    gb = [None] * n_layers
    for layer in range(n_layers - 1, -1, -1):
        below = cache.hidden_activations[layer - 1] if layer > 0 else cache.inputs
        gw[layer] = below.T @ delta
        gb[layer] = delta.sum(axis=0)
        if layer > 0:
            delta = (delta @ model.weights[layer].T) * (cache.pre_activations[layer - 1] > 0.0)
    return Gradients(weights=gw, biases=gb)


def adam_step(model: MlpModel, grads: Gradients, state: AdamState):
    """One bias-corrected Adam update, in place; returns (model, state)."""
    state.step_count += 1
    t = state.step_count
    b1, b2 = state.beta1, state.beta2
    corr1 = 1.0 - b1 ** t
    corr2 = 1.0 - b2 ** t
    for params, gs, ms, vs in (
        (model.weights, grads.weights, state.m_weights, state.v_weights),
        (model.biases, grads.biases, state.m_biases, state.v_biases),
    ):
        for param, g, m, v in zip(params, gs, ms, vs):
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            param -= state.learning_rate * (m / corr1) / (np.sqrt(v / corr2) + state.epsilon)
    return model, state


def save_model(model: MlpModel, path) -> None:
    """Write an .npz checkpoint: format_version, k, layer_sizes, w{i}/b{i} arrays."""
    arrays = {
        "format_version": np.array(CHECKPOINT_VERSION),
        "k": np.array(model.k),
        "layer_sizes": np.array(model.layer_sizes),
    }
    for i, (w, b) in enumerate(zip(model.weights, model.biases)):
        arrays[f"w{i}"] = w
        arrays[f"b{i}"] = b
    np.savez(path, **arrays)


def load_model(path) -> MlpModel:
    with np.load(path) as blob:
        version = int(blob["format_version"])
        if version != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {version}")
        sizes = blob["layer_sizes"]
        n_layers = len(sizes) - 1
        weights = [blob[f"w{i}"].astype(np.float64) for i in range(n_layers)]
        biases = [blob[f"b{i}"].astype(np.float64) for i in range(n_layers)]
        return MlpModel(weights=weights, biases=biases, k=int(blob["k"]))
