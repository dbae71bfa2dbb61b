"""Minimal float64 MLP toolkit with exact reverse-mode gradients.

Covers exactly what WGAN-GP training needs: batched forward evaluation
(ReLU hidden layers, identity output), parameter gradients of batch
losses, per-row input gradients of a scalar-output network, parameter
gradients of the gradient-penalty term (a second reverse pass over the
input-gradient computation), and Adam.

ReLU's second derivative is zero almost everywhere, so treating the
activation masks as constants in the second reverse pass is exact for
these piecewise-linear networks, not an approximation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NumericalError


@dataclass
class MlpParams:
    """Layer weights/biases; weights[i] has shape (sizes[i+1], sizes[i])."""

    layer_sizes: tuple[int, ...]
    weights: list[np.ndarray]
    biases: list[np.ndarray]

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    def copy(self) -> "MlpParams":
        return MlpParams(
            tuple(self.layer_sizes),
            [w.copy() for w in self.weights],
            [b.copy() for b in self.biases],
        )

    def all_finite(self) -> bool:
        return all(np.all(np.isfinite(w)) for w in self.weights) and all(
            np.all(np.isfinite(b)) for b in self.biases
        )


@dataclass
class MlpGrads:
    """Gradient accumulators with the same shapes as the parameters."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]

    @staticmethod
    def zeros_like(params: MlpParams) -> "MlpGrads":
        return MlpGrads(
            [np.zeros_like(w) for w in params.weights],
            [np.zeros_like(b) for b in params.biases],
        )

    def add_(self, other: "MlpGrads") -> "MlpGrads":
        for a, b in zip(self.weights, other.weights):
            a += b
        for a, b in zip(self.biases, other.biases):
            a += b
        return self

    def all_finite(self) -> bool:
        return all(np.all(np.isfinite(w)) for w in self.weights) and all(
            np.all(np.isfinite(b)) for b in self.biases
        )


def init_mlp(layer_sizes, rng: np.random.Generator) -> MlpParams:
    """Glorot-uniform weights (+/- sqrt(6/(fan_in+fan_out))), zero biases."""
    sizes = tuple(int(s) for s in layer_sizes)
    if len(sizes) < 2 or any(s < 1 for s in sizes):
        raise ValueError(f"invalid layer sizes {sizes}")
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-limit, limit, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return MlpParams(sizes, weights, biases)


def _as_batch(params: MlpParams, x) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    X = np.atleast_2d(x)
    if X.shape[1] != params.layer_sizes[0]:
        raise ValueError(
            f"input width {X.shape[1]} != first layer size {params.layer_sizes[0]}"
        )
    return X, single


def _forward_cache(params: MlpParams, X: np.ndarray):
    """Returns (output, activations a_0..a_{L-1}, hidden pre-activations)."""
    acts = [X]
    preacts = []
    a = X
    last = params.n_layers - 1
    for i, (W, b) in enumerate(zip(params.weights, params.biases)):
        z = a @ W.T + b
        if i < last:
            preacts.append(z)
            a = np.maximum(z, 0.0)
            acts.append(a)
        else:
            a = z
    return a, acts, preacts


def forward(params: MlpParams, x) -> np.ndarray:
    """Evaluate the network on a single vector or a batch of rows."""
    X, single = _as_batch(params, x)
    out, _, _ = _forward_cache(params, X)
    return out[0] if single else out


def _backward(params: MlpParams, acts, preacts, d_out: np.ndarray):
    """Reverse pass from an output adjoint; returns (MlpGrads, d_input)."""
    grads = MlpGrads.zeros_like(params)
    dz = d_out
    for i in range(params.n_layers - 1, -1, -1):
        grads.weights[i][...] = dz.T @ acts[i]
        grads.biases[i][...] = dz.sum(axis=0)
        da = dz @ params.weights[i]
        if i > 0:
            dz = da * (preacts[i - 1] > 0.0)
    return grads, da


def grad_params(params: MlpParams, batch, loss_fn) -> tuple[float, MlpGrads]:
    """Loss value and parameter gradients for a batch.

    ``loss_fn`` maps the (B, out) output matrix to ``(scalar_loss,
    d_loss/d_output)``.
    """
    X, _ = _as_batch(params, batch)
    out, acts, preacts = _forward_cache(params, X)
    loss, d_out = loss_fn(out)
    if not np.isfinite(loss):
        raise NumericalError(f"non-finite loss value {loss}")
    grads, _ = _backward(params, acts, preacts, np.asarray(d_out, dtype=np.float64))
    return float(loss), grads


def _input_grad_chain(params: MlpParams, masks, batch_size: int):
    """Reverse chain of the scalar output w.r.t. each layer input.

    Returns (deltas, G): deltas[j] = d out / d z_{j+1} for layers
    j = 0..L-1 (deltas[-1] is all ones), and G = d out / d input rows.
    """
    L = params.n_layers
    deltas = [None] * L
    d = np.ones((batch_size, 1))
    deltas[L - 1] = d
    for i in range(L - 1, 0, -1):
        c = d @ params.weights[i]
        d = c * masks[i - 1]
        deltas[i - 1] = d
    G = d @ params.weights[0]
    return deltas, G


def grad_input(params: MlpParams, batch) -> np.ndarray:
    """Per-row gradient of a scalar-output network w.r.t. its inputs."""
    if params.layer_sizes[-1] != 1:
        raise ValueError("grad_input requires a scalar-output network")
    X, single = _as_batch(params, batch)
    _, _, preacts = _forward_cache(params, X)
    masks = [(z > 0.0).astype(np.float64) for z in preacts]
    _, G = _input_grad_chain(params, masks, X.shape[0])
    return G[0] if single else G


def grad_params_of_penalty(
    params: MlpParams, interpolates, lambda_gp: float
) -> tuple[float, MlpGrads]:
    """Value and parameter gradients of lambda * E[(||grad_u D(u)||_2 - 1)^2].

    The input gradient G depends on the parameters only through the
    weight matrices and the (locally constant) ReLU masks, so the second
    reverse pass touches weights only; bias gradients are exactly zero.
    Rows with a zero input-gradient norm contribute the subgradient 0.
    """
    if params.layer_sizes[-1] != 1:
        raise ValueError("gradient penalty requires a scalar-output critic")
    U, _ = _as_batch(params, interpolates)
    B = U.shape[0]
    _, _, preacts = _forward_cache(params, U)
    masks = [(z > 0.0).astype(np.float64) for z in preacts]
    deltas, G = _input_grad_chain(params, masks, B)

    norms = np.sqrt(np.einsum("ij,ij->i", G, G))
    value = lambda_gp * float(np.mean((norms - 1.0) ** 2))
    if not np.isfinite(value):
        raise NumericalError("non-finite gradient-penalty value")

    coef = np.zeros(B)
    nonzero = norms > 0.0
    coef[nonzero] = lambda_gp * (2.0 / B) * (norms[nonzero] - 1.0) / norms[nonzero]
    G_bar = coef[:, None] * G

    grads = MlpGrads.zeros_like(params)
    grads.weights[0][...] = deltas[0].T @ G_bar
    d_bar = G_bar @ params.weights[0].T
    for i in range(1, params.n_layers):
        c_bar = d_bar * masks[i - 1]
        grads.weights[i][...] = deltas[i].T @ c_bar
        d_bar = c_bar @ params.weights[i].T
    return value, grads


@dataclass
class AdamState:
    """Adam moment accumulators; step_count increments once per update."""

    m_weights: list[np.ndarray]
    v_weights: list[np.ndarray]
    m_biases: list[np.ndarray]
    v_biases: list[np.ndarray]
    step_count: int
    learning_rate: float
    beta1: float
    beta2: float
    epsilon: float


def init_adam(
    params: MlpParams,
    learning_rate: float = 1e-4,
    beta1: float = 0.0,
    beta2: float = 0.9,
    epsilon: float = 1e-8,
) -> AdamState:
    """Zero-initialized Adam state; defaults follow the WGAN-GP recipe."""
    return AdamState(
        [np.zeros_like(w) for w in params.weights],
        [np.zeros_like(w) for w in params.weights],
        [np.zeros_like(b) for b in params.biases],
        [np.zeros_like(b) for b in params.biases],
        0,
        learning_rate,
        beta1,
        beta2,
        epsilon,
    )


def adam_step(params: MlpParams, grads: MlpGrads, state: AdamState):
    """One bias-corrected Adam update, applied in place."""
    if not grads.all_finite():
        raise NumericalError("non-finite gradient passed to adam_step")
    state.step_count += 1
    t = state.step_count
    bc1 = 1.0 - state.beta1**t
    bc2 = 1.0 - state.beta2**t

    def update(param, grad, m, v):
        m *= state.beta1
        m += (1.0 - state.beta1) * grad
        v *= state.beta2
        v += (1.0 - state.beta2) * grad * grad
        param -= state.learning_rate * (m / bc1) / (np.sqrt(v / bc2) + state.epsilon)

    for w, g, m, v in zip(params.weights, grads.weights, state.m_weights, state.v_weights):
        update(w, g, m, v)
    for b, g, m, v in zip(params.biases, grads.biases, state.m_biases, state.v_biases):
        update(b, g, m, v)
    return params, state
