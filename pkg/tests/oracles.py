"""Shared independent oracles for the test-suite: central finite
differences over network parameters/inputs, and instance generators that
resample away from ReLU kinks so the differences are well defined."""

import numpy as np

from mahagan import neuralnet as nn

FD_STEP = 1e-5
KINK_MARGIN = 1e-3


def rel_error(analytic: np.ndarray, reference: np.ndarray) -> float:
    analytic = np.asarray(analytic, dtype=np.float64)
    reference = np.asarray(reference, dtype=np.float64)
    denom = max(np.max(np.abs(reference)), 1e-8)
    return float(np.max(np.abs(analytic - reference)) / denom)


def preactivations_clear_of_kinks(params, X, margin=KINK_MARGIN) -> bool:
    _, _, preacts = nn._forward_cache(params, np.atleast_2d(X))
    return all(np.min(np.abs(z)) > margin for z in preacts)


def random_instance(rng, sizes, batch, margin=KINK_MARGIN, scale=1.0):
    """(params, X) with every hidden pre-activation at least ``margin``
    away from zero, so finite differences never cross a kink."""
    for _ in range(200):
        params = nn.init_mlp(sizes, rng)
        for w in params.weights:
            w *= scale
        for b in params.biases:
            b[...] = rng.standard_normal(b.shape) * 0.1
        X = rng.standard_normal((batch, sizes[0]))
        if preactivations_clear_of_kinks(params, X, margin):
            return params, X
    raise RuntimeError("could not sample an instance away from ReLU kinks")


def fd_param_grads(params, value_fn, h=FD_STEP) -> nn.MlpGrads:
    """Central finite differences of scalar value_fn(params) w.r.t. every
    weight and bias entry."""
    grads = nn.MlpGrads.zeros_like(params)
    for target, out in ((params.weights, grads.weights), (params.biases, grads.biases)):
        for arr, g in zip(target, out):
            flat = arr.ravel()
            gflat = g.ravel()
            for i in range(flat.size):
                original = flat[i]
                flat[i] = original + h
                upper = value_fn(params)
                flat[i] = original - h
                lower = value_fn(params)
                flat[i] = original
                gflat[i] = (upper - lower) / (2.0 * h)
    return grads


def fd_input_grads(params, X, h=FD_STEP) -> np.ndarray:
    """Central finite differences of the scalar network output w.r.t. each
    input coordinate, one row at a time."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64)).copy()
    out = np.zeros_like(X)
    for r in range(X.shape[0]):
        for c in range(X.shape[1]):
            original = X[r, c]
            X[r, c] = original + h
            upper = float(nn.forward(params, X[r])[0])
            X[r, c] = original - h
            lower = float(nn.forward(params, X[r])[0])
            X[r, c] = original
            out[r, c] = (upper - lower) / (2.0 * h)
    return out
