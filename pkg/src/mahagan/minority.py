"""Minority detection: two-component 1-D Gaussian mixture on squared
Mahalanobis distances, thresholded where the weighted component
densities intersect.

The mixture is fitted by EM with a deterministic median-split
initialization. Components are relabeled so component 1 has the lower
mean (the majority bulk) and component 2 the higher mean; points whose
squared distance is at least the intersection threshold are flagged
minority. When EM degenerates or the intersection has no root between
the component means, the threshold falls back to the empirical 0.95
quantile of the distances.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .dataset import JointDataset
from .errors import DataError, NumericalError
from .mahalanobis import GaussianStats, fit_gaussian, squared_distances_from_mean

EM_MAX_ITER = 500
EM_TOL = 1e-8
VAR_FLOOR_FRACTION = 1e-12
MIN_COMPONENT_WEIGHT = 1e-3
FALLBACK_QUANTILE = 0.95


@dataclass
class MixtureSplit:
    """Fitted two-component mixture plus the derived decision threshold.

    ``weight_minority`` is the mixture weight of the higher-mean
    component (component 2), which the decision rule treats as minority.
    ``threshold`` and ``minority_mask`` are populated by
    :func:`apply_threshold` / :func:`detect_minority`.
    """

    weight_minority: float
    mu1: float
    var1: float
    mu2: float
    var2: float
    log_likelihood: float
    n_iterations: int
    threshold: float | None = None
    minority_mask: np.ndarray | None = None
    fallback_used: bool = False
    degenerate: bool = False
    log_likelihood_history: tuple[float, ...] = field(default=(), repr=False)

    @property
    def weight_majority(self) -> float:
        return 1.0 - self.weight_minority

    def to_dict(self) -> dict:
        return {
            "weight_minority": self.weight_minority,
            "mu1": self.mu1,
            "var1": self.var1,
            "mu2": self.mu2,
            "var2": self.var2,
            "threshold": self.threshold,
            "log_likelihood": self.log_likelihood,
            "n_iterations": self.n_iterations,
            "fallback_used": self.fallback_used,
            "minority_count": int(self.minority_mask.sum())
            if self.minority_mask is not None
            else None,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def _log_normal_pdf(x, mu, var):
    return -0.5 * (np.log(2.0 * np.pi * var) + (x - mu) ** 2 / var)


def fit_em(distances, max_iter: int = EM_MAX_ITER, tol: float = EM_TOL) -> MixtureSplit:
    """Fit the two-component mixture to squared distances via EM.

    Deterministic: both components start from the moments of the sorted
    lower/upper halves with equal weights. Returns a MixtureSplit without
    threshold/mask; ``degenerate`` is set when a component's variance hits
    the floor, a weight drops below MIN_COMPONENT_WEIGHT, or the
    log-likelihood fails to be non-decreasing.
    """
    d = np.asarray(distances, dtype=np.float64).ravel()
    n = d.shape[0]
    if n < 4:
        raise DataError(f"EM needs at least 4 distances, got {n}")
    total_var = float(d.var())
    if total_var == 0.0:
        raise DataError("all distances are equal; mixture fit is undefined")
    var_floor = VAR_FLOOR_FRACTION * total_var

    d_sorted = np.sort(d)
    half = n // 2
    halves = (d_sorted[:half], d_sorted[half:])
    mu = np.array([h.mean() for h in halves])
    var = np.array([max(h.var(), var_floor, 1e-300) for h in halves])
    w = np.array([0.5, 0.5])

    degenerate = False
    history: list[float] = []
    prev_ll = -np.inf
    iterations = 0
    for iterations in range(1, max_iter + 1):
        # E-step in log space.
        log_joint = np.log(w)[None, :] + _log_normal_pdf(d[:, None], mu[None, :], var[None, :])
        log_norm = np.logaddexp(log_joint[:, 0], log_joint[:, 1])
        ll = float(log_norm.sum())
        resp = np.exp(log_joint - log_norm[:, None])

        if history and ll < history[-1] - 1e-10 * max(1.0, abs(history[-1])):
            degenerate = True
        history.append(ll)

        # M-step with a variance floor.
        counts = resp.sum(axis=0)
        counts = np.maximum(counts, 1e-300)
        w = counts / n
        mu = (resp * d[:, None]).sum(axis=0) / counts
        var = (resp * (d[:, None] - mu[None, :]) ** 2).sum(axis=0) / counts
        if np.any(var < var_floor):
            degenerate = True
        var = np.maximum(var, max(var_floor, 1e-300))

        if np.isfinite(prev_ll) and abs(ll - prev_ll) < tol * max(abs(prev_ll), 1e-300):
            break
        prev_ll = ll

    if np.any(w < MIN_COMPONENT_WEIGHT):
        degenerate = True

    lo, hi = (0, 1) if mu[0] <= mu[1] else (1, 0)
    return MixtureSplit(
        weight_minority=float(w[hi]),
        mu1=float(mu[lo]),
        var1=float(var[lo]),
        mu2=float(mu[hi]),
        var2=float(var[hi]),
        log_likelihood=history[-1],
        n_iterations=iterations,
        degenerate=degenerate,
        log_likelihood_history=tuple(history),
    )


def weighted_density_gap(fit: MixtureSplit, t) -> np.ndarray | float:
    """w1*N(t|mu1,var1) - w2*N(t|mu2,var2); the threshold is its root."""
    w1 = fit.weight_majority
    w2 = fit.weight_minority
    return w1 * np.exp(_log_normal_pdf(t, fit.mu1, fit.var1)) - w2 * np.exp(
        _log_normal_pdf(t, fit.mu2, fit.var2)
    )


def _log_density_gap(fit: MixtureSplit, t: float) -> float:
    # log(w1 N1) - log(w2 N2); same sign as weighted_density_gap, better scaled.
    w1, w2 = fit.weight_majority, fit.weight_minority
    l1 = math.log(w1) + float(_log_normal_pdf(t, fit.mu1, fit.var1))
    l2 = math.log(w2) + float(_log_normal_pdf(t, fit.mu2, fit.var2))
    return l1 - l2


def _refine_by_bisection(fit: MixtureSplit, lo: float, hi: float) -> float:
    flo = _log_density_gap(fit, lo)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        fmid = _log_density_gap(fit, mid)
        if fmid == 0.0:
            return mid
        if (fmid > 0) == (flo > 0):
            lo, flo = mid, fmid
        else:
            hi = mid
        if hi - lo <= 1e-15 * max(abs(lo), abs(hi), 1.0):
            break
    return 0.5 * (lo + hi)


def solve_threshold(fit: MixtureSplit) -> float:
    """Root of the weighted-density intersection inside (mu1, mu2).

    Solves the quadratic obtained by equating the log weighted densities;
    the equal-variance case degenerates to a linear equation. Raises
    NumericalError when no root lies strictly between the component means.
    """
    mu1, var1 = fit.mu1, fit.var1
    mu2, var2 = fit.mu2, fit.var2
    w1, w2 = fit.weight_majority, fit.weight_minority
    if not (0.0 < fit.weight_minority < 1.0) or var1 <= 0 or var2 <= 0:
        raise NumericalError("invalid mixture parameters for threshold solving")
    if not mu1 < mu2:
        raise NumericalError("component means coincide; no separating threshold")

    s1, s2 = math.sqrt(var1), math.sqrt(var2)
    a = var1 - var2
    b = -2.0 * var1 * mu2 + 2.0 * var2 * mu1
    c = var1 * mu2**2 - var2 * mu1**2 - 2.0 * var1 * var2 * math.log((w2 * s1) / (w1 * s2))

    if abs(a) <= 1e-14 * max(var1, var2):
        roots = [-c / b] if b != 0.0 else []
    else:
        disc = b * b - 4.0 * a * c
        if disc < 0.0:
            roots = []
        else:
            # Numerically stable quadratic formula.
            q = -0.5 * (b + math.copysign(math.sqrt(disc), b if b != 0 else 1.0))
            roots = [q / a]
            if q != 0.0:
                roots.append(c / q)

    inside = sorted(r for r in roots if mu1 < r < mu2)
    if not inside:
        raise NumericalError("no density-intersection root between the component means")
    if len(inside) == 1:
        t = inside[0]
    else:
        # Keep the crossing where the majority density hands over to the
        # minority density (gap goes + to - as t grows).
        h = 1e-9 * (mu2 - mu1)
        t = None
        for r in inside:
            if _log_density_gap(fit, r - h) > 0 > _log_density_gap(fit, r + h):
                t = r
                break
        if t is None:
            t = inside[-1]

    # Polish so the two weighted densities agree to ~1e-8 relative.
    gap = _log_density_gap(fit, t)
    if abs(gap) > 1e-10:
        h = max(1e-9 * (mu2 - mu1), 1e-300)
        lo, hi = max(t - h, mu1), min(t + h, mu2)
        while _log_density_gap(fit, lo) * _log_density_gap(fit, hi) > 0:
            h *= 4.0
            lo, hi = max(t - h, mu1), min(t + h, mu2)
            if lo == mu1 and hi == mu2:
                break
        t = _refine_by_bisection(fit, lo, hi)
    return float(t)


def apply_threshold(fit: MixtureSplit, distances) -> MixtureSplit:
    """Fill in the threshold and minority mask, falling back to the 0.95
    distance quantile when the fit is degenerate or the root is missing."""
    d = np.asarray(distances, dtype=np.float64).ravel()
    threshold = None
    fallback = False
    if not fit.degenerate:
        try:
            threshold = solve_threshold(fit)
        except NumericalError:
            threshold = None
    if threshold is None:
        threshold = float(np.quantile(d, FALLBACK_QUANTILE))
        fallback = True
    fit.threshold = threshold
    fit.fallback_used = fallback
    fit.minority_mask = d >= threshold
    return fit


def detect_minority(
    data: JointDataset | np.ndarray,
    max_iter: int = EM_MAX_ITER,
    tol: float = EM_TOL,
) -> tuple[MixtureSplit, GaussianStats]:
    """Stage-1 pipeline: Gaussian fit, squared distances, EM, threshold.

    Raises DataError when fewer than 2 points end up flagged minority
    (too few to train the generator stage); in that case re-run with a
    manual quantile threshold on the returned distances instead.
    """
    stats = fit_gaussian(data)
    d2 = squared_distances_from_mean(stats, data)
    fit = fit_em(d2, max_iter=max_iter, tol=tol)
    fit = apply_threshold(fit, d2)
    n_minority = int(fit.minority_mask.sum())
    if n_minority < 2:
        raise DataError(
            f"only {n_minority} minority point(s) at threshold {fit.threshold:.6g}; "
            "generator training needs >= 2 - consider an explicit quantile threshold"
        )
    return fit, stats
