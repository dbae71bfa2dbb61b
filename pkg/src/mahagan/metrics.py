"""Evaluation metrics for imbalanced regression.

Implements a boxplot-based relevance function phi: targets -> [0, 1]
(1 at the distribution's adjacent extremes, 0 at the median, monotone
cubic Hermite in between), RMSE, SERA (squared error weighted by
relevance, the exact value of the integral over relevance cutoffs),
utility-based regression precision/recall/F1, and a Wilcoxon
signed-rank test with an exact small-sample path.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata

from .errors import DataError

EXACT_WILCOXON_MAX_N = 15


# ---------------------------------------------------------------------------
# Relevance function
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RelevanceFunction:
    """Piecewise cubic Hermite relevance curve with constant extrapolation.

    ``control_points`` are (y, phi, slope) triples sorted by y; values are
    clamped to [0, 1]. Construct manually for custom shapes or via
    :func:`build_relevance` for the boxplot-based default.
    """

    control_points: tuple[tuple[float, float, float], ...]
    mode: str = "manual"
    scale_hint: float | None = None

    def __post_init__(self):
        pts = tuple(sorted((float(y), float(p), float(s)) for y, p, s in self.control_points))
        if len(pts) < 2:
            raise DataError("relevance needs at least 2 control points")
        ys = [y for y, _, _ in pts]
        if len(set(ys)) != len(ys):
            raise DataError("relevance control points must have distinct y values")
        object.__setattr__(self, "control_points", pts)

    def __call__(self, y) -> np.ndarray | float:
        y = np.asarray(y, dtype=np.float64)
        single = y.ndim == 0
        yv = np.atleast_1d(y)
        xs = np.array([p[0] for p in self.control_points])
        vals = np.array([p[1] for p in self.control_points])
        slopes = np.array([p[2] for p in self.control_points])

        idx = np.clip(np.searchsorted(xs, yv, side="right") - 1, 0, len(xs) - 2)
        x0, x1 = xs[idx], xs[idx + 1]
        h = x1 - x0
        t = np.clip((yv - x0) / h, 0.0, 1.0)
        h00 = 2 * t**3 - 3 * t**2 + 1
        h10 = t**3 - 2 * t**2 + t
        h01 = -2 * t**3 + 3 * t**2
        h11 = t**3 - t**2
        out = h00 * vals[idx] + h10 * h * slopes[idx] + h01 * vals[idx + 1] + h11 * h * slopes[idx + 1]
        out = np.where(yv <= xs[0], vals[0], out)
        out = np.where(yv >= xs[-1], vals[-1], out)
        out = np.clip(out, 0.0, 1.0)
        return float(out[0]) if single else out

    def sample_csv(self, path, n: int = 512) -> None:
        """Export (y, phi(y)) pairs over the control range for plotting."""
        xs = [p[0] for p in self.control_points]
        span = xs[-1] - xs[0]
        grid = np.linspace(xs[0] - 0.05 * span, xs[-1] + 0.05 * span, n)
        values = self(grid)
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("y,relevance\n")
            for g, v in zip(grid, values):
                fh.write(f"{g!r},{v!r}\n")


def constant_relevance(value: float = 1.0) -> RelevanceFunction:
    """phi identically equal to ``value`` (useful as a degenerate case)."""
    return RelevanceFunction(((0.0, value, 0.0), (1.0, value, 0.0)), mode="constant")


def build_relevance(targets, mode: str = "both_extremes") -> RelevanceFunction:
    """Boxplot-based relevance: 0 at the median, 1 at the adjacent extremes.

    The adjacent extremes are the most extreme observations within the
    1.5*IQR fences (the boxplot whiskers); values beyond them keep
    relevance 1 through constant extrapolation.
    """
    y = np.asarray(targets, dtype=np.float64).ravel()
    if np.unique(y).size < 5:
        raise DataError("relevance construction needs at least 5 distinct target values")
    q1, med, q3 = np.quantile(y, [0.25, 0.5, 0.75])
    iqr = q3 - q1
    if iqr == 0.0:
        raise DataError(
            "zero interquartile range; supply manual relevance control points"
        )
    high_adjacent = float(y[y <= q3 + 1.5 * iqr].max())
    low_adjacent = float(y[y >= q1 - 1.5 * iqr].min())

    if mode == "both_extremes":
        points = [(low_adjacent, 1.0, 0.0), (med, 0.0, 0.0), (high_adjacent, 1.0, 0.0)]
    elif mode == "high_only":
        points = [(med, 0.0, 0.0), (high_adjacent, 1.0, 0.0)]
    elif mode == "low_only":
        points = [(low_adjacent, 1.0, 0.0), (med, 0.0, 0.0)]
    else:
        raise DataError(f"unknown relevance mode {mode!r}")
    ys = [p[0] for p in points]
    if len(set(ys)) != len(ys):
        raise DataError(
            "degenerate boxplot statistics; supply manual relevance control points"
        )
    return RelevanceFunction(tuple(points), mode=mode, scale_hint=float(iqr) / 2.0)


# ---------------------------------------------------------------------------
# Error metrics
# ---------------------------------------------------------------------------

def _paired(y_true, y_pred) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(y_true, dtype=np.float64).ravel()
    b = np.asarray(y_pred, dtype=np.float64).ravel()
    if a.shape != b.shape:
        raise DataError(f"length mismatch: {a.shape[0]} true vs {b.shape[0]} predicted")
    if a.size < 1:
        raise DataError("metrics need at least one point")
    return a, b


def rmse(y_true, y_pred) -> float:
    """Root mean squared error."""
    a, b = _paired(y_true, y_pred)
    return float(np.sqrt(np.mean((a - b) ** 2)))


def sera(y_true, y_pred, relevance: RelevanceFunction) -> float:
    """Area of the squared error over relevance cutoffs.

    Each point contributes its squared error for every cutoff t up to
    phi(y_i), so the integral collapses to sum(phi(y_i) * e_i^2) exactly.
    """
    a, b = _paired(y_true, y_pred)
    return float(np.sum(relevance(a) * (b - a) ** 2))


def sera_trapezoid(y_true, y_pred, relevance: RelevanceFunction, grid_size: int = 1001) -> float:
    """Trapezoid cross-check of :func:`sera` on a uniform cutoff grid."""
    a, b = _paired(y_true, y_pred)
    phi = relevance(a)
    errors = (b - a) ** 2
    grid = np.linspace(0.0, 1.0, grid_size)
    ser_t = np.array([errors[phi >= t].sum() for t in grid])
    return float(np.trapezoid(ser_t, grid))


# ---------------------------------------------------------------------------
# Utility-based precision / recall
# ---------------------------------------------------------------------------

@dataclass
class UtilityConfig:
    """Relevance threshold and bounded-loss scale for utility scoring."""

    relevance: RelevanceFunction
    threshold: float = 0.8
    error_scale: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.threshold < 1.0:
            raise DataError("relevance threshold must lie in (0, 1)")
        if self.error_scale <= 0.0:
            raise DataError("error_scale must be positive")

    @staticmethod
    def from_relevance(
        relevance: RelevanceFunction, threshold: float = 0.8
    ) -> "UtilityConfig":
        return UtilityConfig(relevance, threshold, default_error_scale(relevance, threshold))


def _solve_relevance_level(relevance, lo, hi, level) -> float | None:
    """y in [lo, hi] with phi(y) == level on a monotone branch, by bisection."""
    f_lo = relevance(lo) - level
    f_hi = relevance(hi) - level
    if f_lo == 0.0:
        return lo
    if f_hi == 0.0:
        return hi
    if (f_lo > 0) == (f_hi > 0):
        return None
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        f_mid = relevance(mid) - level
        if f_mid == 0.0:
            return mid
        if (f_mid > 0) == (f_lo > 0):
            lo, f_lo = mid, f_mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def default_error_scale(relevance: RelevanceFunction, threshold: float = 0.8) -> float:
    """Distance from the target value at relevance ``threshold`` to the
    phi=1 control point of that branch; IQR/2 fallback when degenerate."""
    pts = relevance.control_points
    span = pts[-1][0] - pts[0][0]
    fallback = relevance.scale_hint if relevance.scale_hint else span / 2.0
    fallback = max(fallback, np.finfo(float).tiny)
    # The smallest-relevance control point separates the two branches.
    inner = min(range(len(pts)), key=lambda i: pts[i][1])
    if pts[-1][1] >= 1.0:
        y_star = _solve_relevance_level(relevance, pts[inner][0], pts[-1][0], threshold)
        anchor = pts[-1][0]
    elif pts[0][1] >= 1.0:
        y_star = _solve_relevance_level(relevance, pts[0][0], pts[inner][0], threshold)
        anchor = pts[0][0]
    else:
        return fallback
    if y_star is None or abs(anchor - y_star) == 0.0:
        return fallback
    return abs(anchor - y_star)


def utility(y_pred: float, y_true: float, config: UtilityConfig) -> float:
    """Bounded usefulness of one prediction, in [-1, 1].

    U = (1 - G) * phi(y_true) - G * max(phi(y_true), phi(y_pred)) with
    bounded loss G = min(1, |y_pred - y_true| / error_scale): a perfect
    prediction earns phi(y_true), a far-off one costs up to the larger
    relevance involved.
    """
    phi_true = float(config.relevance(float(y_true)))
    phi_pred = float(config.relevance(float(y_pred)))
    gamma = min(1.0, abs(float(y_pred) - float(y_true)) / config.error_scale)
    return (1.0 - gamma) * phi_true - gamma * max(phi_true, phi_pred)


@dataclass
class FPhiResult:
    """Utility-based precision/recall fragment of a metric report."""

    precision_phi: float | None
    recall_phi: float | None
    f_phi1: float
    n_true_above: int
    n_pred_above: int
    undefined: bool

    def to_dict(self) -> dict:
        return {
            "precision_phi": self.precision_phi,
            "recall_phi": self.recall_phi,
            "f_phi1": self.f_phi1,
            "n_true_above": self.n_true_above,
            "n_pred_above": self.n_pred_above,
            "undefined": self.undefined,
        }


def f_phi(y_true, y_pred, config: UtilityConfig) -> FPhiResult:
    """Utility-based regression precision, recall, and their harmonic mean.

    Precision sums over points whose *predicted* relevance exceeds the
    threshold, recall over points whose *true* relevance does. Each
    numerator summand 1+U is capped at its denominator summand so both
    quotients stay in [0, 1] (the cap only ever binds for precision).
    An empty denominator leaves that metric undefined and F is reported
    as 0 with the ``undefined`` flag raised.
    """
    a, b = _paired(y_true, y_pred)
    phi_true = np.atleast_1d(config.relevance(a))
    phi_pred = np.atleast_1d(config.relevance(b))
    gamma = np.minimum(1.0, np.abs(b - a) / config.error_scale)
    u = (1.0 - gamma) * phi_true - gamma * np.maximum(phi_true, phi_pred)

    pred_above = phi_pred > config.threshold
    true_above = phi_true > config.threshold

    def ratio(mask, phi_den):
        if not mask.any():
            return None
        num = np.minimum(1.0 + u[mask], 1.0 + phi_den[mask]).sum()
        den = (1.0 + phi_den[mask]).sum()
        return float(num / den)

    precision = ratio(pred_above, phi_pred)
    recall = ratio(true_above, phi_true)
    undefined = precision is None or recall is None
    if undefined or (precision + recall) == 0.0:
        f1 = 0.0
    else:
        f1 = 2.0 * precision * recall / (precision + recall)
    return FPhiResult(
        precision, recall, f1, int(true_above.sum()), int(pred_above.sum()), undefined
    )


@dataclass
class MetricReport:
    """All per-evaluation metric values."""

    rmse: float
    sera: float
    precision_phi: float | None
    recall_phi: float | None
    f_phi1: float
    n_true_above: int
    n_pred_above: int
    f_undefined: bool

    def to_dict(self) -> dict:
        return {
            "rmse": self.rmse,
            "sera": self.sera,
            "precision_phi": self.precision_phi,
            "recall_phi": self.recall_phi,
            "f_phi1": self.f_phi1,
            "n_true_above": self.n_true_above,
            "n_pred_above": self.n_pred_above,
            "f_undefined": self.f_undefined,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def compute_report(y_true, y_pred, config: UtilityConfig) -> MetricReport:
    """RMSE + SERA + utility-based F in one record."""
    fp = f_phi(y_true, y_pred, config)
    return MetricReport(
        rmse=rmse(y_true, y_pred),
        sera=sera(y_true, y_pred, config.relevance),
        precision_phi=fp.precision_phi,
        recall_phi=fp.recall_phi,
        f_phi1=fp.f_phi1,
        n_true_above=fp.n_true_above,
        n_pred_above=fp.n_pred_above,
        f_undefined=fp.undefined,
    )


# ---------------------------------------------------------------------------
# Wilcoxon signed-rank test
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class WilcoxonResult:
    """Two-sided signed-rank outcome plus the majority-of-splits winner."""

    statistic: float
    p_value: float
    winner: str | None
    n_effective: int
    method: str
    no_contest: bool = False


def _exact_two_sided_p(ranks: np.ndarray, w_observed: float) -> float:
    n = ranks.shape[0]
    signs = (np.arange(2**n)[:, None] >> np.arange(n)) & 1
    w_plus = signs @ ranks
    total = ranks.sum()
    w_min = np.minimum(w_plus, total - w_plus)
    return float(np.count_nonzero(w_min <= w_observed + 1e-9) / 2**n)


def _normal_cdf(z: float) -> float:
    return 0.5 * math.erfc(-z / math.sqrt(2.0))


def wilcoxon_signed_rank(a, b, greater_is_better: bool = False) -> WilcoxonResult:
    """Paired two-sided Wilcoxon signed-rank test of a vs b.

    Zero differences are dropped; tied absolute differences receive
    average ranks. The p-value comes from exact sign enumeration for up
    to EXACT_WILCOXON_MAX_N effective pairs, otherwise from the normal
    approximation with tie and continuity corrections. The winner is the
    side that is better on a strict majority of pairs (direction set by
    ``greater_is_better``); all-zero differences yield a no-contest.
    """
    x, y = _paired(a, b)
    if x.size < 5:
        raise DataError("wilcoxon_signed_rank needs at least 5 pairs")
    diffs = y - x
    nonzero = diffs != 0.0
    n_eff = int(nonzero.sum())

    if greater_is_better:
        a_wins = int(np.count_nonzero(x > y))
        b_wins = int(np.count_nonzero(y > x))
    else:
        a_wins = int(np.count_nonzero(x < y))
        b_wins = int(np.count_nonzero(y < x))
    winner = "a" if a_wins > b_wins else "b" if b_wins > a_wins else None

    if n_eff == 0:
        return WilcoxonResult(0.0, 1.0, None, 0, "no_contest", no_contest=True)

    d = diffs[nonzero]
    ranks = rankdata(np.abs(d))
    w_plus = float(ranks[d > 0].sum())
    w_minus = float(ranks[d < 0].sum())
    statistic = min(w_plus, w_minus)

    if n_eff <= EXACT_WILCOXON_MAX_N:
        p = _exact_two_sided_p(ranks, statistic)
        method = "exact"
    else:
        mean_w = n_eff * (n_eff + 1) / 4.0
        _, tie_counts = np.unique(ranks, return_counts=True)
        tie_term = float(((tie_counts**3 - tie_counts) / 48.0).sum())
        var_w = n_eff * (n_eff + 1) * (2 * n_eff + 1) / 24.0 - tie_term
        if var_w <= 0.0:
            p = 1.0
        else:
            z = (statistic - mean_w + 0.5) / math.sqrt(var_w)
            p = min(1.0, 2.0 * _normal_cdf(z))
        method = "normal"
    return WilcoxonResult(statistic, p, winner, n_eff, method)
