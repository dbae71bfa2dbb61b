"""Joint Gaussian moment estimation and Mahalanobis distances.

The covariance uses the 1/(n-1) sample estimator. Its inverse (the
precision matrix) is obtained through a Cholesky factorization of the
covariance, escalating a relative ridge when the matrix is singular.
Distances are evaluated by a triangular solve against the covariance
factor followed by a dot product, which is algebraically identical to
multiplying by the precision but numerically more stable.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular
from scipy.spatial.distance import cdist

from .dataset import JointDataset
from .errors import DataError, NumericalError

# Relative ridge escalation ladder, scaled by trace(cov)/p.
RIDGE_LADDER = (0.0, 1e-10, 1e-8, 1e-6, 1e-4)


@dataclass
class GaussianStats:
    """Sample mean/covariance of one dataset with a factorized precision.

    ``cholesky_of_covariance`` is the lower factor of (covariance +
    ridge_used * I); ``cholesky_of_precision`` the lower factor of its
    inverse. Immutable after fit.
    """

    mean: np.ndarray
    covariance: np.ndarray
    precision: np.ndarray
    cholesky_of_precision: np.ndarray
    cholesky_of_covariance: np.ndarray
    ridge_used: float

    @property
    def p(self) -> int:
        return self.mean.shape[0]

    def to_dict(self) -> dict:
        return {
            "mean": self.mean.tolist(),
            "covariance": self.covariance.tolist(),
            "ridge_used": self.ridge_used,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def _as_matrix(data) -> np.ndarray:
    if isinstance(data, JointDataset):
        return data.rows
    return np.asarray(data, dtype=np.float64)


def stats_from_covariance(mean, covariance, ridge_ladder=RIDGE_LADDER) -> GaussianStats:
    """Build GaussianStats from given moments (shared by fit and tests)."""
    mean = np.asarray(mean, dtype=np.float64)
    cov = np.asarray(covariance, dtype=np.float64)
    cov = (cov + cov.T) / 2.0
    p = cov.shape[0]
    scale = float(np.trace(cov)) / p
    eye = np.eye(p)
    for coef in ridge_ladder:
        ridge = coef * scale
        regularized = cov + ridge * eye
        try:
            chol_cov = np.linalg.cholesky(regularized)
        except np.linalg.LinAlgError:
            continue
        inv_factor = solve_triangular(chol_cov, eye, lower=True)
        precision = inv_factor.T @ inv_factor
        precision = (precision + precision.T) / 2.0
        # A numerically singular matrix can pass Cholesky with a junk
        # pivot; only accept a rung whose inverse actually inverts.
        if np.max(np.abs(precision @ regularized - eye)) > 1e-8:
            continue
        chol_prec = np.linalg.cholesky(precision)
        return GaussianStats(mean, cov, precision, chol_prec, chol_cov, ridge)
    raise NumericalError(
        "covariance is not positive definite even at the maximum ridge"
    )


def fit_gaussian(data) -> GaussianStats:
    """Estimate the joint mean and sample covariance of a dataset.

    Requires n >= p + 2 rows; a singular covariance is handled by the
    smallest ridge from RIDGE_LADDER that makes the factorization succeed.
    """
    X = _as_matrix(data)
    n, p = X.shape
    if n < p + 2:
        raise DataError(
            f"covariance estimation needs at least p+2 = {p + 2} rows, got {n}"
        )
    mean = X.mean(axis=0)
    centered = X - mean
    cov = centered.T @ centered / (n - 1)
    return stats_from_covariance(mean, cov)


def _whiten_differences(stats: GaussianStats, deltas: np.ndarray) -> np.ndarray:
    # Solve L t = delta for the covariance factor L; then d^2 = t . t.
    return solve_triangular(stats.cholesky_of_covariance, deltas.T, lower=True).T


def squared_distance_from_mean(stats: GaussianStats, z) -> np.ndarray | float:
    """Squared Mahalanobis distance of one vector (or each row) to the mean."""
    z = np.asarray(z, dtype=np.float64)
    single = z.ndim == 1
    Z = np.atleast_2d(z)
    if Z.shape[1] != stats.p:
        raise ValueError(f"dimension mismatch: point has {Z.shape[1]}, stats has {stats.p}")
    t = _whiten_differences(stats, Z - stats.mean)
    d2 = np.einsum("ij,ij->i", t, t)
    return float(d2[0]) if single else d2


def squared_distances_from_mean(stats: GaussianStats, rows) -> np.ndarray:
    """Vector of squared distances for every row of a matrix or dataset."""
    return np.atleast_1d(squared_distance_from_mean(stats, _as_matrix(rows)))


def pairwise_distance(stats: GaussianStats, a, b) -> float:
    """Mahalanobis distance between two points under the fitted precision."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.shape != (stats.p,):
        raise ValueError(
            f"dimension mismatch: got {a.shape} and {b.shape}, stats has p={stats.p}"
        )
    t = _whiten_differences(stats, (a - b)[None, :])
    return float(np.sqrt(np.sum(t * t)))


def cross_distances(stats: GaussianStats, A, B) -> np.ndarray:
    """(len(A), len(B)) matrix of pairwise Mahalanobis distances."""
    A = np.atleast_2d(np.asarray(A, dtype=np.float64))
    B = np.atleast_2d(np.asarray(B, dtype=np.float64))
    if A.shape[1] != stats.p or B.shape[1] != stats.p:
        raise ValueError("dimension mismatch in cross_distances")
    return cdist(_whiten_differences(stats, A), _whiten_differences(stats, B))
