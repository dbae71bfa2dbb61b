import numpy as np
import pytest
from scipy.stats import chi2, kstest

from mahagan import (
    DataError,
    fit_gaussian,
    pairwise_distance,
    squared_distance_from_mean,
    squared_distances_from_mean,
)
from mahagan.mahalanobis import stats_from_covariance


def test_hand_computed_moments():
    rows = np.array([[0.0, 0.0], [2.0, 0.0], [0.0, 2.0], [2.0, 2.0]])
    stats = fit_gaussian(rows)
    np.testing.assert_allclose(stats.mean, [1.0, 1.0])
    np.testing.assert_allclose(stats.covariance, [[4.0 / 3.0, 0.0], [0.0, 4.0 / 3.0]])
    assert stats.ridge_used == 0.0


def test_duplicated_column_needs_ridge():
    rng = np.random.default_rng(0)
    x = rng.standard_normal((40, 1))
    rows = np.hstack([x, x, rng.standard_normal((40, 1))])
    stats = fit_gaussian(rows)
    assert stats.ridge_used > 0.0


def test_too_few_rows():
    rng = np.random.default_rng(1)
    with pytest.raises(DataError):
        fit_gaussian(rng.standard_normal((4, 3)))  # n = p + 1


def test_stats_invariants():
    rng = np.random.default_rng(2)
    rows = rng.standard_normal((60, 5)) @ rng.standard_normal((5, 5)) + 3.0
    stats = fit_gaussian(rows)
    p = stats.p
    np.testing.assert_allclose(stats.covariance, stats.covariance.T, atol=1e-12)
    np.testing.assert_allclose(stats.precision, stats.precision.T, atol=1e-10)
    product = stats.precision @ (stats.covariance + stats.ridge_used * np.eye(p))
    assert np.max(np.abs(product - np.eye(p))) < 1e-8
    lp = stats.cholesky_of_precision
    assert np.max(np.abs(lp @ lp.T - stats.precision)) < 1e-8


class TestDistanceFromMean:
    def test_zero_at_mean(self):
        stats = fit_gaussian(np.random.default_rng(3).standard_normal((30, 4)))
        assert squared_distance_from_mean(stats, stats.mean) == pytest.approx(0.0, abs=1e-18)

    def test_euclidean_reduction(self):
        stats = stats_from_covariance(np.zeros(2), np.eye(2))
        assert squared_distance_from_mean(stats, [3.0, 4.0]) == pytest.approx(25.0)

    def test_diagonal_case(self):
        stats = stats_from_covariance(np.zeros(2), np.diag([4.0, 1.0]))
        assert squared_distance_from_mean(stats, [2.0, 1.0]) == pytest.approx(2.0)

    def test_dimension_mismatch(self):
        stats = stats_from_covariance(np.zeros(2), np.eye(2))
        with pytest.raises(ValueError):
            squared_distance_from_mean(stats, [1.0, 2.0, 3.0])

    def test_factor_matches_explicit_quadratic_form(self):
        rng = np.random.default_rng(4)
        rows = rng.standard_normal((80, 6)) @ rng.standard_normal((6, 6))
        stats = fit_gaussian(rows)
        for z in rng.standard_normal((20, 6)):
            direct = (z - stats.mean) @ stats.precision @ (z - stats.mean)
            viafactor = squared_distance_from_mean(stats, z)
            np.testing.assert_allclose(viafactor, direct, rtol=1e-9)


class TestPairwise:
    def test_identity_of_indiscernibles(self):
        stats = stats_from_covariance(np.zeros(3), np.eye(3))
        a = np.array([1.0, 2.0, 3.0])
        assert pairwise_distance(stats, a, a) == 0.0

    def test_euclidean_reduction(self):
        stats = stats_from_covariance(np.zeros(2), np.eye(2))
        assert pairwise_distance(stats, [0.0, 0.0], [0.0, 5.0]) == pytest.approx(5.0)

    def test_metric_properties_on_random_triples(self):
        rng = np.random.default_rng(5)
        A = rng.standard_normal((6, 6))
        stats = stats_from_covariance(np.zeros(6), A @ A.T + 0.5 * np.eye(6))
        for _ in range(100):
            a, b, c = rng.standard_normal((3, 6)) * 3
            dab = pairwise_distance(stats, a, b)
            dba = pairwise_distance(stats, b, a)
            dac = pairwise_distance(stats, a, c)
            dbc = pairwise_distance(stats, b, c)
            assert dab == pytest.approx(dba, rel=1e-12)
            assert dac <= dab + dbc + 1e-12
            assert dab >= 0.0


def _random_affine(rng, p, max_cond=50.0):
    while True:
        A = rng.standard_normal((p, p))
        if np.linalg.cond(A) < max_cond:
            return A, rng.standard_normal(p) * 2.0


def test_affine_invariance():
    rng = np.random.default_rng(6)
    rows = rng.standard_normal((200, 6)) * np.array([1, 2, 3, 1, 5, 2.0]) + 1.0
    stats = fit_gaussian(rows)
    base = squared_distances_from_mean(stats, rows)
    for _ in range(20):
        A, c = _random_affine(rng, 6)
        transformed = rows @ A.T + c
        t_stats = fit_gaussian(transformed)
        assert t_stats.ridge_used == 0.0
        moved = squared_distances_from_mean(t_stats, transformed)
        np.testing.assert_allclose(moved, base, rtol=1e-6)


@pytest.mark.parametrize("p", [3, 8])
def test_chi_square_law(p):
    rng = np.random.default_rng(100 + p)
    A = rng.standard_normal((p, p))
    cov = A @ A.T + 0.1 * np.eye(p)
    rows = rng.multivariate_normal(np.arange(p, dtype=float), cov, size=5000)
    stats = fit_gaussian(rows)
    d2 = squared_distances_from_mean(stats, rows)
    result = kstest(d2, chi2(df=p).cdf)
    assert result.pvalue > 0.01
