import numpy as np
import pytest

from mahagan import (
    DataError,
    JointDataset,
    MatchConfig,
    assemble_augmented,
    match,
    pairwise_distance,
    standardize,
)
from mahagan.mahalanobis import fit_gaussian, squared_distances_from_mean, stats_from_covariance


def brute_force_match(real, pool, stats, config):
    """Independent replay of the greedy selection: full distance matrix,
    rarest-first order, per-point (delta, pool index) sorting."""
    real = np.atleast_2d(real)
    pool = np.atleast_2d(pool)
    d2 = squared_distances_from_mean(stats, real)
    processing = sorted(range(len(real)), key=lambda i: (-d2[i], i))
    used = set()
    assignments = []
    unmatched = []
    for r in processing:
        ranked = sorted(
            range(len(pool)), key=lambda j: (pairwise_distance(stats, real[r], pool[j]), j)
        )
        if not config.fall_through:
            ranked = ranked[: config.k]
        picks = 0
        for j in ranked:
            if config.without_replacement and j in used:
                continue
            assignments.append((r, j))
            used.add(j)
            picks += 1
            if picks == config.n_pick:
                break
        if picks == 0:
            unmatched.append(r)
    return assignments, sorted(unmatched)


def test_exact_copies_matched_at_zero_distance():
    rng = np.random.default_rng(0)
    real = rng.standard_normal((5, 3))
    pool = np.vstack([rng.standard_normal((30, 3)) + 5.0, real])
    stats = stats_from_covariance(np.zeros(3), np.eye(3))
    result = match(real, pool, stats, MatchConfig(k=3, n_pick=1))
    assert len(result.assignments) == 5
    for r, j, delta in result.assignments:
        assert delta == 0.0
        assert j == 30 + r  # its own copy


def test_pool_exhaustion_reports_unmatched():
    stats = stats_from_covariance(np.zeros(2), np.eye(2))
    real = np.array([[0.0, 0.0], [10.0, 0.0]])
    pool = np.array([[1.0, 0.0]])
    result = match(real, pool, stats, MatchConfig(k=3, n_pick=1))
    assert len(result.assignments) == 1
    # the farther-from-mean point goes first and takes the only candidate
    assert result.assignments[0][0] == 1
    assert result.unmatched_real == [0]


def test_empty_pool_rejected():
    stats = stats_from_covariance(np.zeros(2), np.eye(2))
    with pytest.raises(DataError):
        match(np.ones((2, 2)), np.empty((0, 2)), stats)


@pytest.mark.parametrize("n_pick,k,fall_through", [(1, 3, False), (2, 4, False), (1, 3, True)])
def test_matches_brute_force_oracle(n_pick, k, fall_through):
    rng = np.random.default_rng(1)
    base = rng.standard_normal((60, 4)) @ rng.standard_normal((4, 4))
    stats = fit_gaussian(base)
    for trial in range(10):
        real = rng.standard_normal((rng.integers(2, 12), 4)) * 2
        pool = rng.standard_normal((rng.integers(20, 80), 4)) * 2
        config = MatchConfig(k=k, n_pick=n_pick, fall_through=fall_through)
        result = match(real, pool, stats, config)
        expected, expected_unmatched = brute_force_match(real, pool, stats, config)
        assert [(r, j) for r, j, _ in result.assignments] == expected
        assert result.unmatched_real == expected_unmatched


def test_with_replacement_allows_reuse():
    stats = stats_from_covariance(np.zeros(2), np.eye(2))
    real = np.array([[0.0, 1.0], [0.0, 1.2]])
    pool = np.array([[0.0, 1.1], [50.0, 50.0]])
    result = match(real, pool, stats, MatchConfig(k=1, n_pick=1, without_replacement=False))
    picked = [j for _, j, _ in result.assignments]
    assert picked == [0, 0]


def test_selected_indices_distinct_without_replacement():
    rng = np.random.default_rng(2)
    stats = fit_gaussian(rng.standard_normal((50, 3)))
    real = rng.standard_normal((15, 3))
    pool = rng.standard_normal((100, 3))
    result = match(real, pool, stats, MatchConfig(k=5, n_pick=2))
    indices = result.selected_pool_indices
    assert len(indices) == len(set(indices.tolist()))
    assert len(result.selected_rows) <= 2 * 15


def test_recorded_delta_recomputes():
    rng = np.random.default_rng(3)
    stats = fit_gaussian(rng.standard_normal((40, 3)) @ rng.standard_normal((3, 3)))
    real = rng.standard_normal((6, 3))
    pool = rng.standard_normal((40, 3))
    result = match(real, pool, stats)
    for r, j, delta in result.assignments:
        assert delta == pytest.approx(pairwise_distance(stats, real[r], pool[j]), abs=1e-9)


def test_determinism():
    rng = np.random.default_rng(4)
    stats = fit_gaussian(rng.standard_normal((40, 3)))
    real = rng.standard_normal((8, 3))
    pool = rng.standard_normal((60, 3))
    a = match(real, pool, stats)
    b = match(real, pool, stats)
    assert a.assignments == b.assignments
    assert np.array_equal(a.selected_rows, b.selected_rows)


class TestAssemble:
    def test_empty_refined_is_identity(self):
        rng = np.random.default_rng(5)
        data = JointDataset(rng.standard_normal((10, 3)))
        _, scaler = standardize(data)
        from mahagan.matching import MatchResult

        out = assemble_augmented(data, MatchResult(np.empty((0, 3))), scaler)
        assert np.array_equal(out.rows, data.rows)

    def test_rows_appended_after_originals(self):
        rng = np.random.default_rng(6)
        data = JointDataset(rng.standard_normal((10, 3)))
        standardized, scaler = standardize(data)
        stats = fit_gaussian(standardized)
        pool = rng.standard_normal((20, 3))
        result = match(standardized.rows[:3], pool, stats)
        out = assemble_augmented(data, result, scaler)
        assert out.n == 10 + len(result.assignments)
        assert np.array_equal(out.rows[:10], data.rows)

    def test_appended_rows_are_inverse_transformed(self):
        rng = np.random.default_rng(7)
        data = JointDataset(rng.standard_normal((12, 3)) * 5 + 2)
        standardized, scaler = standardize(data)
        stats = fit_gaussian(standardized)
        pool = rng.standard_normal((30, 3))
        result = match(standardized.rows[:4], pool, stats)
        out = assemble_augmented(data, result, scaler)
        expected = scaler.inverse_transform(result.selected_rows)
        np.testing.assert_allclose(out.rows[12:], expected, atol=1e-10)

    def test_dimension_mismatch(self):
        rng = np.random.default_rng(8)
        data = JointDataset(rng.standard_normal((10, 3)))
        _, scaler = standardize(data)
        from mahagan.matching import MatchResult

        with pytest.raises(DataError):
            assemble_augmented(data, MatchResult(np.ones((2, 4))), scaler)
