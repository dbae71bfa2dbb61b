import numpy as np
import pytest

from mahagan import DataError, detect_minority, fit_em, solve_threshold
from mahagan.dataset import JointDataset
from mahagan.errors import NumericalError
from mahagan.minority import MixtureSplit, apply_threshold, weighted_density_gap


def make_fit(weight_minority, mu1, var1, mu2, var2):
    return MixtureSplit(
        weight_minority=weight_minority,
        mu1=mu1,
        var1=var1,
        mu2=mu2,
        var2=var2,
        log_likelihood=0.0,
        n_iterations=0,
    )


def bisect_threshold(fit, tol=1e-12):
    """Oracle: bisection on the weighted-density difference over (mu1, mu2)."""
    lo, hi = fit.mu1, fit.mu2
    f_lo = weighted_density_gap(fit, lo)
    f_hi = weighted_density_gap(fit, hi)
    assert f_lo * f_hi < 0, "oracle requires a sign change on (mu1, mu2)"
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        f_mid = weighted_density_gap(fit, mid)
        if f_mid == 0.0:
            return mid
        if (f_mid > 0) == (f_lo > 0):
            lo, f_lo = mid, f_mid
        else:
            hi = mid
        if hi - lo < tol * max(1.0, abs(hi)):
            break
    return 0.5 * (lo + hi)


class TestSolveThreshold:
    def test_symmetric_midpoint(self):
        fit = make_fit(0.5, 2.0, 1.0, 6.0, 1.0)
        assert solve_threshold(fit) == pytest.approx(4.0, abs=1e-12)

    def test_symmetric_family(self):
        for mu1, mu2, var in [(0.0, 1.0, 0.3), (-5.0, 9.0, 2.0), (1.0, 1.5, 4.0)]:
            fit = make_fit(0.5, mu1, var, mu2, var)
            assert solve_threshold(fit) == pytest.approx((mu1 + mu2) / 2, rel=1e-12)

    def test_against_bisection_oracle(self):
        fit = make_fit(0.7, 1.0, 1.0, 5.0, 4.0)
        t = solve_threshold(fit)
        oracle = bisect_threshold(fit)
        assert t == pytest.approx(oracle, abs=1e-8)
        assert 1.0 < t < 5.0

    def test_random_parameter_sweep(self):
        rng = np.random.default_rng(42)
        checked = 0
        while checked < 100:
            mu1 = rng.uniform(-5, 5)
            mu2 = mu1 + rng.uniform(1.0, 10.0)
            var1, var2 = rng.uniform(0.1, 10.0, size=2)
            w_min = rng.uniform(0.05, 0.95)
            fit = make_fit(w_min, mu1, var1, mu2, var2)
            gap_lo = weighted_density_gap(fit, mu1)
            gap_hi = weighted_density_gap(fit, mu2)
            if gap_lo * gap_hi >= 0:
                continue  # no in-interval crossing; solver falls back there
            t = solve_threshold(fit)
            assert t == pytest.approx(bisect_threshold(fit), abs=1e-8)
            checked += 1

    def test_density_equality_residual(self):
        rng = np.random.default_rng(1)
        for _ in range(50):
            fit = make_fit(
                rng.uniform(0.1, 0.9),
                0.0,
                rng.uniform(0.1, 5.0),
                rng.uniform(2.0, 10.0),
                rng.uniform(0.1, 5.0),
            )
            if (
                weighted_density_gap(fit, fit.mu1) * weighted_density_gap(fit, fit.mu2)
                >= 0
            ):
                continue
            t = solve_threshold(fit)
            w1, w2 = fit.weight_majority, fit.weight_minority
            side1 = w1 * np.exp(-0.5 * (t - fit.mu1) ** 2 / fit.var1) / np.sqrt(fit.var1)
            side2 = w2 * np.exp(-0.5 * (t - fit.mu2) ** 2 / fit.var2) / np.sqrt(fit.var2)
            assert abs(side1 - side2) / max(side1, side2) < 1e-8

    def test_no_root_raises(self):
        # Overwhelming minority weight: no crossing between the means.
        fit = make_fit(0.999999, 0.0, 1.0, 0.5, 1.000001)
        with pytest.raises(NumericalError):
            solve_threshold(fit)


class TestFitEm:
    def test_planted_mixture_recovery(self):
        rng = np.random.default_rng(7)
        low = rng.normal(3.0, 1.0, size=700)
        high = rng.normal(15.0, 2.0, size=300)
        d = np.concatenate([low, high])
        fit = fit_em(d)
        # errors within 3 standard errors of the planted values
        assert abs(fit.weight_minority - 0.3) <= 3 * np.sqrt(0.3 * 0.7 / 1000)
        assert abs(fit.mu1 - 3.0) <= 3 * 1.0 / np.sqrt(700)
        assert abs(fit.mu2 - 15.0) <= 3 * 2.0 / np.sqrt(300)
        assert not fit.degenerate

    def test_exactly_separated_clusters(self):
        d = np.array([1.0, 1.1, 0.9, 100.0, 101.0, 99.0])
        fit = fit_em(d)
        assert fit.weight_minority == pytest.approx(0.5, abs=1e-6)
        assert fit.mu1 == pytest.approx(1.0, abs=0.01)
        assert fit.mu2 == pytest.approx(100.0, abs=0.5)

    def test_single_gaussian_stays_total(self):
        rng = np.random.default_rng(8)
        d = rng.normal(5.0, 1.0, size=400)
        fit = fit_em(d)
        completed = apply_threshold(fit, d)
        assert completed.threshold is not None
        assert completed.minority_mask is not None
        if fit.degenerate or fit.weight_minority < 1e-3 or fit.weight_majority < 1e-3:
            assert completed.fallback_used

    def test_loglikelihood_monotone(self):
        rng = np.random.default_rng(9)
        d = np.concatenate([rng.normal(2, 1, 300), rng.normal(9, 1.5, 200)])
        fit = fit_em(d)
        history = np.array(fit.log_likelihood_history)
        assert np.all(np.diff(history) >= -1e-10 * np.maximum(1.0, np.abs(history[:-1])))

    def test_scale_equivariance(self):
        rng = np.random.default_rng(10)
        d = np.concatenate([rng.normal(2, 0.5, 300), rng.normal(8, 1.0, 150)])
        fit1 = fit_em(d)
        t1 = solve_threshold(fit1)
        c = 37.5
        fit2 = fit_em(c * d)
        t2 = solve_threshold(fit2)
        assert fit2.mu1 == pytest.approx(c * fit1.mu1, rel=1e-6)
        assert fit2.mu2 == pytest.approx(c * fit1.mu2, rel=1e-6)
        assert t2 == pytest.approx(c * t1, rel=1e-6)

    def test_preconditions(self):
        with pytest.raises(DataError):
            fit_em([1.0, 2.0, 3.0])
        with pytest.raises(DataError):
            fit_em([2.0, 2.0, 2.0, 2.0])


class TestDetectMinority:
    def test_planted_outliers(self):
        rng = np.random.default_rng(11)
        n_bulk, p = 950, 4
        bulk = rng.standard_normal((n_bulk, p))
        directions = rng.standard_normal((50, p))
        directions /= np.linalg.norm(directions, axis=1, keepdims=True)
        outliers = directions * 10.0
        data = JointDataset(np.vstack([bulk, outliers]))
        mixture, stats = detect_minority(data)
        mask = mixture.minority_mask
        assert mask[n_bulk:].all(), "all planted outliers must be flagged"
        assert mask[:n_bulk].mean() <= 0.02, "at most 2% of the bulk flagged"

    def test_mask_matches_rule(self):
        rng = np.random.default_rng(12)
        data = JointDataset(rng.standard_normal((200, 3)) * [1, 3, 2.0])
        mixture, stats = detect_minority(data)
        from mahagan import squared_distances_from_mean

        d2 = squared_distances_from_mean(stats, data.rows)
        assert np.array_equal(mixture.minority_mask, d2 >= mixture.threshold)
        if not mixture.fallback_used:
            assert mixture.mu1 < mixture.threshold < mixture.mu2

    def test_tiny_dataset_errors(self):
        data = JointDataset(np.array([[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]]))
        with pytest.raises(DataError):
            detect_minority(data)

    def test_json_roundtrip(self):
        rng = np.random.default_rng(13)
        data = JointDataset(rng.standard_normal((100, 3)))
        mixture, _ = detect_minority(data)
        import json

        parsed = json.loads(mixture.to_json())
        assert parsed["threshold"] == mixture.threshold
        assert parsed["minority_count"] == int(mixture.minority_mask.sum())
