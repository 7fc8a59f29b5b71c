import math

import numpy as np
import pytest
from scipy.special import comb

from dpcd import (AccountantAudit, CalibrationFailure, HypothesisViolation,
                  InfinitePrivacyLoss, NoiseScales, PrivacyBudget, RdpCurve,
                  calibrate_dpcd_closed_form, calibrate_dpcd_numeric,
                  calibrate_numeric, compose, default_alpha_grid, gaussian_sample,
                  laplace_sample, rdp_gaussian, rdp_subsampled_gaussian, rdp_to_dp)
from dpcd.privacy import _achieved_epsilon


class TestSamplers:
    def test_zero_scale_returns_zero(self):
        rng = np.random.default_rng(0)
        assert gaussian_sample(0.0, rng) == 0.0
        assert laplace_sample(0.0, rng) == 0.0

    def test_gaussian_moments(self):
        rng = np.random.default_rng(1)
        draws = np.fromiter((gaussian_sample(1.0, rng) for _ in range(1_000_000)),
                            dtype=np.float64, count=1_000_000)
        assert 0.99 < draws.var() < 1.01
        assert abs(draws.mean()) < 0.005

    def test_laplace_moments(self):
        rng = np.random.default_rng(3)
        draws = np.fromiter((laplace_sample(1.0, rng) for _ in range(1_000_000)),
                            dtype=np.float64, count=1_000_000)
        assert 1.98 < draws.var() < 2.02
        assert abs(draws.mean()) < 0.01

    def test_negative_scale_rejected(self):
        rng = np.random.default_rng(5)
        with pytest.raises(ValueError):
            gaussian_sample(-1.0, rng)
        with pytest.raises(ValueError):
            laplace_sample(-0.1, rng)

    def test_deterministic_under_seed(self):
        a = [gaussian_sample(2.0, np.random.default_rng(9)) for _ in range(3)]
        b = [gaussian_sample(2.0, np.random.default_rng(9)) for _ in range(3)]
        assert a == b


class TestAlphaGrid:
    def test_integer_part(self):
        grid = default_alpha_grid(low_orders=False)
        np.testing.assert_array_equal(grid, np.arange(2.0, 257.0))

    def test_low_orders_cover_one_to_two(self):
        grid = default_alpha_grid()
        low = grid[grid < 2.0]
        assert len(low) >= 60
        assert np.all(low > 1.0)
        assert np.all(np.diff(grid) > 0)


class TestGaussianCurve:
    def test_plug_in_values(self):
        c = rdp_gaussian(1.0, 1.0, alphas=[2.0])
        assert c.eps[0] == pytest.approx(1.0)
        c = rdp_gaussian(2.0, 2.0, alphas=[5.0])
        assert c.eps[0] == pytest.approx(2.5)

    def test_doubling_sigma_quarters_eps(self):
        alphas = default_alpha_grid()
        a = rdp_gaussian(1.0, 1.0, alphas)
        b = rdp_gaussian(1.0, 2.0, alphas)
        np.testing.assert_allclose(b.eps, a.eps / 4.0, rtol=1e-12)

    def test_zero_sigma_raises(self):
        with pytest.raises(InfinitePrivacyLoss):
            rdp_gaussian(1.0, 0.0)


class TestSubsampledGaussianCurve:
    def test_q_one_reduces_to_plain(self):
        alphas = default_alpha_grid(low_orders=False)
        sub = rdp_subsampled_gaussian(1.0, 1.7, alphas)
        plain = rdp_gaussian(1.0, 1.7, alphas)
        np.testing.assert_allclose(sub.eps, plain.eps, rtol=1e-9)

    def test_direct_summation_oracle(self):
        # small orders evaluated without the log-space machinery
        q, sb = 0.1, 1.3
        for alpha in (2, 3, 4, 7):
            total = sum(comb(alpha, k, exact=True) * (1 - q) ** (alpha - k) * q ** k
                        * math.exp(k * (k - 1) / (2 * sb ** 2))
                        for k in range(alpha + 1))
            expected = max(math.log(total), 0.0) / (alpha - 1)
            got = rdp_subsampled_gaussian(q, sb, alphas=[float(alpha)])
            assert got.eps[0] == pytest.approx(expected, rel=1e-12)

    def test_amplification_below_plain(self):
        alphas = default_alpha_grid(low_orders=False)
        plain = rdp_gaussian(1.0, 1.0, alphas)
        for q in (0.01, 0.1, 0.5, 0.9):
            sub = rdp_subsampled_gaussian(q, 1.0, alphas)
            assert np.all(sub.eps < plain.eps)

    def test_monotone_in_q(self):
        alphas = default_alpha_grid(low_orders=False)
        prev = None
        for q in (0.01, 0.05, 0.1, 0.3, 0.6, 1.0):
            cur = rdp_subsampled_gaussian(q, 2.0, alphas).eps
            if prev is not None:
                assert np.all(cur >= prev - 1e-12)
            prev = cur

    def test_large_orders_stay_finite(self):
        c = rdp_subsampled_gaussian(0.02, 0.5, alphas=np.arange(2.0, 257.0))
        assert np.all(np.isfinite(c.eps))

    def test_non_integer_orders_rejected(self):
        with pytest.raises(ValueError, match="integer"):
            rdp_subsampled_gaussian(0.1, 1.0, alphas=[2.5])

    def test_invalid_q(self):
        with pytest.raises(ValueError):
            rdp_subsampled_gaussian(0.0, 1.0)
        with pytest.raises(ValueError):
            rdp_subsampled_gaussian(1.2, 1.0)


class TestCompose:
    def test_k_fold_is_linear(self):
        c = rdp_gaussian(1.0, 2.0)
        k5 = compose([c] * 5)
        np.testing.assert_allclose(k5.eps, 5.0 * c.eps, rtol=1e-12)

    def test_zero_curve_is_identity(self):
        c = rdp_gaussian(1.0, 2.0)
        zero = RdpCurve(c.alphas, np.zeros_like(c.eps))
        np.testing.assert_array_equal(compose([c, zero]).eps, c.eps)

    def test_pairwise_exact(self):
        a = rdp_gaussian(1.0, 1.0)
        b = rdp_gaussian(1.0, 3.0)
        np.testing.assert_array_equal(compose([a, b]).eps, a.eps + b.eps)

    def test_order_independent(self):
        a = rdp_gaussian(1.0, 1.0)
        b = rdp_gaussian(2.0, 3.0)
        np.testing.assert_array_equal(compose([a, b]).eps, compose([b, a]).eps)

    def test_grid_mismatch(self):
        a = rdp_gaussian(1.0, 1.0, alphas=[2.0, 3.0])
        b = rdp_gaussian(1.0, 1.0, alphas=[2.0, 4.0])
        with pytest.raises(ValueError, match="grid"):
            compose([a, b])


class TestRdpToDp:
    def test_single_point(self):
        curve = RdpCurve(np.array([2.0]), np.array([0.0]))
        eps, alpha = rdp_to_dp(curve, math.exp(-1.0))
        assert eps == pytest.approx(1.0)
        assert alpha == 2.0

    def test_matches_continuous_optimum_on_fine_grid(self):
        # closed form for a curve gamma*alpha/(2 sigma^2)
        gamma, sigma, delta = 40.0, 5.0, 1e-6
        alpha_star = 1.0 + sigma * math.sqrt(2 * math.log(1 / delta) / gamma)
        eps_star = gamma / (2 * sigma ** 2) \
            + math.sqrt(2 * gamma * math.log(1 / delta)) / sigma
        alphas = np.linspace(1.0001, 4 * alpha_star, 400_000)
        curve = RdpCurve(alphas, gamma * alphas / (2 * sigma ** 2))
        eps, alpha = rdp_to_dp(curve, delta)
        assert eps == pytest.approx(eps_star, rel=1e-6)
        assert alpha == pytest.approx(alpha_star, rel=1e-3)

    def test_refining_grid_never_increases(self):
        gamma, sigma, delta = 10.0, 2.0, 1e-5
        coarse = np.arange(2.0, 65.0, 4.0)
        eps_prev = None
        for factor in (1, 4, 16):
            grid = np.unique(np.concatenate(
                [np.linspace(1.01, 2.0, 16 * factor), np.arange(2.0, 65.0, 4.0 / factor)]))
            curve = RdpCurve(grid, gamma * grid / (2 * sigma ** 2))
            eps, _ = rdp_to_dp(curve, delta)
            if eps_prev is not None:
                assert eps <= eps_prev + 1e-15
            eps_prev = eps
        assert coarse is not None

    def test_invalid_delta(self):
        with pytest.raises(ValueError):
            rdp_to_dp(rdp_gaussian(1.0, 1.0), 0.0)


class TestClosedFormCalibration:
    def test_worked_example(self):
        budget = PrivacyBudget(1.0, 1e-6)
        scales = calibrate_dpcd_closed_form(np.ones(3), T=1, K=100, n=1000,
                                            budget=budget)
        expected_var = 12 * 100 * math.log(1e6) / 1e6
        assert expected_var == pytest.approx(0.016579, rel=1e-4)
        np.testing.assert_allclose(scales.sigma, math.sqrt(expected_var), rtol=1e-12)
        assert scales.sigma[0] == pytest.approx(0.12876, rel=1e-4)

    def test_doubling_n_halves_sigma(self):
        budget = PrivacyBudget(0.5, 1e-6)
        a = calibrate_dpcd_closed_form(np.ones(2), 1, 50, 1000, budget)
        b = calibrate_dpcd_closed_form(np.ones(2), 1, 50, 2000, budget)
        np.testing.assert_allclose(a.sigma, 2.0 * b.sigma, rtol=1e-12)

    def test_sigma_proportional_to_lipschitz(self):
        budget = PrivacyBudget(1.0, 1e-6)
        L = np.array([1.0, 2.0, 0.5])
        scales = calibrate_dpcd_closed_form(L, 1, 10, 100, budget)
        np.testing.assert_allclose(scales.sigma / scales.sigma[0], L / L[0],
                                   rtol=1e-12)

    def test_hypothesis_violations(self):
        with pytest.raises(HypothesisViolation):
            calibrate_dpcd_closed_form(np.ones(1), 1, 10, 100, PrivacyBudget(2.0, 1e-6))
        with pytest.raises(HypothesisViolation):
            calibrate_dpcd_closed_form(np.ones(1), 1, 10, 100, PrivacyBudget(0.5, 0.4))

    def test_reaudit_within_budget(self):
        # the audit constructor itself enforces achieved <= budget
        for eps in (0.1, 0.5, 1.0):
            for delta in (1e-8, 1e-4, 0.2):
                scales = calibrate_dpcd_closed_form(
                    np.ones(2), 2, 25, 500, PrivacyBudget(eps, delta))
                assert scales.audit.epsilon <= eps


class TestNumericCalibration:
    def test_achieved_close_to_budget(self):
        for steps, eps, delta, q in [(100, 1.0, 1e-6, None), (2000, 10.0, 1e-6, None),
                                     (64, 5.0, 1e-5, 0.05), (500, 0.3, 1e-7, 0.01)]:
            budget = PrivacyBudget(eps, delta)
            sb = calibrate_numeric(1.0, steps, budget, subsampling_q=q)
            achieved, _ = _achieved_epsilon(sb, steps, delta, q)
            assert 0.999 * eps <= achieved <= eps

    def test_never_worse_than_closed_form(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            steps = int(rng.integers(1, 5000))
            eps = float(rng.uniform(0.05, 1.0))
            delta = float(rng.uniform(1e-9, 0.33))
            sb = calibrate_numeric(1.0, steps, PrivacyBudget(eps, delta))
            closed = math.sqrt(3.0 * steps * math.log(1.0 / delta)) / eps
            assert sb <= closed * (1 + 1e-4)

    def test_q_one_matches_plain(self):
        budget = PrivacyBudget(1.0, 1e-5)
        a = calibrate_numeric(1.0, 1, budget)
        b = calibrate_numeric(1.0, 1, budget, subsampling_q=1.0)
        assert a == pytest.approx(b, rel=1e-6)

    def test_monotone_in_steps_eps_delta(self):
        base = calibrate_numeric(1.0, 100, PrivacyBudget(1.0, 1e-6))
        assert calibrate_numeric(1.0, 200, PrivacyBudget(1.0, 1e-6)) >= base
        assert calibrate_numeric(1.0, 100, PrivacyBudget(2.0, 1e-6)) <= base
        assert calibrate_numeric(1.0, 100, PrivacyBudget(1.0, 1e-4)) <= base

    def test_subsampling_helps(self):
        budget = PrivacyBudget(1.0, 1e-6)
        plain = calibrate_numeric(1.0, 1000, budget)
        sub = calibrate_numeric(1.0, 1000, budget, subsampling_q=0.01)
        assert sub < plain

    def test_unbounded_budget_fails(self):
        with pytest.raises(CalibrationFailure):
            calibrate_numeric(1.0, 1, PrivacyBudget(1e250, 1e-6))

    def test_dpcd_wrapper_scales(self):
        L = np.array([1.0, 3.0])
        scales = calibrate_dpcd_numeric(L, 1, 100, 500, PrivacyBudget(1.0, 1e-6))
        ratio = scales.audit.noise_to_sensitivity
        np.testing.assert_allclose(scales.sigma, 2.0 * L / 500 * ratio, rtol=1e-12)
        assert scales.audit.epsilon <= 1.0


class TestAuditAndScales:
    def test_audit_rejects_budget_violation(self):
        with pytest.raises(ValueError, match="exceeds budget"):
            AccountantAudit(mechanism="gaussian", steps=1, sensitivity=1.0,
                            noise_to_sensitivity=1.0, best_alpha=2.0,
                            epsilon=2.0, delta=1e-6, budget_epsilon=1.0)

    def test_noiseless_scales(self):
        ns = NoiseScales.noiseless(4)
        np.testing.assert_array_equal(ns.sigma, np.zeros(4))
        assert ns.audit.mechanism == "none"

    def test_negative_scales_rejected(self):
        from dpcd.privacy import NONPRIVATE_AUDIT
        with pytest.raises(ValueError):
            NoiseScales(np.array([-1.0]), NONPRIVATE_AUDIT)

    def test_budget_validation(self):
        with pytest.raises(ValueError):
            PrivacyBudget(0.0, 1e-6)
        with pytest.raises(ValueError):
            PrivacyBudget(1.0, 0.0)
        with pytest.raises(ValueError):
            PrivacyBudget(math.inf, 1e-6)

    def test_audit_serializes(self):
        import json
        scales = calibrate_dpcd_numeric(np.ones(2), 1, 10, 100,
                                        PrivacyBudget(1.0, 1e-6))
        text = json.dumps(scales.audit.to_dict())
        assert "gaussian" in text
