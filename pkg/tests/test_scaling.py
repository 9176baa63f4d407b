import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from scchain.errors import DomainError, FitFailure, InvalidParameters
from scchain.scaling import (
    Q,
    ScalingParams,
    fit_scaling_params,
    log_phi_integral,
    omega,
    p_block_asymptotic,
    p_block_critical_phase,
    p_block_single_point,
)

mpmath.mp.dps = 40
PARAMS = ScalingParams(alpha=0.6, theta=1.3, eps_star=0.4881)
STEEP = ScalingParams(alpha=1.5, theta=1.3, eps_star=0.4881)


def mp_log_integral(x):
    f = lambda z: mpmath.ncdf(z) * mpmath.exp(z * z / 2)
    return float(mpmath.log(mpmath.quad(f, [0, max(x - 1, 0), x])))


class TestOmega:
    def test_regular(self):
        assert omega(50, 0.45) == pytest.approx(22.5, abs=1e-12)

    def test_ra(self):
        assert omega(50, 0.4, a=5, v_unc=2) == pytest.approx(21.0, abs=1e-12)

    def test_zero(self):
        assert omega(50, 0.0, a=5) == 0.0


class TestParams:
    @pytest.mark.parametrize("kw", [{"alpha": 0}, {"alpha": 1, "theta": -1},
                                    {"alpha": 1, "eps_star": 1.0}])
    def test_validation(self, kw):
        with pytest.raises(InvalidParameters):
            ScalingParams(**kw)


class TestQuadrature:
    @pytest.mark.parametrize("x", [0.3, 1.0, 2.5, 5.0, 12.0, 40.0])
    def test_against_mpmath(self, x):
        assert log_phi_integral(x) == pytest.approx(mp_log_integral(x), rel=1e-12, abs=1e-12)

    @pytest.mark.parametrize("x", [0.5, 1.5, 3.0])
    def test_against_trapezoid(self, x):
        z = np.linspace(0.0, x, 1_000_001)
        from scipy.special import ndtr
        ref = np.trapezoid(ndtr(z) * np.exp(z * z / 2), z)
        assert math.exp(log_phi_integral(x)) == pytest.approx(ref, rel=1e-8)

    def test_no_overflow(self):
        assert math.isfinite(log_phi_integral(60.0))

    def test_negative_limit(self):
        with pytest.raises(DomainError):
            log_phi_integral(-1.0)


class TestCriticalPhase:
    def test_domain(self):
        with pytest.raises(DomainError):
            p_block_critical_phase(PARAMS, 50, 1000, 0.4881)
        late = ScalingParams(alpha=0.6, tau_circ=30.0)
        with pytest.raises(DomainError):
            p_block_critical_phase(late, 50, 1000, 0.45)

    def test_tends_to_one_at_threshold(self):
        assert p_block_critical_phase(PARAMS, 50, 1000, 0.4881 - 1e-9) > 0.999

    def test_doubling_duration(self):
        p1 = p_block_critical_phase(STEEP, 50, 8000, 0.44)
        p2 = p_block_critical_phase(STEEP, 100, 8000, 0.44)
        assert p1 < 1e-3
        assert p2 / p1 == pytest.approx(2.0, rel=1e-3)

    def test_large_argument_limit(self):
        # integral ~ exp(x^2/2)/x, so the rate tends to theta*x*Omega*exp(-x^2/2)/sqrt(2 pi)
        eps = 0.40
        for N in (5000, 10000, 20000):
            x = STEEP.alpha * math.sqrt(N) * (STEEP.eps_star - eps)
            assert x >= 8
            limit = STEEP.theta * x * omega(50, eps) * math.exp(-x * x / 2) / math.sqrt(2 * math.pi)
            assert p_block_critical_phase(STEEP, 50, N, eps) == pytest.approx(limit, rel=0.05)

    @given(st.floats(0.30, 0.488), st.integers(100, 10**6), st.integers(5, 200))
    @settings(max_examples=60, deadline=None)
    def test_probability_range(self, eps, N, L):
        p = p_block_critical_phase(PARAMS, L, N, eps)
        assert 0.0 <= p <= 1.0


class TestAsymptotic:
    def test_linear_in_length(self):
        p50 = p_block_asymptotic(PARAMS, 50, 1000, 0.44)
        p100 = p_block_asymptotic(PARAMS, 100, 1000, 0.44)
        assert p100 == pytest.approx(2 * p50, rel=1e-14)

    def test_formula(self):
        a, th, e, L, N = 0.6, 1.3, 0.44, 50, 1000
        g = 0.4881 - e
        ref = a * th * e * L / (math.sqrt(2 * math.pi) * math.sqrt(N) * g) * math.exp(-N * g * g / a**2)
        assert p_block_asymptotic(PARAMS, L, N, e) == pytest.approx(ref, rel=1e-14)

    def test_flag_near_threshold(self):
        p, ok = p_block_asymptotic(PARAMS, 50, 1000, 0.4881 - 0.01, with_flag=True)
        assert not ok and 0 <= p <= 1
        p, ok = p_block_asymptotic(PARAMS, 50, 1000, 0.40, with_flag=True)
        assert ok

    def test_domain(self):
        with pytest.raises(DomainError):
            p_block_asymptotic(PARAMS, 50, 1000, 0.5)

    @given(st.floats(0.30, 0.48), st.integers(100, 10**5))
    @settings(max_examples=60)
    def test_decreasing_in_n(self, eps, N):
        a = p_block_asymptotic(PARAMS, 50, N, eps)
        b = p_block_asymptotic(PARAMS, 50, 2 * N, eps)
        assert b <= a
        assert 0.0 <= a <= 1.0


class TestSinglePoint:
    def test_half_at_threshold(self):
        assert p_block_single_point(PARAMS, 1000, 0.4881) == 0.5

    @pytest.mark.parametrize("x", np.linspace(-6, 30, 37))
    def test_q_against_mpmath(self, x):
        ref = float(mpmath.ncdf(-mpmath.mpf(float(x))))
        assert Q(float(x)) == pytest.approx(ref, rel=1e-12)


class TestFit:
    def test_single_point_alpha(self):
        truth = ScalingParams(alpha=1.2)
        pts = [(N, e, p_block_single_point(truth, N, e))
               for N in (250, 500, 1000) for e in (0.42, 0.44, 0.46)]
        fit = fit_scaling_params(pts, "single_point", eps_star=0.4881)
        assert fit.params.alpha == pytest.approx(1.2, rel=0.02)
        assert np.max(np.abs(fit.residuals)) < 1e-6

    def test_asymptotic_alpha_theta(self):
        truth = ScalingParams(alpha=0.7, theta=2.0)
        pts = [(N, e, p_block_asymptotic(truth, 50, N, e), 50)
               for N in (500, 1000, 2000) for e in (0.40, 0.42, 0.44)]
        fit = fit_scaling_params(pts, "asymptotic", eps_star=0.4881)
        assert fit.params.alpha == pytest.approx(0.7, rel=0.05)
        assert fit.params.theta == pytest.approx(2.0, rel=0.05)

    def test_critical_phase_recovers(self):
        truth = ScalingParams(alpha=0.8, theta=1.5)
        pts = [(N, e, p_block_critical_phase(truth, 50, N, e), 50)
               for N in (500, 1000) for e in (0.43, 0.45, 0.47)]
        fit = fit_scaling_params(pts, "critical_phase", eps_star=0.4881)
        assert fit.params.alpha == pytest.approx(0.8, rel=0.05)
        assert fit.params.theta == pytest.approx(1.5, rel=0.05)

    def test_too_few_points(self):
        with pytest.raises(FitFailure):
            fit_scaling_params([(1000, 0.45, 1e-3)], "single_point")

    def test_degenerate_design(self):
        with pytest.raises(FitFailure):
            fit_scaling_params([(1000, 0.45, 1e-3)] * 5, "single_point")

    def test_missing_length(self):
        with pytest.raises(InvalidParameters):
            fit_scaling_params([(1000, 0.45, 1e-3)] * 3, "asymptotic")

    def test_unknown_model(self):
        with pytest.raises(InvalidParameters):
            fit_scaling_params([], "cubic")
