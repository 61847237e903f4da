import math

import numpy as np
import pytest

from ewenstrees.constants import (
    brw_exponents,
    digamma,
    finite_mass_exponent,
    height_constants,
    log_gamma,
)

# Frozen from a 40-digit mpmath evaluation (see test_log_gamma_oracle_grid for
# the live cross-check).
LOG_SQRT_PI = 0.5723649429247001
NEG_EULER_GAMMA = -0.5772156649015329


class TestLogGamma:
    def test_trivial_values(self):
        assert log_gamma(1.0) == pytest.approx(0.0, abs=1e-15)
        assert log_gamma(2.0) == pytest.approx(0.0, abs=1e-15)

    def test_half(self):
        assert log_gamma(0.5) == pytest.approx(LOG_SQRT_PI, abs=1e-13)

    def test_oracle_grid(self):
        mp = pytest.importorskip("mpmath")
        mp.mp.dps = 40
        # absolute 1e-12 where the magnitude of log Gamma permits it in
        # float64; few-ulp relative accuracy on the rest of [0.1, 1e6]
        for x in (0.1, 0.25, 0.5, 0.9, 1.5, 3.0, 7.7, 12.0, 25.0, 30.0):
            assert log_gamma(x) == pytest.approx(
                float(mp.loggamma(x)), abs=1e-12
            ), x
        for x in (100.0, 1e3, 1e4, 1e5, 1e6):
            ref = float(mp.loggamma(x))
            assert abs(log_gamma(x) - ref) <= 5e-15 * abs(ref) + 1e-12

    def test_functional_equation(self):
        # log Gamma(x+1) = log Gamma(x) + log x
        for x in (0.3, 1.7, 9.4, 123.0):
            assert log_gamma(x + 1.0) == pytest.approx(
                log_gamma(x) + math.log(x), abs=1e-11
            )

    def test_vectorized_matches_scalar(self):
        xs = np.array([0.1, 0.5, 1.0, 2.5, 40.0, 1e5])
        vec = log_gamma(xs)
        for x, v in zip(xs, vec):
            assert v == pytest.approx(log_gamma(float(x)), abs=1e-12)

    def test_domain_error(self):
        with pytest.raises(ValueError):
            log_gamma(0.0)
        with pytest.raises(ValueError):
            log_gamma(-3.2)
        with pytest.raises(ValueError):
            log_gamma(np.array([1.0, -1.0]))


class TestDigamma:
    def test_recurrence(self):
        for x in (0.3, 1.0, 7.5):
            assert digamma(x + 1.0) - digamma(x) == pytest.approx(1.0 / x, abs=1e-10)

    def test_euler_gamma(self):
        assert digamma(1.0) == pytest.approx(NEG_EULER_GAMMA, abs=1e-10)

    def test_psi3_minus_psi1(self):
        assert digamma(3.0) - digamma(1.0) == pytest.approx(1.5, abs=1e-12)

    def test_oracle_grid(self):
        mp = pytest.importorskip("mpmath")
        mp.mp.dps = 40
        for x in (0.1, 0.5, 2.3, 9.0, 55.5, 1e4):
            assert digamma(x) == pytest.approx(float(mp.digamma(x)), abs=1e-10)

    def test_domain_error(self):
        with pytest.raises(ValueError):
            digamma(0.0)
        with pytest.raises(ValueError):
            digamma(-1.0)


class TestBrwExponents:
    def test_t_equals_one(self):
        for theta in (0.5, 1.0, 2.0, 5.0):
            e = brw_exponents(1.0, theta)
            assert e.beta == pytest.approx(1.0, abs=1e-14)
            assert e.kappa == pytest.approx(0.0, abs=1e-14)

    def test_theta_two_closed_form(self):
        # beta_t(2) = 2 / (t (t + 1))
        assert brw_exponents(2.0, 2.0).beta == pytest.approx(1.0 / 3.0, rel=1e-13)
        e3 = brw_exponents(3.0, 2.0)
        assert e3.beta == pytest.approx(1.0 / 6.0, rel=1e-13)
        assert e3.kappa == pytest.approx(-math.log(6.0), rel=1e-13)
        for t in (1.5, 2.7, 10.0, 33.3):
            assert brw_exponents(t, 2.0).beta == pytest.approx(
                2.0 / (t * (t + 1.0)), rel=1e-12
            )

    def test_beta_exp_kappa_consistency(self):
        for t in (1.0, 1.5, 4.0):
            e = brw_exponents(t, 0.7)
            assert e.beta == pytest.approx(math.exp(e.kappa), rel=1e-14)

    def test_strictly_decreasing_in_t(self):
        for theta in (0.5, 1.0, 2.0, 5.0):
            ts = np.linspace(1.0, 12.0, 45)
            betas = [brw_exponents(float(t), theta).beta for t in ts]
            assert all(b2 < b1 for b1, b2 in zip(betas, betas[1:]))
            assert all(0.0 < b <= 1.0 for b in betas)

    def test_kappa_prime_negative_beyond_one(self):
        for theta in (0.5, 2.0, 7.0):
            for t in (1.0, 1.01, 2.0, 50.0):
                assert brw_exponents(t, theta).kappa_prime < 0.0

    def test_kappa_prime_matches_finite_difference(self):
        eps = 1e-6
        for theta in (0.5, 2.0):
            for t in (1.5, 3.0, 8.0):
                num = (
                    brw_exponents(t + eps, theta).kappa
                    - brw_exponents(t - eps, theta).kappa
                ) / (2 * eps)
                assert brw_exponents(t, theta).kappa_prime == pytest.approx(
                    num, abs=1e-7
                )

    def test_domain_errors(self):
        with pytest.raises(ValueError):
            brw_exponents(0.5, 2.0)
        with pytest.raises(ValueError):
            brw_exponents(2.0, 0.0)


class TestFiniteMassExponent:
    def test_m_one(self):
        assert finite_mass_exponent(1, 3.3, 0.9) == 1.0

    def test_m_two_enumeration(self):
        # Ewens(2, 2): single block {2} w.p. 1/3 gives sum (A/m)^2 = 1;
        # {1, 1} w.p. 2/3 gives 2 * (1/2)^2 = 1/2.
        expected = (1.0 / 3.0) * 1.0 + (2.0 / 3.0) * 0.5
        assert finite_mass_exponent(2, 2.0, 2.0) == pytest.approx(expected, rel=1e-12)

    def test_m_three_enumeration(self):
        # Ewens(3, 2) partitions: (3): 2/(3*4)*2 = 1/3... enumerate directly
        # P({3}) = 3!/theta^(3) * theta/3 = (6/24)*(2/3) = 1/6
        # P({2,1}) = (6/24) * (2/2) * 2 = 1/2, P({1,1,1}) = (6/24)*(8/6) = 1/3
        t = 2.5
        val = (
            (1.0 / 6.0) * 1.0
            + 0.5 * ((2.0 / 3.0) ** t + (1.0 / 3.0) ** t)
            + (1.0 / 3.0) * 3.0 * (1.0 / 3.0) ** t
        )
        assert finite_mass_exponent(3, t, 2.0) == pytest.approx(val, rel=1e-12)

    def test_converges_to_limit(self):
        beta = brw_exponents(2.0, 2.0).beta
        assert abs(finite_mass_exponent(10**4, 2.0, 2.0) - beta) < 1e-2

    def test_monotone_decay_of_error(self):
        for theta, t in ((2.0, 2.0), (0.5, 1.7), (5.0, 3.0)):
            beta = brw_exponents(t, theta).beta
            errs = [
                abs(finite_mass_exponent(10**k, t, theta) - beta) for k in (2, 3, 4)
            ]
            assert errs[0] > errs[1] > errs[2]

    def test_domain_errors(self):
        with pytest.raises(ValueError):
            finite_mass_exponent(0, 2.0, 2.0)
        with pytest.raises(ValueError):
            finite_mass_exponent(5, 2.0, -1.0)


class TestHeightConstants:
    def test_theta_two_reference_values(self):
        hc = height_constants(2.0)
        assert hc.t_star == pytest.approx(2.92069467, abs=1e-6)
        assert hc.c_star == pytest.approx(1.67380505, abs=1e-6)
        assert hc.v_star == pytest.approx(0.5974, abs=1e-3)

    def test_theta_two_minimizer_characterization(self):
        # at the optimum, log(t(t+1)/2) = (2t+1)/(t+1)
        t = height_constants(2.0).t_star
        assert abs(math.log(t * (t + 1) / 2.0) - (2 * t + 1) / (t + 1)) < 1e-9

    def test_c_plus_theta_two(self):
        hc = height_constants(2.0)
        assert hc.s_plus == 3
        assert hc.c_plus == pytest.approx(3.0 / math.log(6.0), rel=1e-12)
        # independent scan of the integer objective
        best = min(
            s / -brw_exponents(float(s), 2.0).kappa for s in range(2, 201)
        )
        assert hc.c_plus == pytest.approx(best, rel=1e-12)

    def test_c_star_below_c_plus_on_grid(self):
        for theta in (0.5, 1.0, 2.0, 5.0):
            hc = height_constants(theta)
            assert hc.c_star <= hc.c_plus + 1e-12

    def test_first_order_condition(self):
        for theta in (0.5, 1.0, 2.0, 5.0):
            hc = height_constants(theta)
            e = brw_exponents(hc.t_star, theta)
            assert hc.t_star * e.kappa_prime == pytest.approx(e.kappa, abs=1e-9)
            assert hc.c_star == pytest.approx(1.0 / hc.v_star, rel=1e-12)
            assert hc.t_star > 1.0

    def test_c_star_is_the_infimum_on_a_grid(self):
        for theta in (0.5, 2.0):
            hc = height_constants(theta)
            ts = np.linspace(1.001, 50.0, 3000)
            grid_best = min(float(t) / -brw_exponents(float(t), theta).kappa for t in ts)
            assert hc.c_star <= grid_best + 1e-9

    def test_domain_error(self):
        with pytest.raises(ValueError):
            height_constants(-2.0)
