import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ewenstrees.constants import height_constants
from ewenstrees.fragmentation import MassTree, sample_fragmentation
from ewenstrees.heights import (
    BudgetError,
    CoverageError,
    Series,
    exact_height_cdf,
    height,
    key_identity_residual,
    macroscopic_count,
    neg_binomial_mean,
    neg_binomial_pmf,
    neg_binomial_var,
    poissonization_radius,
    s_mass_profile,
    series_exp,
    series_mul,
    threshold_diagnostic,
)


class TestSeriesExp:
    def test_zero_series(self):
        e = series_exp(Series(coeffs=(0.0, 0.0, 0.0)))
        assert e.coeffs == (1.0, 0.0, 0.0)

    def test_exp_z(self):
        e = series_exp(Series(coeffs=(0.0, 1.0) + (0.0,) * 19))
        for k in range(21):
            assert e.coeffs[k] == pytest.approx(1.0 / math.factorial(k), abs=1e-12)

    def test_negative_binomial_generating_function(self):
        # exp(-theta log(1-z)) has coefficients theta^(m)/m!; m+1 at theta=2
        N = 50
        g = Series(coeffs=tuple([0.0] + [2.0 / j for j in range(1, N + 1)]))
        e = series_exp(g)
        for m in range(N + 1):
            assert e.coeffs[m] == pytest.approx(m + 1.0, rel=1e-12)

    def test_exact_mode(self):
        g = Series(coeffs=tuple([Fraction(0)] + [Fraction(3, j) for j in range(1, 9)]))
        e = series_exp(g)
        # rising-factorial coefficients 3^(m)/m!
        num = Fraction(1)
        for m in range(1, 9):
            num *= Fraction(3 + m - 1, m)
            assert e.coeffs[m] == num

    def test_constant_term_precondition(self):
        with pytest.raises(ValueError):
            series_exp(Series(coeffs=(1.0, 2.0)))

    @settings(max_examples=30, deadline=None)
    @given(st.lists(st.fractions(min_value=-3, max_value=3), min_size=1, max_size=8))
    def test_float_agrees_with_exact(self, tail):
        g_exact = Series(coeffs=tuple([Fraction(0)] + tail))
        g_float = Series(coeffs=tuple([0.0] + [float(x) for x in tail]))
        ex = series_exp(g_exact).coeffs
        fl = series_exp(g_float).coeffs
        for a, b in zip(ex, fl):
            assert float(a) == pytest.approx(b, rel=1e-9, abs=1e-9)

    def test_exp_of_sum_is_product(self):
        rng = np.random.default_rng(3)
        a = tuple([0.0] + list(rng.normal(size=10) * 0.3))
        b = tuple([0.0] + list(rng.normal(size=10) * 0.3))
        lhs = series_exp(Series(coeffs=tuple(x + y for x, y in zip(a, b))))
        rhs = series_mul(series_exp(Series(coeffs=a)), series_exp(Series(coeffs=b)))
        for x, y in zip(lhs.coeffs, rhs.coeffs):
            assert x == pytest.approx(y, abs=1e-10)


class TestHeightCdf:
    def test_height_two_deterministic(self):
        tab = exact_height_cdf(5, 4, 2.0)
        assert tab.q[2, 0] == 0.0
        for h in range(1, 5):
            assert tab.q[2, h] == pytest.approx(1.0, abs=1e-12)

    def test_q3_one_closed_form(self):
        # H_3 <= 1 iff the root split is {1,1}: probability theta/(theta+1)
        for theta in (0.5, 1.0, 2.0):
            tab = exact_height_cdf(3, 2, theta)
            assert tab.q[3, 1] == pytest.approx(theta / (theta + 1.0), rel=1e-10)

    def test_q3_exact_mode(self):
        tab = exact_height_cdf(3, 2, 2, exact=True)
        assert tab.q_exact[1][3] == Fraction(2, 3)

    def test_exact_vs_float(self):
        tab_f = exact_height_cdf(40, 8, 2.0)
        tab_e = exact_height_cdf(40, 8, 2, exact=True)
        worst = max(
            abs(float(tab_e.q_exact[h][n]) - tab_f.q[n, h])
            for n in range(1, 41)
            for h in range(9)
        )
        assert worst < 1e-12

    def test_exact_vs_float_rational_theta(self):
        tab_f = exact_height_cdf(30, 6, 0.5)
        tab_e = exact_height_cdf(30, 6, (1, 2), exact=True)
        worst = max(
            abs(float(tab_e.q_exact[h][n]) - tab_f.q[n, h])
            for n in range(1, 31)
            for h in range(7)
        )
        assert worst < 1e-12

    def test_monotonicity(self):
        tab = exact_height_cdf(300, 15, 2.0)
        q = tab.q[1:, :]
        assert np.all(np.diff(q, axis=1) >= -1e-13)  # nondecreasing in h
        assert np.all(np.diff(q, axis=0) <= 1e-13)  # nonincreasing in n
        assert np.all((q >= 0.0) & (q <= 1.0))

    def test_q_against_enumeration_oracle(self):
        # brute-force q_n(h) for n <= 6 by recursing over exact Ewens splits
        from ewenstrees.ewens import all_count_vectors, ewens_pmf

        theta = 2

        def q_rec(n, h, memo={}):
            if n == 1:
                return Fraction(1)
            if h <= 0:
                return Fraction(0)
            key = (n, h)
            if key in memo:
                return memo[key]
            total = Fraction(0)
            for cv in all_count_vectors(n - 1):
                term = ewens_pmf(cv, theta, exact=True)
                for j, c in enumerate(cv.counts, start=1):
                    if c:
                        term *= q_rec(j, h - 1) ** c
                total += term
            memo[key] = total
            return total

        tab = exact_height_cdf(6, 4, theta, exact=True)
        for n in range(1, 7):
            for h in range(5):
                assert tab.q_exact[h][n] == q_rec(n, h), (n, h)

    def test_adaptive_height(self):
        tab = exact_height_cdf(100, None, 2.0)
        assert 1.0 - tab.q[100, tab.H] < 1e-12
        assert tab.H < 64

    def test_mean_height_trend_and_bound(self):
        # E[H_n]/log n increases at these sizes and stays below c_star(2)
        c_star = height_constants(2.0).c_star
        tab = exact_height_cdf(2000, None, 2.0)
        ratios = [tab.mean_height(n) / math.log(n) for n in (100, 500, 1000, 2000)]
        assert all(a < b for a, b in zip(ratios, ratios[1:]))
        assert all(r < c_star for r in ratios)

    def test_budget_errors(self):
        with pytest.raises(BudgetError):
            exact_height_cdf(5000, 5, 2.0)
        with pytest.raises(BudgetError):
            exact_height_cdf(10, 100, 2.0)
        with pytest.raises(BudgetError):
            exact_height_cdf(100, 5, 2, exact=True)


class TestKeyIdentity:
    def test_residuals(self):
        assert key_identity_residual(1, 2.0, 100) < 1e-10
        assert key_identity_residual(10, 2.0, 200) < 1e-9
        assert key_identity_residual(1, 1.0, 50) < 1e-10

    def test_fractional_theta(self):
        assert key_identity_residual(3, 0.5, 80) < 1e-10


class TestNegBinomial:
    def test_pmf_at_zero(self):
        assert neg_binomial_pmf(0, 0.3, 2.0) == pytest.approx(0.49, rel=1e-12)

    def test_pmf_sums_to_one(self):
        for theta, r in ((2.0, 0.5), (0.7, 0.9)):
            total = sum(neg_binomial_pmf(m, r, theta) for m in range(5000))
            assert total == pytest.approx(1.0, abs=1e-8)

    def test_mean_and_variance(self):
        for theta, r in ((2.0, 0.5), (1.3, 0.25)):
            ms = np.arange(20000)
            pmf = np.array([neg_binomial_pmf(int(m), r, theta) for m in ms])
            mean = float(np.dot(ms, pmf))
            var = float(np.dot((ms - mean) ** 2, pmf))
            assert mean == pytest.approx(neg_binomial_mean(r, theta), rel=1e-9)
            assert var == pytest.approx(neg_binomial_var(r, theta), rel=1e-6)

    def test_centering_radius(self):
        for n, theta in ((5, 2.0), (100, 0.5)):
            r = poissonization_radius(n, theta)
            assert neg_binomial_mean(r, theta) == pytest.approx(n - 1, rel=1e-12)

    def test_small_r_concentrates_at_zero(self):
        assert neg_binomial_pmf(0, 1e-9, 2.0) == pytest.approx(1.0, abs=1e-6)

    def test_depoissonization_identity(self):
        # (1-r)^theta F_h(r) equals the NB mixture of q_{m+1}(h) at r = 1/2
        theta, r = 2.0, 0.5
        tab = exact_height_cdf(400, 5, theta)
        ms = np.arange(400, dtype=float)
        log_w = np.array(
            [
                math.lgamma(theta + m) - math.lgamma(theta) - math.lgamma(m + 1)
                for m in ms
            ]
        )
        for h in range(6):
            series_side = (1 - r) ** theta * float(
                np.sum(np.exp(log_w + ms * math.log(r)) * tab.q[1:, h])
            )
            mixture_side = sum(
                neg_binomial_pmf(m, r, theta) * tab.q[m + 1, h] for m in range(399)
            )
            assert abs(series_side - mixture_side) < 1e-10


@pytest.fixture(scope="module")
def table():
    return exact_height_cdf(1001, 8, 2.0)


class TestThresholdDiagnostic:

    def test_bridge_consistency(self, table):
        # exp(-theta Phi_{h-1}(r_n)) vs direct NB mixture of the q-table
        n, h, theta = 50, 3, 2.0
        diag = threshold_diagnostic(n, h, theta, table)
        lhs = math.exp(-theta * diag.value)
        mixture = sum(
            neg_binomial_pmf(m, diag.r, theta) * table.q[m + 1, h] for m in range(1000)
        )
        assert abs(lhs - mixture) < 1e-6

    def test_monotone_in_h(self, table):
        vals = [threshold_diagnostic(50, h, 2.0, table).value for h in range(1, 8)]
        assert all(a >= b - 1e-15 for a, b in zip(vals, vals[1:]))

    def test_large_h_vanishes(self, table):
        diag = threshold_diagnostic(30, 8, 2.0, table)
        assert diag.value < 1e-3

    def test_tail_bound_formula(self, table):
        diag = threshold_diagnostic(50, 2, 2.0, table)
        J, r = diag.J, diag.r
        assert diag.tail_bound == pytest.approx(
            r ** (J + 1) / ((J + 1) * (1 - r)), rel=1e-9
        )

    def test_coverage_error(self, table):
        with pytest.raises(CoverageError):
            threshold_diagnostic(200, 3, 2.0, table)


def _handmade_tree() -> MassTree:
    # root mass 6 -> children masses (3, 2); 3 -> (1, 1); 2 -> (1,)
    t = MassTree(mass=[6])
    a = t.add_child(0, 3)
    b = t.add_child(0, 2)
    t.add_child(a, 1)
    t.add_child(a, 1)
    t.add_child(b, 1)
    return t


class TestTreeStatistics:
    def test_single_vertex(self):
        t = MassTree(mass=[1])
        assert height(t) == 0
        assert s_mass_profile(t, 2).values == (0,)
        with pytest.raises(ValueError):
            macroscopic_count(t, 1.2)
        assert macroscopic_count(t, 0.3) == 0

    def test_handmade_profile(self):
        t = _handmade_tree()
        assert height(t) == 2
        assert t.check_mass_conservation()
        v2 = s_mass_profile(t, 2).values
        assert v2 == (20, 2, 0)  # (5)_2 = 20; (2)_2 + (1)_2 = 2; leaves 0
        v3 = s_mass_profile(t, 3).values
        assert v3 == (60, 0, 0)

    def test_initial_condition(self, rng):
        for n in (2, 17, 301):
            t = sample_fragmentation(n, 2.0, rng)
            for s in (2, 3):
                prof = s_mass_profile(t, s)
                expect = 1
                for i in range(s):
                    expect *= n - 1 - i
                assert prof.values[0] == max(expect, 0)

    def test_macroscopic_count(self):
        t = _handmade_tree()
        # threshold ceil(5^0.7) = 4 at delta 0.3: no child qualifies
        assert macroscopic_count(t, 0.3) == 0
        # threshold ceil(5^0.1) = 2 at delta 0.9: both children qualify
        assert macroscopic_count(t, 0.9) == 2

    def test_levels_match_empirical_contraction(self, rng):
        # quick contraction sanity at moderate size (full scale in acceptance)
        reps, n = 200, 2000
        v = np.zeros((reps, 4))
        for i in range(reps):
            t = sample_fragmentation(n, 2.0, rng, split_method="auto")
            v[i] = s_mass_profile(t, 2, max_level=3).values[:4]
        means = v.mean(axis=0)
        ratios = means[1:] / means[:-1]
        assert np.all(ratios < 1.0 / 3.0 + 0.05)
