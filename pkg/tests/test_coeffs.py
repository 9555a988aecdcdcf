"""Exactness tests for the expansion coefficient families."""

from fractions import Fraction

import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from polyschro import coeffs as C


class TestLaplacianOddCoeff:
    def test_n3_j0(self):
        assert C.laplacian_odd_coeff(3, 0) == 1

    def test_n5_j1_cancels(self):
        assert C.laplacian_odd_coeff(5, 1) == 0

    def test_n5_j0(self):
        assert C.laplacian_odd_coeff(5, 0) == -1

    @pytest.mark.parametrize("n", [3, 5, 7, 9, 11])
    def test_odd_low_order_zeros(self, n):
        for j in range(1, n - 2, 2):
            assert C.laplacian_odd_coeff(n, j) == 0

    def test_rejects_even_n(self):
        with pytest.raises(C.CoeffError):
            C.laplacian_odd_coeff(4, 0)


class TestSeriesCoeffs:
    def test_odd_m1_j7(self):
        assert sp.simplify(C.odd_series_coeff(1, 7) + sp.I) == 0

    def test_odd_m2_j2(self):
        assert C.odd_series_coeff(2, 2) == -1

    def test_odd_m2_j1(self):
        assert sp.simplify(C.odd_series_coeff(2, 1) - (1 + sp.I) / 2) == 0

    def test_m1_collapse(self):
        for j in range(41):
            assert sp.simplify(C.odd_series_coeff(1, j) - sp.I**j) == 0

    def test_even_m1_j3(self):
        assert C.even_series_coeff(1, 3) == (1, 0, 1)

    def test_even_m2_j1(self):
        g0, g10, g11 = C.even_series_coeff(2, 1)
        assert (g0, g11) == (1, 1)
        assert sp.simplify(g10 - sp.I * sp.pi / 2) == 0

    def test_even_m2_j0(self):
        g0, g10, g11 = C.even_series_coeff(2, 0)
        assert (g0, g11) == (0, 0)
        assert sp.simplify(g10 + sp.I * sp.pi) == 0

    @given(st.integers(2, 5), st.integers(0, 30))
    @settings(max_examples=40, deadline=None)
    def test_odd_branch_guard(self, m, j):
        # the closed branch and the generic branch agree exactly where both apply
        val = C.odd_series_coeff(m, j)
        if (j + 2) % (2 * m) == 0:
            assert sp.simplify(val - sp.I**j) == 0
        elif j % 2 == 0:
            assert val == 0  # even j off the principal branch cancels


class TestRieszConstants:
    @pytest.mark.parametrize("nm", [(3, 1), (5, 1), (5, 2), (7, 2), (9, 2), (6, 2), (8, 3)])
    def test_series_route_matches_gamma(self, nm):
        n, m = nm
        assert sp.simplify(C.riesz_constant(n, m) - C.gamma_riesz_constant(n, m)) == 0

    def test_known_values(self):
        assert sp.simplify(C.riesz_constant(3, 1) - 1 / (4 * sp.pi)) == 0
        assert sp.simplify(C.riesz_constant(5, 2) - 1 / (16 * sp.pi**2)) == 0
        assert sp.simplify(C.riesz_constant(5, 1) - 1 / (8 * sp.pi**2)) == 0


class TestResonanceCount:
    def test_examples(self):
        assert C.resonance_count(3, 1) == 1
        assert C.resonance_count(5, 2) == 2
        assert C.resonance_count(6, 2) == 2

    def test_rejects_out_of_range(self):
        with pytest.raises(C.CoeffError):
            C.resonance_count(9, 2)  # n > 4m
        with pytest.raises(C.CoeffError):
            C.resonance_count(4, 2)  # n <= 2m

    def test_range_bound(self):
        # on the ranges where the decay table applies, k stays within [1, m//2 + 1]
        for m in range(1, 7):
            lo = 3 * m - 1 if m % 2 == 0 else 3 * m
            for n in range(max(2 * m + 1, lo), 4 * m + 1):
                assert 1 <= C.resonance_count(n, m) <= m // 2 + 1


class TestDecayRates:
    def test_regular(self):
        assert C.decay_rate(5, 2, C.REGULAR).exponent == Fraction(5, 4)

    def test_resonance(self):
        assert C.decay_rate(5, 2, C.resonance(1)).exponent == Fraction(3, 4)

    def test_even_terminal_is_log(self):
        assert C.decay_rate(6, 2, C.resonance(2)).kind == "log"
        assert C.decay_rate(6, 2, C.EIGENVALUE).kind == "log"

    def test_odd_eigenvalue(self):
        assert C.decay_rate(5, 2, C.EIGENVALUE).exponent == Fraction(1, 4)

    def test_high_dimension_eigenvalue(self):
        assert C.decay_rate(9, 2, C.EIGENVALUE).exponent == Fraction(9, 4) - 2

    def test_rejects_resonance_above_4m(self):
        with pytest.raises(C.CoeffError):
            C.decay_rate(9, 2, C.resonance(1))

    def test_rejects_bad_kind(self):
        with pytest.raises(C.CoeffError):
            C.decay_rate(5, 2, C.resonance(3))

    @pytest.mark.parametrize("nm", [(3, 1), (5, 2), (7, 3), (6, 2), (7, 2), (11, 3)])
    def test_monotone_in_kind(self, nm):
        """Worse threshold singularity never decays faster."""
        n, m = nm
        k = C.resonance_count(n, m)
        chain = [C.decay_rate(n, m, C.REGULAR)]
        chain += [C.decay_rate(n, m, C.resonance(j)) for j in range(1, k + 1)]
        chain.append(C.decay_rate(n, m, C.EIGENVALUE))
        prev = None
        for rate in chain:
            cur = rate.exponent if rate.kind == "power" else Fraction(0)
            if prev is not None:
                assert cur <= prev
            prev = cur

    def test_exponent_denominators(self):
        for (n, m) in ((3, 1), (5, 2), (7, 3), (7, 2)):
            k = C.resonance_count(n, m)
            for j in range(1, k + 1):
                rate = C.decay_rate(n, m, C.resonance(j))
                if rate.kind == "power":
                    assert (2 * m) % rate.exponent.denominator == 0


class TestEvenLogCoeffs:
    def test_structure(self):
        d_k, c_k, d_k1 = C.even_log_coeffs(6, 2)
        assert sp.im(d_k) == 0 and d_k != 0
        assert sp.im(d_k1) == 0 and d_k1 != 0
        assert sp.simplify(sp.im(c_k)) != 0  # genuinely complex constant


def test_factorial_cap():
    with pytest.raises(C.CoeffError):
        C.laplacian_odd_coeff(3, 250)


def test_phi_convention():
    assert C.harmonic_phi(1) == -1
    assert sp.simplify(C.harmonic_phi(3) - (sp.Rational(3, 2) - sp.EulerGamma)) == 0
