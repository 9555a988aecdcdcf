"""Series arithmetic, block inversion, and the threshold expansion of M^{-1}."""

import cmath
import math
from fractions import Fraction

import numpy as np
import pytest

from polyschro import coeffs as C
from polyschro import inversion as I
from polyschro import operators as O
from polyschro import threshold as T


class TestFeshbach:
    def test_plain_inverse_when_projection_zero(self, rng):
        A = rng.normal(size=(6, 6))
        A = A @ A.T + np.eye(6)
        res = I.feshbach_inverse(A, np.zeros((6, 6)))
        assert res.invertible
        assert np.linalg.norm(A @ res.inverse - np.eye(6), 2) < 1e-10

    def test_diagonal_example(self):
        A = np.diag([1.0, 0.5])
        S = np.diag([0.0, 1.0])
        res = I.feshbach_inverse(A, S)
        assert np.allclose(res.inverse, np.diag([1.0, 2.0]))

    def test_singular_detected(self):
        res = I.feshbach_inverse(np.diag([1.0, 0.0]), np.diag([0.0, 1.0]))
        assert not res.invertible and res.inverse is None


class TestSeriesArithmetic:
    def _series(self, rng, d=4):
        A = rng.normal(size=(d, d))
        B = rng.normal(size=(d, d))
        return I.LaurentLogSeries({(Fraction(0), 0): A, (Fraction(1), 0): B}, d, rem=Fraction(3))

    def test_multiplicative_identity(self, rng):
        a = self._series(rng)
        one = a.identity_like()
        prod = I.series_arithmetic(a, one, "multiply")
        for k in a.terms:
            assert np.allclose(prod.terms[k], a.terms[k])

    def test_negative_power_product(self, rng):
        d = 3
        A = rng.normal(size=(d, d))
        B = rng.normal(size=(d, d))
        a = I.LaurentLogSeries({(Fraction(-1), 0): A}, d)
        b = I.LaurentLogSeries({(Fraction(1), 0): B}, d)
        prod = a @ b
        assert list(prod.terms) == [(Fraction(0), 0)]
        assert np.allclose(prod.terms[(Fraction(0), 0)], A @ B)

    def test_truncation_bookkeeping(self, rng):
        a = self._series(rng)
        b = self._series(rng)
        prod = a @ b
        assert prod.rem == Fraction(3)  # min over cross-terms with lead 0
        tr = I.series_arithmetic(prod, None, "truncate", budget=Fraction(1))
        assert all(k[0] < 1 for k in tr.terms)

    def test_evaluation_matches_terms(self, rng):
        a = self._series(rng)
        z = 0.05 + 0.02j
        direct = a.terms[(Fraction(0), 0)] + z * a.terms[(Fraction(1), 0)]
        assert np.allclose(a.evaluate(z), direct)

    def test_dimension_mismatch_rejected(self, rng):
        a = self._series(rng, d=4)
        b = self._series(rng, d=5)
        with pytest.raises(I.InversionError):
            a @ b


class TestInvertSeries:
    def test_regular_neumann(self, rng):
        d = 8
        Q, _ = np.linalg.qr(rng.normal(size=(d, d)))
        T0 = Q @ np.diag(np.linspace(1, 3, d)) @ Q.T
        T1 = rng.normal(size=(d, d))
        T1 = 0.5 * (T1 + T1.T)
        ser = I.LaurentLogSeries({(Fraction(0), 0): T0, (Fraction(1), 0): T1}, d, rem=None)
        inv = I.invert_series(ser, Fraction(4))
        # matches the closed Neumann coefficients
        D = np.linalg.inv(T0)
        assert np.allclose(inv.coefficient(0), D)
        assert np.allclose(inv.coefficient(1), -D @ T1 @ D)
        prod = ser @ inv
        for k, A in prod.terms.items():
            target = np.eye(d) if k == (Fraction(0), 0) else 0.0
            assert np.linalg.norm(A - target, 2) < 1e-10

    def test_scalar_family(self):
        ser = I.LaurentLogSeries({(Fraction(1), 0): np.array([[1.0]])}, 1, rem=None)
        inv = I.invert_series(ser, Fraction(1))
        assert list(inv.terms) == [(Fraction(-1), 0)]
        assert inv.terms[(Fraction(-1), 0)][0, 0] == pytest.approx(1.0)

    def test_identity_slope_verified(self, rng):
        """T(z) (series of T(z)^{-1}) = I + O(z^{budget}) at every level."""
        d = 9
        Q, _ = np.linalg.qr(rng.normal(size=(d, d)))
        vals = np.linspace(1, 2, d)
        vals[-1] = 0.0
        T0 = Q @ np.diag(vals) @ Q.T
        T1 = rng.normal(size=(d, d))
        T1 = 0.5 * (T1 + T1.T)
        ser = I.LaurentLogSeries({(Fraction(0), 0): T0, (Fraction(1), 0): T1}, d, rem=None)
        budget = 3
        inv = I.invert_series(ser, Fraction(budget))
        zs = np.geomspace(1e-1, 1e-3, 5)
        defects = [np.linalg.norm(ser.evaluate(z) @ inv.evaluate(z) - np.eye(d), 2)
                   for z in zs]
        slope = np.polyfit(np.log(zs), np.log(defects), 1)[0]
        assert slope > budget - 0.2


class TestJnExpand:
    def test_neumann_case(self, rng):
        d = 6
        Q, _ = np.linalg.qr(rng.normal(size=(d, d)))
        T0 = Q @ np.diag(np.linspace(1, 2, d)) @ Q.T
        T1m = rng.normal(size=(d, d))
        T1m = 0.5 * (T1m + T1m.T)
        T1 = I.LaurentLogSeries.constant(T1m)
        tilde, inv = I.jn_expand(T0, T1, np.zeros((d, d)), order=3)
        D = np.linalg.inv(T0)
        assert np.allclose(inv.coefficient(0), D)
        assert np.allclose(inv.coefficient(1), -D @ T1m @ D)

    def test_scalar_case(self):
        # T(z) = z: the compressed operator is 1 and the inverse is 1/z
        T0 = np.zeros((1, 1))
        S = np.eye(1)
        T1 = I.LaurentLogSeries.constant(np.eye(1))
        tilde, inv = I.jn_expand(T0, T1, S, order=2)
        assert tilde.coefficient(0)[0, 0] == pytest.approx(1.0)
        assert inv.terms[(Fraction(-1), 0)][0, 0] == pytest.approx(1.0)

    def test_projection_must_annihilate(self, rng):
        d = 4
        T0 = np.eye(d)
        with pytest.raises(I.InversionError):
            I.jn_expand(T0, I.LaurentLogSeries.constant(np.eye(d)), np.eye(d), 2)


class TestModelSeries:
    def test_regular_constant_term(self, weak52):
        cls, chain = T.classify_zero(weak52)
        Minv = I.invert_M_series(weak52, chain=chain)
        T0, _ = T.chain_operators(weak52)
        assert np.linalg.norm(Minv.coefficient(0) - np.linalg.inv(T0), 2) < 1e-10

    def test_regular_oracle(self, weak52):
        Minv = I.invert_M_series(weak52)
        mu = 0.02 * cmath.exp(1j * math.pi / 4)
        direct = np.linalg.inv(O.build_M(mu, weak52, route="kernel").mat)
        rel = np.linalg.norm(Minv.evaluate(mu) - direct, 2) / np.linalg.norm(direct, 2)
        assert rel < 1e-9

    def test_eigenvalue_leading_term(self, plant52):
        cls, chain = T.classify_zero(plant52)
        Minv = I.invert_M_series(plant52, chain=chain, budget=Fraction(0))
        lead = Minv.lead_key()
        assert lead == (Fraction(-4), 0)
        T0, ladder = T.chain_operators(plant52)
        Sb = chain.bases[-1]
        expected = Sb @ np.linalg.inv(Sb.T @ ladder[-1] @ Sb) @ Sb.T
        rel = np.linalg.norm(Minv.terms[lead] - expected, 2) / np.linalg.norm(expected, 2)
        assert rel < 1e-8

    def test_final_stage_invertibility(self, plant52):
        """The terminal chain operator has trivial kernel on its subspace."""
        cls, chain = T.classify_zero(plant52)
        T0, ladder = T.chain_operators(plant52)
        Sb = chain.bases[-1]
        Tlast = Sb.T @ ladder[-1] @ Sb
        sv = np.linalg.svd(Tlast, compute_uv=False)
        assert sv[-1] > 1e-8 * np.linalg.norm(ladder[-1], 2)

    def test_rv_regular_constant(self, weak52):
        cls, chain = T.classify_zero(weak52)
        rv = I.rv_expansion(weak52, chain=chain)
        g = weak52.grid
        c0 = float(np.real(C.as_complex(C.riesz_constant(5, 2))))
        G0 = c0 * O.kernel_shape_operator(weak52, -1, sandwiched=False).real
        T0, _ = T.chain_operators(weak52)
        v = weak52.potential.v(g.r)
        A0 = G0 - G0 @ (v[:, None] * np.linalg.inv(T0) * v[None, :]) @ G0
        assert np.linalg.norm(rv.coefficient(0) - A0, 2) < 1e-8 * np.linalg.norm(A0, 2)

    def test_rv_eigenvalue_rank(self, plant52):
        cls, chain = T.classify_zero(plant52)
        rv = I.rv_expansion(plant52, chain=chain, budget=Fraction(0))
        lead = rv.lead_key()
        sv = np.linalg.svd(rv.terms[lead], compute_uv=False)
        rank = int(np.sum(sv > 1e-8 * sv[0]))
        assert rank == chain.ranks[-1] == 1

    def test_selfadjoint_coefficient_structure(self, weak52):
        Minv = I.invert_M_series(weak52)
        for rep in Minv.term_report():
            # regular odd-dimension constants at integer multiples of 2m are
            # selfadjoint; the odd powers carry the non-real scalars
            if int(Fraction(rep["p"])) % 4 == 0:
                assert rep["selfadjoint"]

    def test_weighted_identity_grid_route(self, rng):
        from polyschro.potentials import GaussianPotential

        spec = O.ModelSpec(3, 1, GaussianPotential(-1.0, 1.5), beta=20.0, R=30.0, N=256)
        worst = 0.0
        for _ in range(5):
            mu = (0.3 + rng.random()) * cmath.exp(1j * (0.4 + 2.0 * rng.random()))
            worst = max(worst, I.weighted_resolvent_identity_defect(spec, mu, route="grid"))
        assert worst < 1e-9

    def test_chain_mismatch_detected(self, weak52, plant52):
        cls, chain_plant = T.classify_zero(plant52)
        with pytest.raises(I.InversionError):
            I.invert_M_series(weak52, chain=chain_plant)
