"""Kernel evaluation: splitting identity, closed forms, radial reduction,
threshold ladders, and the free time propagator."""

import cmath
import math

import numpy as np
import pytest

from polyschro import kernels as K


class TestSplitting:
    def test_identity_case(self):
        assert K.splitting_nodes(-1.0, 1) == [pytest.approx(-1.0 + 0j)]

    def test_m2_roots_of_minus_one(self):
        nodes = K.splitting_nodes(-1.0, 2)
        assert nodes[0] == pytest.approx(1j)
        assert nodes[1] == pytest.approx(-1j)

    def test_partial_fraction_bruteforce(self, rng):
        worst = 0.0
        for m in (1, 2, 3, 4):
            for _ in range(250):
                z = complex(rng.normal(), rng.normal())
                if abs(z.imag) < 1e-3:
                    z += 0.5j
                s = complex(rng.normal(), rng.normal())
                nodes = K.splitting_nodes(z, m)
                lhs = 1.0 / (s**m - z)
                rhs = sum(zl / (s - zl) for zl in nodes) / (m * z)
                worst = max(worst, abs(lhs - rhs))
        assert worst < 1e-12

    def test_roots_upper_half(self):
        for m in (1, 2, 3, 4, 5):
            for zl in K.splitting_nodes(0.3 + 0.7j, m):
                assert K.sqrt_upper(zl).imag > 0

    def test_branch_cut_rejected(self):
        with pytest.raises(K.KernelError):
            K.splitting_nodes(2.0 + 0j, 2)


class TestLaplaceKernels:
    def test_yukawa(self):
        assert K.free_resolvent_kernel(3, 1, -1.0, 1.0) == pytest.approx(
            math.exp(-1) / (4 * math.pi), rel=1e-13)

    def test_n5_closed_form(self):
        w = 1.7
        expected = math.exp(-w) * (1 + w) / (8 * math.pi**2 * w**3)
        assert K.laplace_resolvent_kernel(5, -1.0, w) == pytest.approx(expected, rel=1e-12)

    def test_m1_reduction(self):
        z = 0.4 + 0.9j
        for r in (0.5, 2.0):
            assert K.free_resolvent_kernel(5, 1, z, r) == pytest.approx(
                K.laplace_resolvent_kernel(5, z, r), rel=1e-13)

    @pytest.mark.parametrize("nmzr", [
        (3, 2, -1.0 + 0j, 1.3),
        (5, 2, 0.3 + 0.4j, 0.9),
        (7, 3, -0.5 + 0.2j, 1.1),
    ])
    def test_against_symbol_quadrature(self, nmzr):
        n, m, z, r = nmzr
        split = K.free_resolvent_kernel(n, m, z, r)
        oracle = K.fourier_symbol_kernel(n, m, z, r)
        assert abs(split - oracle) < 1e-8 * max(abs(oracle), 1e-10)

    def test_conjugate_symmetry(self):
        # reflecting z across the cut conjugates the kernel
        z = 0.5 + 0.8j
        a = K.free_resolvent_kernel(5, 2, z, 1.2)
        b = K.free_resolvent_kernel(5, 2, z.conjugate(), 1.2)
        assert b == pytest.approx(a.conjugate(), rel=1e-12)


class TestRieszKernel:
    def test_values(self):
        assert K.riesz_kernel(3, 1, 1.0) == pytest.approx(1 / (4 * math.pi), rel=1e-12)
        assert K.riesz_kernel(5, 2, 1.0) == pytest.approx(1 / (16 * math.pi**2), rel=1e-12)
        assert K.riesz_kernel(5, 1, 2.0) == pytest.approx(
            (1 / (8 * math.pi**2)) * 2.0**-3, rel=1e-12)

    def test_rejects_origin(self):
        with pytest.raises(K.KernelError):
            K.riesz_kernel(5, 2, 0.0)


class TestRadialAverage:
    def test_constant_kernel(self):
        for n in (3, 4, 5, 6, 7):
            vals = K.radial_average(lambda w: np.ones_like(w), n,
                                    np.array([1.0, 0.4]), np.array([2.0, 3.1]))
            assert np.allclose(vals.real, K.sphere_area(n), rtol=1e-12)

    def test_newton_kernel_n3(self):
        # spherical average of 1/(4 pi |x-y|) is 1/max(r, rho)
        r = np.array([1.0, 2.0, 0.3])
        rho = np.array([2.0, 0.5, 0.3001])
        got = K.radial_average(lambda w: 1 / (4 * math.pi * w), 3, r, rho)
        assert np.allclose(got.real, 1 / np.maximum(r, rho), rtol=1e-12)

    def test_power_kernel_n5_vs_quad(self):
        from scipy.integrate import quad

        r, rho, alpha = 1.3, 0.8, -1.0
        exact, _ = quad(
            lambda th: (r**2 + rho**2 - 2 * r * rho * math.cos(th)) ** (alpha / 2)
            * math.sin(th) ** 3, 0, math.pi)
        exact *= K.sphere_area(4)
        got = K.radial_average(K.power_kernel(alpha), 5, np.array([r]), np.array([rho]))[0]
        assert got.real == pytest.approx(exact, rel=1e-10)


class TestThresholdExpansion:
    def test_case_52_powers(self):
        lad = K.threshold_expansion(5, 2)
        assert lad.case == "odd_low"
        assert [int(t.p) for t in lad.terms] == [0, 1, 3, 4]
        assert int(lad.remainder_order) == 5
        # first and last coefficients are real, middle ones are not
        assert abs(lad.terms[0].coeff.imag) < 1e-15
        assert abs(lad.terms[3].coeff.imag) < 1e-15
        assert abs(lad.terms[1].coeff.imag) > 1e-10
        assert abs(lad.terms[2].coeff.imag) > 1e-10

    def test_case_92_structure(self):
        lad = K.threshold_expansion(9, 2)
        assert lad.case == "odd_high"
        powers = [int(t.p) for t in lad.terms]
        assert powers[:3] == [0, 4, 5]  # G_0 + mu^{2m} G_1 + mu^{n-2m} G_aleph
        assert lad.terms[2].alpha == 0  # the non-selfadjoint constant-kernel term
        assert abs(lad.terms[2].coeff.imag) > 1e-10

    def test_case_62_log_group(self):
        lad = K.threshold_expansion(6, 2)
        assert lad.case == "even_low"
        assert lad.gdef is not None
        d_k, c_k = lad.gdef
        assert abs(d_k.imag) < 1e-14 and d_k.real != 0
        assert abs(c_k.imag) > 1e-12
        logmu_terms = [t for t in lad.terms if t.logmu == 1]
        logr_terms = [t for t in lad.terms if t.logr == 1]
        assert logmu_terms and logr_terms
        assert all(int(t.p) == 4 for t in logmu_terms + logr_terms)

    @pytest.mark.parametrize("nm,mu_abs", [((5, 2), 3e-2), ((3, 1), 1e-2), ((9, 2), 5e-2)])
    def test_expansion_consistency(self, nm, mu_abs):
        """Truncation error scales at the first omitted order."""
        n, m = nm
        lad = K.threshold_expansion(n, m)
        r = 1.1
        rem = float(lad.remainder_order)
        errs, mags = [], []
        for scale in (1.0, 0.5):
            mu = scale * mu_abs * cmath.exp(1j * math.pi / (2 * m) * 0.5)
            exact = K.free_resolvent_kernel(n, m, K.mu_to_z(mu, m), r)
            approx = lad.evaluate(mu, np.array([r]))[0]
            errs.append(abs(exact - approx))
            mags.append(abs(exact))
        if errs[0] < 1e-12 * mags[0]:
            return  # truncation already below the float floor; nothing to fit
        slope = math.log(errs[0] / errs[1]) / math.log(2.0)
        assert slope > rem - 0.6


class TestPropagator:
    def test_free_schrodinger_modulus(self):
        for t in (10.0, 200.0):
            v = abs(K.free_propagator_kernel(3, 1, t, 0.4 * math.sqrt(t)))
            assert v == pytest.approx((4 * math.pi * t) ** -1.5, rel=1e-10)

    @pytest.mark.parametrize("nm", [(3, 1), (5, 2), (7, 3)])
    def test_sup_scaling(self, nm):
        n, m = nm
        s1 = K.free_propagator_sup(n, m, 100.0, num_r=16)
        s2 = K.free_propagator_sup(n, m, 400.0, num_r=16)
        slope = math.log(s1 / s2) / math.log(4.0)
        assert slope == pytest.approx(n / (2 * m), rel=1e-3)
