"""Grid quadrature, the spectral radial Laplacian, sandwiches, and M(mu)."""

import cmath
import math

import numpy as np
import pytest
from scipy.special import gamma

from polyschro import kernels as K
from polyschro import operators as O
from polyschro.potentials import GaussianPotential, plant_bound_state, smooth_taper


class TestGrid:
    def test_gaussian_integral(self):
        g = O.get_grid(5, 12.0, 512)
        assert g.integrate(np.exp(-g.r**2)) == pytest.approx(gamma(2.5) / 2, abs=1e-10)

    def test_constant_integral(self):
        g = O.get_grid(5, 12.0, 512)
        assert g.integrate(np.ones(g.N)) == pytest.approx(12.0**5 / 5, rel=1e-12)

    def test_refinement_stability(self):
        v1 = O.get_grid(5, 12.0, 512).integrate(np.exp(-O.get_grid(5, 12.0, 512).r ** 2))
        v2 = O.get_grid(5, 12.0, 1024).integrate(np.exp(-O.get_grid(5, 12.0, 1024).r ** 2))
        assert abs(v1 - v2) < 1e-12

    def test_breakpoints_become_edges(self):
        g = O.Grid(3, 10.0, 64, 16, breakpoints=(3.3,))
        assert np.min(np.abs(g.edges - 3.3)) < 1e-12

    def test_rejects_bad_params(self):
        with pytest.raises(O.OperatorError):
            O.Grid(3, 10.0, 8)
        with pytest.raises(O.OperatorError):
            O.Grid(3, -1.0, 64)


class TestLaplacian:
    def test_apply_accuracy(self):
        g = O.get_grid(5, 18.0, 512)
        f = np.exp(-g.r**2)
        got = g.apply_laplacian_power(1, g.from_function(f))
        exact = g.from_function(-(4 * g.r**2 - 10) * np.exp(-g.r**2))
        assert np.linalg.norm(got - exact) < 1e-10 * np.linalg.norm(exact)

    def test_nonnegative(self):
        lam, _ = O.get_grid(3, 20.0, 256).laplacian_modes
        assert lam.min() > 0

    def test_exact_power_identity(self):
        pot = GaussianPotential(-0.3, 1.0)
        spec2 = O.ModelSpec(5, 2, pot, beta=20.0, R=15.0, N=128)
        spec1 = O.ModelSpec(5, 1, GaussianPotential(0.0, 1.0), beta=20.0, R=15.0, N=128)
        H2 = O.discretize_H(spec2).mat
        L = O.discretize_H(spec1).mat  # V = 0: bare radial Laplacian
        V = np.diag(pot(spec2.grid.r))
        assert np.allclose(H2, L @ L + V, atol=1e-9 * np.linalg.norm(H2, 2))

    def test_free_operator_nonnegative(self):
        spec = O.ModelSpec(5, 2, GaussianPotential(0.0, 1.0), beta=20.0, R=15.0, N=128)
        assert np.linalg.eigvalsh(O.discretize_H(spec).mat).min() >= 0

    def test_planted_bound_state(self):
        pot = plant_bound_state(-1.0, r0=4.0, eps=1.2)
        spec = O.ModelSpec(3, 1, pot, beta=50.0, R=26.0, N=512)
        ev = np.linalg.eigvalsh(O.discretize_H(spec).mat)
        assert abs(ev[0] + 1.0) < 1e-6


class TestSandwich:
    def test_constant_kernel_is_rank_one(self, weak52):
        op = O.RadialKernelOp(lambda w: np.ones_like(w), 5)
        C = O.sandwich(op, weak52).mat
        g = weak52.grid
        vy = weak52.potential.v(g.r) * g.sqrtw
        expected = K.sphere_area(5) * np.outer(vy, vy)
        assert np.linalg.norm(C - expected, 2) < 1e-10 * np.linalg.norm(expected, 2)

    def test_symmetry(self, weak52):
        A = O.kernel_shape_operator(weak52, -1)
        assert np.linalg.norm(A - A.T, 2) < 1e-12 * np.linalg.norm(A, 2)

    def test_hs_norm_stable_under_refinement(self):
        pot = GaussianPotential(-1.0, 1.0)
        norms = []
        for N in (256, 512):
            spec = O.ModelSpec(5, 2, pot, beta=20.0, R=25.0, N=N)
            A = O.kernel_shape_operator(spec, -1)
            norms.append(np.linalg.norm(A))
        assert np.isfinite(norms[1])
        assert abs(norms[0] - norms[1]) < 1e-3 * norms[1]

    def test_compactness_surrogate(self, weak52):
        A = O.kernel_shape_operator(weak52, -1)
        sv = np.linalg.svd(A, compute_uv=False)
        assert sv[-1] < 1e-8 * sv[0]


class TestBuildM:
    def test_sign_convention(self):
        pot = GaussianPotential(+0.2, 1.0)  # V >= 0 means U is the identity
        spec = O.ModelSpec(5, 2, pot, beta=20.0, R=15.0, N=128)
        assert np.all(pot.sign(spec.grid.r) == 1.0)

    def test_complex_symmetric(self, weak52):
        mu = 0.4 * cmath.exp(1j * math.pi / 4)
        M = O.build_M(mu, weak52, route="kernel").mat
        assert np.linalg.norm(M - M.T, 2) < 1e-12 * np.linalg.norm(M, 2)

    def test_kernel_route_matches_series(self, weak52):
        from polyschro.inversion import m_series

        mu = 0.03 * cmath.exp(1j * math.pi / 4)
        direct = O.build_M(mu, weak52, route="kernel").mat
        approx = m_series(weak52).evaluate(mu)
        rel = np.linalg.norm(direct - approx, 2) / np.linalg.norm(direct, 2)
        assert rel < 1e-9

    def test_kernel_vs_symbol_oracle_entry(self, weak52):
        # one matrix entry of v R0 v against the high-precision symbol route
        g = weak52.grid
        mu = 0.6 * cmath.exp(1j * math.pi / 4)
        z = K.mu_to_z(mu, 2)
        i, j = 40, 133
        op = O.RadialKernelOp(lambda w: K.free_resolvent_kernel(5, 2, z, w), 5,
                              oscillation=abs(mu) ** 2)
        got = op.kbar(np.array([g.r[i]]), np.array([g.r[j]]))[0]

        import mpmath as mp

        def integrand(w):
            return (K.free_resolvent_kernel(5, 2, z, float(w))
                    * ((g.r[i] + g.r[j]) ** 2 - w**2) * (w**2 - (g.r[i] - g.r[j]) ** 2) * w)

        lo, hi = abs(g.r[i] - g.r[j]), g.r[i] + g.r[j]
        val = mp.quad(integrand, [lo, hi])
        pref = K.sphere_area(4) * (g.r[i] * g.r[j]) ** -3 / 4
        assert abs(got - complex(val) * pref) < 1e-10 * abs(got)


class TestWeightedNorms:
    def test_zero_function(self, weak52):
        assert O.weighted_norm(np.zeros(weak52.grid.N), 2.0, weak52.grid) == 0.0

    def test_weight_cancellation(self, weak52):
        g = weak52.grid
        rng = np.random.default_rng(0)
        base = rng.normal(size=g.N)
        base /= np.linalg.norm(base)
        f = (1 + g.r) ** (-2.5) * base
        assert O.weighted_norm(f, 2.5, g) == pytest.approx(1.0, rel=1e-12)

    def test_riesz_mapping_bound(self):
        # the zero-energy kernel is bounded between weighted spaces once the
        # weights clear the mapping thresholds
        spec = O.ModelSpec(5, 2, GaussianPotential(-1.0, 1.0), beta=20.0, R=40.0, N=512)
        G0 = K.riesz_kernel(5, 2, 1.0) * O.kernel_shape_operator(spec, -1, sandwiched=False)
        norms = []
        for R, N in ((40.0, 512), (60.0, 768)):
            sp2 = O.ModelSpec(5, 2, GaussianPotential(-1.0, 1.0), beta=20.0, R=R, N=N)
            G = K.riesz_kernel(5, 2, 1.0) * O.kernel_shape_operator(sp2, -1, sandwiched=False)
            norms.append(O.bss_operator_norm(G.real, sp2.grid, 2.51, 2.51))
        assert norms[1] < norms[0] * 1.05  # bounded, not growing with the domain

    def test_lp_norms(self, weak52):
        g = weak52.grid
        f = np.exp(-g.r)
        y = g.from_function(f)
        assert O.lp_norm(y, math.inf, g) == pytest.approx(f.max())
        assert O.lp_norm(y, 2, g) == pytest.approx(np.linalg.norm(y), rel=1e-12)


class TestModelSpec:
    def test_roundtrip(self, weak52):
        d = weak52.to_dict()
        back = O.ModelSpec.from_dict(d)
        assert back.to_dict() == d

    def test_decay_envelope(self, weak52):
        assert np.isfinite(weak52.decay_envelope_constant())

    def test_beta_hypothesis_guard(self, weak52):
        with pytest.raises(O.OperatorError):
            weak52.check_beta(25.0, "test hypothesis")
