"""Projection-chain classification on planted and generic models."""

import numpy as np
import pytest

from polyschro import coeffs as C
from polyschro import threshold as T
from polyschro.operators import ModelSpec
from polyschro.potentials import GaussianPotential, plant_zero_eigenvalue, plant_zero_resonance


class TestKernelProjection:
    def test_identity_has_no_kernel(self):
        basis, diag = T.kernel_projection(np.eye(8))
        assert basis.shape[1] == 0 and diag.gap == np.inf

    def test_planted_null_vector(self, rng):
        A = rng.normal(size=(12, 12))
        A = A @ A.T + np.eye(12)
        u = rng.normal(size=12)
        u /= np.linalg.norm(u)
        P = np.eye(12) - np.outer(u, u)
        Tm = P @ A @ P  # symmetric with kernel exactly span(u)
        basis, diag = T.kernel_projection(Tm)
        assert diag.rank == 1
        S = basis @ basis.T
        assert np.linalg.norm(S - np.outer(u, u), 2) < 1e-8

    def test_zero_matrix_full_kernel(self):
        basis, diag = T.kernel_projection(np.zeros((5, 5)), scale_hint=1.0)
        assert diag.rank == 5 and diag.zero_operator


class TestClassification:
    def test_regular(self, weak52):
        cls, chain = T.classify_zero(weak52)
        assert cls.kind == "regular"
        assert cls.decay(5, 2).exponent is not None

    def test_planted_eigenvalue(self, plant52):
        cls, chain = T.classify_zero(plant52)
        assert cls.kind == "eigenvalue"
        assert cls.ranks == [1, 1, 1]  # purely an eigenvalue: constant ranks
        assert not cls.mixed

    def test_planted_first_kind(self, resonance52):
        cls, _ = T.classify_zero(resonance52)
        assert cls.kind == "resonance"
        assert cls.resonance_order == 1

    def test_high_dimension_plant_is_eigenvalue(self):
        spec = ModelSpec(9, 2, plant_zero_eigenvalue(9, 2, r0=4.0, eps=1.2),
                         beta=30.0, R=18.0, N=384)
        cls, chain = T.classify_zero(spec)
        assert cls.kind == "eigenvalue"
        assert len(cls.ranks) == 1  # the chain for n > 4m stops after one stage

    def test_31_resonance(self):
        spec = ModelSpec(3, 1, plant_zero_resonance(3, 1, kind=1, r0=4.0, eps=1.2),
                         beta=30.0, R=26.0, N=384)
        cls, _ = T.classify_zero(spec)
        assert cls.kind == "resonance" and cls.resonance_order == 1

    def test_chain_relations(self, plant52):
        """Nesting and the regularized-inverse relations hold on the chain."""
        _, chain = T.classify_zero(plant52)
        for j in range(len(chain.projections) - 1):
            S1, S2 = chain.projections[j], chain.projections[j + 1]
            assert np.linalg.norm(S2 @ S1 - S2, 2) < 1e-10
            assert np.linalg.norm(S1 @ S2 - S2, 2) < 1e-10
        # D_j S_{j+1} = S_{j+1} and S_j D_j = D_j in the full-space embedding
        for j in range(1, len(chain.regularized_inverses)):
            Dj = chain.regularized_inverses[j]
            Sj = chain.projections[j - 1]
            assert np.linalg.norm(Sj @ Dj - Dj, 2) < 1e-10 * np.linalg.norm(Dj, 2)
            if j < len(chain.projections):
                Sj1 = chain.projections[j]
                assert np.linalg.norm(Dj @ Sj1 - Sj1, 2) < 1e-8

    def test_rank_monotone(self, plant52):
        _, chain = T.classify_zero(plant52)
        ranks = chain.ranks
        assert all(ranks[i + 1] <= ranks[i] for i in range(len(ranks) - 1))


class TestMoments:
    def test_eigen_plant_moments_vanish(self, plant52):
        cls, chain = T.classify_zero(plant52)
        phi = chain.bases[0][:, 0]
        k = C.resonance_count(5, 2)
        moments = T.moment_conditions(phi, plant52, degree=k - 1)
        assert all(flag for _, flag in moments)

    def test_resonance_plant_zeroth_moment_survives(self, resonance52):
        cls, chain = T.classify_zero(resonance52)
        phi = chain.bases[0][:, 0]
        moments = T.moment_conditions(phi, resonance52, degree=0)
        assert not moments[0][1]

    def test_phi_equals_v_gives_nonzero(self, weak52):
        g = weak52.grid
        phi = weak52.potential.v(g.r) * g.sqrtw
        phi /= np.linalg.norm(phi)
        moments = T.moment_conditions(phi, weak52, degree=0)
        assert not moments[0][1]


class TestReconstruction:
    def test_planted_state_recovered(self, plant52):
        cls, chain = T.classify_zero(plant52)
        phi = chain.bases[0][:, 0]
        psi, report = T.reconstruct_threshold_function(phi, plant52)
        g = plant52.grid
        target = g.from_function(plant52.potential.psi(g.r))
        target /= np.linalg.norm(target)
        got = psi / np.linalg.norm(psi)
        align = abs(np.dot(got, target))
        assert align > 1 - 1e-6
        assert report["defining_residual"] < 1e-6
        assert report["interior_H_residual"] < 1e-4

    def test_zero_in_zero_out(self, plant52):
        psi, report = T.reconstruct_threshold_function(np.zeros(plant52.grid.N), plant52)
        assert np.all(psi == 0)


class TestCouplingSweep:
    def test_bisection_and_transition(self):
        spec = ModelSpec(5, 2, GaussianPotential(-1.0, 1.5), beta=20.0, R=30.0, N=256)
        lam_bs = T.birman_schwinger_coupling(spec)
        lam_h, width = T.coupling_bisection(spec, 0.5 * lam_bs, 1.5 * lam_bs,
                                            tol_coupling=1e-6)
        assert width <= 1e-6
        below, _ = T.classify_zero(T.scaled_spec(spec, 0.98 * lam_bs))
        at, _ = T.classify_zero(T.scaled_spec(spec, lam_bs), tol=1e-5)
        assert below.kind == "regular"
        assert at.kind != "regular"
        # both detectors see the same transition up to domain-truncation bias
        assert abs(lam_h - lam_bs) / lam_bs < 0.2

    def test_bs_requires_attractive(self, weak52):
        from polyschro.potentials import ExponentialPotential

        spec = ModelSpec(5, 2, ExponentialPotential(+1.0, 1.0), beta=20.0, R=30.0, N=256)
        with pytest.raises(T.ThresholdError):
            T.birman_schwinger_coupling(spec)
