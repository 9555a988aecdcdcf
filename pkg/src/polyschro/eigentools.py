"""Virial identities, absence-of-positive-eigenvalue scans, Rellich constants,
and the compactly-supported potential carrying an embedded eigenvalue.

The virial identity for an eigenpair (lambda, psi) of h(D) + V with h
homogeneous of degree rho reads

    rho (psi, h(D) psi) = (psi, r V'(r) psi) = rho (psi, (lambda - V) psi),

where the dilation derivative r V'(r) is evaluated analytically per
potential family.  On the radial grid h(D) = (-Delta)^m with rho = 2m.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import operators
from .operators import ModelSpec
from .potentials import BesselPotentialTail, BlendPlantPotential, smooth_taper


class EigenToolsError(ValueError):
    pass


@dataclass(frozen=True)
class HomogeneousSymbol:
    """Nonnegative symbol h with h(gamma xi) = gamma^rho h(xi)."""

    rho: float

    def check_scaling(self, evaluator, samples: np.ndarray, gammas=(0.5, 2.0, 3.0),
                      rtol: float = 1e-10) -> bool:
        xi = np.asarray(samples, dtype=float)
        base = evaluator(xi)
        for g in gammas:
            if not np.allclose(evaluator(g * xi), g**self.rho * base, rtol=rtol):
                return False
        return True


@dataclass
class VirialReport:
    eigenvalue: float
    kinetic: float               # (psi, h(D) psi)
    potential_dilation: float    # (psi, r V'(r) psi)
    residual: float              # |rho*kinetic - dilation| relative
    residual_alt: float          # |rho (psi,(lam-V)psi) - rho*kinetic| relative
    eigen_residual: float
    cap_radius: float | None = None
    valid: bool = True
    note: str = ""

    def to_dict(self) -> dict:
        return {
            "eigenvalue": self.eigenvalue,
            "kinetic": self.kinetic,
            "potential_dilation": self.potential_dilation,
            "residual": self.residual,
            "residual_alt": self.residual_alt,
            "eigen_residual": self.eigen_residual,
            "cap_radius": self.cap_radius,
            "valid": self.valid,
            "note": self.note,
        }


def virial_check(spec: ModelSpec, eigenpair, eigen_rtol: float = 1e-6) -> VirialReport:
    """Test the dilation identity on a converged grid eigenpair (lam, psi)."""
    lam, psi = eigenpair
    g = spec.grid
    psi = np.asarray(psi, dtype=float)
    nrm2 = float(np.dot(psi, psi))
    if nrm2 == 0.0:
        return VirialReport(lam, 0.0, 0.0, 0.0, 0.0, 0.0, note="zero vector")
    dil = spec.potential.x_grad_V(g.r)
    if dil is None:
        raise EigenToolsError(
            f"potential family {spec.potential.name!r} has no closed-form "
            "dilation derivative; the virial identity needs one"
        )
    rho = 2.0 * spec.m
    V = spec.potential(g.r)
    kin = float(psi @ g.apply_laplacian_power(spec.m, psi))
    dil_term = float(np.sum(dil * psi**2))
    pot_route = rho * float(lam * nrm2 - np.sum(V * psi**2))
    H = operators.discretize_H(spec).mat
    eig_res = float(np.linalg.norm(H @ psi - lam * psi) / math.sqrt(nrm2))
    scale = max(abs(rho * kin), abs(dil_term), 1e-300)
    rep = VirialReport(
        eigenvalue=float(lam),
        kinetic=kin,
        potential_dilation=dil_term,
        residual=abs(rho * kin - dil_term) / scale,
        residual_alt=abs(pot_route - rho * kin) / scale,
        eigen_residual=eig_res,
        cap_radius=getattr(spec.potential, "delta", None),
    )
    if eig_res > eigen_rtol * max(abs(lam), 1.0):
        rep.valid = False
        rep.note = "eigenpair residual too large; report not meaningful"
    return rep


def positive_eigenvalue_scan(spec: ModelSpec, sd=None,
                             participation_frac: float = 0.05) -> list:
    """Suspect embedded eigenpairs: lambda > 0 with low participation ratio.

    For repulsive potentials (r V'(r) <= 0 on the grid) the expected output
    is empty.
    """
    from .dynamics import spectral_decompose

    if sd is None:
        sd = spectral_decompose(spec, participation_frac=participation_frac)
    out = []
    scale = float(np.max(np.abs(sd.eigenvalues)))
    for idx in np.nonzero(
        (sd.eigenvalues > 1e-12 * scale)
        & (sd.eigenvalues <= sd.lam_trust)
        & (sd.participation < participation_frac * spec.grid.N)
    )[0]:
        out.append({
            "eigenvalue": float(sd.eigenvalues[idx]),
            "participation_ratio": float(sd.participation[idx]),
            "index": int(idx),
        })
    return out


def is_repulsive(spec: ModelSpec) -> bool:
    dil = spec.potential.x_grad_V(spec.grid.r)
    if dil is None:
        raise EigenToolsError("repulsiveness test needs the dilation derivative")
    return bool(np.all(np.asarray(dil) <= 1e-14))


def rellich_constant(m: int, p, n: int) -> Fraction:
    """Exact p^{2m} / prod_{l=1}^m (n - 2lp)(2(l-1)p + (p-1)n); needs n > 2mp."""
    p = Fraction(p)
    if not p > 1:
        raise EigenToolsError("Rellich constant needs 1 < p < inf")
    if not n > 2 * m * p:
        raise EigenToolsError(f"Rellich constant needs n > 2mp, got n={n}, 2mp={2 * m * p}")
    denom = Fraction(1)
    for ell in range(1, m + 1):
        denom *= (n - 2 * ell * p) * (2 * (ell - 1) * p + (p - 1) * n)
    out = p ** (2 * m) / denom
    assert out > 0
    return out


@dataclass
class Counterexample:
    """Compactly supported potential with an embedded eigenvalue at +1."""

    potential: BlendPlantPotential
    eigenvalue: float
    n: int
    m: int
    support_radius: float

    def phi(self, r):
        return self.potential.psi(r)

    def grid_residual(self, spec: ModelSpec, taper=(0.55, 0.8)) -> float:
        """Relative residual of (L^m + V) phi = phi on the interior nodes."""
        g = spec.grid
        a = g.edges[np.searchsorted(g.edges, taper[0] * g.R)]
        b = g.edges[np.searchsorted(g.edges, taper[1] * g.R)]
        chi = smooth_taper(g.r, a, b, 9)
        y = g.from_function(self.phi(g.r) * chi)
        Vt = spec.potential(g.r)
        res = g.apply_laplacian_power(spec.m, y, precise=True) + (Vt - self.eigenvalue) * y
        inner = g.r < a - 0.5
        return float(np.linalg.norm(res[inner]) / np.linalg.norm(y))


def build_counterexample(m: int, n: int = 3, r0: float = 4.0, eps: float = 1.2,
                         order: int = 11) -> Counterexample:
    """Radial (V, phi) with (-Delta)^m phi + V phi = phi, V supported in a ball.

    The tail is the kernel of (1 - Delta)^{-1}, which even powers of the
    Laplacian reproduce away from the origin; the blend to a constant core
    stays positive because it is a convex combination of positive profiles.
    """
    if m % 2 != 0 or m < 2:
        raise EigenToolsError("the embedded-eigenvalue construction needs even m >= 2")
    if n < 3:
        raise EigenToolsError("need n >= 3")
    tail = BesselPotentialTail(n)
    phi_r0 = float(tail.deriv(0, np.array([r0]))[0])
    pot = BlendPlantPotential(
        n, m, 0, r0, eps, order, core_value=phi_r0 * 1.0, tail_coeff=1.0,
        energy=1.0, tail_kind="bessel",
    )
    # positivity spot-check of the blended profile
    rs = np.linspace(1e-3, r0 + 2 * eps, 1000)
    if np.any(pot.psi(rs) <= 0):
        raise EigenToolsError("blend lost positivity; widen the annulus")
    return Counterexample(pot, 1.0, n, m, pot.support_radius)


def birman_solomyak_integral(spec: ModelSpec) -> float:
    """int V_-^{n/2m} over the grid, the bound-state counting integral."""
    g = spec.grid
    V = spec.potential(g.r)
    vminus = np.maximum(-V, 0.0)
    return g.integrate(vminus ** (spec.n / (2 * spec.m)))
