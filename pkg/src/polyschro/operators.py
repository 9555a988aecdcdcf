"""Radial grids, the discretized Hamiltonian, and sandwiched kernel matrices.

Grid functions are stored in "half-weighted" coordinates y_i = sqrt(w_i) f(r_i),
so the quadrature inner product is the plain dot product and selfadjoint
operators are symmetric matrices.

The radial Laplacian is assembled spectrally: the exact Dirichlet eigenpairs
on (0, R) are r^{1-n/2} J_{n/2-1}(xi_k r / R) with eigenvalues (xi_k/R)^2;
their sampled, half-weighted columns are orthonormalized once (QR) and
L = Q diag(lambda) Q^T.  Powers L^m = Q diag(lambda^m) Q^T are then exact,
symmetric and nonnegative by construction.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

import numpy as np
from scipy.optimize import brentq
from scipy.special import jv, roots_legendre

from . import coeffs, kernels
from .potentials import RadialPotential, potential_from_dict


class OperatorError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Bessel zeros
# ---------------------------------------------------------------------------

@lru_cache(maxsize=None)
def bessel_zeros(nu: float, count: int) -> np.ndarray:
    """First `count` positive zeros of J_nu, via McMahon brackets + brentq."""
    if abs(nu - 0.5) < 1e-12:
        return np.pi * np.arange(1, count + 1)
    zeros = np.empty(count)
    prev = 0.0
    for k in range(1, count + 1):
        guess = (k + nu / 2 - 0.25) * math.pi
        lo = max(prev + 1e-8, guess - 0.6 * math.pi)
        hi = guess + 0.6 * math.pi
        flo, fhi = jv(nu, lo), jv(nu, hi)
        tries = 0
        while flo * fhi > 0 and tries < 60:
            lo = max(prev + 1e-8, lo - 0.2)
            hi += 0.2
            flo, fhi = jv(nu, lo), jv(nu, hi)
            tries += 1
        zeros[k - 1] = brentq(lambda x: jv(nu, x), lo, hi, xtol=1e-14, rtol=1e-15)
        prev = zeros[k - 1]
    return zeros


# ---------------------------------------------------------------------------
# grid
# ---------------------------------------------------------------------------

class Grid:
    """Composite Gauss-Legendre quadrature on (0, R] with the r^{n-1} volume weight.

    `breakpoints` are radii that must coincide with panel edges (support
    boundaries of compactly supported potentials, blend seams); panels
    containing one are split there, so panelwise integrands stay smooth.
    """

    def __init__(self, n: int, R: float, N: int, points_per_panel: int = 16,
                 breakpoints: tuple = ()):
        if N < 16:
            raise OperatorError("need at least 16 nodes")
        if R <= 0:
            raise OperatorError("domain radius must be positive")
        if N % points_per_panel != 0:
            raise OperatorError("N must be a multiple of points_per_panel")
        self.n = n
        self.R = float(R)
        self.ppp = int(points_per_panel)
        base_panels = N // self.ppp
        edges = list(np.linspace(0.0, R, base_panels + 1))
        for bp in breakpoints:
            if 0.0 < bp < R and min(abs(bp - e) for e in edges) > 1e-12 * R:
                edges.append(float(bp))
        edges = sorted(edges)
        self.edges = np.asarray(edges)
        self.panels = len(edges) - 1
        self.N = self.panels * self.ppp
        x, wq = roots_legendre(self.ppp)
        r = np.empty(self.N)
        glw = np.empty(self.N)
        for k in range(self.panels):
            a, b = edges[k], edges[k + 1]
            sl = slice(k * self.ppp, (k + 1) * self.ppp)
            r[sl] = (x + 1) * (b - a) / 2 + a
            glw[sl] = wq * (b - a) / 2
        self.r = r
        self.glw = glw
        self.w = glw * r ** (n - 1)
        self.sqrtw = np.sqrt(self.w)
        self._modes = None

    def integrate(self, fvals) -> float:
        """Quadrature of a radial function against the r^{n-1} measure."""
        return float(np.real_if_close(np.sum(self.w * fvals)))

    def panel_of(self, i: int) -> slice:
        k = i // self.ppp
        return slice(k * self.ppp, (k + 1) * self.ppp)

    # -- spectral radial Laplacian ------------------------------------------

    def _build_modes(self):
        nu = self.n / 2 - 1
        xi = bessel_zeros(nu, self.N)
        lam = (xi / self.R) ** 2
        # half-weighted samples of the normalized Dirichlet modes
        rr = self.r[:, None]
        norm = math.sqrt(2.0) / (self.R * np.abs(jv(nu + 1, xi)))
        phi = self.sqrtw[:, None] * rr ** (1 - self.n / 2) * jv(nu, xi[None, :] * rr / self.R)
        phi *= norm[None, :]
        Q, Rm = np.linalg.qr(phi)
        Q = Q * np.sign(np.diag(Rm))[None, :]
        self._modes = (lam, Q)

    @property
    def laplacian_modes(self):
        if self._modes is None:
            self._build_modes()
        return self._modes

    def laplacian_power(self, m: int) -> np.ndarray:
        """Dense symmetric matrix of (-Delta_radial)^m with Dirichlet wall at R."""
        lam, Q = self.laplacian_modes
        return (Q * lam[None, :] ** m) @ Q.T

    def apply_laplacian_power(self, m: int, y: np.ndarray, precise: bool = False) -> np.ndarray:
        """Apply (-Delta)^m; precise=True runs the matvecs in extended precision.

        Extended precision matters for residual tests near the roundoff
        floor, where lambda_max^{2m} amplifies coefficient noise.
        """
        lam, Q = self.laplacian_modes
        if precise:
            Ql = Q.astype(np.longdouble)
            ll = lam.astype(np.longdouble)
            out = Ql @ (ll**m * (Ql.T @ y.astype(np.longdouble)))
            return out.astype(y.dtype if np.iscomplexobj(y) else float)
        return Q @ (lam**m * (Q.T @ y))

    def to_function(self, y):
        """Convert half-weighted coordinates to nodal values f(r_i)."""
        return np.asarray(y) / self.sqrtw

    def from_function(self, f):
        return np.asarray(f) * self.sqrtw


_GRID_CACHE: dict = {}


def get_grid(n: int, R: float, N: int, ppp: int = 16, breakpoints: tuple = ()) -> Grid:
    key = (n, float(R), int(N), int(ppp), tuple(float(b) for b in breakpoints))
    if key not in _GRID_CACHE:
        _GRID_CACHE[key] = Grid(n, float(R), int(N), int(ppp), key[4])
    return _GRID_CACHE[key]


# ---------------------------------------------------------------------------
# model specification
# ---------------------------------------------------------------------------

@dataclass
class ModelSpec:
    """One operator instance: dimensions, potential, decay exponent, grid."""

    n: int
    m: int
    potential: RadialPotential
    beta: float
    R: float = 30.0
    N: int = 512
    points_per_panel: int = 16

    def __post_init__(self):
        if self.n < 3 or self.m < 1:
            raise OperatorError(f"need n >= 3 and m >= 1, got n={self.n}, m={self.m}")
        # n <= 2m is allowed for plain spectral work (e.g. the embedded-eigenvalue
        # construction); the threshold and decay machinery checks n > 2m itself
        if self.beta <= 0:
            raise OperatorError("decay exponent beta must be positive")

    @property
    def grid(self) -> Grid:
        bps = tuple(getattr(self.potential, "breakpoints", ()))
        return get_grid(self.n, self.R, self.N, self.points_per_panel, bps)

    def decay_envelope_constant(self) -> float:
        """Smallest C with |V(r)| <= C (1+r)^{-beta} on the grid."""
        g = self.grid
        V = np.abs(self.potential(g.r))
        return float(np.max(V * (1 + g.r) ** self.beta))

    def check_beta(self, required: float, context: str = ""):
        if not self.beta > required:
            raise OperatorError(
                f"decay hypothesis violated{': ' + context if context else ''}: "
                f"need beta > {required}, model has beta = {self.beta}"
            )

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "m": self.m,
            "potential": self.potential.to_dict(),
            "beta": self.beta,
            "grid": {"R": self.R, "N": self.N, "points_per_panel": self.points_per_panel},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModelSpec":
        g = d.get("grid", {})
        return cls(
            n=int(d["n"]),
            m=int(d["m"]),
            potential=potential_from_dict(d["potential"]),
            beta=float(d["beta"]),
            R=float(g.get("R", 30.0)),
            N=int(g.get("N", 512)),
            points_per_panel=int(g.get("points_per_panel", 16)),
        )

    @classmethod
    def from_json(cls, path) -> "ModelSpec":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


@dataclass
class GridOperator:
    """Dense matrix acting on half-weighted radial grid functions."""

    mat: np.ndarray
    grid: Grid
    label: str = ""
    weight_exponents: tuple | None = None  # (s, s') of the B(s,-s') space

    @property
    def shape(self):
        return self.mat.shape

    def norm(self) -> float:
        return float(np.linalg.norm(self.mat, 2))

    def symmetry_defect(self) -> float:
        return float(np.linalg.norm(self.mat - self.mat.T, 2))


def build_grid(spec: ModelSpec) -> Grid:
    return spec.grid


def discretize_H(spec: ModelSpec) -> GridOperator:
    """H = (-Delta)^m + V as a symmetric matrix on the half-weighted grid."""
    g = spec.grid
    A = g.laplacian_power(spec.m) + np.diag(spec.potential(g.r))
    defect = np.linalg.norm(A - A.T, 2)
    if defect > 1e-10 * np.linalg.norm(A, 2):
        raise OperatorError(f"discretized H not symmetric: defect {defect:.3e}")
    A = 0.5 * (A + A.T)
    return GridOperator(A, g, label=f"H(n={spec.n},m={spec.m})")


# ---------------------------------------------------------------------------
# sandwiched kernels
# ---------------------------------------------------------------------------

def _lagrange_basis(nodes: np.ndarray, x: np.ndarray) -> np.ndarray:
    """ell_j(x) for the Lagrange basis on `nodes`; returns shape (len(x), len(nodes))."""
    diffs = nodes[:, None] - nodes[None, :]
    np.fill_diagonal(diffs, 1.0)
    bw = 1.0 / np.prod(diffs, axis=1)
    terms = x[:, None] - nodes[None, :]  # (len(x), p)
    out = np.empty((len(x), len(nodes)))
    for jj in range(len(nodes)):
        cols = np.ones(len(x))
        for kk in range(len(nodes)):
            if kk != jj:
                cols *= terms[:, kk]
        out[:, jj] = cols * bw[jj]
    return out


class RadialKernelOp:
    """Sphere-averaged kernel of x,y -> kfun(|x-y|) ready for Nystrom assembly."""

    def __init__(self, kfun, n: int, oscillation: float = 0.0, npts: int = 32):
        self.kfun = kfun
        self.n = n
        self.oscillation = float(oscillation)
        self.npts = npts

    def kbar(self, r, rho):
        bmax = float(np.max(np.asarray(r) + np.asarray(rho)))
        panels = max(1, int(self.oscillation * bmax / 4.0) + 1)
        return kernels.radial_average(self.kfun, self.n, r, rho, npts=self.npts, panels=panels)


def sandwich(kernel: RadialKernelOp, spec: ModelSpec, weights=None,
             row_chunk: int = 96) -> GridOperator:
    """Nystrom matrix of f -> v K(v f) on the half-weighted grid.

    `weights` are the nodal values multiplying both sides (default
    v = |V|^{1/2}); they stay outside the quadrature, so functions in the
    v-dressed range are integrated with their full panelwise smoothness.
    Rows belonging to the panel of the diagonal are re-quadratured against
    the panel Lagrange basis, splitting at the diagonal where the
    sphere-averaged kernel has a kink.
    """
    g = spec.grid
    r = g.r
    if weights is None:
        weights = spec.potential.v(r)
    vl = np.asarray(weights, dtype=float)

    N = g.N
    base = np.empty((N, N), dtype=complex)
    for i0 in range(0, N, row_chunk):
        i1 = min(N, i0 + row_chunk)
        base[i0:i1, :] = kernel.kbar(r[i0:i1, None], r[None, :])

    # diagonal-panel re-quadrature (acts on samples of v*f, v outside)
    xgl, wgl = roots_legendre(2 * g.ppp)
    for i in range(N):
        sl = g.panel_of(i)
        nodes = r[sl]
        k = i // g.ppp
        a_edge, b_edge = g.edges[k], g.edges[k + 1]
        ri = r[i]
        cij = np.zeros(g.ppp, dtype=complex)
        for (lo, hi) in ((a_edge, ri), (ri, b_edge)):
            if hi - lo < 1e-15 * g.R:
                continue
            xs = (xgl + 1) * (hi - lo) / 2 + lo
            ws = wgl * (hi - lo) / 2
            kb = kernel.kbar(np.full_like(xs, ri), xs)
            ell = _lagrange_basis(nodes, xs)
            cij += (kb * xs ** (g.n - 1) * ws) @ ell
        base[i, sl] = cij / g.w[sl]

    A = (g.sqrtw[:, None] * vl[:, None]) * base * (vl[None, :] * g.sqrtw[None, :])
    if np.max(np.abs(A.imag)) < 1e-14 * max(1e-300, np.max(np.abs(A.real))):
        A = A.real.copy()
    A = 0.5 * (A + A.T)
    return GridOperator(A, g, label="sandwich")


def kernel_shape_operator(spec: ModelSpec, alpha: Fraction | float, logr: int = 0,
                          sandwiched: bool = True) -> np.ndarray:
    """Matrix of the power kernel |x-y|^alpha (ln|x-y|)^logr, optionally v-sandwiched."""
    kf = kernels.power_kernel(float(alpha), with_log=bool(logr))
    op = RadialKernelOp(kf, spec.n)
    if sandwiched:
        return sandwich(op, spec).mat
    return sandwich(op, spec, weights=np.ones(spec.grid.N)).mat


def free_resolvent_grid(z: complex, spec: ModelSpec) -> np.ndarray:
    """Grid route to R_0(z): resolvent of the discretized free operator."""
    g = spec.grid
    lam, Q = g.laplacian_modes
    return (Q / (lam ** spec.m - z)[None, :]) @ Q.T


def resolvent_grid(z: complex, spec: ModelSpec, H: np.ndarray | None = None) -> np.ndarray:
    """Grid route to R_V(z) = (H - z)^{-1}."""
    g = spec.grid
    if H is None:
        H = discretize_H(spec).mat
    return np.linalg.inv(H - z * np.eye(g.N))


def build_M(mu: complex, spec: ModelSpec, route: str = "kernel") -> GridOperator:
    """M(mu) = U + v R_0(mu^{2m}) v on the half-weighted grid.

    route="kernel" evaluates the free-resolvent kernel by the splitting
    identity and sphere averaging; route="grid" uses the resolvent of the
    discretized free operator.  The two agree when the kernel decay length
    is short against the domain radius.
    """
    z = kernels.mu_to_z(mu, spec.m)
    g = spec.grid
    U = np.diag(spec.potential.sign(g.r))
    if route == "kernel":
        nodes = kernels.splitting_nodes(z, spec.m)
        om = max(abs(kernels.sqrt_upper(zl)) for zl in nodes)

        def kf(w):
            return kernels.free_resolvent_kernel(spec.n, spec.m, z, w)

        op = RadialKernelOp(kf, spec.n, oscillation=om)
        vRv = sandwich(op, spec).mat
    elif route == "grid":
        R0 = free_resolvent_grid(z, spec)
        v = spec.potential.v(g.r)
        vRv = (v[:, None] * R0) * v[None, :]
    else:
        raise OperatorError(f"unknown route {route!r}")
    return GridOperator(U + vRv, g, label=f"M(mu={mu:.4g})")


# ---------------------------------------------------------------------------
# weighted norms
# ---------------------------------------------------------------------------

def weighted_norm(y: np.ndarray, sigma: float, grid: Grid) -> float:
    """|| (1+r)^sigma f ||_{L^2} for a half-weighted grid function."""
    return float(np.linalg.norm((1 + grid.r) ** sigma * np.asarray(y)))


def weight_matrix(grid: Grid, sigma: float) -> np.ndarray:
    return (1 + grid.r) ** (-sigma)


def bss_operator_norm(mat: np.ndarray, grid: Grid, s: float, sprime: float) -> float:
    """Operator norm between the weighted spaces: ||(1+r)^{-s'} A (1+r)^{-s}||."""
    wl = weight_matrix(grid, sprime)[:, None]
    wr = weight_matrix(grid, s)[None, :]
    return float(np.linalg.norm(wl * mat * wr, 2))


def lp_norm(y: np.ndarray, p: float, grid: Grid) -> float:
    """L^p norm of a grid function given in half-weighted coordinates."""
    f = np.abs(np.asarray(y)) / grid.sqrtw
    if math.isinf(p):
        return float(np.max(f))
    return float(np.sum(grid.w * f**p) ** (1.0 / p))
