"""Operator-valued Laurent/log series and the recursive threshold inversion.

A series is a finite sum of matrix coefficients over monomials
mu^p g(mu)^gamma, where p is an exact Fraction and g(mu) = d ln(mu) + c is
the logarithmic group of the even-dimensional expansion (gamma = 0
throughout in odd dimension).  Positive powers of ln(mu) are rewritten as
polynomials in g, so monomials are totally ordered: smaller p dominates,
and for equal p larger gamma dominates as mu -> 0.

Inversion walks the same projection chain as the classification: factor
out the leading monomial and its complex scalar, split off the numerical
kernel of the real constant term, invert the regularized part by a
Neumann series, compress the Schur complement to the kernel and recurse.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import coeffs, kernels, operators
from .operators import ModelSpec
from .threshold import ProjectionChain, kernel_projection

GAMMA_FLOOR = -2  # deepest retained power of 1/g, matching the expansion depth
_INF = Fraction(10**9)


class InversionError(ValueError):
    pass


class NeedMoreTerms(InversionError):
    """Raised when a nested inversion needs deeper input truncation."""


def _fr(x) -> Fraction:
    return x if isinstance(x, Fraction) else Fraction(x)


@dataclass
class LaurentLogSeries:
    """Finite sum of GridOperator coefficients over monomials mu^p g^gamma."""

    terms: dict
    dim: int
    rem: Fraction | None = None          # first unknown mu-order (None: exact)
    gdef: tuple | None = None            # (d, c) with g(mu) = d ln(mu) + c

    # -- bookkeeping ---------------------------------------------------------

    def copy(self) -> "LaurentLogSeries":
        return LaurentLogSeries(dict(self.terms), self.dim, self.rem, self.gdef)

    @property
    def rem_value(self) -> Fraction:
        return _INF if self.rem is None else self.rem

    def keys_sorted(self):
        return sorted(self.terms.keys(), key=lambda k: (k[0], -k[1]))

    def lead_key(self):
        if not self.terms:
            return None
        return min(self.terms.keys(), key=lambda k: (k[0], -k[1]))

    def lead_p(self) -> Fraction:
        k = self.lead_key()
        return self.rem_value if k is None else k[0]

    def coefficient(self, p, gamma: int = 0) -> np.ndarray:
        return self.terms.get((_fr(p), gamma), np.zeros((self.dim, self.dim)))

    def _merge_gdef(self, other):
        if self.gdef is None:
            return other.gdef
        if other.gdef is not None and other.gdef != self.gdef:
            raise InversionError("incompatible logarithmic groups")
        return self.gdef

    def _clean(self, floor: float = 0.0):
        drop = [k for k, A in self.terms.items()
                if k[0] >= self.rem_value or np.linalg.norm(A) <= floor
                or k[1] < GAMMA_FLOOR]
        for k in drop:
            del self.terms[k]
        return self

    # -- algebra ---------------------------------------------------------------

    def __add__(self, other: "LaurentLogSeries") -> "LaurentLogSeries":
        if self.dim != other.dim:
            raise InversionError("dimension mismatch in series addition")
        out = dict(self.terms)
        for k, A in other.terms.items():
            out[k] = out[k] + A if k in out else A
        rem = min(self.rem_value, other.rem_value)
        return LaurentLogSeries(out, self.dim, None if rem >= _INF else rem,
                                self._merge_gdef(other))._clean()

    def __sub__(self, other: "LaurentLogSeries") -> "LaurentLogSeries":
        return self + other.scale(-1.0)

    def scale(self, c: complex) -> "LaurentLogSeries":
        return LaurentLogSeries({k: c * A for k, A in self.terms.items()},
                                self.dim, self.rem, self.gdef)

    def shift(self, p, gamma: int = 0) -> "LaurentLogSeries":
        """Multiply by the monomial mu^p g^gamma."""
        p = _fr(p)
        terms = {(k[0] + p, k[1] + gamma): A for k, A in self.terms.items()}
        rem = None if self.rem is None else self.rem + p
        return LaurentLogSeries(terms, self.dim, rem, self.gdef)

    def __matmul__(self, other: "LaurentLogSeries") -> "LaurentLogSeries":
        if self.dim != other.dim:
            raise InversionError("dimension mismatch in series product")
        rem = min(self.rem_value + other.lead_p(), other.rem_value + self.lead_p())
        out: dict = {}
        for ka, A in self.terms.items():
            for kb, B in other.terms.items():
                key = (ka[0] + kb[0], ka[1] + kb[1])
                if key[0] >= rem or key[1] < GAMMA_FLOOR:
                    continue
                prod = A @ B
                out[key] = out[key] + prod if key in out else prod
        return LaurentLogSeries(out, self.dim, None if rem >= _INF else rem,
                                self._merge_gdef(other))._clean()

    def const_mul(self, A: np.ndarray, side: str = "left") -> "LaurentLogSeries":
        if side == "left":
            terms = {k: A @ B for k, B in self.terms.items()}
        else:
            terms = {k: B @ A for k, B in self.terms.items()}
        return LaurentLogSeries(terms, self.dim, self.rem, self.gdef)

    def diag_mul(self, d: np.ndarray) -> "LaurentLogSeries":
        """d * A * d with a diagonal weight vector d on both sides."""
        terms = {k: (d[:, None] * A) * d[None, :] for k, A in self.terms.items()}
        return LaurentLogSeries(terms, self.dim, self.rem, self.gdef)

    def truncate(self, budget) -> "LaurentLogSeries":
        budget = _fr(budget)
        terms = {k: A for k, A in self.terms.items() if k[0] < budget}
        rem = min(self.rem_value, budget)
        return LaurentLogSeries(terms, self.dim, None if rem >= _INF else rem, self.gdef)

    def restrict(self, basis: np.ndarray) -> "LaurentLogSeries":
        terms = {k: basis.T @ A @ basis for k, A in self.terms.items()}
        return LaurentLogSeries(terms, basis.shape[1], self.rem, self.gdef)

    def embed(self, basis: np.ndarray, dim: int) -> "LaurentLogSeries":
        terms = {k: basis @ A @ basis.T for k, A in self.terms.items()}
        return LaurentLogSeries(terms, dim, self.rem, self.gdef)

    @staticmethod
    def constant(A: np.ndarray, gdef=None, rem=None) -> "LaurentLogSeries":
        return LaurentLogSeries({(Fraction(0), 0): np.asarray(A)}, A.shape[0], rem, gdef)

    @staticmethod
    def zero(dim: int, gdef=None, rem=None) -> "LaurentLogSeries":
        return LaurentLogSeries({}, dim, rem, gdef)

    def identity_like(self) -> "LaurentLogSeries":
        return LaurentLogSeries.constant(np.eye(self.dim), self.gdef)

    # -- evaluation and reporting ---------------------------------------------

    def g_value(self, mu: complex) -> complex:
        if self.gdef is None:
            return 1.0
        d, c = self.gdef
        return d * cmath.log(mu) + c

    def evaluate(self, mu: complex) -> np.ndarray:
        out = np.zeros((self.dim, self.dim), dtype=complex)
        g = self.g_value(mu)
        lmu = cmath.log(mu)
        for (p, gamma), A in self.terms.items():
            out = out + A * cmath.exp(lmu * float(p)) * g**gamma
        return out

    def term_report(self) -> list:
        rep = []
        for k in self.keys_sorted():
            A = self.terms[k]
            sv = np.linalg.svd(A, compute_uv=False)
            nrm = float(sv[0]) if len(sv) else 0.0
            rank = int(np.sum(sv > 1e-10 * max(nrm, 1e-300)))
            sym = float(np.linalg.norm(A - A.T) / max(nrm, 1e-300))
            rep.append({
                "p": str(k[0]), "g_power": k[1], "norm": nrm, "rank": rank,
                "selfadjoint": sym < 1e-8,
            })
        return rep


# ---------------------------------------------------------------------------
# Feshbach block inversion (numeric, single matrices)
# ---------------------------------------------------------------------------

@dataclass
class FeshbachResult:
    invertible: bool
    inverse: np.ndarray | None
    schur: np.ndarray
    message: str = ""


def feshbach_inverse(A: np.ndarray, S: np.ndarray,
                     cond_limit: float = 1e12) -> FeshbachResult:
    """Invert A through the projection S via B = S - S (A+S)^{-1} S.

    A singular B yields a structured "A singular" result instead of an
    exception; S = 0 reduces to the plain inverse.
    """
    A = np.asarray(A)
    S = np.asarray(S)
    AS = A + S
    if np.linalg.cond(AS) > cond_limit:
        raise InversionError("A + S too ill-conditioned for the block inversion")
    D = np.linalg.inv(AS)
    B = S - S @ D @ S
    if np.linalg.norm(S, 2) < 1e-14:
        return FeshbachResult(True, D, B)
    # invert B on range(S)
    sv = np.linalg.svd(S, compute_uv=False)
    rank = int(np.sum(sv > 0.5))
    vals, vecs = np.linalg.eigh(0.5 * (S + S.T))
    basis = vecs[:, np.argsort(vals)[::-1][:rank]]
    Br = basis.T @ B @ basis
    svB = np.linalg.svd(Br, compute_uv=False)
    if svB[-1] <= 1e-12 * max(svB[0], 1e-300):
        return FeshbachResult(False, None, B, "Schur block singular: A is singular")
    Binv = basis @ np.linalg.inv(Br) @ basis.T
    return FeshbachResult(True, D + D @ S @ Binv @ S @ D, B)


# ---------------------------------------------------------------------------
# series inversion
# ---------------------------------------------------------------------------

def _extract_scalar(M: np.ndarray) -> complex:
    """Scalar c making M/c real symmetric, when M is a complex multiple of one."""
    if np.isrealobj(M):
        return 1.0
    idx = np.unravel_index(np.argmax(np.abs(M)), M.shape)
    c = M[idx]
    if c == 0:
        return 1.0
    R = M / c
    if np.linalg.norm(np.imag(R)) > 1e-8 * np.linalg.norm(R):
        raise InversionError(
            "leading coefficient is not a scalar multiple of a real operator; "
            "exponent collision across branches"
        )
    return complex(c)


def _neumann_inverse(D: np.ndarray, N: LaurentLogSeries, budget: Fraction,
                     max_terms: int = 200) -> LaurentLogSeries:
    """(T + N)^{-1} = sum_j (-1)^j (D N)^j D given D = T^{-1} and decaying N."""
    Dser = LaurentLogSeries.constant(D, N.gdef)
    out = Dser.copy()
    out.rem = None
    term = Dser
    lead = N.lead_p()
    j = 0
    for j in range(1, max_terms + 1):
        term = (N @ term).scale(-1.0).const_mul(D, side="left")
        term = term.truncate(budget)
        if not term.terms:
            break
        out = out + term
        if term.lead_p() >= budget:
            break
        if lead == 0 and j >= -GAMMA_FLOOR:
            break
    # remainder from the dropped Neumann tail and from N's own remainder
    tail_order = (j + 1) * lead if lead > 0 else budget
    out.rem = min(budget, N.rem_value, _fr(tail_order))
    if out.rem >= _INF:
        out.rem = None
    return out._clean()


def invert_series(S: LaurentLogSeries, budget, tol: float = 1e-8,
                  gap_factor: float = 1e2, depth: int = 12,
                  zero_floor: float = 1e-11,
                  _scale_hint: float | None = None) -> LaurentLogSeries:
    """Series inverse of S(mu) along the projection chain.

    budget caps the computed mu-order; the honest remainder (which may be
    lower for singular leads, since the unknown remainder of S is amplified
    by the negative powers) is tracked in the result.  Coefficients below
    zero_floor relative to the largest one are treated as exact zeros, so
    stages that vanish identically (radial sectors, killed moments) do not
    pollute the pivot search with roundoff.
    """
    budget = _fr(budget)
    if depth <= 0:
        raise InversionError("projection recursion exceeded the chain bound")
    if S.terms:
        top = max(np.linalg.norm(A) for A in S.terms.values())
        scale_for_floor = _scale_hint if _scale_hint is not None else top
        S = S.copy()._clean(floor=zero_floor * scale_for_floor)
    lead = S.lead_key()
    if lead is None:
        raise InversionError("cannot invert the zero series")
    p0, g0 = lead
    X = S.shift(-p0, -g0)
    c = _extract_scalar(X.terms[(Fraction(0), 0)])
    X = X.scale(1.0 / c)
    T_raw = X.terms[(Fraction(0), 0)]
    T = 0.5 * (T_raw.real + T_raw.real.T)
    Nser = X - LaurentLogSeries.constant(T_raw, X.gdef)
    local_budget = budget + p0

    scale_hint = _scale_hint if _scale_hint is not None else float(np.linalg.norm(T, 2))
    basis, diag = kernel_projection(T, tol, gap_factor, scale_hint=scale_hint)
    rank = basis.shape[1]

    if rank == 0:
        D = np.linalg.inv(T)
        Xinv = _neumann_inverse(D, Nser, local_budget)
    else:
        Sm = basis @ basis.T
        D = np.linalg.inv(T + Sm)
        SmC = LaurentLogSeries.constant(Sm, X.gdef)
        # dividing the Schur series by its pivot and inverting costs orders
        # (recursively, down the whole chain), so widen the working budget
        # until the realized remainder reaches the request or stalls
        w_budget = local_budget
        Xinv = None
        prev_rem = None
        empty_tries = 0
        for _ in range(12):
            W = _neumann_inverse(D, Nser, w_budget)  # (X + Sm)^{-1}
            Y = SmC - (SmC @ W @ SmC)
            Y.terms.pop((Fraction(0), 0), None)  # exact cancellation of the constant
            Yr = Y.restrict(basis)._clean(floor=zero_floor * scale_hint)
            if Yr.lead_key() is None:
                # working budget too small to see the Schur pivot yet
                empty_tries += 1
                if empty_tries > 6 or w_budget >= Nser.rem_value + local_budget:
                    raise NeedMoreTerms("Schur series vanishes to all computed orders")
                w_budget = w_budget + 1
                continue
            p1 = max(Yr.lead_p(), Fraction(0))
            try:
                Zr = invert_series(Yr, w_budget - p1, tol, gap_factor, depth - 1,
                                   _scale_hint=scale_hint)
            except NeedMoreTerms:
                if w_budget >= Nser.rem_value + local_budget:
                    raise
                w_budget = w_budget + 1
                continue
            Z = Zr.embed(basis, S.dim)
            Xinv = (W + (W @ Z @ W)).truncate(local_budget)
            realized = Xinv.rem_value
            if realized >= local_budget or realized == prev_rem:
                break
            prev_rem = realized
            w_budget = w_budget + (local_budget - realized)

    out = Xinv.shift(-p0, -g0).scale(1.0 / c)
    return out.truncate(budget)


# ---------------------------------------------------------------------------
# Jensen-Nenciu style expansion (standalone operation)
# ---------------------------------------------------------------------------

def jn_expand(T0: np.ndarray, T1: LaurentLogSeries, S: np.ndarray, order: int,
              tol: float = 1e-10):
    """Iteration scheme for T(z) = T0 + z T1(z) with Riesz projection S of T0.

    Returns (tilde_series, inverse_series).  tilde(z) =
    sum_j (-1)^j z^j S [T1(z) (T0+S)^{-1}]^{j+1} S truncated at z^order; the
    inverse series is produced by the generic chain inversion and is None
    when the leading Schur block is singular (the caller descends a level).
    """
    T0 = np.asarray(T0)
    dim = T0.shape[0]
    if np.linalg.norm(S @ T0, 2) > tol * max(np.linalg.norm(T0, 2), 1e-300):
        raise InversionError("projection does not annihilate T0")
    D = np.linalg.inv(T0 + S)
    SC = LaurentLogSeries.constant(S)
    budget = Fraction(order + 1)
    core = (T1.const_mul(D, side="right")).truncate(budget)
    tilde = LaurentLogSeries.zero(dim)
    power = core.copy()
    for j in range(0, order + 1):
        contrib = (SC @ power @ SC).shift(Fraction(j)).scale((-1.0) ** j)
        tilde = tilde + contrib.truncate(budget)
        power = (power @ core).truncate(budget - j)
        if not power.terms:
            break
    tilde.rem = budget

    series = LaurentLogSeries.constant(T0) + T1.shift(Fraction(1)).truncate(budget)
    series.rem = min(budget, T1.rem_value + 1)
    try:
        inv = invert_series(series, budget, tol=1e-10)
    except InversionError:
        inv = None
    return tilde, inv


# ---------------------------------------------------------------------------
# the threshold series of M(mu) and R_V(mu^{2m})
# ---------------------------------------------------------------------------

def _ladder_series(spec: ModelSpec, sandwiched: bool) -> LaurentLogSeries:
    """Free-resolvent expansion as an operator series (optionally v-sandwiched)."""
    lad = kernels.threshold_expansion(spec.n, spec.m)
    gdef = lad.gdef
    dim = spec.grid.N
    out = LaurentLogSeries.zero(dim, gdef=gdef, rem=lad.remainder_order)
    for t in lad.terms:
        Op = operators.kernel_shape_operator(spec, t.alpha, t.logr, sandwiched=sandwiched)
        Op = Op.real
        if t.logmu == 0:
            pieces = [((t.p, 0), t.coeff)]
        elif t.logmu == 1:
            # ln(mu) = (g - c)/d
            d, cc = gdef
            pieces = [((t.p, 1), t.coeff / d), ((t.p, 0), -t.coeff * cc / d)]
        else:
            raise InversionError("unexpected log power in the free expansion")
        for key, scal in pieces:
            A = scal * Op
            key = (_fr(key[0]), key[1])
            out.terms[key] = out.terms[key] + A if key in out.terms else A
    return out._clean()


def m_series(spec: ModelSpec) -> LaurentLogSeries:
    """M(mu) = U + v R_0(mu^{2m}) v as a truncated operator series."""
    g = spec.grid
    U = np.diag(spec.potential.sign(g.r))
    ser = _ladder_series(spec, sandwiched=True)
    key = (Fraction(0), 0)
    ser.terms[key] = ser.terms.get(key, np.zeros((g.N, g.N))) + U
    return ser


def invert_M_series(spec: ModelSpec, chain: ProjectionChain | None = None,
                    budget=None, tol: float = 1e-8) -> LaurentLogSeries:
    """Series expansion of M(mu)^{-1} down the detected resonance branch.

    When a classification chain is supplied, the kernel ranks discovered
    during the inversion must match its ranks; a mismatch reports the
    branch inconsistency instead of returning a wrong series.
    """
    M = m_series(spec)
    if budget is None:
        budget = M.rem_value
    inv = invert_series(M, budget, tol=tol)
    if chain is not None:
        lead = inv.lead_key()
        sing_rank = 0
        if lead is not None and (lead[0] < 0 or lead[1] < 0):
            A = inv.terms[lead]
            sv = np.linalg.svd(A, compute_uv=False)
            sing_rank = int(np.sum(sv > 1e-8 * max(sv[0], 1e-300)))
        expected = chain.ranks[-1] if chain.ranks else 0
        if sing_rank != expected:
            raise InversionError(
                f"singular rank {sing_rank} of the inverse series does not match "
                f"the classification chain rank {expected}"
            )
    return inv


def rv_expansion(spec: ModelSpec, budget=None, tol: float = 1e-8,
                 chain: ProjectionChain | None = None) -> LaurentLogSeries:
    """R_V(mu^{2m}) = R_0 - R_0 v M(mu)^{-1} v R_0 as an operator series."""
    R0 = _ladder_series(spec, sandwiched=False)
    Minv = invert_M_series(spec, chain=chain, budget=budget, tol=tol)
    v = spec.potential.v(spec.grid.r)
    middle = Minv.diag_mul(v)
    out = R0 - (R0 @ middle @ R0)
    if budget is not None:
        out = out.truncate(budget)
    return out


def series_arithmetic(a: LaurentLogSeries, b: LaurentLogSeries | None, op: str,
                      budget=None):
    """Term-wise series algebra with automatic truncation bookkeeping."""
    if op == "add":
        return a + b
    if op == "multiply":
        return a @ b
    if op == "truncate":
        return a.truncate(budget)
    raise InversionError(f"unknown series operation {op!r}")


def weighted_resolvent_identity_defect(spec: ModelSpec, mu: complex,
                                       route: str = "grid") -> float:
    """|| w R_V(mu^{2m}) w - (U - M(mu)^{-1}) || at one spectral point."""
    g = spec.grid
    z = kernels.mu_to_z(mu, spec.m)
    v = spec.potential.v(g.r)
    w = spec.potential.sign(g.r) * v
    U = np.diag(spec.potential.sign(g.r))
    RV = operators.resolvent_grid(z, spec)
    lhs = (w[:, None] * RV) * w[None, :]
    M = operators.build_M(mu, spec, route=route).mat
    rhs = U - np.linalg.inv(M)
    return float(np.linalg.norm(lhs - rhs, 2))
