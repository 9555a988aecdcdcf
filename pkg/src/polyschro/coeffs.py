"""Exact scalar coefficients of the free-resolvent threshold expansions.

Everything in this module is computed in exact arithmetic (Gaussian
rationals together with the symbolic atoms pi, ln 2 and the Euler
constant); floats only appear when the caller asks for them.  Exactness
matters because several coefficient families cancel identically (odd
low-order kernel coefficients, the collapse of the higher-order series
at m = 1) and those cancellations are load-bearing for the expansion
machinery downstream.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import sympy as sp

MAX_FACTORIAL = 200

_SQRT = sp.sqrt
_I = sp.I
_PI = sp.pi


class CoeffError(ValueError):
    pass


def _factorial(k: int) -> int:
    """Exact factorial, capped so we never silently lose exactness."""
    if k < 0:
        raise CoeffError(f"factorial of negative index {k}")
    if k > MAX_FACTORIAL:
        raise CoeffError(f"factorial index {k} exceeds exactness cap {MAX_FACTORIAL}")
    return math.factorial(k)


@dataclass(frozen=True)
class DimensionOrder:
    """Spatial dimension n and operator order m, with n > 2m."""

    n: int
    m: int

    def __post_init__(self):
        if self.m < 1:
            raise CoeffError(f"operator order m={self.m} must be a positive integer")
        if self.n < 3:
            raise CoeffError(f"dimension n={self.n} must be an integer >= 3")
        if self.n <= 2 * self.m:
            raise CoeffError(f"need n > 2m, got n={self.n}, m={self.m}")

    @property
    def odd(self) -> bool:
        return self.n % 2 == 1

    @property
    def aleph(self) -> int:
        """Number of regular power terms, floor(n / 2m)."""
        return self.n // (2 * self.m)

    @property
    def resonance_kinds(self) -> int | None:
        """k(n, m) if zero resonances can occur (2m < n <= 4m), else None."""
        if self.n > 4 * self.m:
            return None
        return resonance_count(self.n, self.m)


def laplacian_odd_coeff(n: int, j: int):
    """Scalar n_j in the odd-dimensional second-order resolvent series.

    n_j = sum_{l} [((n-3)/2 + l)! / (l! ((n-3)/2 - l)!)] (-2)^{-l} / (l + j - (n-3)/2)!
    over max(0, (n-3)/2 - j) <= l <= (n-3)/2.  Vanishes identically for
    odd j with 0 < j < n - 2.
    """
    if n % 2 == 0 or n < 3:
        raise CoeffError(f"laplacian_odd_coeff requires odd n >= 3, got n={n}")
    if j < 0:
        raise CoeffError(f"series index j={j} must be >= 0")
    h = (n - 3) // 2
    total = Fraction(0)
    for ell in range(max(0, h - j), h + 1):
        num = Fraction(_factorial(h + ell), _factorial(ell) * _factorial(h - ell))
        total += num * Fraction((-1) ** ell, 2**ell) / _factorial(ell + j - h)
    return sp.Rational(total.numerator, total.denominator)


def odd_series_coeff(m: int, j: int):
    """Scalar g_j tying the order-m resolvent to the second-order series (odd n).

    g_j = i^j when j + 2 is a multiple of 2m, otherwise
    g_j = (1/m) (i^j - (-i)^j) / (1 - e^{i (j+2) pi / m}).
    """
    if m < 1 or j < 0:
        raise CoeffError(f"need m >= 1 and j >= 0, got m={m}, j={j}")
    if (j + 2) % (2 * m) == 0:
        return sp.simplify(_I**j)
    denom = 1 - sp.exp(_I * sp.Rational(j + 2, m) * _PI)
    denom = sp.simplify(denom)
    assert denom != 0, "denominator vanishes only on the first branch"
    val = sp.Rational(1, m) * (_I**j - (-_I) ** j) / denom
    return sp.simplify(sp.expand_complex(val))


def even_series_coeff(m: int, j: int):
    """Triple (g_j^0, g_j^{1,0}, g_j^{1,1}) for the even-dimensional series.

    (1, i (m-1) pi / m, 1) when j + 1 is a multiple of m, else
    (0, -2 i pi / (1 - e^{i (j+1) 2 pi / m}), 0).
    """
    if m < 1 or j < 0:
        raise CoeffError(f"need m >= 1 and j >= 0, got m={m}, j={j}")
    if (j + 1) % m == 0:
        return (sp.Integer(1), _I * sp.Rational(m - 1, m) * _PI, sp.Integer(1))
    denom = sp.simplify(1 - sp.exp(_I * 2 * sp.Rational(j + 1, m) * _PI))
    assert denom != 0, "denominator vanishes only on the first branch"
    mid = sp.simplify(sp.expand_complex(-2 * _I * _PI / denom))
    return (sp.Integer(0), mid, sp.Integer(0))


def harmonic_phi(ell: int):
    """phi(l): -1 at l = 1, else the (l-1)-th harmonic number minus Euler's constant."""
    if ell < 1:
        raise CoeffError(f"phi defined for l >= 1, got {ell}")
    if ell == 1:
        return sp.Integer(-1)
    return sp.Rational(sum(Fraction(1, j) for j in range(1, ell))) - sp.EulerGamma


def odd_kernel_prefactor(n: int):
    """(-1)^{(n-3)/2} / (2 (2 pi)^{(n-1)/2}), the odd-n kernel normalization."""
    if n % 2 == 0:
        raise CoeffError("odd-n prefactor requested for even n")
    return sp.Integer(-1) ** ((n - 3) // 2) / (2 * (2 * _PI) ** sp.Rational(n - 1, 2))


def even_kernel_coeffs(n: int, j: int):
    """Even-n kernel data at series index j.

    Returns (c0, c_log, c1) so that the second-order kernel at this index is
    (c0 + c_log * ln(r)) * r^{2j+2-n} for the plain part and c1 * r^{2j+2-n}
    for the logarithmic-in-energy part.
    """
    if n % 2 == 1 or n < 4:
        raise CoeffError(f"even kernel coefficients need even n >= 4, got {n}")
    h = n // 2
    if j <= h - 2:
        c0 = _PI ** sp.Rational(-n, 2) * sp.Rational(
            _factorial(h - j - 2), _factorial(j) * 4 ** (j + 1)
        )
        return (c0, sp.Integer(0), sp.Integer(0))
    base = sp.Rational((-1) ** (j + 1 - h), 4 ** (j + 1 - h)) / (
        _factorial(j) * _factorial(h - 1 + j)
    )
    four_pi = (4 * _PI) ** sp.Rational(-n, 2)
    c0 = (
        four_pi * base * (harmonic_phi(j + 1) + harmonic_phi(j + 2 - h))
        + 2 * four_pi * base * sp.log(2)
        + sp.Rational(1, 4) * _I * (4 * _PI) ** (sp.Rational(-n, 2) + 1) * base
    )
    c_log = -2 * four_pi * base
    c1 = -four_pi * base
    return (sp.simplify(c0), sp.simplify(c_log), sp.simplify(c1))


def free_expansion_scalar(n: int, m: int, p: Fraction | int):
    """Odd-n scalar multiplying mu^p r^{p+2m-n} in the free-resolvent expansion.

    Returns an exact sympy scalar (possibly zero).  The index map is
    j = p + 2m - 2 into the second-order series.
    """
    if n % 2 == 0:
        raise CoeffError("free_expansion_scalar handles odd n; use even_expansion_terms")
    p = Fraction(p)
    if p.denominator != 1:
        return sp.Integer(0)
    j = int(p) + 2 * m - 2
    if j < 0:
        return sp.Integer(0)
    nj = laplacian_odd_coeff(n, j)
    if nj == 0:
        return sp.Integer(0)
    gj = odd_series_coeff(m, j)
    if gj == 0:
        return sp.Integer(0)
    return sp.simplify(odd_kernel_prefactor(n) * nj * gj)


def even_expansion_scalars(n: int, m: int, p: int):
    """Even-n scalar data at mu-power p (p even).

    Returns (plain, r_log, mu_log, mu_log_r_log): the coefficients of
    r^{p+2m-n}, r^{p+2m-n} ln r, r^{p+2m-n} ln(mu) and
    r^{p+2m-n} ln(mu) ln(r) at order mu^p.  Composition: the order-m
    series index is j = m - 1 + p/2 and ln z^{1/m} = 2 ln(mu).
    """
    if n % 2 == 1:
        raise CoeffError("even_expansion_scalars needs even n")
    if p % 2 == 1:
        return (sp.Integer(0),) * 4
    j = m - 1 + p // 2
    if j < 0:
        return (sp.Integer(0),) * 4
    g0, g10, g11 = even_series_coeff(m, j)
    k0, k_log, k1 = even_kernel_coeffs(n, j)
    plain = sp.simplify(g0 * k0 + g10 * k1)
    r_log = sp.simplify(g0 * k_log)
    mu_log = sp.simplify(2 * g11 * k1)
    mu_log_r_log = sp.Integer(0)
    return (plain, r_log, mu_log, mu_log_r_log)


def riesz_constant(n: int, m: int):
    """Constant c with (-Delta)^{-m} kernel = c |x-y|^{2m-n}, via the series route."""
    dims = DimensionOrder(n, m)
    if dims.odd:
        c = free_expansion_scalar(n, m, 0)
    else:
        c = even_expansion_scalars(n, m, 0)[0]
    return sp.simplify(c)


def gamma_riesz_constant(n: int, m: int):
    """Independent closed form Gamma(n/2 - m) / (4^m pi^{n/2} Gamma(m))."""
    DimensionOrder(n, m)
    return sp.gamma(sp.Rational(n, 2) - m) / (
        4**m * _PI ** sp.Rational(n, 2) * sp.gamma(m)
    )


def resonance_count(n: int, m: int) -> int:
    """Number k of distinct zero-resonance kinds for 2m < n <= 4m."""
    if n <= 2 * m:
        raise CoeffError(f"resonance count undefined for n <= 2m (n={n}, m={m})")
    if n > 4 * m:
        raise CoeffError(
            f"no zero resonance exists for n > 4m (n={n}, m={m}); "
            "the threshold chain terminates at the eigenspace"
        )
    if n % 2 == 1:
        return (4 * m - n + 1) // 2
    return (4 * m - n + 2) // 2


# Classification labels understood by decay_rate.
REGULAR = "regular"
EIGENVALUE = "eigenvalue"


def resonance(j: int) -> tuple:
    """Label for the j-th kind of zero resonance."""
    return ("resonance", j)


@dataclass(frozen=True)
class DecayRate:
    """Time-decay law for the weighted propagator norm.

    kind is "power" (norm ~ (1+|t|)^{-exponent}) or "log"
    (norm ~ (1 + ln(1+|t|))^{-1}); exponent is an exact Fraction for
    power laws and None for the log law.
    """

    kind: str
    exponent: Fraction | None
    applies_to: object

    def __post_init__(self):
        if self.kind == "power":
            assert self.exponent is not None and self.exponent > 0

    def target_slope(self) -> float | None:
        return None if self.exponent is None else -float(self.exponent)


def decay_rate(n: int, m: int, classification) -> DecayRate:
    """Kato-Jensen decay rate for the given threshold classification.

    classification is REGULAR, EIGENVALUE, or resonance(j).  Inconsistent
    combinations are rejected with a diagnostic naming the violated
    hypothesis.
    """
    dims = DimensionOrder(n, m)
    if classification == REGULAR:
        return DecayRate("power", Fraction(n, 2 * m), classification)

    if n > 4 * m:
        if classification == EIGENVALUE:
            return DecayRate("power", Fraction(n, 2 * m) - 2, classification)
        raise CoeffError(
            f"zero resonances do not exist for n > 4m (n={n}, m={m}); "
            f"label {classification!r} violates the dimension hypothesis"
        )

    k = resonance_count(n, m)
    if classification == EIGENVALUE:
        if dims.odd:
            return DecayRate("power", Fraction(1, 2 * m), classification)
        return DecayRate("log", None, classification)

    if isinstance(classification, tuple) and classification[0] == "resonance":
        j = classification[1]
        if not 1 <= j <= k:
            raise CoeffError(
                f"resonance kind j={j} outside 1..k={k} for (n={n}, m={m})"
            )
        if not dims.odd and j == k:
            return DecayRate("log", None, classification)
        return DecayRate("power", Fraction(4 * m + 2 - n - 2 * j, 2 * m), classification)

    raise CoeffError(f"unknown classification label {classification!r}")


def ginibre_rate(n: int, m: int, classification) -> DecayRate:
    """L^2+L^inf decay rate; coincides with the Kato-Jensen table."""
    return decay_rate(n, m, classification)


def high_energy_exponent(m: int, k: int) -> Fraction:
    """Weighted-norm decay exponent of the k-th resolvent derivative at high energy."""
    if k < 0:
        raise CoeffError("derivative order must be >= 0")
    return Fraction((2 * m - 1) * (k + 1), 2 * m)


def even_log_coeffs(n: int, m: int):
    """Derived (d_k, c_k, d_{k+1}) for the even-dimensional log term.

    The mu^{2m} group of the even expansion reads
    (d_k ln(mu) + c_k) r^{2k-2} + d_{k+1} r^{2k-2} ln(r); these values are
    generated by composing the series coefficients, not tabulated inputs.
    """
    dims = DimensionOrder(n, m)
    if dims.odd or n > 4 * m:
        raise CoeffError(f"log coefficients require even n <= 4m, got (n={n}, m={m})")
    plain, r_log, mu_log, _ = even_expansion_scalars(n, m, 2 * m)
    d_k = mu_log
    c_k = plain
    d_k1 = r_log
    return (sp.simplify(d_k), sp.simplify(c_k), sp.simplify(d_k1))


def as_complex(x) -> complex:
    """Render an exact sympy scalar as a complex float."""
    return complex(sp.N(x, 30))
