"""Free-resolvent kernels, their radial reduction, and threshold term ladders.

The order-m free resolvent is evaluated pointwise through the splitting
identity

    1/(s^m - z) = (1/(m z)) sum_l z_l / (s - z_l),   z_l = z^{1/m} e^{2 pi i l / m},

which turns it into a combination of second-order resolvent kernels.  The
branch is fixed once and for all: arg(z) in (0, 2pi), so every root z_l has
Im(z_l^{1/2}) > 0 and mu = z^{1/2m} lives in arg(mu) in (0, pi/m).

Radial reduction: an operator with kernel K(|x-y|) acts on radial functions
through the sphere-averaged kernel

    kbar(r, rho) = |S^{n-2}| (r rho)^{-(n-2)} 2^{-(n-3)}
                   * int_{|r-rho|}^{r+rho} K(w) [((r+rho)^2-w^2)(w^2-(r-rho)^2)]^{(n-3)/2} w dw,

computed here with a cosine substitution that makes the integrand smooth in
every dimension.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

import numpy as np
import sympy as sp
from scipy.special import gamma as _gamma, hankel1, roots_legendre

from . import coeffs


class KernelError(ValueError):
    pass


# ---------------------------------------------------------------------------
# branch bookkeeping
# ---------------------------------------------------------------------------

def arg02pi(z: complex) -> float:
    """Argument of z in (0, 2 pi); rejects the positive real axis."""
    a = np.angle(z)
    if np.isclose(np.imag(z), 0.0) and np.real(z) > 0:
        raise KernelError(f"z={z} lies on the branch cut [0, inf)")
    if a <= 0:
        a += 2 * math.pi
    return float(a)


def sqrt_upper(z: complex) -> complex:
    """Square root with Im >= 0, using the arg in (0, 2 pi) convention."""
    return cmath.rect(abs(z) ** 0.5, arg02pi(z) / 2)


@dataclass(frozen=True)
class SpectralPoint:
    """Energy z off the positive half-axis together with its branch data."""

    z: complex
    m: int = 1

    def __post_init__(self):
        arg02pi(self.z)  # validates the cut
        if self.m < 1:
            raise KernelError("order m must be >= 1")

    @property
    def mu(self) -> complex:
        """mu = z^{1/2m}, with arg(mu) in (0, pi/m)."""
        return cmath.rect(abs(self.z) ** (1.0 / (2 * self.m)), arg02pi(self.z) / (2 * self.m))

    @property
    def nodes(self):
        return splitting_nodes(self.z, self.m)


def mu_to_z(mu: complex, m: int) -> complex:
    return mu ** (2 * m)


def splitting_nodes(z: complex, m: int) -> list[complex]:
    """The m roots z_l = z^{1/m} e^{2 pi i l / m} under the fixed branch.

    Each root satisfies Im(z_l^{1/2}) > 0, and the partial-fraction identity
    1/(s^m - z) = (1/(m z)) sum_l z_l/(s - z_l) holds for every s.
    """
    a = arg02pi(z)
    rad = abs(z) ** (1.0 / m)
    return [cmath.rect(rad, (a + 2 * math.pi * ell) / m) for ell in range(m)]


# ---------------------------------------------------------------------------
# second-order resolvent kernels
# ---------------------------------------------------------------------------

@lru_cache(maxsize=None)
def _odd_laplace_kernel_func(n: int):
    """Closed-form kernel of (-Delta - zeta)^{-1} in odd dimension n.

    Built once by the dimension-raising recursion
    K_{n+2}(w) = -(1/(2 pi w)) dK_n/dw starting from K_3 = e^{i w omega}/(4 pi w),
    where omega = zeta^{1/2} with positive imaginary part.
    """
    if n % 2 == 0 or n < 3:
        raise KernelError(f"closed forms exist for odd n >= 3, got {n}")
    w, om = sp.symbols("w omega")
    expr = sp.exp(sp.I * om * w) / (4 * sp.pi * w)
    dim = 3
    while dim < n:
        expr = sp.simplify(-sp.diff(expr, w) / (2 * sp.pi * w))
        dim += 2
    return sp.lambdify((om, w), expr, modules="numpy")


def laplace_resolvent_kernel(n: int, zeta: complex, w):
    """Kernel of (-Delta - zeta)^{-1} on R^n at distance w > 0."""
    w = np.asarray(w, dtype=float)
    om = sqrt_upper(zeta)
    if n % 2 == 1:
        return _odd_laplace_kernel_func(n)(om, w)
    nu = n // 2 - 1
    pref = (sp.I / 4).evalf() * (om / (2 * math.pi)) ** nu
    return complex(pref) * hankel1(nu, om * w) / w**nu


def free_resolvent_kernel(n: int, m: int, z: complex, r):
    """Kernel of ((-Delta)^m - z)^{-1} on R^n at distance r, via splitting.

    For m = 1 this reduces exactly to the second-order kernel.
    """
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise KernelError("kernel distance must be positive")
    nodes = splitting_nodes(z, m)
    out = np.zeros(np.shape(r), dtype=complex)
    for zl in nodes:
        out = out + zl * laplace_resolvent_kernel(n, zl, r)
    return out / (m * z)


def fourier_symbol_kernel(n: int, m: int, z: complex, r: float) -> complex:
    """Oracle route: radial Fourier inversion of the symbol 1/(|xi|^{2m} - z).

    Slow high-precision quadrature; used to cross-check the splitting route.
    """
    import mpmath as mp

    nu = mp.mpf(n) / 2 - 1
    rr = mp.mpf(r)
    zz = mp.mpc(z)

    def f(rho):
        return mp.besselj(nu, rho * rr) * rho ** (mp.mpf(n) / 2) / (rho ** (2 * m) - zz)

    old = mp.mp.dps
    mp.mp.dps = 30
    try:
        val = mp.quadosc(f, [0, mp.inf], period=2 * mp.pi / rr)
        pref = (2 * mp.pi) ** (-mp.mpf(n) / 2) * rr ** (1 - mp.mpf(n) / 2)
        return complex(pref * val)
    finally:
        mp.mp.dps = old


def riesz_kernel(n: int, m: int, r):
    """Kernel of (-Delta)^{-m} at distance r: c_{n,m} r^{2m-n}.

    The constant comes from the zero-energy term of the composed expansion
    (series route); tests compare it against the independent Gamma formula.
    """
    coeffs.DimensionOrder(n, m)
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise KernelError("Riesz kernel blows up at r = 0; need r > 0")
    c = float(sp.re(sp.N(coeffs.riesz_constant(n, m), 30)))
    return c * r ** (2 * m - n)


# ---------------------------------------------------------------------------
# radial reduction
# ---------------------------------------------------------------------------

def sphere_area(d: int) -> float:
    """Surface measure of the unit sphere S^{d-1}."""
    return 2 * math.pi ** (d / 2) / _gamma(d / 2)


@lru_cache(maxsize=None)
def _gl_nodes(npts: int):
    x, wq = roots_legendre(npts)
    return x, wq


def radial_average(kfun, n: int, r, rho, *, npts: int = 32, panels: int = 1):
    """Sphere-averaged kernel kbar(r, rho) of x,y -> kfun(|x-y|) on R^n.

    r and rho broadcast together.  The w-integral uses the substitution
    w = (a+b)/2 - (b-a)/2 cos(phi), under which the integrand is smooth for
    every n >= 3 (including half-integer bracket powers in even dimension).
    `panels` subdivides [0, pi] for oscillatory kernels.
    """
    r = np.asarray(r, dtype=float)
    rho = np.asarray(rho, dtype=float)
    a = np.abs(r - rho)
    b = r + rho
    p = (n - 3) / 2.0

    x, wq = _gl_nodes(npts)
    total = np.zeros(np.broadcast(r, rho).shape, dtype=complex)
    width = math.pi / panels
    for k in range(panels):
        phi = (x[:, None] + 1) * (width / 2) + k * width  # phi in panel, shape (npts, 1)
        phi = phi.reshape((npts,) + (1,) * total.ndim)
        w = (a + b) / 2 - (b - a) / 2 * np.cos(phi)
        bracket = ((b + w) * (w + a)) ** p * ((b - a) / 2) ** (2 * p + 1)
        vals = kfun(w) * bracket * np.sin(phi) ** (2 * p + 1) * w
        wgt = wq.reshape((npts,) + (1,) * total.ndim) * (width / 2)
        total = total + np.sum(vals * wgt, axis=0)
    pref = sphere_area(n - 1) * (r * rho) ** (-(n - 2)) * 2.0 ** (-(n - 3))
    return pref * total


def power_kernel(alpha: float, with_log: bool = False):
    """Pointwise kernel w -> w^alpha (optionally times ln w)."""
    if with_log:
        return lambda w: w**alpha * np.log(w)
    if alpha == 0:
        return lambda w: np.ones_like(np.asarray(w, dtype=float))
    return lambda w: w**alpha


def free_resolvent_radial(n: int, m: int, z: complex, r, rho, *, npts: int = 32):
    """Sphere-averaged free-resolvent kernel at energy z.

    Panel count scales with the oscillation |omega| (r + rho) of the most
    oscillatory splitting root.
    """
    nodes = splitting_nodes(z, m)
    om_max = max(abs(sqrt_upper(zl)) for zl in nodes)
    bmax = float(np.max(np.asarray(r) + np.asarray(rho)))
    panels = max(1, int(om_max * bmax / 4.0) + 1)

    def kfun(w):
        out = np.zeros(np.shape(w), dtype=complex)
        for zl in nodes:
            out = out + zl * _odd_even_lap(n, zl, w)
        return out / (m * z)

    return radial_average(kfun, n, r, rho, npts=npts, panels=panels)


def _odd_even_lap(n, zl, w):
    if n % 2 == 1:
        return _odd_laplace_kernel_func(n)(sqrt_upper(zl), w)
    om = sqrt_upper(zl)
    nu = n // 2 - 1
    return complex((1j / 4) * (om / (2 * math.pi)) ** nu) * hankel1(nu, om * w) / w**nu


# ---------------------------------------------------------------------------
# threshold expansion ladder
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ExpansionTerm:
    """One term coeff * mu^p (ln mu)^logmu * r^alpha (ln r)^logr of the ladder."""

    p: Fraction
    logmu: int
    alpha: Fraction
    logr: int
    coeff: complex
    coeff_exact: object = field(compare=False, default=None)

    @property
    def selfadjoint_expected(self) -> bool:
        return abs(self.coeff.imag) < 1e-14 * max(1.0, abs(self.coeff))


@dataclass(frozen=True)
class ExpansionLadder:
    """Truncated threshold expansion of the free-resolvent kernel.

    terms are ordered by increasing mu-power; remainder_order is the power
    of the first omitted contribution.  For even n <= 4m, gdef = (d_k, c_k)
    describes the logarithmic group g(mu) = d_k ln(mu) + c_k at order mu^{2m}.
    """

    n: int
    m: int
    terms: tuple
    remainder_order: Fraction
    case: str
    gdef: tuple | None = None

    def evaluate(self, mu: complex, r) -> np.ndarray:
        """Sum of the retained terms at spectral parameter mu and distance r."""
        r = np.asarray(r, dtype=float)
        lmu = cmath.log(mu)
        out = np.zeros(r.shape, dtype=complex)
        for t in self.terms:
            out = out + (
                t.coeff
                * mu ** float(t.p)
                * lmu ** t.logmu
                * r ** float(t.alpha)
                * (np.log(r) ** t.logr if t.logr else 1.0)
            )
        return out


def threshold_expansion(n: int, m: int, max_power: int | None = None) -> ExpansionLadder:
    """Term ladder of the free resolvent around zero energy for (n, m).

    Terms are generated directly from the composed series coefficients, so
    identical code covers all four dimensional cases; the case tag records
    which regime (n vs 4m, parity) the ladder belongs to.
    """
    dims = coeffs.DimensionOrder(n, m)
    if dims.odd:
        case = "odd_high" if n > 4 * m else "odd_low"
        default_stop = (n - 2 * m + 2) if n > 4 * m else 2 * m
    else:
        case = "even_high" if n > 4 * m else "even_low"
        default_stop = (n - 2 * m + 2) if n > 4 * m else 2 * m
    stop = default_stop if max_power is None else max_power

    terms = []
    gdef = None
    for p in range(0, stop + 1):
        alpha = Fraction(p + 2 * m - n)
        if dims.odd:
            c = coeffs.free_expansion_scalar(n, m, p)
            if c != 0:
                terms.append(
                    ExpansionTerm(Fraction(p), 0, alpha, 0, coeffs.as_complex(c), c)
                )
        else:
            plain, r_log, mu_log, _ = coeffs.even_expansion_scalars(n, m, p)
            if plain != 0:
                terms.append(
                    ExpansionTerm(Fraction(p), 0, alpha, 0, coeffs.as_complex(plain), plain)
                )
            if r_log != 0:
                terms.append(
                    ExpansionTerm(Fraction(p), 0, alpha, 1, coeffs.as_complex(r_log), r_log)
                )
            if mu_log != 0:
                terms.append(
                    ExpansionTerm(Fraction(p), 1, alpha, 0, coeffs.as_complex(mu_log), mu_log)
                )

    # first omitted nonzero order
    rem = None
    for p in range(stop + 1, stop + 4 * m + 3):
        if dims.odd:
            if coeffs.free_expansion_scalar(n, m, p) != 0:
                rem = Fraction(p)
                break
        else:
            scal = coeffs.even_expansion_scalars(n, m, p)
            if any(s != 0 for s in scal):
                rem = Fraction(p)
                break
    if rem is None:
        rem = Fraction(stop + 1)

    if case == "even_low":
        d_k, c_k, _ = coeffs.even_log_coeffs(n, m)
        gdef = (coeffs.as_complex(d_k), coeffs.as_complex(c_k))

    return ExpansionLadder(n, m, tuple(terms), rem, case, gdef)


# ---------------------------------------------------------------------------
# free time propagator (oscillatory quadrature route)
# ---------------------------------------------------------------------------

@lru_cache(maxsize=None)
def _spherical_wave_parts(n: int):
    """Split rho^{n/2} J_{n/2-1}(rho r) into e^{+i rho r} and e^{-i rho r} parts.

    Returns lambdified (A, B) with
    rho^{n/2} J_{n/2-1}(rho r) = A(rho, r) e^{i rho r} + B(rho, r) e^{-i rho r},
    valid for odd n where the half-integer Bessel function is elementary:
    J_{l+1/2}(x) = sqrt(2x/pi) (-x)^l (x^{-1} d/dx)^l (sin x / x).
    """
    if n % 2 == 0:
        raise KernelError("time-kernel quadrature implemented for odd n")
    rho, r = sp.symbols("rho r", positive=True)
    x = sp.symbols("x", positive=True)
    ell = (n - 3) // 2
    # rational prefactors of e^{+ix} and e^{-ix} in sin(x)/x
    plus = 1 / (2 * sp.I * x)
    minus = -1 / (2 * sp.I * x)
    for _ in range(ell):
        plus = sp.cancel((sp.diff(plus, x) + sp.I * plus) / x)
        minus = sp.cancel((sp.diff(minus, x) - sp.I * minus) / x)
    pref = sp.sqrt(2 * x / sp.pi) * (-x) ** ell
    A = sp.cancel(pref * plus).subs(x, rho * r) * rho ** sp.Rational(n, 2)
    B = sp.cancel(pref * minus).subs(x, rho * r) * rho ** sp.Rational(n, 2)
    # verify against the Bessel function at a sample point
    chk = complex(
        (A * sp.exp(sp.I * rho * r) + B * sp.exp(-sp.I * rho * r)).subs(
            {rho: sp.Rational(7, 5), r: sp.Rational(9, 7)}
        ).evalf()
    )
    ref = complex(
        (sp.besselj(sp.Rational(n, 2) - 1, rho * r) * rho ** sp.Rational(n, 2)).subs(
            {rho: sp.Rational(7, 5), r: sp.Rational(9, 7)}
        ).evalf()
    )
    assert abs(chk - ref) < 1e-12 * max(1.0, abs(ref))
    return (
        sp.lambdify((rho, r), A, modules="numpy"),
        sp.lambdify((rho, r), B, modules="numpy"),
    )


def free_propagator_kernel(n: int, m: int, t: float, r: float) -> complex:
    """Kernel of e^{-i t (-Delta)^m} at distance r > 0, odd n.

    The rho-integral is rotated onto the ray rho = e^{-i pi/(4m)} s, where the
    phase factor decays like e^{-t s^{2m}}; panel counts follow the residual
    e^{+/- i rho r} oscillation.
    """
    if t <= 0 or r <= 0:
        raise KernelError("need t > 0 and r > 0")
    A, B = _spherical_wave_parts(n)
    theta = math.pi / (4 * m)
    rot = cmath.exp(-1j * theta)

    # truncation: e^{-t s^{2m}} e^{s r sin(theta)} below 1e-18 of the peak
    s_max = (60.0 / t) ** (1.0 / (2 * m))
    for _ in range(80):
        val = -t * s_max ** (2 * m) + s_max * r * math.sin(theta)
        if val < -45.0:
            break
        s_max *= 1.18

    panels = max(8, int(s_max * r / 3.0) + 1, int(t * s_max ** (2 * m) / 4) + 1)
    x, wq = _gl_nodes(24)
    total = 0.0 + 0.0j
    h = s_max / panels
    for k in range(panels):
        s = (x + 1) * (h / 2) + k * h
        rhoc = rot * s
        phase = np.exp(-1j * t * rhoc ** (2 * m))
        vals = phase * (
            A(rhoc, r) * np.exp(1j * rhoc * r) + B(rhoc, r) * np.exp(-1j * rhoc * r)
        )
        total += rot * np.sum(vals * wq) * (h / 2)

    return complex((2 * math.pi) ** (-n / 2) * r ** (1 - n / 2) * total)


def free_propagator_sup(n: int, m: int, t: float, num_r: int = 48, spread: float = 3.0) -> float:
    """sup_x |K_t(x)| measured on a grid of radii covering the kernel profile.

    The profile concentrates at |x| = O(t^{1/2m}); radii sample that region.
    """
    scale = t ** (1.0 / (2 * m))
    rs = np.linspace(0.08, spread, num_r) * scale
    vals = [abs(free_propagator_kernel(n, m, t, float(r))) for r in rs]
    return float(np.max(vals))
