"""Radial potential families and exactly-planted threshold models.

Every family knows its own dilation derivative r V'(r) in closed form, the
decay exponent it guarantees, and how to serialize itself into the JSON
model configuration.

The planted models blend a constant core into an exact tail across an
annulus [r0 - eps, r0 + eps].  Outside the annulus the defining identity
V = (E psi - (-Delta)^m psi)/psi makes V vanish identically, so psi is an
exact solution of (H - E) psi = 0 and V is compactly supported.  All blend
evaluations use factored forms (regularized incomplete beta for the
smoothstep, falling-factorial products for its derivatives): the spectral
Laplacian downstream amplifies pointwise noise by lambda_max^{2m}, so the
naive expanded polynomials are not accurate enough.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import sympy as sp
from scipy.optimize import brentq
from scipy.special import betainc


class PotentialError(ValueError):
    pass


V_FLOOR = 1e-300  # |V| below this counts as exactly zero for sign purposes


class RadialPotential:
    """Base class: a real radial potential with analytic metadata."""

    name = "base"
    beta = math.inf  # decay exponent: |V(r)| <= C (1+r)^{-beta}
    breakpoints: tuple = ()

    def __call__(self, r):
        raise NotImplementedError

    def v(self, r):
        """|V|^{1/2}."""
        return np.sqrt(np.abs(self(r)))

    def sign(self, r):
        """sign(V); +1 where V vanishes (the choice is inert there since v=0)."""
        V = np.asarray(self(r))
        s = np.sign(V)
        s[np.abs(V) <= V_FLOOR] = 1.0
        return s

    def x_grad_V(self, r):
        """r V'(r), the dilation derivative; None when no closed form exists."""
        return None

    def params(self) -> dict:
        return {}

    def to_dict(self) -> dict:
        return {"family": self.name, "params": self.params()}


@dataclass
class GaussianPotential(RadialPotential):
    """V(r) = amplitude * exp(-(r/width)^2)."""

    amplitude: float
    width: float = 1.0
    name = "gaussian"

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        return self.amplitude * np.exp(-((r / self.width) ** 2))

    def x_grad_V(self, r):
        r = np.asarray(r, dtype=float)
        return -2.0 * r**2 / self.width**2 * self(r)

    def params(self):
        return {"amplitude": self.amplitude, "width": self.width}


@dataclass
class ExponentialPotential(RadialPotential):
    """V(r) = amplitude * exp(-r/width)."""

    amplitude: float
    width: float = 1.0
    name = "exponential"

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        return self.amplitude * np.exp(-r / self.width)

    def x_grad_V(self, r):
        r = np.asarray(r, dtype=float)
        return -(r / self.width) * self(r)

    def params(self):
        return {"amplitude": self.amplitude, "width": self.width}


@dataclass
class CappedPowerPotential(RadialPotential):
    """V(r) = amplitude * r^{-nu} outside r = delta, with a C^2 polynomial cap inside.

    The cap a0 + a2 r^2 + a4 r^4 matches value and first two derivatives at
    delta, so the capped family still has a closed-form dilation derivative.
    """

    amplitude: float
    nu: float
    delta: float = 0.5
    name = "capped_power"

    def __post_init__(self):
        if self.nu <= 0 or self.delta <= 0:
            raise PotentialError("need nu > 0 and delta > 0")
        d, nu = self.delta, self.nu
        f = d**-nu
        fp = -nu * d ** (-nu - 1)
        fpp = nu * (nu + 1) * d ** (-nu - 2)
        self._a4 = (fpp - fp / d) / (8 * d**2)
        self._a2 = fp / (2 * d) - 2 * self._a4 * d**2
        self._a0 = f - self._a2 * d**2 - self._a4 * d**4

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        inside = self.amplitude * (self._a0 + self._a2 * r**2 + self._a4 * r**4)
        outside = self.amplitude * r ** (-self.nu)
        return np.where(r < self.delta, inside, outside)

    def x_grad_V(self, r):
        r = np.asarray(r, dtype=float)
        inside = self.amplitude * (2 * self._a2 * r**2 + 4 * self._a4 * r**4)
        outside = -self.nu * self.amplitude * r ** (-self.nu)
        return np.where(r < self.delta, inside, outside)

    @property
    def beta(self):
        return self.nu

    @property
    def breakpoints(self):
        return (self.delta,)

    def params(self):
        return {"amplitude": self.amplitude, "nu": self.nu, "delta": self.delta}


@dataclass
class TabulatedPotential(RadialPotential):
    """Potential given by an arbitrary callable; no dilation derivative."""

    func: object
    beta_hint: float = math.inf
    name = "tabulated"

    def __call__(self, r):
        return np.asarray(self.func(np.asarray(r, dtype=float)), dtype=float)

    @property
    def beta(self):
        return self.beta_hint

    def params(self):
        return {"beta_hint": self.beta_hint}


# ---------------------------------------------------------------------------
# stable smoothstep and blend profiles
# ---------------------------------------------------------------------------

def _falling(N: int, a: int) -> int:
    if a > N:
        return 0
    out = 1
    for i in range(a):
        out *= N - i
    return out


def smoothstep(x, order: int = 9):
    """0 for x <= 0, 1 for x >= 1, C^order in between.

    Evaluated as the regularized incomplete beta I_x(order+1, order+1),
    which is numerically stable where the expanded polynomial is not.
    """
    x = np.clip(np.asarray(x, dtype=float), 0.0, 1.0)
    return betainc(order + 1, order + 1, x)


def smoothstep_deriv(i: int, x, order: int = 9):
    """i-th derivative of the smoothstep, in factored (cancellation-free) form."""
    if i == 0:
        return smoothstep(x, order)
    x = np.asarray(x, dtype=float)
    N = order
    C = (2 * N + 1) * math.comb(2 * N, N)
    k = i - 1
    out = np.zeros_like(x)
    inside = (x > 0.0) & (x < 1.0)
    xi = x[inside]
    acc = np.zeros_like(xi)
    for a in range(0, k + 1):
        fa = _falling(N, a)
        fb = _falling(N, k - a)
        if fa == 0 or fb == 0:
            continue
        acc += (
            math.comb(k, a)
            * fa
            * fb
            * (-1) ** (k - a)
            * xi ** (N - a)
            * (1 - xi) ** (N - (k - a))
        )
    out[inside] = C * acc
    return out


def smooth_taper(r, start: float, stop: float, order: int = 9):
    """1 below `start`, 0 above `stop`, smoothstep transition in between."""
    return smoothstep((stop - np.asarray(r, dtype=float)) / (stop - start), order)


class Tail:
    """Radial profile with derivatives up to the needed order."""

    def deriv(self, j: int, r):
        raise NotImplementedError


@dataclass
class ConstantTail(Tail):
    value: float

    def deriv(self, j, r):
        r = np.asarray(r, dtype=float)
        return np.full_like(r, self.value) if j == 0 else np.zeros_like(r)


@dataclass
class PowerTail(Tail):
    """c * r^a with integer a (exact polyharmonic tails use a = 2j - n)."""

    a: int
    c: float = 1.0

    def deriv(self, j, r):
        r = np.asarray(r, dtype=float)
        return self.c * _falling_real(self.a, j) * r ** (self.a - j)


def _falling_real(a, j):
    out = 1.0
    for i in range(j):
        out *= a - i
    return out


@dataclass
class YukawaTail(Tail):
    """c * exp(-kappa r) / r, the decaying second-order resolvent tail in n=3."""

    kappa: float
    c: float = 1.0

    def deriv(self, j, r):
        r = np.asarray(r, dtype=float)
        # d^j/dr^j [e^{-kr} r^{-1}] = e^{-kr} sum_i binom(j,i) (-k)^{j-i} (-1)^i i! r^{-1-i}
        out = np.zeros_like(r)
        for i in range(j + 1):
            out += (
                math.comb(j, i)
                * (-self.kappa) ** (j - i)
                * (-1) ** i
                * math.factorial(i)
                * r ** (-1 - i)
            )
        return self.c * np.exp(-self.kappa * r) * out


@dataclass
class BesselPotentialTail(Tail):
    """Kernel of (1 - Delta)^{-1} on R^n: smooth, positive, O(e^{-r}) at infinity.

    n = 3 uses the closed Yukawa form; other n >= 3 evaluate
    c_n e^{-r} int_0^inf e^{-rt} (t + t^2)^{(n-3)/2} dt
    and its r-derivatives by Gauss-Laguerre quadrature under the integral.
    """

    n: int
    npts: int = 120

    def __post_init__(self):
        if self.n < 3:
            raise PotentialError("Bessel-potential tail needs n >= 3")
        from scipy.special import gamma, roots_laguerre

        self._cn = 1.0 / (2 * (2 * math.pi) ** ((self.n - 1) / 2) * gamma((self.n - 1) / 2))
        self._lag = roots_laguerre(self.npts)

    def deriv(self, j, r):
        r = np.asarray(r, dtype=float)
        if self.n == 3:
            return YukawaTail(1.0, 1 / (4 * math.pi)).deriv(j, r)
        x, w = self._lag  # weight e^{-x} on (0, inf)
        t = x[:, None] / r[None, :]
        # d^j/dr^j e^{-r(1+t)} = (-(1+t))^j e^{-r(1+t)}; substitute x = r t
        vals = (-(1 + t)) ** j * (t + t**2) ** ((self.n - 3) / 2)
        integ = np.sum(w[:, None] * vals, axis=0) / r
        return self._cn * np.exp(-r) * integ


@dataclass
class _ScaledTail(Tail):
    base: Tail
    scale: float

    def deriv(self, j, r):
        return self.scale * self.base.deriv(j, r)


@lru_cache(maxsize=None)
def radial_polyharmonic_coeffs(n: int, m: int) -> tuple:
    """Exact rationals c_j with Delta^m f = sum_{j=1}^{2m} c_j r^{j-2m} f^{(j)}."""
    r = sp.symbols("r", positive=True)
    f = sp.Function("f")
    expr = f(r)
    for _ in range(m):
        expr = sp.diff(expr, r, 2) + sp.Rational(n - 1) / r * sp.diff(expr, r)
    expr = sp.expand(expr)
    out = []
    for j in range(1, 2 * m + 1):
        cj = expr.coeff(sp.Derivative(f(r), (r, j))) * r ** (2 * m - j)
        cj = sp.simplify(cj)
        assert cj.is_constant(), f"unexpected radial coefficient {cj}"
        out.append(float(cj))
    return tuple(out)


class BlendProfile:
    """psi = S(x) core + (1 - S(x)) tail with x = (r0 + eps - r)/(2 eps).

    Provides psi and its derivatives up to 2m in stable factored arithmetic,
    plus Delta^m psi through the exact radial coefficient table.
    """

    def __init__(self, n: int, m: int, core: Tail, tail: Tail,
                 r0: float, eps: float, order: int = 9):
        self.n, self.m = n, m
        self.core, self.tail = core, tail
        self.r0, self.eps, self.order = r0, eps, order
        self.lo, self.hi = r0 - eps, r0 + eps
        self._cj = radial_polyharmonic_coeffs(n, m)

    def _window_deriv(self, i: int, r):
        # derivative in r of S((hi - r)/(2 eps)); chain rule factor (-1/2eps)^i
        x = (self.hi - np.asarray(r, dtype=float)) / (2 * self.eps)
        return smoothstep_deriv(i, x, self.order) * (-1.0 / (2 * self.eps)) ** i

    def deriv(self, j: int, r):
        """j-th derivative of psi at radii r (any region)."""
        r = np.asarray(r, dtype=float)
        out = np.zeros_like(r)
        inner = r <= self.lo
        outer = r >= self.hi
        mid = ~(inner | outer)
        if np.any(inner):
            out[inner] = self.core.deriv(j, r[inner])
        if np.any(outer):
            out[outer] = self.tail.deriv(j, r[outer])
        if np.any(mid):
            rm = r[mid]
            acc = np.zeros_like(rm)
            for i in range(j + 1):
                wi = self._window_deriv(i, rm)
                acc += math.comb(j, i) * wi * (
                    self.core.deriv(j - i, rm) - self.tail.deriv(j - i, rm)
                )
            acc += self.tail.deriv(j, rm)
            out[mid] = acc
        return out

    def psi(self, r):
        return self.deriv(0, r)

    def polyharmonic(self, r):
        """(-Delta)^m psi, exact in every region."""
        r = np.asarray(r, dtype=float)
        out = np.zeros_like(r)
        for j, cj in enumerate(self._cj, start=1):
            out += cj * r ** (j - 2 * self.m) * self.deriv(j, r)
        return (-1.0) ** self.m * out


@dataclass
class BlendPlantPotential(RadialPotential):
    """Compactly supported potential built so that H psi = E psi exactly.

    tail_kind "power" plants zero-energy tails c r^{tail_power}; "yukawa"
    plants an n=3, m=1 bound state at the given negative energy.
    """

    n: int
    m: int
    tail_power: int
    r0: float
    eps: float
    order: int = 9
    core_value: float = 1.0
    tail_coeff: float = 1.0
    energy: float = 0.0
    tail_kind: str = "power"
    name = "blend_plant"

    def __post_init__(self):
        if self.eps <= 0 or self.r0 - self.eps <= 0:
            raise PotentialError("blend annulus must sit inside (0, inf)")
        if self.tail_kind == "power":
            tail = PowerTail(self.tail_power, self.tail_coeff)
        elif self.tail_kind == "yukawa":
            if self.energy >= 0:
                raise PotentialError("yukawa tail needs energy < 0")
            tail = YukawaTail(math.sqrt(-self.energy), self.tail_coeff)
        elif self.tail_kind == "bessel":
            # (-Delta)^m Phi = Phi away from the origin for even m, so this
            # tail plants the embedded eigenvalue E = +1
            if self.m % 2 != 0 or self.energy != 1.0:
                raise PotentialError("bessel tail needs even m and energy = 1")
            base = BesselPotentialTail(self.n)
            tail = _ScaledTail(base, self.tail_coeff)
        else:
            raise PotentialError(f"unknown tail kind {self.tail_kind}")
        self._profile = BlendProfile(
            self.n, self.m, ConstantTail(self.core_value), tail,
            self.r0, self.eps, self.order,
        )
        self._vzeros = self._find_sign_changes()

    def _find_sign_changes(self) -> tuple:
        lo, hi = self.r0 - self.eps, self.r0 + self.eps
        rs = np.linspace(lo + 1e-9, hi - 1e-9, 4001)
        vals = self._raw_V(rs)
        zeros = []
        sign = np.sign(vals)
        idx = np.nonzero(sign[:-1] * sign[1:] < 0)[0]
        for i in idx:
            zeros.append(brentq(lambda x: float(self._raw_V(np.array([x]))[0]),
                                rs[i], rs[i + 1], xtol=1e-13))
        return tuple(zeros)

    def _raw_V(self, r):
        psi = self._profile.psi(r)
        return (self.energy * psi - self._profile.polyharmonic(r)) / psi

    @property
    def support_radius(self) -> float:
        return self.r0 + self.eps

    @property
    def breakpoints(self):
        return (self.r0 - self.eps,) + self._vzeros + (self.r0 + self.eps,)

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        lo, hi = self.r0 - self.eps, self.r0 + self.eps
        out = np.zeros_like(r)
        out[r <= lo] = self.energy  # constant core: V = E there
        mid = (r > lo) & (r < hi)
        if np.any(mid):
            out[mid] = self._raw_V(r[mid])
        return out

    def psi(self, r):
        """The planted solution of (H - E) psi = 0, sampled at r."""
        return self._profile.psi(r)

    def psi_deriv(self, j, r):
        return self._profile.deriv(j, r)

    def params(self):
        return {
            "n": self.n, "m": self.m, "tail_power": self.tail_power,
            "r0": self.r0, "eps": self.eps, "order": self.order,
            "core_value": self.core_value, "tail_coeff": self.tail_coeff,
            "energy": self.energy, "tail_kind": self.tail_kind,
        }


def plant_zero_eigenvalue(n: int, m: int, r0: float = 5.0, eps: float = 1.5,
                          order: int = 9) -> BlendPlantPotential:
    """Potential with an exact L^2 zero-eigenfunction (tail r^{2-n}).

    Requires n > 4 so that the r^{2-n} tail is square integrable.
    """
    if n <= 4:
        raise PotentialError("an L^2 zero-eigenfunction tail r^{2-n} needs n > 4")
    return BlendPlantPotential(n, m, 2 - n, r0, eps, order,
                               core_value=1.0, tail_coeff=float(r0 ** (n - 2)))


def plant_zero_resonance(n: int, m: int, kind: int = 1, r0: float = 5.0, eps: float = 1.5,
                         order: int = 9) -> BlendPlantPotential:
    """Potential with an exact zero-resonance of the requested (odd) kind.

    The tail r^{2m-n-(kind-1)} must be polyharmonic, which on radial
    functions restricts plants to odd kinds; even kinds live in nonradial
    angular sectors.
    """
    if kind % 2 == 0:
        raise PotentialError("radial tails only realize odd resonance kinds")
    a = 2 * m - n - (kind - 1)
    j = (a + n) // 2
    if not (1 <= j <= m) or a != 2 * j - n:
        raise PotentialError(f"tail power {a} is not polyharmonic for (n={n}, m={m})")
    return BlendPlantPotential(n, m, a, r0, eps, order,
                               core_value=1.0, tail_coeff=float(r0 ** (-a)))


def plant_bound_state(energy: float = -1.0, r0: float = 4.0, eps: float = 1.2,
                      order: int = 9) -> BlendPlantPotential:
    """n=3, m=1 potential with an exact bound state at the given energy < 0."""
    if energy >= 0:
        raise PotentialError("bound-state plant needs energy < 0")
    kappa = math.sqrt(-energy)
    scale = r0 * math.exp(kappa * r0)
    return BlendPlantPotential(
        3, 1, 0, r0, eps, order, core_value=1.0, tail_coeff=scale,
        energy=energy, tail_kind="yukawa"
    )


_FAMILIES = {
    "gaussian": GaussianPotential,
    "exponential": ExponentialPotential,
    "capped_power": CappedPowerPotential,
    "blend_plant": BlendPlantPotential,
}


def potential_from_dict(d: dict) -> RadialPotential:
    family = d.get("family")
    if family not in _FAMILIES:
        raise PotentialError(
            f"unknown potential family {family!r}; known: {sorted(_FAMILIES)}"
        )
    return _FAMILIES[family](**d.get("params", {}))
