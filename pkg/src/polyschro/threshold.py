"""Zero-threshold classification via the nested projection chain.

The chain starts from T_0 = U + v G_0 v.  While T_j remains singular,
S_{j+1} projects onto its numerical kernel and the next operator in the
case ladder is compressed to that subspace:

  * n > 4m:       T_1 = S_1 v G_1 v S_1 (always invertible; the kernel of
                  T_0 is the zero eigenspace),
  * 2m < n <= 4m: T_1 = S_1 P S_1 with P the projection onto span(v), then
                  T_j = S_j v |x-y|^{2j-2} v S_j for 2 <= j <= k, and a
                  final always-invertible T_{k+1}.

Every numerical-rank decision carries a spectral-gap certificate; without
a certified gap the classification is reported inconclusive rather than
guessed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import coeffs, kernels, operators
from .operators import ModelSpec
from .potentials import smooth_taper

DEFAULT_TOL = 1e-8
DEFAULT_GAP = 1e2
ZERO_OPERATOR_FLOOR = 1e-10


class ThresholdError(ValueError):
    pass


@dataclass
class StageDiagnostics:
    stage: int
    dim: int
    rank: int
    singular_values: np.ndarray
    smallest_retained: float
    largest_discarded: float
    gap: float
    tol_effective: float
    zero_operator: bool = False

    def to_dict(self) -> dict:
        return {
            "stage": self.stage,
            "dim": self.dim,
            "rank": self.rank,
            "smallest_retained": self.smallest_retained,
            "largest_discarded": self.largest_discarded,
            "gap": self.gap,
            "tol_effective": self.tol_effective,
            "zero_operator": self.zero_operator,
        }


@dataclass
class ProjectionChain:
    """Projections S_1..S_J, stage operators, and their regularized inverses."""

    bases: list          # full-space orthonormal bases of the S_j ranges
    projections: list    # S_j as N x N matrices
    stage_ops: list      # T_j compressed to the stage basis (T_0 is full)
    regularized_inverses: list  # D_j = (T_j + S_{j+1})^{-1}, full-space embedding
    diagnostics: list
    tol: float

    @property
    def ranks(self):
        return [b.shape[1] for b in self.bases]


@dataclass
class ResonanceClassification:
    """Outcome of the threshold chain on one model."""

    label: object            # coeffs.REGULAR / coeffs.resonance(j) / coeffs.EIGENVALUE
    kind: str                # "regular" | "resonance" | "eigenvalue" | "mixed" | "inconclusive"
    resonance_order: int | None
    ranks: list
    mixed: bool
    tolerance: float
    inconclusive_stage: int | None = None
    notes: str = ""

    def decay(self, n: int, m: int) -> coeffs.DecayRate:
        return coeffs.decay_rate(n, m, self.label)

    def to_dict(self) -> dict:
        return {
            "label": str(self.label),
            "kind": self.kind,
            "resonance_order": self.resonance_order,
            "ranks": self.ranks,
            "mixed": self.mixed,
            "tolerance": self.tolerance,
            "inconclusive_stage": self.inconclusive_stage,
            "notes": self.notes,
        }


def kernel_projection(T: np.ndarray, tol: float = DEFAULT_TOL,
                      gap_factor: float = DEFAULT_GAP,
                      scale_hint: float | None = None):
    """Orthogonal projection onto the numerical kernel of a symmetric matrix.

    Returns (basis, diag): basis has one column per kernel vector.  The rank
    decision demands a spectral gap of at least `gap_factor` between the
    discarded and retained singular values; otherwise diag.gap records the
    failure and the caller reports the model inconclusive.
    """
    T = np.asarray(T)
    dim = T.shape[0]
    sym_defect = np.linalg.norm(T - T.T, 2)
    scale = np.linalg.norm(T, 2) if scale_hint is None else max(np.linalg.norm(T, 2), 0.0)
    floor = ZERO_OPERATOR_FLOOR * (scale_hint if scale_hint is not None else 1.0)
    if scale <= floor or dim == 0:
        # the stage operator vanishes on this subspace: full kernel
        diag = StageDiagnostics(-1, dim, dim, np.zeros(dim), math.inf, scale, math.inf,
                                tol * max(scale, floor), zero_operator=True)
        return np.eye(dim), diag
    if sym_defect > 1e-8 * scale:
        raise ThresholdError(f"stage operator not symmetric: defect {sym_defect:.3e}")
    Ts = 0.5 * (T + T.T)
    vals, vecs = np.linalg.eigh(Ts)
    svals = np.abs(vals)
    order = np.argsort(svals)
    svals_sorted = svals[order]
    smax = svals_sorted[-1]
    cutoff = tol * smax
    rank = int(np.searchsorted(svals_sorted, cutoff))
    if rank == 0:
        gap = math.inf
        smallest_retained = svals_sorted[0]
        largest_discarded = 0.0
    elif rank == dim:
        gap = math.inf
        smallest_retained = math.inf
        largest_discarded = svals_sorted[-1]
    else:
        smallest_retained = svals_sorted[rank]
        largest_discarded = svals_sorted[rank - 1]
        gap = smallest_retained / max(largest_discarded, 1e-300)
    diag = StageDiagnostics(-1, dim, rank, svals_sorted, smallest_retained,
                            largest_discarded, gap, cutoff)
    basis = vecs[:, order[:rank]]
    return basis, diag


def span_projection(u: np.ndarray) -> np.ndarray:
    """Rank-one projection onto span(u)."""
    nu = np.linalg.norm(u)
    if nu == 0:
        raise ThresholdError("projection onto the span of the zero vector")
    un = u / nu
    return np.outer(un, un)


def chain_operators(spec: ModelSpec):
    """(T_0, [A_1, A_2, ...]) where T_j = S_j A_j S_j for j >= 1.

    A_j are full-space matrices built from the case ladder of the threshold
    expansion; scalar coefficients that the expansion attaches to the
    highest kernels (all real) are kept inside the operators.
    """
    n, m = spec.n, spec.m
    g = spec.grid
    v = spec.potential.v(g.r)
    U = np.diag(spec.potential.sign(g.r))
    c0 = float(np.real(coeffs.as_complex(coeffs.riesz_constant(n, m))))
    G0 = c0 * operators.kernel_shape_operator(spec, 2 * m - n).real
    T0 = U + G0
    ladder = []
    if n > 4 * m:
        # mu^{2m} coefficient: kernel a_1 |x-y|^{4m-n}
        if n % 2 == 1:
            a1 = coeffs.as_complex(coeffs.free_expansion_scalar(n, m, 2 * m))
        else:
            a1 = coeffs.as_complex(coeffs.even_expansion_scalars(n, m, 2 * m)[0])
        assert abs(a1.imag) < 1e-12 * abs(a1)
        ladder.append(a1.real * operators.kernel_shape_operator(spec, 4 * m - n).real)
    else:
        k = coeffs.resonance_count(n, m)
        P = kernels.sphere_area(n) * np.outer(v * g.sqrtw, v * g.sqrtw)
        ladder.append(P)
        for j in range(2, k + 1):
            ladder.append(operators.kernel_shape_operator(spec, 2 * j - 2).real)
        if n % 2 == 1:
            ck1 = coeffs.as_complex(coeffs.free_expansion_scalar(n, m, 2 * m))
            assert abs(ck1.imag) < 1e-12 * abs(ck1)
            ladder.append(ck1.real * operators.kernel_shape_operator(spec, 2 * k - 1).real)
        else:
            _, _, dk1 = coeffs.even_log_coeffs(n, m)
            dk1 = coeffs.as_complex(dk1)
            assert abs(dk1.imag) < 1e-12 * abs(dk1)
            ladder.append(
                dk1.real * operators.kernel_shape_operator(spec, 2 * k - 2, logr=1).real
            )
    return T0, ladder


def classify_zero(spec: ModelSpec, tol: float = DEFAULT_TOL,
                  gap_factor: float = DEFAULT_GAP):
    """Run the projection chain; returns (ResonanceClassification, ProjectionChain)."""
    n, m = spec.n, spec.m
    k = None if n > 4 * m else coeffs.resonance_count(n, m)
    max_stage = 1 if n > 4 * m else k + 1

    T0, ladder = chain_operators(spec)
    N = T0.shape[0]

    bases = []
    projections = []
    stage_ops = [T0]
    dinvs = []
    diags = []

    basis, diag = kernel_projection(T0, tol, gap_factor)
    diag.stage = 0
    diags.append(diag)

    def certified(d: StageDiagnostics) -> bool:
        if d.zero_operator or d.rank == d.dim:
            return True
        if d.rank == 0:
            return d.smallest_retained >= gap_factor * d.tol_effective
        return d.gap >= gap_factor

    inconclusive_at = None
    if not certified(diag):
        inconclusive_at = 0

    current = basis  # full-space orthonormal basis of S_1
    stage = 0
    while current.shape[1] > 0 and stage < max_stage and inconclusive_at is None:
        stage += 1
        bases.append(current)
        projections.append(current @ current.T)
        A = ladder[stage - 1]
        Tj = current.T @ A @ current
        scale_hint = float(np.linalg.norm(A, 2))
        sub_basis, diag = kernel_projection(Tj, tol, gap_factor, scale_hint=scale_hint)
        diag.stage = stage
        diags.append(diag)
        stage_ops.append(Tj)
        # D_j = (T_j + S_{j+1})^{-1} on the stage subspace, embedded in full space
        Sj1 = sub_basis @ sub_basis.T
        Dj = np.linalg.inv(Tj + Sj1)
        dinvs.append(current @ Dj @ current.T)
        if not certified(diag):
            inconclusive_at = stage
            break
        current = current @ sub_basis

    # D_0 on the full space
    if bases:
        S1 = projections[0]
    else:
        S1 = np.zeros_like(T0)
    D0 = np.linalg.inv(T0 + S1)
    dinvs.insert(0, D0)

    chain = ProjectionChain(bases, projections, stage_ops, dinvs, diags, tol)

    ranks = chain.ranks
    if inconclusive_at is not None:
        cls = ResonanceClassification(
            label=None, kind="inconclusive", resonance_order=None, ranks=ranks,
            mixed=False, tolerance=tol, inconclusive_stage=inconclusive_at,
            notes="no certified spectral gap at the flagged stage",
        )
        return cls, chain

    if not bases:
        cls = ResonanceClassification(coeffs.REGULAR, "regular", None, [], False, tol)
        return cls, chain

    J = stage  # first invertible stage (T_J nonsingular on S_J)
    if current.shape[1] > 0:
        # ran out of ladder with a surviving kernel
        raise ThresholdError(
            f"chain did not terminate: S_{J + 1} has rank {current.shape[1]} but the "
            "final stage operator must have trivial kernel"
        )
    mixed = ranks[0] != ranks[-1]
    if n > 4 * m:
        label = coeffs.EIGENVALUE
        kind = "eigenvalue"
        order = None
    elif J == k + 1:
        label = coeffs.EIGENVALUE
        kind = "mixed" if mixed else "eigenvalue"
        order = None
    else:
        label = coeffs.resonance(J)
        kind = "mixed" if mixed else "resonance"
        order = J
    cls = ResonanceClassification(label, kind, order, ranks, mixed, tol)
    return cls, chain


def moment_conditions(phi: np.ndarray, spec: ModelSpec, degree: int,
                      tol: float = 1e-8):
    """Radial moment tests int r^a v phi dmu for a = 0..degree.

    Returns a list of (value, vanished) pairs; phi is a half-weighted grid
    vector.  Membership in S_{j+1} corresponds to vanishing moments of
    degree <= j - 1 (odd degrees vanish automatically for radial sectors).
    """
    g = spec.grid
    v = spec.potential.v(g.r)
    out = []
    phi = np.asarray(phi)
    for a in range(degree + 1):
        weight = g.sqrtw * g.r**a * v
        val = float(np.real_if_close(np.dot(weight, phi)))
        scale = np.linalg.norm(weight) * np.linalg.norm(phi)
        out.append((val, abs(val) <= tol * max(scale, 1e-300)))
    return out


def reconstruct_threshold_function(phi: np.ndarray, spec: ModelSpec,
                                   tol: float = 1e-6):
    """psi = -G_0 v phi, the threshold solution generating the kernel vector.

    Returns (psi, report) where report carries the defining residual
    ||phi - U v psi||, weighted norms of psi, and the interior distributional
    residual of H psi (computed on a smoothly tapered copy).
    """
    g = spec.grid
    n, m = spec.n, spec.m
    c0 = float(np.real(coeffs.as_complex(coeffs.riesz_constant(n, m))))
    G0 = c0 * operators.kernel_shape_operator(spec, 2 * m - n, sandwiched=False).real
    v = spec.potential.v(g.r)
    U = spec.potential.sign(g.r)
    psi = -G0 @ (v * np.asarray(phi))
    resid = np.linalg.norm(np.asarray(phi) - U * v * psi) / max(np.linalg.norm(phi), 1e-300)

    sigma_res = 2 * m - n / 2  # resonance weight threshold
    report = {
        "defining_residual": float(resid),
        "l2_norm": float(np.linalg.norm(psi)),
        "weighted_norms": {
            f"s={s:.3g}": operators.weighted_norm(psi, -s, g)
            for s in (max(sigma_res, 0) + 0.51, n / 2 + 0.51)
        },
    }
    # distributional residual on the interior, via a tapered copy
    a, b = 0.6 * g.R, 0.85 * g.R
    chi = smooth_taper(g.r, a, b, 9)
    H = operators.discretize_H(spec).mat
    res = H @ (psi * chi)
    inner = g.r < a - 0.5
    report["interior_H_residual"] = float(
        np.linalg.norm(res[inner]) / max(np.linalg.norm(psi), 1e-300)
    )
    if resid > tol:
        report["warning"] = "defining residual exceeds tolerance; refine the grid"
    return psi, report


# ---------------------------------------------------------------------------
# coupling sweeps
# ---------------------------------------------------------------------------

def birman_schwinger_coupling(spec: ModelSpec) -> float:
    """Critical coupling from the Birman-Schwinger route.

    For V <= 0, zero goes singular at lambda* = 1/max-eig(v G_0 v): direct
    eigensolve, no search.
    """
    g = spec.grid
    V = spec.potential(g.r)
    if np.any(V > 1e-12):
        raise ThresholdError("Birman-Schwinger coupling assumes an attractive V <= 0")
    n, m = spec.n, spec.m
    c0 = float(np.real(coeffs.as_complex(coeffs.riesz_constant(n, m))))
    K = c0 * operators.kernel_shape_operator(spec, 2 * m - n).real
    top = float(np.linalg.eigvalsh(K)[-1])
    if top <= 0:
        raise ThresholdError("Birman-Schwinger operator has no positive spectrum")
    return 1.0 / top


def coupling_bisection(spec: ModelSpec, lo: float, hi: float,
                       tol_coupling: float = 1e-6, max_iter: int = 80):
    """Bisection for the coupling where the lowest eigenvalue of H crosses zero.

    The indicator is the sign of min spec(L^m + lam*V); V must make the
    indicator change sign on [lo, hi].  Returns (lam_star, bracket_width).
    """
    g = spec.grid
    Lm = g.laplacian_power(spec.m)
    V = np.diag(spec.potential(g.r))

    def ground(lam):
        return float(np.linalg.eigvalsh(Lm + lam * V)[0])

    flo, fhi = ground(lo), ground(hi)
    if flo * fhi > 0:
        raise ThresholdError(
            f"no eigenvalue crossing in [{lo}, {hi}]: f(lo)={flo:.3e}, f(hi)={fhi:.3e}"
        )
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        fm = ground(mid)
        if flo * fm <= 0:
            hi, fhi = mid, fm
        else:
            lo, flo = mid, fm
        if hi - lo < tol_coupling:
            break
    return 0.5 * (lo + hi), hi - lo


def scaled_spec(spec: ModelSpec, lam: float) -> ModelSpec:
    """Model with potential lam * V, sharing the grid of `spec`."""
    from .potentials import TabulatedPotential

    base = spec.potential
    pot = TabulatedPotential(lambda r: lam * base(r), beta_hint=getattr(base, "beta", math.inf))
    pot.breakpoints = tuple(getattr(base, "breakpoints", ()))
    return ModelSpec(spec.n, spec.m, pot, spec.beta, spec.R, spec.N, spec.points_per_panel)
