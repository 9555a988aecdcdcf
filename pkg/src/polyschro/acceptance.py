"""Acceptance suite: every exit criterion as a callable check.

Each criterion returns a CriterionResult with a pass flag and the measured
quantities; `run_all` executes the registry in order and is shared by the
CLI `verify-all` subcommand and the pytest acceptance module.  Criterion
keys name the mathematical statement they exercise, and every tolerance is
pinned here.
"""

from __future__ import annotations

import cmath
import math
import time
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import coeffs, dynamics, eigentools, inversion, kernels, operators, threshold
from .operators import ModelSpec
from .potentials import (GaussianPotential, ExponentialPotential,
                         CappedPowerPotential, plant_zero_eigenvalue,
                         plant_zero_resonance, smooth_taper)


@dataclass
class CriterionResult:
    key: str
    passed: bool
    details: dict
    runtime: float = 0.0

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"[{status}] {self.key} ({self.runtime:.1f}s)"


class AcceptanceContext:
    """Caches the shared heavyweight artifacts across criteria."""

    def __init__(self, seed: int = 2023):
        self.seed = seed
        self._cache: dict = {}

    def rng(self):
        return np.random.default_rng(self.seed)

    def get(self, key, builder):
        if key not in self._cache:
            self._cache[key] = builder()
        return self._cache[key]

    # shared models -----------------------------------------------------------

    def plant52(self):
        return self.get("plant52", lambda: ModelSpec(
            5, 2, plant_zero_eigenvalue(5, 2), beta=30.0, R=30.0, N=384))

    def weak52(self):
        return self.get("weak52", lambda: ModelSpec(
            5, 2, GaussianPotential(-0.1, 1.0), beta=20.0, R=30.0, N=384))

    def kj31(self):
        def build():
            spec = ModelSpec(3, 1, GaussianPotential(-0.5, 1.5), beta=20.0, R=200.0, N=1024)
            return spec, dynamics.spectral_decompose(spec)
        return self.get("kj31", build)

    def kj52(self):
        def build():
            spec = ModelSpec(5, 2, GaussianPotential(-0.5, 1.5), beta=20.0, R=240.0, N=1024)
            return spec, dynamics.spectral_decompose(spec)
        return self.get("kj52", build)


REGISTRY: dict = {}


def criterion(key):
    def wrap(fn):
        REGISTRY[key] = fn
        return fn
    return wrap


# ---------------------------------------------------------------------------
# 1. splitting identity
# ---------------------------------------------------------------------------

@criterion("splitting_identity")
def check_splitting(ctx: AcceptanceContext) -> dict:
    rng = ctx.rng()
    worst = 0.0
    count = 0
    for m in (1, 2, 3, 4):
        for _ in range(250):
            z = complex(rng.normal(), rng.normal())
            if abs(z.imag) < 1e-3:
                z += 0.5j
            s = complex(rng.normal(), rng.normal())
            nodes = kernels.splitting_nodes(z, m)
            lhs = 1.0 / (s**m - z)
            rhs = sum(zl / (s - zl) for zl in nodes) / (m * z)
            worst = max(worst, abs(lhs - rhs))
            count += 1
    return {"passed": worst < 1e-12, "samples": count, "worst_residual": worst,
            "tolerance": 1e-12}


# ---------------------------------------------------------------------------
# 2. coefficient cancellations
# ---------------------------------------------------------------------------

@criterion("coefficient_cancellations")
def check_cancellations(ctx) -> dict:
    import sympy as sp

    odd_ok = all(
        coeffs.laplacian_odd_coeff(n, j) == 0
        for n in (3, 5, 7, 9, 11)
        for j in range(1, n - 2, 2)
    )
    collapse_ok = all(
        sp.simplify(coeffs.odd_series_coeff(1, j) - sp.I**j) == 0 for j in range(41)
    )
    return {"passed": odd_ok and collapse_ok, "odd_kernel_zeros": odd_ok,
            "order_one_collapse": collapse_ok, "exact": True}


# ---------------------------------------------------------------------------
# 3. Green-constant cross checks
# ---------------------------------------------------------------------------

@criterion("green_constant_cross_checks")
def check_green_constants(ctx) -> dict:
    import sympy as sp

    worst = 0.0
    values = {}
    for (n, m) in ((3, 1), (5, 1), (5, 2), (7, 2)):
        series_route = complex(sp.N(coeffs.riesz_constant(n, m), 30))
        gamma_route = complex(sp.N(coeffs.gamma_riesz_constant(n, m), 30))
        rel = abs(series_route - gamma_route) / abs(gamma_route)
        worst = max(worst, rel)
        values[f"({n},{m})"] = series_route.real
    return {"passed": worst < 1e-10, "worst_relative": worst, "constants": values,
            "tolerance": 1e-10}


# ---------------------------------------------------------------------------
# 4. free dispersive decay
# ---------------------------------------------------------------------------

@criterion("free_dispersive_decay")
def check_free_dispersive(ctx) -> dict:
    out = {}
    ok = True
    for (n, m) in ((3, 1), (5, 2), (7, 3)):
        t0 = time.time()
        fit = dynamics.free_dispersive_fit(n, m, np.geomspace(1e2, 1e4, 9))
        dt = time.time() - t0
        out[f"({n},{m})"] = {"slope": fit.exponent, "target": -n / (2 * m),
                             "rel_error": fit.rel_error, "runtime": dt}
        ok = ok and fit.verdict and dt < 60.0
    return {"passed": ok, "fits": out, "rtol": 0.03}


# ---------------------------------------------------------------------------
# 5. inverse-series oracle on synthetic families
# ---------------------------------------------------------------------------

@criterion("inverse_series_oracle")
def check_inverse_series(ctx) -> dict:
    from .inversion import LaurentLogSeries, invert_series

    rng = ctx.rng()
    d = 10
    Q, _ = np.linalg.qr(rng.normal(size=(d, d)))
    T1 = rng.normal(size=(d, d))
    T1 = 0.5 * (T1 + T1.T)
    T2 = rng.normal(size=(d, d))
    T2 = 0.5 * (T2 + T2.T)

    def family(kernel_dim, nested):
        vals = np.linspace(1, 3, d)
        if kernel_dim:
            vals[-kernel_dim:] = 0.0
        T0 = Q @ np.diag(vals) @ Q.T
        if nested:
            v2 = np.ones(d)
            v2[-1] = 0.0
            T1n = Q @ np.diag(v2) @ Q.T
            return LaurentLogSeries({(Fraction(0), 0): T0, (Fraction(1), 0): T1n,
                                     (Fraction(2), 0): T2}, d, rem=None)
        return LaurentLogSeries({(Fraction(0), 0): T0, (Fraction(1), 0): T1}, d, rem=None)

    cases = {
        "regular": (family(0, False), 4, np.geomspace(1e-1, 1e-4, 7)),
        "rank1_kernel": (family(1, False), 2, np.geomspace(1e-1, 1e-4, 7)),
        "nested_rank2": (family(2, True), 1, np.geomspace(1e-1, 1e-3, 7)),
    }
    out = {}
    ok = True
    for name, (ser, order, zs) in cases.items():
        inv = invert_series(ser, Fraction(order + 1))
        rel = []
        for z in zs:
            direct = np.linalg.inv(ser.evaluate(complex(z)))
            rel.append(np.linalg.norm(direct - inv.evaluate(complex(z)), 2)
                       / np.linalg.norm(direct, 2))
        slope = float(np.polyfit(np.log(zs), np.log(rel), 1)[0])
        out[name] = {"order": order, "slope": slope, "required": order + 0.9}
        ok = ok and slope >= order + 0.9
    return {"passed": ok, "families": out}


# ---------------------------------------------------------------------------
# 6. threshold classification and coupling sweep
# ---------------------------------------------------------------------------

@criterion("threshold_classification")
def check_classification(ctx: AcceptanceContext) -> dict:
    plant = ctx.plant52()
    cls_e, chain_e = threshold.classify_zero(plant)
    weak = ctx.weak52()
    cls_r, _ = threshold.classify_zero(weak)

    sweep_spec = ModelSpec(5, 2, GaussianPotential(-1.0, 1.5), beta=20.0, R=30.0, N=512)
    lam_bs = threshold.birman_schwinger_coupling(sweep_spec)
    lam_h, width = threshold.coupling_bisection(
        sweep_spec, 0.5 * lam_bs, 1.5 * lam_bs, tol_coupling=1e-6)
    below, _ = threshold.classify_zero(threshold.scaled_spec(sweep_spec, 0.98 * lam_bs))
    at_crit, _ = threshold.classify_zero(threshold.scaled_spec(sweep_spec, lam_bs), tol=1e-5)

    passed = (
        cls_e.kind == "eigenvalue" and cls_e.ranks[-1] == 1
        and cls_r.kind == "regular"
        and width <= 1e-6
        and below.kind == "regular"
        and at_crit.kind != "regular"
    )
    return {
        "passed": passed,
        "plant": cls_e.to_dict(),
        "weak_model": cls_r.kind,
        "bisection": {"lambda_ground_crossing": lam_h, "width": width,
                      "lambda_birman_schwinger": lam_bs,
                      "route_agreement_rel": abs(lam_h - lam_bs) / lam_bs,
                      "route_agreement_note":
                      "ground-crossing coupling carries an O(1/R) domain-truncation bias"},
        "transition": {"below": below.kind, "at_critical": at_crit.kind},
    }


# ---------------------------------------------------------------------------
# 7. leading-coefficient identities
# ---------------------------------------------------------------------------

@criterion("leading_coefficient_identities")
def check_leading_coefficients(ctx: AcceptanceContext) -> dict:
    tol = 1e-8
    # regular branch
    weak = ctx.weak52()
    cls, chain = threshold.classify_zero(weak)
    rv = inversion.rv_expansion(weak, chain=chain)
    g = weak.grid
    c0 = float(np.real(coeffs.as_complex(coeffs.riesz_constant(5, 2))))
    G0 = c0 * operators.kernel_shape_operator(weak, -1, sandwiched=False).real
    T0, _ = threshold.chain_operators(weak)
    v = weak.potential.v(g.r)
    A0 = G0 - G0 @ (v[:, None] * np.linalg.inv(T0) * v[None, :]) @ G0
    reg_rel = float(np.linalg.norm(rv.coefficient(0) - A0, 2) / np.linalg.norm(A0, 2))

    # eigenvalue branch
    plant = ctx.plant52()
    cls_e, chain_e = threshold.classify_zero(plant)
    rv_e = inversion.rv_expansion(plant, chain=chain_e, budget=Fraction(0))
    lead = rv_e.lead_key()
    B = rv_e.terms[lead]
    T0p, ladder = threshold.chain_operators(plant)
    Sb = chain_e.bases[-1]
    Tlast = Sb.T @ ladder[-1] @ Sb
    inv_core = Sb @ np.linalg.inv(Tlast) @ Sb.T
    gp = plant.grid
    G0p = c0 * operators.kernel_shape_operator(plant, -1, sandwiched=False).real
    vp = plant.potential.v(gp.r)
    Bexp = -G0p @ (vp[:, None] * inv_core * vp[None, :]) @ G0p
    eig_rel = float(np.linalg.norm(B - Bexp, 2) / np.linalg.norm(Bexp, 2))
    sv = np.linalg.svd(B, compute_uv=False)
    rank = int(np.sum(sv > 1e-8 * sv[0]))

    passed = (reg_rel < tol and eig_rel < tol and rank == chain_e.ranks[-1]
              and lead == (Fraction(-4), 0))
    return {"passed": passed, "regular_rel": reg_rel, "eigen_rel": eig_rel,
            "lead_exponent": str(lead[0]), "lead_rank": rank,
            "expected_rank": chain_e.ranks[-1], "tolerance": tol}


# ---------------------------------------------------------------------------
# 8. weighted resolvent identity
# ---------------------------------------------------------------------------

@criterion("weighted_resolvent_identity")
def check_weighted_identity(ctx: AcceptanceContext) -> dict:
    spec = ModelSpec(3, 1, GaussianPotential(-1.0, 1.5), beta=20.0, R=30.0, N=384)
    rng = ctx.rng()
    worst = 0.0
    for _ in range(20):
        mu = (0.2 + 1.0 * rng.random()) * cmath.exp(1j * (0.3 + 2.4 * rng.random()))
        d = inversion.weighted_resolvent_identity_defect(spec, mu, route="grid")
        worst = max(worst, d)
    return {"passed": worst < 1e-8, "samples": 20, "worst_defect": worst,
            "tolerance": 1e-8}


# ---------------------------------------------------------------------------
# 9. perturbed Kato-Jensen decay
# ---------------------------------------------------------------------------

@criterion("perturbed_kato_jensen_decay")
def check_kato_jensen(ctx: AcceptanceContext) -> dict:
    out = {}
    ok = True

    t0 = time.time()
    spec31, sd31 = ctx.kj31()
    te = dynamics.echo_time(spec31, 1.0, safety=1.5)
    fit31 = dynamics.kato_jensen_fit(spec31, sigma=3.0, sd=sd31, energy_cutoff=1.0,
                                     t_samples=np.geomspace(15.0, te, 18))
    out["(3,1)"] = {"slope": fit31.exponent, "target": -1.5,
                    "rel_error": fit31.rel_error, "runtime": time.time() - t0,
                    "window": fit31.window}
    ok = ok and fit31.verdict and (time.time() - t0) < 300

    t1 = time.time()
    spec52, sd52 = ctx.kj52()
    te = dynamics.echo_time(spec52, 0.3, safety=1.5)
    fit52 = dynamics.kato_jensen_fit(spec52, sigma=3.01, sd=sd52, energy_cutoff=0.3,
                                     t_samples=np.geomspace(15.0, te, 18))
    out["(5,2)"] = {"slope": fit52.exponent, "target": -1.25,
                    "rel_error": fit52.rel_error, "runtime": time.time() - t1,
                    "window": fit52.window}
    ok = ok and fit52.verdict and (time.time() - t1) < 300
    return {"passed": ok, "fits": out, "rtol": 0.15}


# ---------------------------------------------------------------------------
# 10. high-energy resolvent decay
# ---------------------------------------------------------------------------

@criterion("high_energy_resolvent_decay")
def check_high_energy(ctx) -> dict:
    out = {}
    ok = True
    spec1 = ModelSpec(3, 1, GaussianPotential(-1.0, 1.5), beta=20.0, R=60.0, N=1024)
    f1 = dynamics.high_energy_fit(spec1, k=0)
    out["m=1,k=0"] = {"slope": f1.exponent, "target": -0.5, "rel_error": f1.rel_error}
    ok = ok and f1.verdict
    spec2 = ModelSpec(5, 2, GaussianPotential(-1.0, 1.5), beta=20.0, R=60.0, N=1024)
    sd2 = dynamics.spectral_decompose(spec2)
    f2 = dynamics.high_energy_fit(spec2, k=0, sd=sd2)
    out["m=2,k=0"] = {"slope": f2.exponent, "target": -0.75, "rel_error": f2.rel_error}
    ok = ok and f2.verdict
    f3 = dynamics.high_energy_fit(spec2, k=1, sd=sd2)
    out["m=2,k=1"] = {"slope": f3.exponent, "target": -1.5, "rel_error": f3.rel_error}
    ok = ok and f3.verdict
    return {"passed": ok, "fits": out, "rtol": 0.10}


# ---------------------------------------------------------------------------
# 11. convolution bound constants
# ---------------------------------------------------------------------------

@criterion("convolution_lemma_constants")
def check_convolution(ctx) -> dict:
    out = {}
    ok = True
    for (a, b) in ((0.25, 0.25), (2.0, 3.0), (0.5, 2.0)):
        rep = dynamics.convolution_bound_check(a, b)
        out[f"a={a},b={b}"] = {"constant": rep["constant"],
                               "drift_slope": rep["drift_slope"]}
        ok = ok and rep["uniform"] and rep["constant"] < 100.0
    for a in (0.5, 2.0):
        rep = dynamics.convolution_bound_check(a, 0.0, log_variant=True)
        out[f"log,a={a}"] = {"constant": rep["constant"],
                             "drift_slope": rep["drift_slope"]}
        ok = ok and rep["uniform"] and rep["constant"] < 100.0
    return {"passed": ok, "cases": out, "drift_tolerance": 0.05}


# ---------------------------------------------------------------------------
# 12. embedded-eigenvalue construction
# ---------------------------------------------------------------------------

@criterion("embedded_eigenvalue_construction")
def check_counterexample(ctx) -> dict:
    ce = eigentools.build_counterexample(2, 3, r0=4.0, eps=1.8, order=11)
    spec = ModelSpec(3, 2, ce.potential, beta=50.0, R=120.0, N=4096)
    res = ce.grid_residual(spec)
    g = spec.grid
    outside = g.r > ce.support_radius
    vout = float(np.max(np.abs(ce.potential(g.r[outside]))))
    scan_spec = ModelSpec(3, 2, ce.potential, beta=50.0, R=170.0, N=1536)
    suspects = eigentools.positive_eigenvalue_scan(scan_spec)
    passed = (res < 1e-6 and vout < 1e-10 and len(suspects) == 1
              and abs(suspects[0]["eigenvalue"] - 1.0) < 1e-6)
    return {"passed": passed, "grid_residual": res, "N": 4096,
            "max_V_outside_ball": vout, "suspects": suspects,
            "tolerances": {"residual": 1e-6, "outside": 1e-10}}


# ---------------------------------------------------------------------------
# 13. virial identity and repulsive scan
# ---------------------------------------------------------------------------

@criterion("virial_and_repulsive_scan")
def check_virial(ctx) -> dict:
    residuals = {}
    for N in (512, 1024):
        pot = CappedPowerPotential(-2.5, 1.0, delta=0.8)
        spec = ModelSpec(3, 1, pot, beta=1.0, R=40.0, N=N)
        H = operators.discretize_H(spec).mat
        lam, Q = np.linalg.eigh(H)
        rep = eigentools.virial_check(spec, (lam[0], Q[:, 0]))
        residuals[N] = rep.residual
    repl = ModelSpec(3, 1, ExponentialPotential(+1.0, 1.0), beta=20.0, R=40.0, N=512)
    suspects = eigentools.positive_eigenvalue_scan(repl)
    passed = (residuals[1024] < 1e-6 and eigentools.is_repulsive(repl)
              and len(suspects) == 0)
    return {"passed": passed, "virial_residuals": residuals,
            "repulsive_suspects": len(suspects), "tolerance": 1e-6}


# ---------------------------------------------------------------------------
# 14. Rellich constants
# ---------------------------------------------------------------------------

@criterion("rellich_constant_values")
def check_rellich(ctx) -> dict:
    ok = all(
        eigentools.rellich_constant(1, 2, n) == Fraction(4, n * (n - 4))
        for n in range(5, 13)
    )
    extra = eigentools.rellich_constant(2, 2, 9)
    return {"passed": ok and extra > 0, "second_order_check": str(extra),
            "exact": True}


# ---------------------------------------------------------------------------
# 15. local decay and endpoint Strichartz stabilization
# ---------------------------------------------------------------------------

@criterion("local_decay_and_strichartz")
def check_local_decay_strichartz(ctx) -> dict:
    spec = ModelSpec(5, 2, GaussianPotential(-0.5, 1.5), beta=20.0, R=60.0, N=512)
    sd = dynamics.spectral_decompose(spec)
    g = spec.grid
    phi = g.from_function(np.exp(-((g.r - 2.0) ** 2)))
    c = sd.modes.T @ phi
    c *= dynamics.energy_rolloff(sd.eigenvalues, 0.5)
    phi = sd.modes @ c
    phi /= np.linalg.norm(phi)
    T = dynamics.echo_time(spec, 0.5, safety=1.2)

    ld = dynamics.local_decay(spec, 3.01, phi, T, sd=sd)
    q, r = dynamics.endpoint_pair(5, 2)
    st = dynamics.strichartz_norm(spec, phi, q, r, T, sd=sd)
    passed = (abs(ld["relative_increments"][-1]) < 0.05
              and abs(st["relative_increments"][-1]) < 0.05)
    return {
        "passed": passed,
        "local_decay": {"value": ld["value"], "final_increment": ld["relative_increments"][-1]},
        "strichartz": {"value": st["value"], "final_increment": st["relative_increments"][-1],
                       "pair": [q, r]},
        "horizon": T,
        "tolerance": 0.05,
        "note": "operator-valued asymptotic coefficients and unspecified "
                "constants are not reproduced; stabilization substitutes",
    }


# ---------------------------------------------------------------------------

def run_all(keys=None, seed: int = 2023, progress=print) -> list:
    ctx = AcceptanceContext(seed=seed)
    results = []
    for key, fn in REGISTRY.items():
        if keys is not None and key not in keys:
            continue
        t0 = time.time()
        try:
            details = fn(ctx)
            passed = bool(details.pop("passed"))
        except Exception as exc:  # noqa: BLE001 - a matrix failure is a FAIL, not a crash
            details = {"error": f"{type(exc).__name__}: {exc}"}
            passed = False
        res = CriterionResult(key, passed, details, time.time() - t0)
        results.append(res)
        if progress is not None:
            progress(res.line())
    return results
