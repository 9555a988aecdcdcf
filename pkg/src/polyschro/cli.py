"""Command-line front end: configuration ingestion, experiment orchestration,
result persistence (JSON summary + CSV series + SVG plots), and verify-all.

Exit codes: 0 success, 1 usage/configuration error, 2 numerical failure
(inconclusive classification, failed verification, oracle mismatch).
Thread count follows the standard BLAS environment variables
(OMP_NUM_THREADS et al.); runs with the same config and seed produce
byte-identical JSON summaries.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__, acceptance, coeffs, dynamics, eigentools, inversion, kernels, threshold
from .operators import ModelSpec
from .validation import as_model_spec

USAGE_ERROR, NUMERICAL_ERROR = 1, 2


class CliError(Exception):
    def __init__(self, msg, code=USAGE_ERROR):
        super().__init__(msg)
        self.code = code


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, Fraction):
        return str(o)
    if isinstance(o, complex):
        return {"re": o.real, "im": o.imag}
    raise TypeError(f"not serializable: {type(o)}")


def _sanitize(obj):
    """Replace non-finite floats so the JSON stays standard-compliant."""
    if isinstance(obj, dict):
        return {k: _sanitize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_sanitize(v) for v in obj]
    if isinstance(obj, (float, np.floating)) and not math.isfinite(obj):
        return repr(float(obj))
    return obj


def _config_hash(cfg: dict) -> str:
    blob = json.dumps(cfg, sort_keys=True, default=_json_default).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


class ReportBundle:
    """Writes the summary JSON, CSV series, and SVG plots for one run."""

    def __init__(self, outdir: Path, subcommand: str, config: dict):
        self.outdir = Path(outdir)
        self.outdir.mkdir(parents=True, exist_ok=True)
        self.subcommand = subcommand
        self.config = config
        self.summary = {
            "tool": "polyschro",
            "version": __version__,
            "subcommand": subcommand,
            "config_hash": _config_hash(config),
        }
        with open(self.outdir / "resolved_config.json", "w") as fh:
            json.dump(config, fh, indent=2, sort_keys=True, default=_json_default)

    def add(self, key, value):
        self.summary[key] = value

    def write_csv(self, name: str, header: list, rows):
        with open(self.outdir / f"{name}.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for row in rows:
                w.writerow(row)

    def write_plot(self, name: str, x, ys: dict, xlabel: str, ylabel: str,
                   loglog: bool = True):
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt

        plt.rcParams["svg.hashsalt"] = self.summary["config_hash"]
        fig, ax = plt.subplots(figsize=(5.5, 4))
        for label, y in ys.items():
            if loglog:
                ax.loglog(x, y, marker="o", ms=3, label=label)
            else:
                ax.plot(x, y, marker="o", ms=3, label=label)
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        ax.grid(True, which="both", alpha=0.3)
        ax.legend()
        fig.tight_layout()
        fig.savefig(self.outdir / f"{name}.svg", metadata={"Date": None})
        plt.close(fig)

    def finalize(self):
        with open(self.outdir / "summary.json", "w") as fh:
            json.dump(_sanitize(self.summary), fh, indent=2, sort_keys=True,
                      default=_json_default)
        return self.summary


def _load_spec(args) -> ModelSpec:
    if not args.config:
        raise CliError("this subcommand needs --config pointing to a model JSON file")
    try:
        return as_model_spec(args.config)
    except (OSError, KeyError, ValueError, TypeError) as exc:
        raise CliError(f"config error: {exc}") from exc


def _spec_config(args, spec: ModelSpec) -> dict:
    return {"model": spec.to_dict(), "tol": args.tol, "seed": args.seed,
            "max_order": args.max_order}


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_coeffs(args) -> int:
    cfg = {"table": args.table, "n": args.n, "m": args.m, "jmax": args.jmax,
           "seed": args.seed}
    bundle = ReportBundle(args.out, "coeffs", cfg)
    rows = []
    if args.table == "n_j":
        if args.n is None:
            raise CliError("--n is required for the n_j table")
        for j in range(args.jmax + 1):
            val = coeffs.laplacian_odd_coeff(args.n, j)
            rows.append([j, str(val), float(val)])
        header = ["j", "exact", "float"]
    elif args.table == "g_j":
        if args.m is None:
            raise CliError("--m is required for the g_j table")
        for j in range(args.jmax + 1):
            val = coeffs.as_complex(coeffs.odd_series_coeff(args.m, j))
            rows.append([j, val.real, val.imag])
        header = ["j", "re", "im"]
    elif args.table == "decay":
        if args.n is None or args.m is None:
            raise CliError("--n and --m are required for the decay table")
        labels = [coeffs.REGULAR]
        if args.n <= 4 * args.m:
            k = coeffs.resonance_count(args.n, args.m)
            labels += [coeffs.resonance(j) for j in range(1, k + 1)]
        labels.append(coeffs.EIGENVALUE)
        for lab in labels:
            rate = coeffs.decay_rate(args.n, args.m, lab)
            rows.append([str(lab), rate.kind,
                         "" if rate.exponent is None else str(rate.exponent)])
        header = ["classification", "kind", "exponent"]
    else:
        raise CliError(f"unknown table {args.table!r}")
    bundle.write_csv(f"table_{args.table}", header, rows)
    bundle.add("rows", len(rows))
    bundle.add("table", args.table)
    bundle.finalize()
    return 0


def cmd_expand(args) -> int:
    spec = _load_spec(args)
    bundle = ReportBundle(args.out, "expand", _spec_config(args, spec))
    if args.perturbed:
        cls, chain = threshold.classify_zero(spec, tol=args.tol)
        if cls.kind == "inconclusive":
            bundle.add("classification", cls.to_dict())
            bundle.finalize()
            return NUMERICAL_ERROR
        budget = None if args.max_order is None else Fraction(args.max_order)
        series = inversion.rv_expansion(spec, chain=chain, budget=budget)
        bundle.add("classification", cls.to_dict())
        bundle.add("series", series.term_report())
        bundle.add("remainder_order", None if series.rem is None else str(series.rem))
        if series.gdef is not None:
            bundle.add("log_group", {"d": series.gdef[0], "c": series.gdef[1]})
    else:
        ladder = kernels.threshold_expansion(spec.n, spec.m, args.max_order)
        bundle.add("terms", [
            {"p": str(t.p), "log_mu_power": t.logmu, "radial_power": str(t.alpha),
             "log_r_power": t.logr, "coeff": t.coeff}
            for t in ladder.terms
        ])
        bundle.add("remainder_order", str(ladder.remainder_order))
        bundle.add("case", ladder.case)
    bundle.finalize()
    return 0


def cmd_classify(args) -> int:
    spec = _load_spec(args)
    bundle = ReportBundle(args.out, "classify", _spec_config(args, spec))
    cls, chain = threshold.classify_zero(spec, tol=args.tol)
    bundle.add("classification", cls.to_dict())
    bundle.add("stages", [d.to_dict() for d in chain.diagnostics])
    if cls.kind in ("regular", "resonance", "eigenvalue", "mixed"):
        rate = cls.decay(spec.n, spec.m)
        bundle.add("predicted_decay", {
            "kind": rate.kind,
            "exponent": None if rate.exponent is None else str(rate.exponent),
        })
    bundle.finalize()
    return 0 if cls.kind != "inconclusive" else NUMERICAL_ERROR


def cmd_decay(args) -> int:
    spec = _load_spec(args)
    bundle = ReportBundle(args.out, "decay", _spec_config(args, spec))
    sd = dynamics.spectral_decompose(spec)
    cls, _ = threshold.classify_zero(spec, tol=args.tol)
    label = cls.label if cls.kind != "inconclusive" else coeffs.REGULAR
    te = dynamics.echo_time(spec, args.energy_cutoff, safety=1.5)
    ts = np.geomspace(args.t_onset, te, args.samples)
    fit = dynamics.kato_jensen_fit(spec, sigma=args.sigma, sd=sd,
                                   energy_cutoff=args.energy_cutoff,
                                   t_samples=ts, classification=label)
    norms = [dynamics.weighted_propagator_norm(sd, fit_sigma(spec, args), t,
                                               args.energy_cutoff) for t in ts]
    bundle.add("classification", cls.to_dict())
    bundle.add("fit", fit.to_dict())
    bundle.write_csv("decay_series", ["t", "weighted_norm"], zip(ts, norms))
    bundle.write_plot("decay", ts, {"measured": norms}, "t", "weighted norm")
    bundle.finalize()
    return 0 if fit.verdict in (True, None) else NUMERICAL_ERROR


def fit_sigma(spec, args):
    return args.sigma if args.sigma is not None else spec.n / 2 + 0.51


def cmd_strichartz(args) -> int:
    spec = _load_spec(args)
    bundle = ReportBundle(args.out, "strichartz", _spec_config(args, spec))
    sd = dynamics.spectral_decompose(spec)
    g = spec.grid
    phi = g.from_function(np.exp(-((g.r - args.bump_center) ** 2)))
    c = sd.modes.T @ phi
    c *= dynamics.energy_rolloff(sd.eigenvalues, args.energy_cutoff)
    phi = sd.modes @ c
    phi /= np.linalg.norm(phi)
    T = dynamics.echo_time(spec, args.energy_cutoff, safety=1.2)
    q, r = dynamics.endpoint_pair(spec.n, spec.m)
    st = dynamics.strichartz_norm(spec, phi, q, r, T, sd=sd)
    ld = dynamics.local_decay(spec, spec.n / 2 + 0.51, phi, T, sd=sd)
    bundle.add("pair", [q, r])
    bundle.add("strichartz", st)
    bundle.add("local_decay", ld)
    bundle.finalize()
    stable = (abs(st["relative_increments"][-1]) < 0.05
              and abs(ld["relative_increments"][-1]) < 0.05)
    return 0 if stable else NUMERICAL_ERROR


def cmd_highenergy(args) -> int:
    spec = _load_spec(args)
    bundle = ReportBundle(args.out, "highenergy", _spec_config(args, spec))
    sd = dynamics.spectral_decompose(spec)
    fits = {}
    for k in range(args.kmax + 1):
        fit = dynamics.high_energy_fit(spec, k=k, sd=sd)
        fits[f"k={k}"] = fit.to_dict()
    bundle.add("fits", fits)
    bundle.finalize()
    ok = all(f["verdict"] in (True, None) for f in fits.values())
    return 0 if ok else NUMERICAL_ERROR


def cmd_virial(args) -> int:
    spec = _load_spec(args)
    bundle = ReportBundle(args.out, "virial", _spec_config(args, spec))
    H = None
    import numpy.linalg as la

    from .operators import discretize_H

    H = discretize_H(spec).mat
    lam, Q = la.eigh(H)
    rep = eigentools.virial_check(spec, (lam[0], Q[:, 0]))
    suspects = eigentools.positive_eigenvalue_scan(spec)
    bundle.add("virial", rep.to_dict())
    bundle.add("positive_suspects", suspects)
    try:
        bundle.add("repulsive", eigentools.is_repulsive(spec))
    except eigentools.EigenToolsError:
        bundle.add("repulsive", None)
    bundle.finalize()
    return 0 if rep.valid else NUMERICAL_ERROR


def cmd_counterexample(args) -> int:
    cfg = {"m": args.m, "n": args.n, "r0": args.r0, "eps": args.eps,
           "seed": args.seed}
    bundle = ReportBundle(args.out, "counterexample", cfg)
    ce = eigentools.build_counterexample(args.m, args.n, args.r0, args.eps)
    spec = ModelSpec(args.n, args.m, ce.potential, beta=50.0,
                     R=args.R, N=args.N)
    res = ce.grid_residual(spec)
    g = spec.grid
    rows = zip(g.r, ce.potential(g.r), ce.phi(g.r))
    bundle.write_csv("profiles", ["r", "V", "phi"], rows)
    bundle.write_plot("profiles", g.r,
                      {"V": np.abs(ce.potential(g.r)) + 1e-300,
                       "phi": np.abs(ce.phi(g.r)) + 1e-300},
                      "r", "|value|")
    bundle.add("eigenvalue", ce.eigenvalue)
    bundle.add("support_radius", ce.support_radius)
    bundle.add("grid_residual", res)
    bundle.finalize()
    return 0 if res < 1e-5 else NUMERICAL_ERROR


def cmd_verify_all(args) -> int:
    cfg = {"seed": args.seed, "keys": args.keys}
    bundle = ReportBundle(args.out, "verify-all", cfg)
    keys = args.keys.split(",") if args.keys else None
    results = acceptance.run_all(keys=keys, seed=args.seed)
    matrix = {r.key: {"passed": r.passed, "runtime": r.runtime, **r.details}
              for r in results}
    bundle.add("matrix", matrix)
    npass = sum(r.passed for r in results)
    bundle.add("passed", npass)
    bundle.add("total", len(results))
    bundle.finalize()
    print(f"{npass}/{len(results)} criteria passed")
    return 0 if npass == len(results) else NUMERICAL_ERROR


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="polyschro",
        description="Threshold spectral analysis and dispersive-decay "
                    "measurements for polyharmonic operators on radial grids",
    )
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="cmd", required=True)

    def common(sp, needs_config=True):
        sp.add_argument("--config", help="model configuration JSON")
        sp.add_argument("--out", default="polyschro_out", help="output directory")
        sp.add_argument("--tol", type=float, default=1e-8)
        sp.add_argument("--seed", type=int, default=2023)
        sp.add_argument("--max-order", dest="max_order", type=int, default=None)

    sp = sub.add_parser("coeffs", help="coefficient tables as CSV")
    common(sp, needs_config=False)
    sp.add_argument("--table", choices=["n_j", "g_j", "decay"], default="n_j")
    sp.add_argument("--n", type=int)
    sp.add_argument("--m", type=int)
    sp.add_argument("--jmax", type=int, default=8)
    sp.set_defaults(func=cmd_coeffs)

    sp = sub.add_parser("expand", help="threshold expansion term ladder")
    common(sp)
    sp.add_argument("--perturbed", action="store_true",
                    help="expand the perturbed resolvent instead of the free one")
    sp.set_defaults(func=cmd_expand)

    sp = sub.add_parser("classify", help="zero-threshold classification")
    common(sp)
    sp.set_defaults(func=cmd_classify)

    sp = sub.add_parser("decay", help="weighted propagator decay fit")
    common(sp)
    sp.add_argument("--sigma", type=float, default=None)
    sp.add_argument("--energy-cutoff", dest="energy_cutoff", type=float, default=1.0)
    sp.add_argument("--t-onset", dest="t_onset", type=float, default=15.0)
    sp.add_argument("--samples", type=int, default=18)
    sp.set_defaults(func=cmd_decay)

    sp = sub.add_parser("strichartz", help="endpoint space-time norms")
    common(sp)
    sp.add_argument("--energy-cutoff", dest="energy_cutoff", type=float, default=0.5)
    sp.add_argument("--bump-center", dest="bump_center", type=float, default=2.0)
    sp.set_defaults(func=cmd_strichartz)

    sp = sub.add_parser("highenergy", help="high-energy resolvent decay fits")
    common(sp)
    sp.add_argument("--kmax", type=int, default=1)
    sp.set_defaults(func=cmd_highenergy)

    sp = sub.add_parser("virial", help="virial identity report")
    common(sp)
    sp.set_defaults(func=cmd_virial)

    sp = sub.add_parser("counterexample", help="embedded-eigenvalue construction")
    common(sp, needs_config=False)
    sp.add_argument("--m", type=int, default=2)
    sp.add_argument("--n", type=int, default=3)
    sp.add_argument("--r0", type=float, default=4.0)
    sp.add_argument("--eps", type=float, default=1.8)
    sp.add_argument("--R", type=float, default=120.0)
    sp.add_argument("--N", type=int, default=4096)
    sp.set_defaults(func=cmd_counterexample)

    sp = sub.add_parser("verify-all", help="run the full acceptance matrix")
    common(sp, needs_config=False)
    sp.add_argument("--keys", default=None,
                    help="comma-separated criterion keys (default: all)")
    sp.set_defaults(func=cmd_verify_all)

    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    np.random.seed(args.seed % (2**32))
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except (threshold.ThresholdError, inversion.InversionError,
            dynamics.DynamicsError, eigentools.EigenToolsError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return NUMERICAL_ERROR


if __name__ == "__main__":
    sys.exit(main())
