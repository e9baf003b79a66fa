"""Command line entry point: estimate, simulate, bench, profile."""
from __future__ import annotations

import argparse
import csv
import datetime as _dt
import json
import platform
import sys
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .errors import NumericalError, PPPCAError, RangeError, DomainError, DegenerateBound
from .methods import METHODS, parse_methods, run_method
from .ppca import SigmaProfile, penalized_profile_loglik
from .select import bound_u_a, bound_u_b, geometric_grid, grid_range
from .simgen import (NAMED_SCENARIOS, Scenario, default_workers, load_scenario, make_population_spectrum,
                     replicate_rng, run_replicates, sample_spectrum_only, summarize, write_replicates_csv)
from .spectrum import load_matrix, sample_spectrum

SCHEMA_VERSION = "1.0"
TOP_EIGENVALUES = 20

_nullable_int = {"type": ["integer", "null"]}
REPORT_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["schema_version", "input", "spectrum", "methods", "settings", "versions", "seed", "generated_at"],
    "additionalProperties": False,
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "input": {"type": "object", "required": ["kind"],
                  "properties": {"kind": {"enum": ["file", "scenario", "population"]}}},
        "spectrum": {
            "type": "object", "required": ["n", "m", "top_eigenvalues"],
            "properties": {"n": {"type": "integer", "minimum": 3}, "m": {"type": "integer", "minimum": 1},
                           "top_eigenvalues": {"type": "array", "items": {"type": "number"}}},
        },
        "methods": {
            "type": "object",
            "propertyNames": {"enum": list(METHODS)},
            "additionalProperties": {
                "type": "object", "required": ["k_hat"],
                "properties": {
                    "k_hat": _nullable_int,
                    "diagnostics": {"type": "object"},
                    "error": {"type": "object", "required": ["kind", "message"]},
                },
            },
        },
        "votes": {"type": "object", "additionalProperties": {"type": "integer"}},
        "grid": {"type": "object", "required": ["lo", "hi", "T"],
                 "properties": {"lo": {"type": "number"}, "hi": {"type": "number"}, "T": {"type": "integer"}}},
        "settings": {"type": "object"},
        "versions": {"type": "object", "required": ["pppca", "numpy", "scipy", "python"]},
        "seed": _nullable_int,
        "generated_at": {"type": "string"},
    },
}


def fmt(x) -> str:
    """Machine-file number: shortest string that round-trips exactly, empty for missing."""
    if x is None:
        return ""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x)) if np.isfinite(x) else ""


def _versions() -> dict:
    return {"pppca": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "python": platform.python_version()}


def _error_payload(exc: BaseException) -> dict:
    return {"kind": type(exc).__name__, "message": str(exc)}


def _scenario_dict(s: Scenario) -> dict:
    return {"id": s.id, "n": s.n, "m": s.m, "k_star": s.k_star, "sigma2": s.sigma2, "d2_min": s.d2_min,
            "explicit_d2": list(s.explicit_d2) if s.explicit_d2 is not None else None}


def _resolve_scenario(args) -> Scenario:
    if getattr(args, "preset", None):
        if args.preset not in NAMED_SCENARIOS:
            raise PPPCAError(f"unknown scenario preset {args.preset!r}; choose from {', '.join(NAMED_SCENARIOS)}")
        return NAMED_SCENARIOS[args.preset]
    return load_scenario(args.scenario)


def _spectrum_from_args(args):
    """(EigenSpectrum, input descriptor, seed) for estimate/profile."""
    if args.input:
        d = load_matrix(args.input, args.format, args.orientation)
        sp = sample_spectrum(d, standardize=not args.no_standardize, rank_transform=args.rank_transform,
                             drop_constant=args.drop_constant)
        desc = {"kind": "file", "path": str(args.input), "format": args.format or "auto",
                "orientation": args.orientation, "standardize": not args.no_standardize,
                "rank_transform": args.rank_transform, "drop_constant": args.drop_constant,
                "n": d.n, "m": d.m}
        return sp, desc, None
    s = _resolve_scenario(args)
    if args.population:
        return make_population_spectrum(s), {"kind": "population", "scenario": _scenario_dict(s)}, None
    sp = sample_spectrum_only(s, replicate_rng(args.seed, 0))
    return sp, {"kind": "scenario", "scenario": _scenario_dict(s)}, args.seed


def _add_source_args(p):
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--input", help="CSV/TSV data matrix")
    src.add_argument("--scenario", help="scenario file (key = value)")
    src.add_argument("--preset", help=f"named scenario: {', '.join(NAMED_SCENARIOS)}")
    p.add_argument("--format", choices=["csv", "tsv"], help="table format (default: from extension)")
    p.add_argument("--orientation", choices=["units-as-rows", "units-as-columns"], default="units-as-rows")
    p.add_argument("--no-standardize", action="store_true", help="skip per-feature z-scoring")
    p.add_argument("--rank-transform", action="store_true", help="normal-scores transform before z-scoring")
    p.add_argument("--drop-constant", action="store_true", help="drop constant features instead of failing")
    p.add_argument("--population", action="store_true", help="use the scenario's population spectrum")
    p.add_argument("--seed", type=int, default=0, help="seed for scenario sampling")


# ---------------------------------------------------------------------------
# estimate

def cmd_estimate(args) -> int:
    eig, desc, seed = _spectrum_from_args(args)
    sp = SigmaProfile.from_spectrum(eig)
    methods = parse_methods(args.methods)
    report = {
        "schema_version": SCHEMA_VERSION,
        "input": desc,
        "spectrum": {"n": eig.n, "m": eig.m,
                     "top_eigenvalues": [float(v) for v in eig.eigenvalues[:TOP_EIGENVALUES]]},
        "methods": {},
        "settings": {"methods": list(methods), "T": args.T if args.T else 50 * eig.n, "alpha": args.alpha},
        "versions": _versions(),
        "seed": seed,
    }
    failures = []
    for name in methods:
        try:
            r = run_method(name, sp, eig.m, T=args.T, alpha=args.alpha)
        except PPPCAError as exc:
            report["methods"][name] = {"k_hat": None, "error": _error_payload(exc)}
            failures.append(exc)
            print(f"{name}: failed ({type(exc).__name__}: {exc})")
            continue
        diag = dict(r.diagnostics)
        if name == "pppca":
            report["votes"] = diag.pop("votes")
            report["grid"] = diag.pop("grid")
        report["methods"][name] = {"k_hat": r.k_hat, "diagnostics": diag}
        extra = ""
        if name == "pppca":
            top = max(report["votes"].values())
            extra = f" (votes {top}/{report['grid']['T']}, share {top / report['grid']['T']:.4f})"
        print(f"{name}: k_hat={r.k_hat}{extra}")
    report["generated_at"] = _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
    if args.output:
        Path(args.output).write_text(json.dumps(report, indent=2, sort_keys=False) + "\n")
    if failures and len(failures) == len(methods):
        raise failures[0]
    return 0


# ---------------------------------------------------------------------------
# simulate

def _print_summary(summary: dict, header: str = ""):
    if header:
        print(header)
    for name, s in summary.items():
        mean = "NA" if s["mean_k"] is None else f"{s['mean_k']:.4f}"
        med = "NA" if s["median_k"] is None else f"{s['median_k']:.4g}"
        print(f"  {name:<7} mean_k={mean}  median_k={med}  proportion_correct={s['prop_correct']:.4f}"
              f"  missing={s['missing']}")


def cmd_simulate(args) -> int:
    s = _resolve_scenario(args)
    results = run_replicates(s, args.methods, args.replicates, args.seed, workers=args.workers, T=args.T)
    if args.output:
        write_replicates_csv(results, s.k_star, args.output, timings=args.timings)
    _print_summary(summarize(results, s.k_star), f"scenario {s.id}: {args.replicates} replicate(s), seed {args.seed}")
    return 0


# ---------------------------------------------------------------------------
# bench

def _grid_scenarios(k_stars, sigma2s, d2s, ms):
    out = []
    for k in k_stars:
        for s2 in sigma2s:
            for d2 in d2s:
                for m in ms:
                    out.append(dict(n=100, m=m, k_star=k, sigma2=s2, d2_min=d2))
    return out


BENCH_PRESETS = {
    "fig3": {"scenarios": _grid_scenarios((5, 10), (0.2, 0.9), (0.2, 0.5), (10000,)), "replicates": 20},
    "fig4": {"scenarios": _grid_scenarios((5, 10), (0.2, 0.9), (0.2, 0.5), (10000,)), "replicates": 20},
    "fig5": {"scenarios": _grid_scenarios((20,), (0.5, 0.9), (0.2, 0.5), (500, 1000, 2000, 5000, 10000)),
             "replicates": 10},
    "fig6": {"scenarios": _grid_scenarios((10,), (0.5, 0.9), (0.2, 0.5), (500, 1000, 2000, 5000, 10000)),
             "replicates": 10},
}


def _bench_preset_name(name: str) -> str:
    base = name[:-5] if name.endswith("-desk") else name
    if base not in BENCH_PRESETS:
        valid = sorted(BENCH_PRESETS) + [f"{p}-desk" for p in sorted(BENCH_PRESETS)]
        raise PPPCAError(f"unknown preset {name!r}; valid presets: {', '.join(valid)}")
    return base


def cmd_bench(args) -> int:
    preset = _bench_preset_name(args.preset)
    cfg = BENCH_PRESETS[preset]
    R = args.replicates or cfg["replicates"]
    out = Path(args.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    summary_rows, plot_rows = [], []
    for params in cfg["scenarios"]:
        if args.m_max and params["m"] > args.m_max:
            continue
        key = (params["k_star"], params["sigma2"], params["d2_min"], params["m"])
        try:
            s = Scenario(**params)
            results = run_replicates(s, args.methods, R, args.seed, workers=args.workers)
        except PPPCAError as exc:
            summary_rows.append(key + ("", "", "", "", "", "", f"{type(exc).__name__}: {exc}"))
            continue
        summ = summarize(results, s.k_star)
        _print_summary(summ, f"{s.id}")
        for name, v in summ.items():
            summary_rows.append(key + (name, R, fmt(v["mean_k"]), fmt(v["median_k"]), fmt(v["prop_correct"]),
                                       v["missing"], ""))
            if preset == "fig4":
                plot_rows.append(key[:3] + (name, fmt(v["prop_correct"])))
        if preset != "fig4":
            for r in results:
                for name, k in r.k_hat.items():
                    plot_rows.append(key + (name, r.replicate, "" if k is None else k))

    head = ("k_star", "sigma2", "d2_min", "m")
    _write_csv(out / f"{preset}_summary.csv",
               head + ("method", "replicates", "mean_k", "median_k", "prop_correct", "missing", "error"), summary_rows)
    if preset == "fig4":
        _write_csv(out / "fig4_prop_correct.csv", head[:3] + ("method", "prop_correct"), plot_rows)
    elif preset == "fig3":
        _write_csv(out / "fig3_khat.csv", head + ("method", "replicate", "k_hat"), plot_rows)
    else:
        _write_csv(out / f"{preset}_k_vs_m.csv", head + ("method", "replicate", "k_hat"), plot_rows)
    print(f"wrote {preset} tables to {out}")
    return 0


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([fmt(v) if isinstance(v, float) else v for v in r])


# ---------------------------------------------------------------------------
# profile

PROFILE_COLUMNS = ("k", "delta_tilde", "lp", "lp_minus_prev", "lp_minus_next", "u_a", "u_b")


def _parse_k_list(text, n):
    if not text:
        return list(range(1, n))
    ks = []
    for part in text.split(","):
        part = part.strip()
        if "-" in part:
            a, b = part.split("-")
            ks.extend(range(int(a), int(b) + 1))
        elif part:
            ks.append(int(part))
    bad = [k for k in ks if not 1 <= k <= n - 1]
    if bad:
        raise RangeError(f"k values {bad} outside 1..{n - 1}")
    return ks


def profile_rows(sp: SigmaProfile, m: int, ks, deltas):
    def lp(k, d):
        if not 1 <= k <= sp.n - 1:
            return None
        try:
            return penalized_profile_loglik(sp, m, k, d)
        except (RangeError, DomainError):
            return None

    def bound(fn, k):
        try:
            return fn(sp, k)
        except (DegenerateBound, RangeError):
            return None

    rows = []
    for k in ks:
        u_a, u_b = bound(bound_u_a, k), bound(bound_u_b, k)
        for d in deltas:
            here, prev, nxt = lp(k, d), lp(k - 1, d), lp(k + 1, d)
            rows.append((k, float(d), here,
                         None if here is None or prev is None else here - prev,
                         None if here is None or nxt is None else here - nxt,
                         u_a, u_b))
    return rows


def cmd_profile(args) -> int:
    eig, _, _ = _spectrum_from_args(args)
    sp = SigmaProfile.from_spectrum(eig)
    ks = _parse_k_list(args.k, sp.n)
    if args.delta_range:
        lo, hi = (float(v) for v in args.delta_range.split(","))
    else:
        lo, hi = grid_range(sp)
    if not 0 < lo < hi:
        raise RangeError(f"delta range ({lo}, {hi}) must satisfy 0 < lo < hi")
    deltas = list(geometric_grid(lo, hi, args.points))
    if not args.no_zero:
        deltas = [0.0] + deltas
    rows = profile_rows(sp, eig.m, ks, deltas)
    out = open(args.output, "w", newline="") if args.output else sys.stdout
    try:
        w = csv.writer(out, lineterminator="\n")
        w.writerow(PROFILE_COLUMNS)
        for r in rows:
            w.writerow([r[0]] + [fmt(v) for v in r[1:]])
    finally:
        if args.output:
            out.close()
    return 0


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pppca", description="Effective dimension by penalized probabilistic PCA.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("estimate", help="estimate k from a data matrix or scenario")
    _add_source_args(p)
    p.add_argument("--methods", default="pppca", help=f"comma list of {', '.join(METHODS)} or all")
    p.add_argument("--T", type=int, default=None, help="grid size (default 50 n)")
    p.add_argument("--alpha", type=float, default=0.05, help="Lawley test level")
    p.add_argument("--output", help="write the JSON run report here")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("simulate", help="replicate a scenario and tabulate estimates")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--scenario", help="scenario file (key = value)")
    src.add_argument("--preset", help=f"named scenario: {', '.join(NAMED_SCENARIOS)}")
    p.add_argument("--replicates", "-R", type=int, default=10)
    p.add_argument("--methods", default="pppca")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--T", type=int, default=None)
    p.add_argument("--workers", type=int, default=None, help="processes (default $PPPCA_WORKERS or 1)")
    p.add_argument("--timings", action="store_true", help="add a wall_time column (not reproducible)")
    p.add_argument("--output", help="replicate CSV path")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("bench", help="desk-scale run of a preset scenario grid")
    p.add_argument("--preset", required=True, help="fig3, fig4, fig5 or fig6 (optionally with -desk)")
    p.add_argument("--output-dir", default="bench_out")
    p.add_argument("--replicates", type=int, default=None, help="override the preset's replicate count")
    p.add_argument("--m-max", type=int, default=None, help="skip scenarios with more features than this")
    p.add_argument("--methods", default="all")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=None)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("profile", help="penalized likelihood curves over k and delta_tilde")
    _add_source_args(p)
    p.add_argument("--k", default=None, help="k values, e.g. 9,10,11 or 5-15 (default: all)")
    p.add_argument("--delta-range", default=None, help="lo,hi (default: the voting grid range)")
    p.add_argument("--points", type=int, default=200)
    p.add_argument("--no-zero", action="store_true", help="omit the delta_tilde = 0 row")
    p.add_argument("--output", help="curve CSV path (default stdout)")
    p.set_defaults(func=cmd_profile)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "workers", None) is None and hasattr(args, "workers"):
        args.workers = default_workers()
    try:
        return args.func(args)
    except PPPCAError as exc:
        print(json.dumps({"error": _error_payload(exc)}), file=sys.stderr)
        return exc.exit_code
    except (ArithmeticError, np.linalg.LinAlgError) as exc:
        print(json.dumps({"error": _error_payload(NumericalError(str(exc)))}), file=sys.stderr)
        return NumericalError.exit_code
    except ValueError as exc:
        print(json.dumps({"error": {"kind": "UsageError", "message": str(exc)}}), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
