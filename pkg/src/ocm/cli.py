"""Command-line driver: ``ocm {solve,sweep,domain,stationary,cg-precision}``.

Every subcommand accepts ``--config FILE`` (JSON); explicit flags override
the file. Exit status is 0 on success/convergence, 2 when a solve stops at
``max_steps`` without converging, and 1 on any error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import reports
from .classic import cg_direction_comparison
from .operators import build_problem, diag_squares_problem, uniform_rhs
from .solver import SolverConfig, preset_config, solve
from .stationary import (CoefficientTableau, convergence_domain, named_tableau,
                         stationary_iterate)

log = logging.getLogger("ocm")

EXIT_OK, EXIT_ERROR, EXIT_NOT_CONVERGED = 0, 1, 2


class ConfigError(ValueError):
    pass


def load_config(path):
    with open(path) as fh:
        text = fh.read()
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        lines = text.splitlines()
        context = lines[exc.lineno - 1] if 0 < exc.lineno <= len(lines) else ""
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}\n"
                          f"    {context}\n    {' ' * (exc.colno - 1)}^") from None
    if not isinstance(cfg, dict):
        raise ConfigError(f"{path}: top level must be a JSON object")
    return cfg


def _parse_value(text):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def resolve_problem(args, cfg):
    spec = dict(cfg.get("problem", {}))
    if args.problem:
        spec["generator"] = args.problem
    params = dict(spec.get("params", {}))
    for item in args.param or []:
        if "=" not in item:
            raise ConfigError(f"--param expects key=value, got {item!r}")
        key, value = item.split("=", 1)
        params[key] = _parse_value(value)
    seed = args.seed if args.seed is not None else spec.get("seed")
    generator = spec.get("generator", "convection_diffusion")
    problem = build_problem(generator, params, seed)
    spec = {"generator": generator, "params": params, "seed": problem.rng_seed}
    return problem, spec


def resolve_solver(args, cfg):
    sc = dict(cfg.get("solver", {}))
    preset = args.preset or sc.pop("preset", None)
    overrides = {}
    for flag, key in (("k", "k"), ("m", "m"), ("objective", "objective"),
                      ("tol", "relres_tol"), ("max_steps", "max_steps"),
                      ("refresh_period", "refresh_period"),
                      ("residual_mode", "residual_mode"), ("rank_tol", "rank_tol"),
                      ("krylov_basis", "krylov_basis"), ("drift_tol", "drift_tol")):
        value = getattr(args, flag, None)
        if value is not None:
            overrides[key] = None if value == "off" else value
    if getattr(args, "inhomogeneous", False):
        overrides["homogeneous"] = False
    if preset:
        sc.pop("preset", None)
        for key in ("k", "m"):
            if key in overrides:
                raise ConfigError("--k/--m conflict with --preset; use oc(k,m)")
        return preset_config(preset, **{**sc, **overrides})
    merged = {**sc, **overrides}
    merged.setdefault("homogeneous", True)
    if "k" not in merged and "m" not in merged:
        raise ConfigError("give --preset or an explicit solver (--k/--m)")
    merged.setdefault("name", f"oc({merged.get('k', 1)},{merged.get('m', 1)})")
    return SolverConfig.from_dict(merged)


def resolve_tableau(args, cfg):
    raw = args.tableau if args.tableau is not None else cfg.get("tableau")
    if raw is None:
        raise ConfigError("a tableau is required (--tableau NAME or JSON rows)")
    if isinstance(raw, str):
        stripped = raw.strip()
        if stripped.startswith("["):
            raw = json.loads(stripped)
        else:
            return named_tableau(stripped)
    return CoefficientTableau(np.array(raw, dtype=float), "custom")


def _floats(text, count, name):
    vals = [float(v) for v in str(text).split(",")]
    if len(vals) != count:
        raise ConfigError(f"{name} needs {count} comma-separated numbers")
    return vals


def _drift_tol(text):
    return "off" if text.strip().lower() in ("off", "none") else float(text)


def _range(text):
    if isinstance(text, (list, tuple)):
        lo, hi = text
    else:
        lo, _, hi = str(text).partition(":")
        hi = hi or lo
    lo, hi = int(lo), int(hi)
    if lo < 1 or hi < lo:
        raise ConfigError(f"bad range {text!r}")
    return list(range(lo, hi + 1))


def write_output(text, args, cfg):
    path = args.out or cfg.get("output", {}).get("path") or "-"
    if path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)
        log.info("wrote %s", path)


def output_format(args, cfg):
    fmt = args.format or cfg.get("output", {}).get("format") or "csv"
    if fmt not in ("csv", "json"):
        raise ConfigError(f"unknown format {fmt!r}")
    return fmt


def cmd_solve(args, cfg):
    problem, pspec = resolve_problem(args, cfg)
    config = resolve_solver(args, cfg)
    report = solve(problem, config)
    report.problem["spec"] = pspec
    if output_format(args, cfg) == "json":
        text = reports.report_to_json(report)
    else:
        text = reports.report_to_csv(report)
    write_output(text, args, cfg)
    log.info("%s: %d steps, relres %.3e, converged=%s", config.name, report.steps,
             report.relative_residuals[-1], report.converged)
    return EXIT_OK if report.converged else EXIT_NOT_CONVERGED


def _sweep_cell(problem, k, m, tol, max_steps):
    try:
        rep = solve(problem, preset_config(f"oc({k},{m})", relres_tol=tol,
                                           max_steps=max_steps))
        rate = rep.observed_rate if rep.observed_rate is not None else 1.0
        return {"k": k, "m": m, "observed_rate": rate,
                "matvecs_to_tolerance": rep.matvecs if rep.converged else None,
                "failed": False}
    except Exception as exc:  # a failed cell must not stop the sweep
        log.warning("cell oc(%d,%d) failed: %s", k, m, exc)
        return {"k": k, "m": m, "observed_rate": 1.0, "matvecs_to_tolerance": None,
                "failed": True}


def cmd_sweep(args, cfg):
    problem, pspec = resolve_problem(args, cfg)
    ks = _range(args.k_range or cfg.get("k_range", "1:6"))
    ms = _range(args.m_range or cfg.get("m_range", "1:5"))
    tol = args.tol if args.tol is not None else cfg.get("tol", 1e-10)
    max_steps = args.max_steps if args.max_steps is not None else cfg.get("max_steps", 60)
    cells = [(k, m) for k in ks for m in ms]
    workers = args.workers or cfg.get("workers", 1)
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            rows = list(pool.map(lambda km: _sweep_cell(problem, *km, tol, max_steps), cells))
    else:
        rows = [_sweep_cell(problem, k, m, tol, max_steps) for k, m in cells]
    header = {"problem": pspec, "k_range": [ks[0], ks[-1]], "m_range": [ms[0], ms[-1]],
              "tol": tol, "max_steps": max_steps, "method": "inhomogeneous oc(k,m)"}
    if output_format(args, cfg) == "json":
        text = reports.dumps({"format": reports.SWEEP_FORMAT, "version": reports.VERSION,
                              "config": header, "cells": rows}, indent=1)
    else:
        text = reports.sweep_to_csv(rows, header)
    write_output(text, args, cfg)
    return EXIT_OK


def cmd_domain(args, cfg):
    tab = resolve_tableau(args, cfg)
    rect = _floats(args.rect or cfg.get("rectangle", "-1,3,-2,2"), 4, "--rect")
    res = [int(v) for v in _floats(args.res or cfg.get("resolution", "201,201"), 2, "--res")]
    grid = convergence_domain(tab, rect, res)
    if output_format(args, cfg) == "json":
        text = reports.domain_to_json(grid)
    else:
        text = reports.domain_to_csv(grid)
    write_output(text, args, cfg)
    return EXIT_OK


def cmd_stationary(args, cfg):
    tab = resolve_tableau(args, cfg)
    if not tab.is_homogeneous():
        raise ConfigError("stationary iteration needs a homogeneous tableau "
                          "(row 0 must sum to 1)")
    problem, pspec = resolve_problem(args, cfg)
    steps = args.steps if args.steps is not None else cfg.get("steps", 200)
    report = stationary_iterate(problem, tab, steps)
    report.problem["spec"] = pspec
    second_seed = args.second_rhs_seed
    if second_seed is None:
        second_seed = cfg.get("second_rhs_seed")
    second = None
    if second_seed is not None:
        second = stationary_iterate(problem, tab, steps,
                                    rhs=uniform_rhs(problem.dimension, second_seed))
    header = reports.report_header(report)
    header.update(second_rhs_seed=second_seed, observed_rate=report.observed_rate)
    if output_format(args, cfg) == "json":
        doc = {"format": reports.REPORT_FORMAT, "version": reports.VERSION, **header,
               "relative_residuals": report.relative_residuals,
               "relative_residuals_second_rhs":
                   second.relative_residuals if second else None}
        text = reports.dumps(doc, indent=1)
    else:
        alt = second.relative_residuals if second else [None] * len(report.relative_residuals)
        rows = [(n, a, b) for n, (a, b) in enumerate(zip(report.relative_residuals, alt))]
        text = reports.csv_text(reports.REPORT_FORMAT, header,
                                 ["step", "relres", "relres_second_rhs"], rows)
    write_output(text, args, cfg)
    return EXIT_OK


def cmd_cg_precision(args, cfg):
    steps = args.steps if args.steps is not None else cfg.get("steps", 100)
    n = args.n if args.n is not None else cfg.get("n", 100)
    comparison = cg_direction_comparison(diag_squares_problem(n), steps)
    header = {"problem": {"generator": "diag_squares", "params": {"n": n}},
              "steps": steps, "reduced": comparison.reduced_dtype,
              "extended": comparison.extended_dtype}
    if output_format(args, cfg) == "json":
        text = reports.dumps({"format": reports.CG_FORMAT, "version": reports.VERSION,
                              "config": header, "deviations": comparison.deviations,
                              "anorm_error_reduced": comparison.reduced_errors,
                              "anorm_error_extended": comparison.extended_errors}, indent=1)
    else:
        text = reports.cg_to_csv(comparison, header)
    write_output(text, args, cfg)
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="ocm", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, problem=True):
        p.add_argument("--config", help="JSON configuration file")
        p.add_argument("--out", help="output path (default: stdout)")
        p.add_argument("--format", choices=["csv", "json"])
        if problem:
            p.add_argument("--problem", help="generator: identity, diag_squares, "
                           "convection_diffusion, toeplitz_banded")
            p.add_argument("--param", action="append", metavar="KEY=VALUE",
                           help="generator parameter (repeatable)")
            p.add_argument("--seed", type=int)

    p = sub.add_parser("solve", help="run one oc(k,m) solve")
    common(p)
    p.add_argument("--preset")
    p.add_argument("--k", type=int)
    p.add_argument("--m", type=int)
    p.add_argument("--inhomogeneous", action="store_true")
    p.add_argument("--objective", choices=["residual_2norm", "error_Anorm"])
    p.add_argument("--tol", type=float)
    p.add_argument("--max-steps", type=int)
    p.add_argument("--refresh-period", type=int)
    p.add_argument("--drift-tol", type=_drift_tol,
                   help="refresh A x when its error bound exceeds this times ||y||; "
                        "'off' leaves only the periodic refresh")
    p.add_argument("--residual-mode", choices=["assembled", "explicit_matvec"])
    p.add_argument("--rank-tol", type=float)
    p.add_argument("--krylov-basis", choices=["monomial", "arnoldi"])
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("sweep", help="observed rates over a k x m grid")
    common(p)
    p.add_argument("--k-range", help="LO:HI")
    p.add_argument("--m-range", help="LO:HI")
    p.add_argument("--tol", type=float)
    p.add_argument("--max-steps", type=int)
    p.add_argument("--workers", type=int)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("domain", help="raster of r(lambda) for a constant tableau")
    common(p, problem=False)
    p.add_argument("--tableau", help="name (table4_a..f, toeplitz_oc22, "
                   "richardson:A, second_order:A,B) or JSON rows")
    p.add_argument("--rect", help="re_min,re_max,im_min,im_max")
    p.add_argument("--res", help="n_re,n_im")
    p.set_defaults(func=cmd_domain)

    p = sub.add_parser("stationary", help="constant-coefficient iteration")
    common(p)
    p.add_argument("--tableau")
    p.add_argument("--steps", type=int)
    p.add_argument("--second-rhs-seed", type=int)
    p.set_defaults(func=cmd_stationary)

    p = sub.add_parser("cg-precision", help="reduced vs reorthogonalized CG")
    common(p, problem=False)
    p.add_argument("--steps", type=int)
    p.add_argument("--n", type=int)
    p.set_defaults(func=cmd_cg_precision)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s")
    try:
        cfg = load_config(args.config) if args.config else {}
        return args.func(args, cfg)
    except ConfigError as exc:
        print(f"ocm: config error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except Exception as exc:
        print(f"ocm: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
