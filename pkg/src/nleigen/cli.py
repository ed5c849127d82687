"""Command-line front end: one JSON config in, JSON and CSV artifacts out.

Exit codes: 0 success, 2 no solution where one was required, 3 a condition
or verification check failed, 4 invalid configuration.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import jsonschema
import numpy as np

from .barriers import lambda_big_and_solution_bounds, lambda_threshold, sup_inf_bound
from .eigen import estimate_lambda, lambda_derivative_check
from .errors import ConfigError, DomainError, MissingParameterError, NLEigenError, UnsupportedOperatorError
from .grid import FieldState, build_domain, solve_grid_bvp
from .operators import OperatorSpec, check_conditions, coercivity_profile
from .radial import RadialProblem, eigen_radial, solve_radial_bvp
from .verify import VerificationReport, audit_state, blowup_bracket_check, monotone_history_check

EXIT_OK, EXIT_NO_SOLUTION, EXIT_CHECK_FAILED, EXIT_CONFIG = 0, 2, 3, 4

COMMANDS = ("check-operator", "barriers", "solve-radial", "solve-grid", "eigen-radial",
            "eigen-grid", "sweep-lambda", "verify")

_NUM = {"type": "number"}
_POS = {"type": "number", "exclusiveMinimum": 0}
_POINT = {"type": "array", "items": _NUM, "minItems": 2, "maxItems": 2}

SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["command", "operator"],
    "properties": {
        "command": {"enum": list(COMMANDS)},
        "operator": {
            "type": "object", "additionalProperties": False, "required": ["family", "n"],
            "properties": {"family": {"type": "string"}, "n": {"type": "integer", "minimum": 2},
                           "params": {"type": "object", "additionalProperties": _NUM}},
        },
        "domain": {
            "type": "object", "additionalProperties": False, "required": ["kind"],
            "properties": {"kind": {"enum": ["disk", "rectangle", "mask_file"]},
                           "R": _POS, "a": _POS, "b": _POS, "center": _POINT,
                           "path": {"type": "string"}, "x0": _NUM, "y0": _NUM},
        },
        "solver": {
            "type": "object", "additionalProperties": False,
            "properties": {"h": _POS, "N": {"type": "integer", "minimum": 64}, "tol": _POS,
                           "M_cap": _POS, "K": {"type": "integer", "minimum": 8},
                           "max_iter": {"type": "integer", "minimum": 1},
                           "method": {"enum": ["auto", "picard", "newton", "explicit"]}},
        },
        "lambda": {"type": "number", "minimum": 0},
        "lambdas": {"type": "array", "items": {"type": "number", "minimum": 0}, "minItems": 1},
        "lambda_range": {
            "type": "object", "additionalProperties": False, "required": ["start", "stop", "num"],
            "properties": {"start": {"type": "number", "minimum": 0}, "stop": {"type": "number", "minimum": 0},
                           "num": {"type": "integer", "minimum": 1}},
        },
        "delta": _POS,
        "weight": _POS,
        "eigen_tol": _POS,
        "barriers": {
            "type": "object", "additionalProperties": False,
            "properties": {k: _NUM for k in ("nu", "R", "rho", "beta", "R_o", "sup_h", "inf_h",
                                              "sup_f_plus", "inf_f_minus", "lam", "kappa1", "kappa2")},
        },
        "probes": {"type": "array", "items": _POINT},
        "fields": {
            "type": "array",
            "items": {"type": "object", "additionalProperties": False, "required": ["path"],
                      "properties": {"path": {"type": "string"}, "lambda": {"type": "number", "minimum": 0}}},
        },
        "trials": {"type": "integer", "minimum": 1},
        "seed": {"type": "integer", "minimum": 0},
    },
}


def load_config(path: str) -> dict:
    """Read and validate a run config; raises :class:`ConfigError`."""
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    validate_config(cfg)
    return cfg


def validate_config(cfg) -> None:
    try:
        jsonschema.validate(cfg, SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"{where}: {exc.message}") from None
    try:
        OperatorSpec.from_dict(cfg["operator"])
    except NLEigenError as exc:
        raise ConfigError(f"operator: {exc}") from None
    grid_cmds = ("solve-grid", "eigen-grid", "sweep-lambda", "verify")
    if cfg["command"] in grid_cmds and "domain" not in cfg:
        raise ConfigError(f"{cfg['command']} needs a domain")
    if cfg["command"] in ("solve-radial", "solve-grid") and "lambda" not in cfg:
        raise ConfigError(f"{cfg['command']} needs lambda")
    if cfg["command"] == "sweep-lambda" and not ("lambdas" in cfg or "lambda_range" in cfg):
        raise ConfigError("sweep-lambda needs lambdas or lambda_range")
    if cfg["command"] == "verify" and not cfg.get("fields"):
        raise ConfigError("verify needs fields")
    dom = cfg.get("domain", {})
    need = {"disk": ["R"], "rectangle": ["a", "b"], "mask_file": ["path"]}.get(dom.get("kind"), [])
    missing = [k for k in need if k not in dom]
    if missing:
        raise ConfigError(f"domain: missing {missing}")


# ----------------------------------------------------------------------
def _clean(x):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to None."""
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, np.ndarray):
        return _clean(x.tolist())
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        return float(x) if math.isfinite(x) else None
    return x


def _write_json(out: str, name: str, data) -> None:
    with open(os.path.join(out, name), "w") as fh:
        json.dump(_clean(data), fh, sort_keys=True, indent=2)
        fh.write("\n")


def _domain(cfg):
    spec = dict(cfg["domain"])
    solver = cfg.get("solver", {})
    return build_domain(spec, solver.get("h", 1 / 32), boundary_fn=cfg.get("delta", 1.0),
                        weight_fn=cfg.get("weight", 1.0), K=solver.get("K", 16))


def _solver_kwargs(cfg) -> dict:
    s = cfg.get("solver", {})
    return {k: s[k] for k in ("tol", "M_cap", "method", "max_iter") if k in s}


def _lambdas(cfg) -> list:
    if "lambdas" in cfg:
        return [float(x) for x in cfg["lambdas"]]
    r = cfg["lambda_range"]
    return [float(x) for x in np.linspace(r["start"], r["stop"], r["num"])]


def _radius(cfg) -> float:
    return float(cfg.get("domain", {}).get("R", 1.0))


# ----------------------------------------------------------------------
def cmd_check_operator(cfg, op, out):
    rep = check_conditions(op, seed=cfg.get("seed", 0), trials=cfg.get("trials", 256))
    prof = coercivity_profile(op)
    with open(os.path.join(out, "profile.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["s", "m1", "m2", "m3", "m4", "mlow", "mhigh"])
        for row in prof.to_rows():
            w.writerow([repr(float(v)) for v in row])
    sig = op.signature
    summary = {"command": "check-operator", "operator": op.to_dict(),
               "signature": {"k1": sig.k1, "k2": sig.k2, "k": sig.k, "gamma": sig.gamma,
                             "alpha": sig.alpha, "s_hat": sig.s_hat},
               "case": prof.case_tag, "s_bar": prof.s_bar, "sigma": prof.sigma,
               "conditions": {k: v["passed"] for k, v in rep.results.items()},
               "margins": {k: v["margin"] for k, v in rep.results.items()}}
    _write_json(out, "report.json", rep.to_dict())
    _write_json(out, "summary.json", summary)
    required = all(rep.results[c]["passed"] for c in ("A", "B", "C"))
    return EXIT_OK if required else EXIT_CHECK_FAILED


def cmd_barriers(cfg, op, out):
    b = cfg.get("barriers", {})
    nu, R = b.get("nu", cfg.get("weight", 1.0)), b.get("R", 2.0 * _radius(cfg))
    R_o = b.get("R_o", _radius(cfg))
    rho = b.get("rho")
    if rho is None and coercivity_profile(op).case_tag == "CaseII":
        rho = 0.5 * R
    reports = [lambda_threshold(op, nu, R, rho=rho, beta=b.get("beta")),
               lambda_big_and_solution_bounds(op, nu, R_o, b.get("lam", 0.0),
                                              b.get("kappa1"), b.get("kappa2")),
               sup_inf_bound(op, b.get("sup_h", 0.0), b.get("inf_h", 0.0),
                             b.get("sup_f_plus", 1.0), b.get("inf_f_minus", -1.0), R_o)]
    _write_json(out, "summary.json", {"command": "barriers", "operator": op.to_dict(),
                                      "bounds": [r.to_dict() for r in reports]})
    return EXIT_OK


def cmd_solve_radial(cfg, op, out):
    s = cfg.get("solver", {})
    prob = RadialProblem(op, R=_radius(cfg), delta=cfg.get("delta", 1.0), lam=cfg["lambda"],
                         a0=cfg.get("weight", 1.0), N=s.get("N", 4096), tol=s.get("tol", 1e-6))
    sol = solve_radial_bvp(prob)
    summary = {"command": "solve-radial", "operator": op.to_dict(), **sol.summary()}
    if getattr(sol, "status", None) == "infeasible":
        _write_json(out, "summary.json", summary)
        return EXIT_NO_SOLUTION
    sol.to_csv(os.path.join(out, "profile.csv"))
    summary["margins"] = {"monotone": bool(sol.monotone),
                          "strong_minimum": float(sol.v[:-1].min() - prob.delta)}
    _write_json(out, "summary.json", summary)
    return EXIT_OK


def cmd_eigen_radial(cfg, op, out):
    s = cfg.get("solver", {})
    lam, prof = eigen_radial(op, _radius(cfg), tol=s.get("tol", 1e-10), a0=cfg.get("weight", 1.0),
                             N=s.get("N", 4096))
    prof.to_csv(os.path.join(out, "profile.csv"))
    _write_json(out, "summary.json", {"command": "eigen-radial", "operator": op.to_dict(),
                                      "lambda_star": lam, "iterations": prof.meta["evaluations"],
                                      "residual": prof.residual_sup,
                                      "first_zero": prof.meta["first_zero"]})
    return EXIT_OK


def cmd_solve_grid(cfg, op, out):
    dom = _domain(cfg)
    st = solve_grid_bvp(op, dom, cfg["lambda"], **_solver_kwargs(cfg))
    summary = {"command": "solve-grid", "operator": op.to_dict(), **st.summary()}
    if st.status != "converged":
        _write_json(out, "summary.json", summary)
        return EXIT_NO_SOLUTION
    st.to_csv(os.path.join(out, "field.csv"), dom)
    rep = audit_state(op, dom, st) if st.lam > 0 and st.u.min() > 0 else VerificationReport([])
    summary["margins"] = rep.margins
    _write_json(out, "report.json", rep.to_dict())
    _write_json(out, "summary.json", summary)
    return EXIT_OK


def cmd_eigen_grid(cfg, op, out):
    dom = _domain(cfg)
    kept = []
    br = estimate_lambda(op, dom, cfg.get("delta", 1.0), cfg.get("eigen_tol", 0.02),
                         solver=_solver_kwargs(cfg), on_solve=lambda st: kept[:1].clear() or kept.append(st))
    checks = VerificationReport([blowup_bracket_check(br), monotone_history_check(br)])
    if kept:
        kept[-1].to_csv(os.path.join(out, "field.csv"), dom)
    summary = {"command": "eigen-grid", "operator": op.to_dict(), **br.to_dict(),
               "margins": checks.margins}
    _write_json(out, "report.json", checks.to_dict())
    _write_json(out, "summary.json", summary)
    return EXIT_OK if br.meta["converged"] else EXIT_NO_SOLUTION


def _sweep_point(args):
    cfg, lam = args
    op = OperatorSpec.from_dict(cfg["operator"])
    st = solve_grid_bvp(op, _domain(cfg), lam, **_solver_kwargs(cfg))
    return {"lambda": lam, "status": st.status, "sup_u": st.sup, "interior_min": st.interior_min,
            "iterations": st.iteration, "residual_sup": st.residual_sup}


def cmd_sweep(cfg, op, out, jobs=1):
    lams = _lambdas(cfg)
    tasks = [(cfg, lam) for lam in lams]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            rows = list(ex.map(_sweep_point, tasks))
    else:
        rows = [_sweep_point(t) for t in tasks]
    with open(os.path.join(out, "sweep.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["lambda", "status", "sup_u", "interior_min", "iterations", "residual_sup"])
        for r in rows:
            w.writerow([repr(r["lambda"]), r["status"], repr(r["sup_u"]), repr(r["interior_min"]),
                        r["iterations"], repr(r["residual_sup"])])
    ok = all(r["status"] == "converged" for r in rows)
    summary = {"command": "sweep-lambda", "operator": op.to_dict(), "points": rows, "margins": {}}
    code = EXIT_OK if ok else EXIT_NO_SOLUTION
    if ok and cfg.get("probes"):
        rep = lambda_derivative_check(op, _domain(cfg), cfg.get("delta", 1.0), lams, cfg["probes"],
                                      solver=_solver_kwargs(cfg))
        summary["margins"]["lambda_derivative"] = rep.margin
        _write_json(out, "report.json", rep.to_dict())
        if not rep.passed:
            code = EXIT_CHECK_FAILED
    _write_json(out, "summary.json", summary)
    return code


def cmd_verify(cfg, op, out):
    dom = _domain(cfg)
    results, per_field = [], []
    for entry in cfg["fields"]:
        st = FieldState.from_csv(entry["path"], dom, lam=entry.get("lambda", cfg.get("lambda", 0.0)))
        rep = audit_state(op, dom, st)
        results += rep.results
        per_field.append({"path": entry["path"], "passed": rep.passed, "margins": rep.margins})
    full = VerificationReport(results)
    _write_json(out, "report.json", full.to_dict())
    _write_json(out, "summary.json", {"command": "verify", "operator": op.to_dict(),
                                      "passed": full.passed, "fields": per_field,
                                      "margins": full.margins})
    return EXIT_OK if full.passed else EXIT_CHECK_FAILED


HANDLERS = {"check-operator": cmd_check_operator, "barriers": cmd_barriers,
            "solve-radial": cmd_solve_radial, "solve-grid": cmd_solve_grid,
            "eigen-radial": cmd_eigen_radial, "eigen-grid": cmd_eigen_grid,
            "sweep-lambda": cmd_sweep, "verify": cmd_verify}


def run(cfg: dict, out: str, jobs: int = 1) -> int:
    """Execute a validated config, writing artifacts into ``out``."""
    validate_config(cfg)
    op = OperatorSpec.from_dict(cfg["operator"])
    os.makedirs(out, exist_ok=True)
    handler = HANDLERS[cfg["command"]]
    if handler is cmd_sweep:
        return handler(cfg, op, out, jobs)
    return handler(cfg, op, out)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="nleigen", description=__doc__.splitlines()[0])
    p.add_argument("command", nargs="?", choices=COMMANDS,
                   help="overrides the command named in the config")
    p.add_argument("--config", required=True, help="JSON run configuration")
    p.add_argument("--out", default="out", help="output directory")
    p.add_argument("--seed", type=int, help="random seed (overrides the config)")
    p.add_argument("--jobs", type=int, default=1, help="worker processes for sweeps")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.command:
            cfg["command"] = args.command
        if args.seed is not None:
            cfg["seed"] = args.seed
        validate_config(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    fresh = not os.path.exists(args.out)
    try:
        return run(cfg, args.out, max(1, args.jobs))
    except (ConfigError, DomainError, MissingParameterError, UnsupportedOperatorError) as exc:
        if fresh and os.path.isdir(args.out) and not os.listdir(args.out):
            os.rmdir(args.out)
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NLEigenError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NO_SOLUTION


if __name__ == "__main__":
    sys.exit(main())
