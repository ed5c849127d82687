"""Bracketing the first eigenvalue on grid domains by continuation in lambda."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .barriers import BoundReport, lambda_threshold
from .errors import InconsistentSchemeError, InputError
from .grid import FieldState, GridDomain, Scheme, solve_grid_bvp
from .operators import OperatorSpec, coercivity_profile


def lower_bound_from_solution(lam: float, delta: float, m_lam: float, k: float) -> float | None:
    """Lower bound ``lam (1 + k delta / (m_lam - delta))`` on the eigenvalue
    implied by a positive solution with sup ``m_lam`` and boundary level ``delta``.

    Returns None when ``m_lam <= delta`` (the bound does not apply).
    """
    if not lam > 0 or not delta > 0:
        raise InputError("lam and delta must be positive")
    if not m_lam > delta:
        return None
    return lam * (1.0 + k * delta / (m_lam - delta))


def epsilon_improvement(lam: float, theta: float, delta: float, m: float, k: float = 1.0) -> float:
    """Admissible increment ``theta lam k (delta/m) / (1 - theta delta/m)``."""
    if not 0.0 < theta < 1.0:
        raise InputError("theta must lie in (0, 1)")
    if not (m >= delta > 0):
        raise InputError("need m >= delta > 0")
    ratio = delta / m
    return theta * lam * k * ratio / (1.0 - theta * ratio)


def seed_threshold(op: OperatorSpec, dom: GridDomain) -> BoundReport:
    """Guaranteed-feasible parameter for ``dom`` from the barrier threshold.

    The diameter plays the role of ``R``.  For operators that need an outer
    ball, built-in convex shapes use half the diameter and masks fall back to
    one grid spacing.
    """
    rho = None
    if coercivity_profile(op).case_tag == "CaseII":
        convex = dom.shape.get("kind") in ("disk", "rectangle")
        rho = 0.5 * dom.diameter if convex else dom.h
    return lambda_threshold(op, dom.nu, dom.diameter, rho=rho)


@dataclass
class EigenBracket:
    """``lam_lo`` is witnessed by a converged positive solution, ``lam_hi`` by
    a blow-up.  ``history`` lists every solve as ``(lam, sup u, status)``."""

    lam_lo: float
    lam_hi: float
    history: list
    k: float
    delta: float
    meta: dict = field(default_factory=dict)

    @property
    def midpoint(self) -> float:
        return 0.5 * (self.lam_lo + self.lam_hi)

    @property
    def width(self) -> float:
        return (self.lam_hi - self.lam_lo) / self.lam_lo

    def contains(self, value: float, rel: float = 0.0) -> bool:
        return self.lam_lo * (1.0 - rel) <= value <= self.lam_hi * (1.0 + rel)

    def feasible(self) -> list:
        return [(lam, m) for lam, m, status in self.history if status == "converged"]

    def to_dict(self) -> dict:
        return {"lam_lo": self.lam_lo, "lam_hi": self.lam_hi, "k": self.k, "delta": self.delta,
                "history": [{"lambda": lam, "m": m, "status": st} for lam, m, st in self.history],
                "meta": self.meta}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)


def estimate_lambda(op: OperatorSpec, dom: GridDomain, delta: float = 1.0, tol: float = 0.02,
                    max_solves: int = 200, solver: dict | None = None,
                    on_solve: Callable[[FieldState], None] | None = None) -> EigenBracket:
    """Continuation from the threshold seed up to the first blow-up, then
    bisection until ``(lam_hi - lam_lo) / lam_lo <= tol``.

    ``solver`` is passed to :func:`solve_grid_bvp`.  ``on_solve`` sees every
    converged state (for audits).  The boundary data is the constant ``delta``.
    """
    if not delta > 0:
        raise InputError("delta must be positive")
    if not tol > 0:
        raise InputError("tol must be positive")
    solver = dict(solver or {})
    dom = dom.with_boundary(lambda x, y: np.full_like(x, float(delta)))
    scheme = Scheme(op, dom)
    k = op.signature.k
    seed = 0.9 * seed_threshold(op, dom).value
    history: list = []
    lo, hi = None, None
    best: FieldState | None = None

    def attempt(lam):
        warm = None if scheme.state_free or best is None else best.u
        st = solve_grid_bvp(op, dom, lam, u0=warm, scheme=scheme, **solver)
        if st.status == "stalled":
            retry = dict(solver)
            retry["step"] = 0.5 * retry.get("step", 0.9)
            retry["max_iter"] = 2 * (retry.get("max_iter") or st.iteration)
            retry["patience"] = 2 * (retry.get("patience") or 100)
            st = solve_grid_bvp(op, dom, lam, u0=warm, scheme=scheme, **retry)
            st.meta["retried"] = True
        return st

    lam = seed
    solves = 0
    while solves < max_solves:
        st = attempt(lam)
        solves += 1
        ok = st.status == "converged" and st.interior_min > 0
        history.append((float(lam), float(st.sup), st.status if ok or st.status != "converged"
                        else "nonpositive"))
        if ok:
            lo, best = lam, st
            if on_solve is not None:
                on_solve(st)
        else:
            if lo is None:
                raise InconsistentSchemeError(
                    f"no positive solution at the guaranteed-feasible seed lam={lam:g}")
            hi = lam
        if hi is not None and (hi - lo) / lo <= tol:
            break
        if hi is None:
            bound = lower_bound_from_solution(lam, delta, st.sup, k)
            lam = max(bound or 0.0, 1.5 * lam)
        else:
            lam = 0.5 * (lo + hi)
    if hi is None:
        hi = math.inf
    meta = {"seed": seed, "solves": solves, "h": dom.h, "converged": hi < math.inf
            and (hi - lo) / lo <= tol}
    return EigenBracket(float(lo), float(hi), history, k, float(delta), meta)


@dataclass
class DerivativeReport:
    passed: bool
    margin: float
    rows: list

    def to_dict(self) -> dict:
        return {"passed": self.passed, "margin": self.margin, "rows": self.rows}


def lambda_derivative_check(op: OperatorSpec, dom: GridDomain | None, delta: float, lambdas,
                            probe_points, slack: float = 0.1, rel_step: float = 1e-3,
                            field_fn: Callable | None = None, solver: dict | None = None
                            ) -> DerivativeReport:
    """Compare the finite-difference slope ``d v(x) / d lam`` at each probe
    with the window

        ``v log(v / delta) / (k lam)  <=  slope  <=  (M / (k delta)) (v - delta) / lam``

    where ``M`` is the sup of the solution at ``lam``; both ends get ``slack``
    relative room.  The slope uses solutions at ``lam (1 +- rel_step)``.

    ``field_fn(lam, points) -> (values, sup)`` replaces the grid solves when
    given (closed-form fields).
    """
    lambdas = [float(x) for x in lambdas]
    pts = np.atleast_2d(np.asarray(probe_points, dtype=float))
    k = op.signature.k
    if field_fn is None:
        if dom is None:
            raise InputError("need a domain or a field function")
        dom = dom.with_boundary(lambda x, y: np.full_like(x, float(delta)))
        scheme = Scheme(op, dom)
        solver = dict(solver or {})

        def field_fn(lam, points):
            st = solve_grid_bvp(op, dom, lam, scheme=scheme, **solver)
            if st.status != "converged":
                raise InputError(f"lam={lam:g} is not feasible on this grid ({st.status})")
            vals = st.at(dom, points)
            if np.any(np.isnan(vals)):
                raise InputError("probe points must lie inside the domain")
            return vals, st.sup

    rows = []
    margin = math.inf
    for lam in lambdas:
        v, sup = field_fn(lam, pts)
        dl = rel_step * lam
        v_plus, _ = field_fn(lam + dl, pts)
        v_minus, _ = field_fn(lam - dl, pts)
        slope = (v_plus - v_minus) / (2.0 * dl)
        with np.errstate(divide="ignore", invalid="ignore"):
            lower = np.where(v > delta, v * np.log(v / delta), 0.0) / (k * lam)
        upper = sup / (k * delta) * (v - delta) / lam
        lo_ok = slope - (lower - slack * np.abs(lower))
        hi_ok = (upper + slack * np.abs(upper)) - slope
        worst = np.minimum(lo_ok, hi_ok)
        margin = min(margin, float(worst.min()))
        for i in range(len(pts)):
            rows.append({"lambda": lam, "point": pts[i].tolist(), "value": float(v[i]),
                         "slope": float(slope[i]), "lower": float(lower[i]),
                         "upper": float(upper[i]), "ok": bool(worst[i] >= 0)})
    if not rows:
        margin = 0.0
    return DerivativeReport(bool(margin >= 0), float(margin), rows)
