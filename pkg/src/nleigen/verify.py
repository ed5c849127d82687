"""Named, machine-checkable predicates on computed fields and brackets.

Every check returns a :class:`CheckResult` whose ``margin`` is the worst
slack observed; a check passes iff its margin is nonnegative.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .barriers import lambda_big_and_solution_bounds, sup_inf_bound
from .errors import GeometryError, InputError, PreconditionError, UnsupportedOperatorError
from .grid import FieldState, GridDomain, Scheme, explicit_step, stable_tau
from .operators import OperatorSpec, coercivity_profile

DEFAULT_SLACK = 0.05


def _finite(x):
    return float(x) if x is not None and math.isfinite(x) else None


@dataclass
class CheckResult:
    check_id: str
    passed: bool
    margin: float
    witnesses: list = field(default_factory=list)
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"check_id": self.check_id, "passed": self.passed, "margin": _finite(self.margin),
                "witnesses": self.witnesses, "details": self.details}


def _result(check_id, margin, witnesses=(), **details) -> CheckResult:
    return CheckResult(check_id, bool(margin >= 0), float(margin), list(witnesses), details)


def _values(x, dom: GridDomain | None = None):
    """``(interior, boundary)`` arrays from a FieldState or a pair."""
    if isinstance(x, FieldState):
        return np.asarray(x.u, float), np.asarray(x.boundary, float)
    if isinstance(x, tuple) and len(x) == 2:
        return np.asarray(x[0], float), np.asarray(x[1], float)
    if dom is not None:
        return np.asarray(x, float), dom.boundary_array()
    raise InputError("expected a FieldState or an (interior, boundary) pair")


def _node(dom: GridDomain | None, i: int):
    return [float(dom.xi[i]), float(dom.yi[i])] if dom is not None else [int(i)]


# ----------------------------------------------------------------------
def quotient_comparison_check(u, v, dom: GridDomain | None = None,
                              slack: float = DEFAULT_SLACK) -> CheckResult:
    """Interior max of ``u / v`` must not exceed its boundary max (times ``1 + slack``)."""
    ui, ub = _values(u, dom)
    vi, vb = _values(v, dom)
    if np.any(vi <= 0) or np.any(vb <= 0):
        raise PreconditionError("the denominator field must be positive")
    ri, rb = ui / vi, ub / vb
    top = float(rb.max())
    margin = top + slack * abs(top) - float(ri.max())
    return _result("quotient_comparison", margin, [_node(dom, int(np.argmax(ri)))],
                   interior_max=float(ri.max()), boundary_max=top)


def harnack_constant(beta: float) -> float:
    """``1 / (1 - (2/3)^beta)``."""
    if not 0 < beta <= 1:
        raise InputError("beta must lie in (0, 1]")
    return 1.0 / (1.0 - (2.0 / 3.0) ** beta)


def harnack_holder_check(w, dom: GridDomain, center, radius: float, beta: float | None = None,
                         op: OperatorSpec | None = None, slack: float = DEFAULT_SLACK,
                         experimental: bool = False) -> CheckResult:
    """Harnack ``sup w <= C inf w`` and the Hoelder bound
    ``|w(x) - w(z)| <= (3 radius)^-beta sup w |x - z|^beta`` on the nodes of
    the ball ``B(center, radius)``, which needs ``B(center, 4 radius)`` inside.

    ``beta`` defaults to ``2 - s_bar`` of ``op``; operators whose barriers are
    inverse powers are refused unless ``experimental``.
    """
    if beta is None:
        if op is None:
            raise InputError("need beta or an operator")
        prof = coercivity_profile(op)
        if prof.case_tag != "CaseI" and not experimental:
            raise UnsupportedOperatorError("Harnack check is offered for power-barrier operators only")
        beta = 2.0 - prof.s_bar if prof.case_tag == "CaseI" else 0.5
    wi, _ = _values(w, dom)
    if np.any(wi <= 0):
        raise PreconditionError("w must be positive")
    c = np.asarray(center, dtype=float)
    if float(dom.distance(c)) < 4.0 * radius:
        raise GeometryError("the ball of four times the radius leaves the domain")
    inside = np.hypot(dom.xi - c[0], dom.yi - c[1]) <= radius
    vals = wi[inside]
    if vals.size == 0:
        raise GeometryError("no grid nodes inside the ball")
    idx = np.flatnonzero(inside)
    C = harnack_constant(beta)
    top, bottom = float(vals.max()), float(vals.min())
    harnack_margin = C * bottom * (1.0 + slack) - top
    pts = np.column_stack([dom.xi[idx], dom.yi[idx]])
    dist = np.hypot(pts[:, None, 0] - pts[None, :, 0], pts[:, None, 1] - pts[None, :, 1])
    bound = (3.0 * radius) ** (-beta) * top * dist ** beta
    gap = bound * (1.0 + slack) - np.abs(vals[:, None] - vals[None, :])
    np.fill_diagonal(gap, np.inf)
    if vals.size == 1:
        gap = np.zeros((1, 1))
    a, b = np.unravel_index(int(np.argmin(gap)), gap.shape)
    margin = min(harnack_margin, float(gap.min()))
    return _result("harnack_holder", margin,
                   [_node(dom, int(idx[np.argmax(vals)])), _node(dom, int(idx[a])), _node(dom, int(idx[b]))],
                   constant=C, beta=beta, sup=top, inf=bottom, harnack_margin=harnack_margin,
                   holder_margin=float(gap.min()), nodes=int(vals.size))


def change_of_variables_check(u, beta: float, op: OperatorSpec, lam: float, dom: GridDomain,
                              slack: float = DEFAULT_SLACK, scheme_kwargs: dict | None = None
                              ) -> CheckResult:
    """For a positive solution ``u`` the power ``v = u^beta`` (``0 < beta <= 1``)
    must satisfy ``H_h[v] + beta^k lam a v^k <= tol`` at interior nodes, with
    ``tol = slack * beta^k lam nu sup v^k``."""
    if not 0 < beta <= 1:
        raise InputError("beta must lie in (0, 1]")
    ui, ub = _values(u, dom)
    if np.any(ui <= 0) or np.any(ub <= 0):
        raise PreconditionError("u must be positive")
    k = op.signature.k
    fn = dom.boundary_fn
    vdom = dom.with_boundary(lambda x, y: np.asarray(fn(x, y), dtype=float) ** beta)
    # the boundary data of the stored field wins over the domain's function on nodes
    vdom.boundary_values.ravel()[vdom.boundary_flat] = ub ** beta
    vi = ui ** beta
    H = Scheme(op, vdom, **(scheme_kwargs or {})).apply(vi)
    res = H + beta ** k * lam * dom.weight * vi ** k
    tol = slack * beta ** k * lam * dom.nu * float(vi.max()) ** k
    worst = int(np.argmax(res))
    return _result("change_of_variables", tol - float(res[worst]), [_node(dom, worst)],
                   beta=beta, max_residual=float(res[worst]), tolerance=tol)


def extremum_principle_check(u, dom: GridDomain | None = None, mode: str = "max",
                             strict: bool = False, tol: float = 1e-9) -> CheckResult:
    """``max``: interior sup <= boundary sup + tol.  ``min``: interior inf >=
    boundary inf - tol, or strictly above it when ``strict``."""
    ui, ub = _values(u, dom)
    if mode == "max":
        margin = float(ub.max()) + tol - float(ui.max())
        where = int(np.argmax(ui))
    elif mode == "min":
        gap = float(ui.min()) - float(ub.min())
        margin = gap if strict else gap + tol
        where = int(np.argmin(ui))
        if strict and gap <= 0:
            margin = min(gap, -tol)
    else:
        raise InputError("mode must be 'max' or 'min'")
    return _result(f"extremum_{mode}", margin, [_node(dom, where)], strict=strict,
                   interior=float(ui.max() if mode == "max" else ui.min()),
                   boundary=float(ub.max() if mode == "max" else ub.min()))


def comparison_preservation_check(op: OperatorSpec, dom: GridDomain, lower, upper, lam: float,
                                  tol: float = 1e-10) -> CheckResult:
    """One damped explicit update at a common step keeps ``lower <= upper``."""
    lo, up = np.asarray(lower, float), np.asarray(upper, float)
    if np.any(lo > up + tol):
        raise PreconditionError("fields are not ordered")
    scheme = Scheme(op, dom)
    tau = stable_tau(scheme, [lo, up], lam)
    a, b = explicit_step(scheme, lo, lam, tau), explicit_step(scheme, up, lam, tau)
    gap = b - a
    worst = int(np.argmin(gap))
    return _result("comparison_preservation", float(gap[worst]) + tol, [_node(dom, worst)], tau=tau)


def sup_bound_audit(op: OperatorSpec, dom: GridDomain, state: FieldState,
                    slack: float = DEFAULT_SLACK) -> CheckResult:
    """``sup u`` against the cone bound with ``f+ = lam nu (sup u)^k``."""
    g = state.boundary
    f_plus = state.lam * dom.nu * max(state.sup, 0.0) ** op.signature.k
    rep = sup_inf_bound(op, float(g.max()), float(g.min()), f_plus, 0.0, dom.R_o)
    return _result("sup_bound", rep.value * (1.0 + slack) - state.sup, bound=rep.value, sup=state.sup)


def small_parameter_audit(op: OperatorSpec, dom: GridDomain, state: FieldState,
                          slack: float = DEFAULT_SLACK) -> CheckResult:
    """Below ``Lambda``: ``sup u <= theta sup g`` with ``theta = 1/(1 - (lam/Lambda)^(1/k))``.
    Vacuous (margin inf) for larger ``lam``."""
    g = state.boundary
    rep = lambda_big_and_solution_bounds(op, dom.nu, dom.R_o, state.lam,
                                         kappa1=float(g.min()), kappa2=float(g.max()))
    if not rep.details["applicable"]:
        return _result("small_parameter", math.inf, Lambda=rep.value, applicable=False)
    bound = rep.details["upper"]
    return _result("small_parameter", bound * (1.0 + slack) - state.sup, Lambda=rep.value,
                   applicable=True, bound=bound, sup=state.sup)


def blowup_bracket_check(bracket, slack: float = DEFAULT_SLACK) -> CheckResult:
    """Along the feasible history ``m >= delta (1 + k lam / (lam_hi - lam))``
    within ``slack``; vacuous without a finite upper end."""
    hi, k, delta = bracket.lam_hi, bracket.k, bracket.delta
    if not math.isfinite(hi):
        return _result("blowup_bracket", math.inf, vacuous=True)
    margin, where, rows = math.inf, None, []
    for lam, m in bracket.feasible():
        need = delta * (1.0 + k * lam / (hi - lam))
        gap = m - (1.0 - slack) * need
        rows.append({"lambda": lam, "m": m, "bound": need})
        if gap < margin:
            margin, where = gap, lam
    return _result("blowup_bracket", margin, [] if where is None else [where], rows=rows)


def monotone_history_check(bracket, tol: float = 1e-9) -> CheckResult:
    """``sup u`` is nondecreasing in ``lam`` over the feasible history."""
    pts = sorted(bracket.feasible())
    margin = math.inf
    for (l0, m0), (l1, m1) in zip(pts, pts[1:]):
        margin = min(margin, m1 - m0 + tol)
    return _result("monotone_history", margin, points=len(pts))


# ----------------------------------------------------------------------
@dataclass
class VerificationReport:
    results: list

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results)

    @property
    def margins(self) -> dict:
        out: dict = {}
        for r in self.results:
            prev = out.get(r.check_id)
            m = _finite(r.margin)
            out[r.check_id] = m if prev is None or (m is not None and m < prev) else prev
        return out

    def to_dict(self) -> dict:
        return {"passed": self.passed, "margins": self.margins,
                "results": [r.to_dict() for r in self.results]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)


def audit_state(op: OperatorSpec, dom: GridDomain, state: FieldState, beta: float = 0.5,
                slack: float = DEFAULT_SLACK) -> VerificationReport:
    """Battery for one converged positive solution with constant boundary data."""
    out = [sup_bound_audit(op, dom, state, slack), small_parameter_audit(op, dom, state, slack)]
    if state.lam > 0:
        out.append(extremum_principle_check(state, dom, "min", strict=True))
    else:
        out.append(extremum_principle_check(state, dom, "max"))
        out.append(extremum_principle_check(state, dom, "min"))
    g = state.boundary
    if np.all(g > 0) and np.all(state.u > 0):
        # constants at the boundary level are sub-solutions for positive lam
        out.append(quotient_comparison_check((np.full_like(state.u, g.min()), g), state, dom, slack))
        out.append(change_of_variables_check(state, beta, op, state.lam, dom, slack))
        if coercivity_profile(op).case_tag == "CaseI":
            d = dom.distance(np.asarray(dom.center))
            radius = float(d) / 4.5
            if radius > 2 * dom.h:
                out.append(harnack_holder_check(state, dom, dom.center, radius, op=op, slack=slack))
    return VerificationReport(out)
