"""Closed-form radial barriers and the analytic constants built from them."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import DomainError, InputError, MissingParameterError, UnsupportedOperatorError
from .operators import OperatorSpec, coercivity_profile, evaluate, mhigh

SHAPES = ("power", "inverse_power", "alpha_cone")
SIGNS = ("plus", "minus")


@dataclass(frozen=True)
class BarrierSpec:
    """Radial profile ``c + d r^beta``, ``c - d r^beta``, ``c +- d r^-beta`` or
    the cone ``c +- d r^alpha`` with ``alpha = gamma / k`` of the operator."""

    shape: str
    sign: str
    c: float = 0.0
    d: float = 1.0
    beta: float | None = None
    center: tuple | None = None

    def __post_init__(self):
        if self.shape not in SHAPES:
            raise InputError(f"unknown barrier shape {self.shape!r}")
        if self.sign not in SIGNS:
            raise InputError(f"sign must be 'plus' or 'minus', got {self.sign!r}")
        if not self.d > 0:
            raise InputError("barrier slope d must be positive")
        if self.shape != "alpha_cone" and (self.beta is None or not self.beta > 0):
            raise InputError("power barriers need an exponent beta > 0")

    @property
    def sgn(self) -> float:
        return 1.0 if self.sign == "plus" else -1.0

    def exponent(self, op: OperatorSpec) -> float:
        if self.shape == "alpha_cone":
            return op.signature.alpha
        return float(self.beta)

    def radial(self, op: OperatorSpec, r):
        """Profile value and first two radial derivatives at ``r``."""
        r = np.asarray(r, dtype=float)
        b = self.exponent(op)
        if self.shape == "inverse_power":
            v = self.c + self.sgn * self.d * r ** (-b)
            v1 = -self.sgn * self.d * b * r ** (-b - 1)
            v2 = self.sgn * self.d * b * (b + 1) * r ** (-b - 2)
        else:
            v = self.c + self.sgn * self.d * r ** b
            v1 = self.sgn * self.d * b * r ** (b - 1)
            v2 = self.sgn * self.d * b * (b - 1) * r ** (b - 2)
        return v, v1, v2

    def value(self, op: OperatorSpec, points):
        """Barrier evaluated at points of shape ``(..., n)``."""
        pts = np.asarray(points, dtype=float)
        center = np.zeros(pts.shape[-1]) if self.center is None else np.asarray(self.center)
        r = np.linalg.norm(pts - center, axis=-1)
        with np.errstate(divide="ignore"):
            return self.radial(op, r)[0]


def barrier_residual(op: OperatorSpec, b: BarrierSpec, r: float) -> float:
    """H(Dv, D^2 v) for the barrier ``v`` at distance ``r`` from its center.

    Uses the scaling identities

    * ``c +- d r^beta``:  ``(d beta)^k r^(k beta - gamma) H(e, +-(I - (2 - beta) e e^T))``
    * ``c +- d r^-beta``: ``(d beta)^k r^-(k beta + gamma) H(e, -+(I - (beta + 2) e e^T))``
    """
    if not op.symmetric:
        raise UnsupportedOperatorError(f"{op!r} is not rotationally invariant")
    if not r > 0:
        raise DomainError("barrier residual needs r > 0")
    sig = op.signature
    k, gamma = sig.k, sig.gamma
    beta = b.exponent(op)
    n = op.n
    e = np.zeros(n)
    e[0] = 1.0
    P = np.outer(e, e)
    scale = (b.d * beta) ** k
    if b.shape == "inverse_power":
        M = np.eye(n) - (beta + 2.0) * P
        return scale * r ** (-k * beta - gamma) * evaluate(op, e, -b.sgn * M)
    M = np.eye(n) - (2.0 - beta) * P
    return scale * r ** (k * beta - gamma) * evaluate(op, e, b.sgn * M)


@dataclass
class BoundReport:
    """A single analytic bound with the inputs that produced it."""

    formula_id: str
    value: float
    inputs: dict
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


def sup_inf_bound(op: OperatorSpec, sup_h: float, inf_h: float, sup_f_plus: float,
                  inf_f_minus: float, R_o: float) -> BoundReport:
    """A priori bounds from cone comparison on the out-ball of radius ``R_o``.

    ``sup u <= sup_h + sigma (sup f+)^(1/k) R_o^alpha`` and
    ``inf u >= inf_h - sigma |inf f-|^(1/k) R_o^alpha``.
    """
    if not R_o > 0:
        raise InputError("out-ball radius must be positive")
    if sup_f_plus < 0:
        raise InputError("sup f+ must be nonnegative")
    sig = op.signature
    sigma = coercivity_profile(op).sigma
    reach = sigma * R_o ** sig.alpha
    upper = sup_h + reach * sup_f_plus ** (1.0 / sig.k)
    lower = inf_h - reach * abs(inf_f_minus) ** (1.0 / sig.k)
    return BoundReport(
        "sup_inf_cone", float(upper),
        {"sup_h": sup_h, "inf_h": inf_h, "sup_f_plus": sup_f_plus,
         "inf_f_minus": inf_f_minus, "R_o": R_o},
        {"upper": float(upper), "lower": float(lower), "sigma": sigma},
    )


def default_beta(s_bar: float) -> float:
    """Exponent for inverse-power barriers when none is given."""
    return max(1.0, s_bar - 2.0 + 0.5)


def lambda_threshold(op: OperatorSpec, nu: float, R: float, rho: float | None = None,
                     beta: float | None = None) -> BoundReport:
    """Parameter value below which a positive solution is guaranteed.

    Parameters
    ----------
    op : OperatorSpec
    nu : float
        Upper bound of the weight ``a``.
    R : float
        Diameter of the domain.
    rho : float, optional
        Half the outer-ball radius; required when the operator is in CaseII.
    beta : float, optional
        Inverse-power exponent for CaseII, must exceed ``s_bar - 2``.
    """
    if not nu > 0 or not R > 0:
        raise InputError("nu and R must be positive")
    sig = op.signature
    prof = coercivity_profile(op)
    s_bar = prof.s_bar
    if prof.case_tag == "CaseI":
        m = mhigh(op, s_bar)
        value = abs(m) * (2.0 - s_bar) ** sig.k / (nu * R ** sig.gamma)
        details = {"case": "CaseI", "s_bar": s_bar, "beta": 2.0 - s_bar, "mhigh": m}
        inputs = {"nu": nu, "R": R}
    else:
        if rho is None:
            raise MissingParameterError("CaseII threshold needs the outer-ball parameter rho")
        if not rho > 0:
            raise InputError("rho must be positive")
        if beta is None:
            beta = default_beta(s_bar)
        if not beta > s_bar - 2.0:
            raise InputError(f"beta must exceed s_bar - 2 = {s_bar - 2.0:g}")
        s = beta + 2.0
        m = mhigh(op, s)
        value = (abs(m) * beta ** sig.k / (nu * R ** sig.gamma)
                 * (rho / R) ** (sig.k * beta))
        details = {"case": "CaseII", "s_bar": s_bar, "beta": beta, "s": s, "mhigh": m}
        inputs = {"nu": nu, "R": R, "rho": rho, "beta": beta}
    return BoundReport("existence_threshold", float(value), inputs, details)


def lambda_big_and_solution_bounds(op: OperatorSpec, nu: float, R_o: float, lam: float = 0.0,
                                   kappa1: float | None = None,
                                   kappa2: float | None = None) -> BoundReport:
    """``Lambda = 1 / (nu (sigma R_o^alpha)^k)`` and, for ``0 <= lam < Lambda``,
    the bracket ``kappa1 <= u <= theta kappa2`` with
    ``theta = 1 / (1 - (lam / Lambda)^(1/k))``.

    When ``lam >= Lambda`` the bracket is reported as inapplicable.
    """
    if not nu > 0 or not R_o > 0:
        raise InputError("nu and R_o must be positive")
    if lam < 0:
        raise InputError("lam must be nonnegative")
    sig = op.signature
    sigma = coercivity_profile(op).sigma
    big = 1.0 / (nu * (sigma * R_o ** sig.alpha) ** sig.k)
    applicable = lam < big
    theta = 1.0 / (1.0 - (lam / big) ** (1.0 / sig.k)) if applicable else math.inf
    details = {"Lambda": big, "theta": theta, "applicable": applicable}
    if kappa1 is not None:
        details["lower"] = kappa1
    if kappa2 is not None:
        details["upper"] = theta * kappa2 if applicable else math.inf
    return BoundReport(
        "small_parameter_bracket", float(big),
        {"nu": nu, "R_o": R_o, "lam": lam, "kappa1": kappa1, "kappa2": kappa2},
        details,
    )
