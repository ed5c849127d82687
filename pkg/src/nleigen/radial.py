"""Radial boundary-value problems and first eigenpairs on balls by shooting."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .barriers import lambda_threshold
from .errors import InputError, NumericalError, SearchFailureError, UnsupportedOperatorError
from .operators import OperatorSpec, coercivity, radial_closures

DEFAULT_STEPS = 4096


@dataclass(frozen=True)
class RadialProblem:
    """``G(r, v', v'') + lam a0 |v|^(k-1) v = 0`` on ``[0, R)`` with ``v(R) = delta``."""

    op: OperatorSpec
    R: float = 1.0
    delta: float = 1.0
    lam: float = 0.0
    a0: float = 1.0
    N: int = DEFAULT_STEPS
    tol: float = 1e-6
    v0_max_factor: float = 1e6

    def __post_init__(self):
        if not self.op.symmetric:
            raise UnsupportedOperatorError(f"{self.op!r} is not rotationally invariant")
        if not self.R > 0 or not self.a0 > 0:
            raise InputError("R and a0 must be positive")
        if self.delta < 0 or self.lam < 0:
            raise InputError("delta and lam must be nonnegative")
        if self.N < 64:
            raise InputError("N must be at least 64")


@dataclass
class RadialSolution:
    """Sampled radial profile with metadata.

    ``r``, ``v`` and ``dv`` include the center ``r = 0``.  For eigen profiles
    the last sample is the first zero of ``v``.
    """

    r: np.ndarray
    v: np.ndarray
    dv: np.ndarray
    residual_sup: float
    v0: float
    lam: float
    delta: float
    R: float
    monotone: bool = True
    meta: dict = field(default_factory=dict)

    def __call__(self, radius):
        """Profile interpolated at ``radius`` (clipped to the sampled range)."""
        return np.interp(np.abs(radius), self.r, self.v)

    def summary(self) -> dict:
        return {"lambda": float(self.lam), "v0": float(self.v0),
                "residual_sup": float(self.residual_sup)}

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["r", "v", "dv"])
            for row in zip(self.r, self.v, self.dv):
                writer.writerow([repr(float(x)) for x in row])

    def to_json(self) -> str:
        return json.dumps(self.summary(), sort_keys=True)


@dataclass(frozen=True)
class Infeasible:
    """No positive radial solution: the profile vanishes before reaching R or
    its center value would exceed the cap."""

    lam: float
    reason: str
    first_zero: float | None = None
    v0_required: float | None = None

    status = "infeasible"

    def summary(self) -> dict:
        return {"lambda": self.lam, "status": self.status, "reason": self.reason,
                "first_zero": self.first_zero}


def near_origin_expansion(op: OperatorSpec, v0: float, lam: float, a0: float = 1.0):
    """Leading behaviour ``v(r) ~ v0 - c r^alpha`` at the center.

    The cone ``v0 - c r^alpha`` has the constant residual
    ``(c alpha)^k H(e, s_hat e e^T - I)``; ``c`` is chosen so that it cancels
    ``lam a0 v0^k``.  Returns ``(alpha, c)``.
    """
    if not v0 > 0:
        raise InputError("v0 must be positive")
    if lam < 0:
        raise InputError("lam must be nonnegative")
    sig = op.signature
    if lam == 0:
        return sig.alpha, 0.0
    _, _, _, m4 = coercivity(op, sig.s_hat)
    if not m4 < 0:
        raise NumericalError("cone profile has no negative residual at s_hat",
                             diagnostics={"m4": m4})
    c = (lam * a0) ** (1.0 / sig.k) * v0 / (sig.alpha * (-m4) ** (1.0 / sig.k))
    return sig.alpha, c


def _integrate(op: OperatorSpec, lam: float, a0: float, R: float, N: int):
    """Outward RK4 for the profile normalized by ``v(0) = 1``.

    Returns ``(r, v, dv, zero)`` where ``zero`` is the first sign change of
    ``v`` (linear interpolation), or ``None`` if ``v > 0`` on ``[0, R]``.
    """
    k = op.signature.k
    _, G_inv = radial_closures(op)
    step = R / N
    alpha, c = near_origin_expansion(op, 1.0, lam, a0)
    r = np.empty(N + 1)
    v = np.empty(N + 1)
    dv = np.empty(N + 1)
    r[0], v[0], dv[0] = 0.0, 1.0, 0.0
    r0 = step
    r[1] = r0
    v[1] = 1.0 - c * r0 ** alpha
    dv[1] = -c * alpha * r0 ** (alpha - 1.0)
    src = lam * a0

    def rhs(rr, y0, y1):
        return G_inv(rr, y1, -src * abs(y0) ** (k - 1.0) * y0)

    y0, y1 = v[1], dv[1]
    half = 0.5 * step
    for i in range(1, N):
        ri = r[i]
        k1v, k1d = y1, rhs(ri, y0, y1)
        k2v, k2d = y1 + half * k1d, rhs(ri + half, y0 + half * k1v, y1 + half * k1d)
        k3v, k3d = y1 + half * k2d, rhs(ri + half, y0 + half * k2v, y1 + half * k2d)
        k4v, k4d = y1 + step * k3d, rhs(ri + step, y0 + step * k3v, y1 + step * k3d)
        y0n = y0 + step / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v)
        y1n = y1 + step / 6.0 * (k1d + 2.0 * k2d + 2.0 * k3d + k4d)
        if not (math.isfinite(y0n) and math.isfinite(y1n)):
            raise NumericalError("non-finite value in radial integration",
                                 diagnostics={"r": ri, "lam": lam})
        r[i + 1], v[i + 1], dv[i + 1] = (i + 1) * step, y0n, y1n
        if y0n <= 0.0:
            zero = ri + step * y0 / (y0 - y0n)
            return r[: i + 2], v[: i + 2], dv[: i + 2], zero
        y0, y1 = y0n, y1n
    return r, v, dv, None


def _ode_residual(op: OperatorSpec, lam: float, a0: float, r, v, dv, r_min: float) -> float:
    """Scaled sup of ``G(r, v', v'') + lam a0 v^k`` with ``v''`` by centered
    differences of ``v'`` on interior samples with ``r >= r_min``."""
    if len(r) < 3 or lam == 0:
        return 0.0
    G, _ = radial_closures(op)
    k = op.signature.k
    step = r[2] - r[1]
    d2 = (dv[2:] - dv[:-2]) / (2.0 * step)
    worst = 0.0
    scale = 1.0 + lam * a0 * abs(v[0]) ** k
    for i in range(1, len(r) - 1):
        if r[i] < r_min:
            continue
        res = G(r[i], dv[i], d2[i - 1]) + lam * a0 * abs(v[i]) ** (k - 1.0) * v[i]
        worst = max(worst, abs(res))
    return worst / scale


def solve_radial_bvp(problem: RadialProblem):
    """Positive radial solution with boundary value ``delta``.

    The equation is homogeneous of degree one in ``v``, so the shot with center
    value ``v0`` is ``v0`` times the normalized shot.  The shooting condition
    ``v(R) = delta`` is therefore solved by a single secant step.  Returns
    :class:`Infeasible` when the normalized profile vanishes inside the ball or
    when the required center value exceeds ``v0_max_factor * delta``.
    """
    p = problem
    if p.lam == 0 or p.delta == 0:
        r = np.linspace(0.0, p.R, p.N + 1)
        v = np.full_like(r, p.delta)
        return RadialSolution(r, v, np.zeros_like(r), 0.0, p.delta, p.lam, p.delta, p.R)
    r, w, dw, zero = _integrate(p.op, p.lam, p.a0, p.R, p.N)
    if zero is not None:
        return Infeasible(p.lam, "profile vanishes inside the ball", first_zero=float(zero))
    w_end = w[-1]
    v0 = p.delta / w_end
    if v0 > p.v0_max_factor * p.delta:
        return Infeasible(p.lam, "center value exceeds cap", v0_required=float(v0))
    v, dv = v0 * w, v0 * dw
    mismatch = abs(v[-1] - p.delta) / p.delta
    residual = max(mismatch, _ode_residual(p.op, p.lam, p.a0, r, v, dv, 0.25 * p.R))
    monotone = bool(np.all(np.diff(v) <= 1e-12 * v0))
    return RadialSolution(r, v, dv, residual, v0, p.lam, p.delta, p.R, monotone,
                          {"steps": p.N})


def _zero_gap(op, lam, a0, R, N):
    """Signed distance of the first zero from R: ``v(R) > 0`` if none inside."""
    _, v, _, zero = _integrate(op, lam, a0, R, N)
    if zero is None:
        return v[-1]
    return -(R - zero) / R


def eigen_radial(op: OperatorSpec, R: float = 1.0, tol: float = 1e-10, a0: float = 1.0,
                 N: int = DEFAULT_STEPS, lam_max: float = 1e6):
    """First eigenvalue and eigenprofile on the ball of radius ``R``.

    The profile is normalized by ``v(0) = 1``; its first zero moves inward as
    ``lam`` grows.  The eigenvalue is the ``lam`` whose first zero is ``R``.

    Returns
    -------
    lambda_star : float
    profile : RadialSolution
        Truncated at the first zero; ``meta['first_zero']`` and
        ``meta['evaluations']`` record the root search.
    """
    if not op.symmetric:
        raise UnsupportedOperatorError(f"{op!r} is not rotationally invariant")
    if not R > 0:
        raise InputError("R must be positive")
    evaluations = 0

    def gap(lam):
        nonlocal evaluations
        evaluations += 1
        return _zero_gap(op, lam, a0, R, N)

    lo = 0.5 * lambda_threshold(op, a0, 2.0 * R, rho=2.0 * R).value
    if not gap(lo) > 0:
        raise SearchFailureError(f"profile already vanishes at lam={lo:g}")
    hi = lo
    while True:
        hi *= 2.0
        if hi > lam_max:
            raise SearchFailureError(f"no first zero inside R for lam <= {lam_max:g}")
        if gap(hi) <= 0:
            break
        lo = hi
    lam_star = brentq(gap, lo, hi, xtol=tol * lo, rtol=1e-15, maxiter=200)
    r, v, dv, zero = _integrate(op, lam_star, a0, R, N)
    if zero is not None:
        keep = r < zero
        r = np.append(r[keep], zero)
        v = np.append(v[keep], 0.0)
        dv = np.append(dv[keep], dv[np.argmax(~keep)] if (~keep).any() else dv[-1])
    else:
        zero = R
    residual = _ode_residual(op, lam_star, a0, r, v, dv, 0.25 * R)
    monotone = bool(np.all(np.diff(v) <= 1e-12))
    meta = {"first_zero": float(zero), "evaluations": evaluations, "steps": N}
    return lam_star, RadialSolution(r, v, dv, residual, 1.0, lam_star, 0.0, R, monotone, meta)


@dataclass
class ScalingReport:
    radii: list
    eigenvalues: list
    products: list
    spread: float
    passed: bool
    gamma: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def scaling_invariant_check(op: OperatorSpec, radii, tol: float = 1e-3, **kwargs) -> ScalingReport:
    """Check that ``lam*(R) R^gamma`` does not depend on ``R``."""
    radii = [float(x) for x in radii]
    if not radii:
        raise InputError("need at least one radius")
    gamma = op.signature.gamma
    eig = [eigen_radial(op, R, **kwargs)[0] for R in radii]
    prods = [lam * R ** gamma for lam, R in zip(eig, radii)]
    spread = (max(prods) - min(prods)) / abs(np.mean(prods))
    return ScalingReport(radii, eig, prods, float(spread), bool(spread <= tol), gamma)
