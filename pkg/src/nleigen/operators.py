"""Operator families H(p, X), homogeneity signatures and coercivity profiles.

Every built-in operator is degree ``k1`` homogeneous in the gradient ``p`` and
degree one (odd) in the Hessian ``X``.  Evaluation accepts single points or
stacked batches: ``p`` of shape ``(..., n)`` and ``X`` of shape ``(..., n, n)``.
"""
from __future__ import annotations

import functools
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .errors import CoercivityError, InputError, NumericalError, UnsupportedOperatorError

FAMILIES = ("plap_type", "pseudo_plap", "inf_type", "pucci_plus", "pucci_minus")

_PARAM_ORDER = {
    "plap_type": ("q", "a"),
    "pseudo_plap": ("p", "q"),
    "inf_type": ("q",),
    "pucci_plus": ("lam", "Lam", "q"),
    "pucci_minus": ("lam", "Lam", "q"),
}
_PARAM_DEFAULTS = {
    "plap_type": {"q": 0.0, "a": 0.0},
    "pseudo_plap": {"q": 0.0},
    "inf_type": {"q": 0.0},
    "pucci_plus": {"q": 0.0},
    "pucci_minus": {"q": 0.0},
}

S_GRID = np.linspace(-5.0, 10.0, 400)


@dataclass(frozen=True)
class HomogeneitySignature:
    """Degrees of homogeneity of an operator and the derived exponents.

    ``k = k1 + k2``, ``gamma = k1 + 2 k2``, ``alpha = gamma / k`` and
    ``s_hat = k1 / k``.
    """

    k1: float
    k2: int
    k: float
    gamma: float
    alpha: float
    s_hat: float

    @classmethod
    def from_degrees(cls, k1: float, k2: int = 1) -> "HomogeneitySignature":
        if k1 < 0:
            raise InputError("gradient degree must be nonnegative")
        if k2 < 1 or k2 % 2 != 1:
            raise InputError("Hessian degree must be an odd positive integer")
        k = k1 + k2
        gamma = k1 + 2 * k2
        return cls(k1=float(k1), k2=int(k2), k=float(k), gamma=float(gamma),
                   alpha=gamma / k, s_hat=k1 / k)

    def as_tuple(self):
        return (self.k1, self.k2, self.k, self.gamma, self.alpha, self.s_hat)


@dataclass(frozen=True)
class OperatorSpec:
    """One member of a built-in operator family.

    Parameters
    ----------
    family : str
        One of ``plap_type``, ``pseudo_plap``, ``inf_type``, ``pucci_plus``,
        ``pucci_minus``.
    n : int
        Space dimension, at least 2.
    params : dict
        Family parameters: ``plap_type(q, a)``, ``pseudo_plap(p, q)``,
        ``inf_type(q)``, ``pucci_*(lam, Lam, q)``.  Stored internally as an
        ordered tuple of ``(name, value)`` pairs so specs are hashable.
    """

    family: str
    n: int
    params: tuple = field(default=())

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise InputError(f"unknown operator family {self.family!r}")
        if isinstance(self.n, bool) or int(self.n) != self.n or self.n < 2:
            raise InputError("dimension n must be an integer >= 2")
        object.__setattr__(self, "n", int(self.n))
        raw = dict(self.params)
        order = _PARAM_ORDER[self.family]
        unknown = set(raw) - set(order)
        if unknown:
            raise InputError(f"unknown parameters for {self.family}: {sorted(unknown)}")
        values = dict(_PARAM_DEFAULTS[self.family])
        values.update(raw)
        missing = [name for name in order if name not in values]
        if missing:
            raise InputError(f"missing parameters for {self.family}: {missing}")
        clean = []
        for name in order:
            v = values[name]
            if isinstance(v, bool) or not isinstance(v, (int, float, np.integer, np.floating)):
                raise InputError(f"parameter {name} must be a real number")
            v = float(v)
            if not math.isfinite(v):
                raise InputError(f"parameter {name} must be finite")
            clean.append((name, v))
        object.__setattr__(self, "params", tuple(clean))
        self._validate_ranges()

    def _validate_ranges(self):
        pv = self.param_dict
        if pv.get("q", 0.0) < 0:
            raise InputError("q must be >= 0")
        if self.family == "plap_type" and pv["a"] <= -1:
            raise InputError("plap_type requires a > -1")
        if self.family == "pseudo_plap" and pv["p"] < 0:
            raise InputError("pseudo_plap requires p >= 0")
        if self.family.startswith("pucci") and not (0 < pv["lam"] <= pv["Lam"]):
            raise InputError("pucci operators require 0 < lam <= Lam")

    # constructors -----------------------------------------------------
    @classmethod
    def plap_type(cls, n: int, q: float = 0.0, a: float = 0.0) -> "OperatorSpec":
        return cls("plap_type", n, {"q": q, "a": a})

    @classmethod
    def laplacian(cls, n: int = 2) -> "OperatorSpec":
        return cls.plap_type(n, 0.0, 0.0)

    @classmethod
    def pseudo_plap(cls, n: int, p: float, q: float = 0.0) -> "OperatorSpec":
        return cls("pseudo_plap", n, {"p": p, "q": q})

    @classmethod
    def inf_type(cls, n: int, q: float = 0.0) -> "OperatorSpec":
        return cls("inf_type", n, {"q": q})

    @classmethod
    def pucci_plus(cls, n: int, lam: float, Lam: float, q: float = 0.0) -> "OperatorSpec":
        return cls("pucci_plus", n, {"lam": lam, "Lam": Lam, "q": q})

    @classmethod
    def pucci_minus(cls, n: int, lam: float, Lam: float, q: float = 0.0) -> "OperatorSpec":
        return cls("pucci_minus", n, {"lam": lam, "Lam": Lam, "q": q})

    # properties -------------------------------------------------------
    @property
    def param_dict(self) -> dict:
        return dict(self.params)

    def param(self, name: str) -> float:
        return self.param_dict[name]

    @property
    def signature(self) -> HomogeneitySignature:
        return signature(self)

    @property
    def symmetric(self) -> bool:
        """True when the operator is invariant under rotations and reflections."""
        pv = self.param_dict
        if self.family == "inf_type":
            return pv["q"] == 0.0
        if self.family == "pseudo_plap":
            # with p = 0 the weights are all one and the operator is |p|^q tr X
            return pv["p"] == 0.0
        return True

    @property
    def x_linear(self) -> bool:
        """True when H(p, .) is linear in the Hessian argument."""
        return not self.family.startswith("pucci")

    def __call__(self, p, X):
        return evaluate(self, p, X)

    # serialization ------------------------------------------------------
    def to_dict(self) -> dict:
        return {"family": self.family, "n": self.n, "params": dict(self.params)}

    @classmethod
    def from_dict(cls, data: dict) -> "OperatorSpec":
        if not isinstance(data, dict):
            raise InputError("operator spec must be a JSON object")
        extra = set(data) - {"family", "n", "params"}
        if extra:
            raise InputError(f"unknown operator keys: {sorted(extra)}")
        try:
            return cls(data["family"], data["n"], data.get("params", {}))
        except KeyError as exc:
            raise InputError(f"operator spec missing key {exc.args[0]!r}") from None

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "OperatorSpec":
        return cls.from_dict(json.loads(text))

    def __repr__(self):
        args = ", ".join(f"{k}={v:g}" for k, v in self.params)
        return f"{self.family}(n={self.n}, {args})"


def signature(op: OperatorSpec) -> HomogeneitySignature:
    """Homogeneity degrees of ``op``; every built-in has Hessian degree one."""
    pv = op.param_dict
    if op.family == "plap_type":
        k1 = pv["q"]
    elif op.family == "pseudo_plap":
        k1 = pv["q"] + pv["p"]
    elif op.family == "inf_type":
        k1 = 2.0 * pv["q"] + 2.0
    else:
        k1 = pv["q"]
    return HomogeneitySignature.from_degrees(k1, 1)


# ----------------------------------------------------------------------
# evaluation
# ----------------------------------------------------------------------
def _check_shapes(op: OperatorSpec, p: np.ndarray, X: np.ndarray):
    n = op.n
    if p.shape[-1:] != (n,) or X.shape[-2:] != (n, n):
        raise InputError(f"expected p (..., {n}) and X (..., {n}, {n}); "
                         f"got {p.shape} and {X.shape}")
    if not np.allclose(X, np.swapaxes(X, -1, -2), rtol=1e-10, atol=1e-12):
        raise InputError("X must be symmetric")


def _pucci_weight(values, lo, hi, plus):
    if plus:
        return np.where(values > 0, hi * values, lo * values)
    return np.where(values > 0, lo * values, hi * values)


def evaluate(op: OperatorSpec, p, X):
    """Return H(p, X) for a single point or a batch.

    Parameters
    ----------
    op : OperatorSpec
    p : array_like, shape (..., n)
    X : array_like, shape (..., n, n), symmetric

    Returns
    -------
    float or ndarray
    """
    p = np.asarray(p, dtype=float)
    X = np.asarray(X, dtype=float)
    _check_shapes(op, p, X)
    pv = op.param_dict
    norm = np.linalg.norm(p, axis=-1)
    q = pv.get("q", 0.0)
    grad_factor = norm ** q
    if op.family == "plap_type":
        trace = np.trace(X, axis1=-2, axis2=-1)
        quad = np.einsum("...i,...ij,...j->...", p, X, p)
        nsq = norm * norm
        normalized = np.divide(quad, nsq, out=np.zeros_like(quad), where=nsq > 0)
        out = grad_factor * (trace + pv["a"] * normalized)
    elif op.family == "pseudo_plap":
        diag = np.diagonal(X, axis1=-2, axis2=-1)
        out = grad_factor * np.sum(np.abs(p) ** pv["p"] * diag, axis=-1)
    elif op.family == "inf_type":
        w = np.abs(p) ** q * p
        out = np.einsum("...i,...ij,...j->...", w, X, w)
    else:
        eig = np.linalg.eigvalsh(X)
        weighted = _pucci_weight(eig, pv["lam"], pv["Lam"], op.family == "pucci_plus")
        out = grad_factor * np.sum(weighted, axis=-1)
    if np.ndim(out) == 0:
        return float(out)
    return out


def radial_eval(op: OperatorSpec, r: float, v1: float, v2: float, e=None) -> float:
    """Operator applied to a radial profile: G(r, v', v'').

    Evaluates ``H(v1 e, (v1/r)(I - e e^T) + v2 e e^T)`` for the unit vector
    ``e`` (first coordinate axis by default).  Only meaningful for rotation
    invariant operators, where the value does not depend on ``e``.
    """
    if not op.symmetric:
        raise UnsupportedOperatorError(f"{op!r} is not rotationally invariant")
    if r <= 0:
        raise InputError("radius must be positive")
    n = op.n
    if e is None:
        e = np.zeros(n)
        e[0] = 1.0
    e = np.asarray(e, dtype=float)
    e = e / np.linalg.norm(e)
    P = np.outer(e, e)
    X = (v1 / r) * (np.eye(n) - P) + v2 * P
    return evaluate(op, v1 * e, X)


@functools.lru_cache(maxsize=256)
def radial_closures(op: OperatorSpec):
    """Plain-float closures ``(G, G_inverse)`` for inner loops.

    ``G(r, v1, v2)`` equals :func:`radial_eval`; ``G_inverse(r, v1, t)``
    returns the ``v2`` with ``G(r, v1, v2) = t``.  For every rotation invariant
    built-in, G is nondecreasing and piecewise linear in ``v2``, so the inverse
    is explicit.
    """
    if not op.symmetric:
        raise UnsupportedOperatorError(f"{op!r} is not rotationally invariant")
    fam = op.family
    pv = op.param_dict
    tangential_count = op.n - 1
    q = pv.get("q", 0.0)

    def degenerate(r, v1):
        raise NumericalError("degenerate gradient in radial inversion",
                             diagnostics={"r": r, "v1": v1})

    if fam == "inf_type":
        def G(r, v1, v2):
            return v1 * v1 * v2

        def G_inv(r, v1, t):
            if v1 == 0.0:
                degenerate(r, v1)
            return t / (v1 * v1)

        return G, G_inv

    if fam in ("plap_type", "pseudo_plap"):
        a = pv.get("a", 0.0)

        def G(r, v1, v2):
            coef = 1.0 + (a if v1 != 0.0 else 0.0)
            return abs(v1) ** q * (tangential_count * v1 / r + coef * v2)

        def G_inv(r, v1, t):
            scale = abs(v1) ** q
            if scale == 0.0:
                degenerate(r, v1)
            coef = 1.0 + (a if v1 != 0.0 else 0.0)
            return (t / scale - tangential_count * v1 / r) / coef

        return G, G_inv

    lam, Lam = pv["lam"], pv["Lam"]
    up, down = (Lam, lam) if fam == "pucci_plus" else (lam, Lam)

    def G(r, v1, v2):
        x = v1 / r
        tang = up * x if x > 0 else down * x
        norm = up * v2 if v2 > 0 else down * v2
        return abs(v1) ** q * (tangential_count * tang + norm)

    def G_inv(r, v1, t):
        scale = abs(v1) ** q
        if scale == 0.0:
            degenerate(r, v1)
        x = v1 / r
        tang = up * x if x > 0 else down * x
        y = t / scale - tangential_count * tang
        return y / up if y > 0 else y / down

    return G, G_inv


def radial_fast(op: OperatorSpec, r: float, v1: float, v2: float) -> float:
    """Closed form of :func:`radial_eval` on plain floats."""
    return radial_closures(op)[0](r, v1, v2)


def radial_invert(op: OperatorSpec, r: float, v1: float, target: float) -> float:
    """Solve ``G(r, v1, v2) = target`` for ``v2``."""
    return radial_closures(op)[1](r, v1, target)


# ----------------------------------------------------------------------
# coercivity
# ----------------------------------------------------------------------
_PHI_SAMPLES = 65


@functools.lru_cache(maxsize=64)
def _sphere_candidates(n: int):
    """Structured unit vectors in the positive orthant.

    Returns ``(E, meta)`` where ``meta[i] = (j, l, phi)`` describes candidate
    ``i``: ``j`` entries equal to ``cos(phi)/sqrt(j)`` followed by ``l`` entries
    equal to ``sin(phi)/sqrt(l)``.  Both non-invariant families depend only on
    ``|e_i|`` and are permutation symmetric, and their extremal points on the
    sphere carry at most two distinct nonzero levels.
    """
    rows, meta = [], []
    phis = np.linspace(0.0, 0.5 * np.pi, _PHI_SAMPLES)
    for j in range(1, n + 1):
        for l in range(0, n - j + 1):
            for phi in (phis if l > 0 else [0.0]):
                e = np.zeros(n)
                e[:j] = math.cos(phi) / math.sqrt(j)
                if l:
                    e[j:j + l] = math.sin(phi) / math.sqrt(l)
                rows.append(e)
                meta.append((j, l, float(phi)))
    return np.array(rows), tuple(meta)


def _two_level(n, j, l, phi):
    e = np.zeros(n)
    e[:j] = math.cos(phi) / math.sqrt(j)
    if l:
        e[j:j + l] = math.sin(phi) / math.sqrt(l)
    return e


@functools.lru_cache(maxsize=64)
def _linear_parts(op: OperatorSpec):
    """``A(e) = H(e, I)`` and ``B(e) = H(e, e e^T)`` on the candidate set."""
    E, meta = _sphere_candidates(op.n)
    eye = np.broadcast_to(np.eye(op.n), (len(E), op.n, op.n))
    outer = np.einsum("mi,mj->mij", E, E)
    return evaluate(op, E, eye), evaluate(op, E, outer)


def _sphere_extremes(op: OperatorSpec, s: float, refine: bool = True):
    """min and max over the unit sphere of H(e, I - s e e^T) for X-linear ops."""
    A, B = _linear_parts(op)
    vals = A - s * B
    _, meta = _sphere_candidates(op.n)
    n = op.n
    eye = np.eye(n)
    lo_i, hi_i = int(np.argmin(vals)), int(np.argmax(vals))
    lo, hi = float(vals[lo_i]), float(vals[hi_i])
    if not refine:
        return lo, hi
    dphi = 0.5 * np.pi / (_PHI_SAMPLES - 1)

    def along(idx, sign):
        j, l, phi = meta[idx]
        if l == 0:
            return None

        def f(t):
            e = _two_level(n, j, l, t)
            return sign * evaluate(op, e, eye - s * np.outer(e, e))

        a, b = max(0.0, phi - dphi), min(0.5 * np.pi, phi + dphi)
        res = minimize_scalar(f, bounds=(a, b), method="bounded",
                              options={"xatol": 1e-12})
        return sign * res.fun

    v = along(lo_i, 1.0)
    if v is not None:
        lo = min(lo, v)
    v = along(hi_i, -1.0)
    if v is not None:
        hi = max(hi, v)
    return lo, hi


def coercivity(op: OperatorSpec, s: float, refine: bool = True):
    """Return ``(m1, m2, m3, m4)`` at ``s``.

    ``m1``/``m2`` are the min/max over unit ``e`` of ``H(e, I - s e e^T)`` and
    ``m3``/``m4`` the min/max of ``H(e, s e e^T - I)``.
    """
    s = float(s)
    n = op.n
    if op.symmetric:
        e = np.zeros(n)
        e[0] = 1.0
        P = np.outer(e, e)
        plus = evaluate(op, e, np.eye(n) - s * P)
        minus = evaluate(op, e, s * P - np.eye(n))
        return (plus, plus, minus, minus)
    if not op.x_linear:  # pragma: no cover - every non-invariant built-in is X-linear
        raise UnsupportedOperatorError(f"no sphere search for {op!r}")
    lo, hi = _sphere_extremes(op, s, refine=refine)
    return (lo, hi, -hi, -lo)


def mlow(op: OperatorSpec, s: float) -> float:
    """``min(m1(s), -m4(s))``."""
    m1, _, _, m4 = coercivity(op, s)
    return min(m1, -m4)


def mhigh(op: OperatorSpec, s: float) -> float:
    """``max(m2(s), -m3(s))``."""
    _, m2, m3, _ = coercivity(op, s)
    return max(m2, -m3)


@dataclass(frozen=True)
class CaseTag:
    """Coercivity case and its witness exponent ``s_bar``.

    ``case`` is ``"CaseI"`` when the high profile is negative somewhere in
    (1, 2); ``interval`` is then the admissible sub-interval and ``s_bar`` its
    midpoint.  Otherwise ``case`` is ``"CaseII"`` with ``s_bar >= 2``.
    """

    case: str
    s_bar: float
    interval: tuple | None = None

    def to_dict(self):
        return {"case": self.case, "s_bar": self.s_bar,
                "interval": list(self.interval) if self.interval else None}


@dataclass(frozen=True)
class CoercivityProfile:
    s: np.ndarray
    m: np.ndarray  # columns m1, m2, m3, m4
    mlow: np.ndarray
    mhigh: np.ndarray
    m1_hat: float
    m4_hat: float
    sigma: float
    case: CaseTag
    s_cross: float
    s0: float | None = None
    s1: float | None = None
    ell: float | None = None

    @property
    def case_tag(self) -> str:
        return self.case.case

    @property
    def s_bar(self) -> float:
        return self.case.s_bar

    def to_rows(self):
        """Rows ``(s, m1, m2, m3, m4, mlow, mhigh)`` for CSV output."""
        return [
            (float(s), *map(float, m), float(lo), float(hi))
            for s, m, lo, hi in zip(self.s, self.m, self.mlow, self.mhigh)
        ]

    def summary(self) -> dict:
        return {"m1_hat": self.m1_hat, "m4_hat": self.m4_hat, "sigma": self.sigma,
                **self.case.to_dict(), "s_cross": self.s_cross,
                "s0": self.s0, "s1": self.s1, "ell": self.ell}


_CASE_EPS = 1e-9


def _case_from_crossing(s_cross: float) -> CaseTag:
    if s_cross < 2.0 - _CASE_EPS:
        lo = max(1.0, s_cross)
        return CaseTag("CaseI", 0.5 * (lo + 2.0), (lo, 2.0))
    s_bar = 2.0 if s_cross < 2.0 + _CASE_EPS else s_cross
    return CaseTag("CaseII", s_bar)


@functools.lru_cache(maxsize=128)
def coercivity_profile(op: OperatorSpec) -> CoercivityProfile:
    """Sample the profile on the standard s-grid and classify the operator.

    Raises
    ------
    CoercivityError
        If the high profile never becomes negative on [-5, 10].
    """
    sig = op.signature
    table = np.array([coercivity(op, s) for s in S_GRID])
    low = np.minimum(table[:, 0], -table[:, 3])
    high = np.maximum(table[:, 1], -table[:, 2])
    for arr in (table, low, high):
        arr.setflags(write=False)

    neg = high < 0
    if not neg.any():
        raise CoercivityError(f"{op!r}: max(m2, -m3) is never negative on [-5, 10]")
    # first index from which the profile stays negative
    tail = np.flatnonzero(~neg)
    start = 0 if tail.size == 0 else int(tail[-1]) + 1
    if start >= len(S_GRID):
        raise CoercivityError(f"{op!r}: max(m2, -m3) is not eventually negative")
    if start == 0:
        s_cross = float(S_GRID[0])
    else:
        a, b = float(S_GRID[start - 1]), float(S_GRID[start])
        f = lambda s: mhigh(op, s)
        fa = f(a)
        s_cross = a if fa == 0.0 else brentq(f, a, b, xtol=1e-14, rtol=1e-15)
    case = _case_from_crossing(s_cross)

    m1, _, _, m4 = coercivity(op, sig.s_hat)
    m1_hat = min(m1, -m4)
    sigma = 1.0 / (sig.alpha * m1_hat ** (1.0 / sig.k)) if m1_hat > 0 else math.inf

    s1 = None
    pos = low > 0
    below = S_GRID <= 1.0
    if pos[0]:
        run = np.flatnonzero(~pos & below)
        last = (run[0] - 1) if run.size else int(np.flatnonzero(below)[-1])
        s1 = float(S_GRID[last])
    s0 = max(1.0, float(S_GRID[start]))
    high_s0 = mhigh(op, s0)
    ell = -0.5 * high_s0 if high_s0 < 0 else None
    return CoercivityProfile(
        s=S_GRID, m=table, mlow=low, mhigh=high, m1_hat=float(m1_hat),
        m4_hat=float(m4), sigma=float(sigma), case=case, s_cross=float(s_cross),
        s0=s0, s1=s1, ell=ell,
    )


def classify_case(op: OperatorSpec) -> CaseTag:
    """CaseI (witness in (1, 2)) or CaseII (witness >= 2)."""
    return coercivity_profile(op).case


# ----------------------------------------------------------------------
# randomized condition checks
# ----------------------------------------------------------------------
@dataclass
class ConditionReport:
    operator: OperatorSpec
    results: dict  # name -> {"passed": bool, "margin": float, "detail": str}

    def passed(self, name: str) -> bool:
        return bool(self.results[name]["passed"])

    @property
    def all_passed(self) -> bool:
        return all(r["passed"] for r in self.results.values())

    def to_dict(self) -> dict:
        return {"operator": self.operator.to_dict(), "conditions": self.results}


def random_orthogonal(rng: np.random.Generator, n: int) -> np.ndarray:
    """Haar-distributed orthogonal matrix (reflections included)."""
    Z = rng.standard_normal((n, n))
    Q, R = np.linalg.qr(Z)
    return Q * np.sign(np.diag(R))


def random_samples(op: OperatorSpec, rng: np.random.Generator, size: int):
    """Random gradients, symmetric matrices and PSD increments."""
    n = op.n
    p = rng.standard_normal((size, n))
    A = rng.standard_normal((size, n, n))
    X = 0.5 * (A + np.swapaxes(A, 1, 2))
    B = rng.standard_normal((size, n, n))
    P = np.einsum("mij,mkj->mik", B, B)
    return p, X, P


def check_conditions(op: OperatorSpec, seed: int = 0, trials: int = 256,
                     tol: float = 1e-12) -> ConditionReport:
    """Randomized audit of ellipticity (A), homogeneity (B), coercivity (C)
    and rotation invariance (D).  Failures are reported, never raised."""
    if trials < 1:
        raise InputError("trials must be >= 1")
    rng = np.random.default_rng(seed)
    sig = op.signature
    p, X, P = random_samples(op, rng, trials)
    H = evaluate(op, p, X)
    results = {}

    # A: monotone in the Hessian
    gain = evaluate(op, p, X + P) - H
    margin_a = float(np.min(gain + tol * (1.0 + np.abs(H))))
    results["A"] = {"passed": margin_a >= 0, "margin": margin_a,
                    "detail": "H(p, X+P) - H(p, X) over random PSD P"}

    # B: both homogeneity laws
    theta = rng.uniform(0.1, 10.0, trials)
    scaled_x = evaluate(op, p, theta[:, None, None] * X)
    err_x = np.abs(scaled_x - theta ** sig.k2 * H) - tol * (1.0 + np.abs(H) * theta ** sig.k2)
    phi = rng.uniform(0.1, 10.0, trials) * rng.choice([-1.0, 1.0], trials)
    scaled_p = evaluate(op, phi[:, None] * p, X)
    fac = np.abs(phi) ** sig.k1
    err_p = np.abs(scaled_p - fac * H) - tol * (1.0 + np.abs(H) * fac)
    margin_b = float(-max(err_x.max(), err_p.max()))
    results["B"] = {"passed": margin_b >= 0, "margin": margin_b,
                    "detail": "Hessian and gradient scaling laws"}

    # C: coercivity at s_hat
    try:
        m1, _, _, m4 = coercivity(op, sig.s_hat)
        m1_hat = min(m1, -m4)
        margin_c = float(min(m1_hat, -m4))
        detail = f"m1_hat={m1_hat:.6g}, m4(s_hat)={m4:.6g}"
    except CoercivityError as exc:  # pragma: no cover - defensive
        margin_c, detail = -math.inf, str(exc)
    results["C"] = {"passed": margin_c > 0, "margin": margin_c, "detail": detail}

    # D: invariance under orthogonal conjugation
    worst = math.inf
    for i in range(trials):
        Q = random_orthogonal(rng, op.n)
        h_rot = evaluate(op, Q @ p[i], Q @ X[i] @ Q.T)
        slack = 1e-10 * (1.0 + abs(H[i])) - abs(h_rot - H[i])
        worst = min(worst, slack)
    results["D"] = {"passed": bool(worst >= 0), "margin": float(worst),
                    "detail": "|H(Qp, QXQ^T) - H(p, X)| over random orthogonal Q"}
    return ConditionReport(op, results)


def builtin_examples(n: int = 2) -> list[OperatorSpec]:
    """A representative member of every family, used by audits and sweeps."""
    return [
        OperatorSpec.laplacian(n),
        OperatorSpec.plap_type(n, q=1.0, a=0.5),
        OperatorSpec.pseudo_plap(n, p=2.0, q=0.0),
        OperatorSpec.inf_type(n, q=0.0),
        OperatorSpec.inf_type(n, q=1.0),
        OperatorSpec.pucci_plus(n, 1.0, 2.0, q=0.0),
        OperatorSpec.pucci_minus(n, 1.0, 2.0, q=1.0),
    ]

