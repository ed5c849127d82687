"""scikit-learn style wrappers: ``fit`` computes, ``predict`` interpolates."""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .eigen import estimate_lambda
from .errors import InputError
from .grid import build_domain, solve_grid_bvp
from .operators import OperatorSpec
from .radial import eigen_radial


def _points(X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    return X


class RadialEigenSolver(BaseEstimator):
    """First eigenvalue and profile on a ball by shooting.

    Fitted attributes: ``eigenvalue_``, ``profile_``, ``residual_``.
    ``predict`` takes radii ``(n,)`` or points ``(n, d)`` and returns the
    profile normalized by its center value.
    """

    def __init__(self, operator: OperatorSpec | None = None, radius: float = 1.0,
                 weight: float = 1.0, steps: int = 4096, tol: float = 1e-10):
        self.operator = operator
        self.radius = radius
        self.weight = weight
        self.steps = steps
        self.tol = tol

    def fit(self, X=None, y=None):
        if self.operator is None:
            raise InputError("operator is required")
        lam, prof = eigen_radial(self.operator, self.radius, tol=self.tol, a0=self.weight, N=self.steps)
        self.eigenvalue_ = lam
        self.profile_ = prof
        self.residual_ = prof.residual_sup
        return self

    def predict(self, X):
        check_is_fitted(self, "profile_")
        X = _points(X)
        r = X[:, 0] if X.shape[1] == 1 else np.linalg.norm(X, axis=1)
        return np.where(np.abs(r) <= self.radius, self.profile_(r), np.nan)


class GridBVPSolver(BaseEstimator):
    """Positive solution of the boundary-value problem at a fixed ``lam``.

    Fitted attributes: ``domain_``, ``state_``, ``status_``, ``sup_``.
    """

    def __init__(self, operator: OperatorSpec | None = None, shape: dict | None = None,
                 h: float = 1 / 32, lam: float = 0.0, delta: float = 1.0, tol: float = 1e-8,
                 method: str = "auto", M_cap: float | None = None, K: int = 16):
        self.operator = operator
        self.shape = shape
        self.h = h
        self.lam = lam
        self.delta = delta
        self.tol = tol
        self.method = method
        self.M_cap = M_cap
        self.K = K

    def fit(self, X=None, y=None):
        if self.operator is None:
            raise InputError("operator is required")
        shape = self.shape or {"kind": "disk", "R": 1.0}
        self.domain_ = build_domain(shape, self.h, boundary_fn=self.delta, K=self.K)
        self.state_ = solve_grid_bvp(self.operator, self.domain_, self.lam, tol=self.tol,
                                     M_cap=self.M_cap, method=self.method)
        self.status_ = self.state_.status
        self.sup_ = self.state_.sup
        return self

    def predict(self, X):
        check_is_fitted(self, "state_")
        return self.state_.at(self.domain_, _points(X))


class EigenEstimator(BaseEstimator):
    """Bracket for the first eigenvalue on a grid domain.

    Fitted attributes: ``bracket_``, ``eigenvalue_`` (bracket midpoint),
    ``state_`` (solution at the feasible end).  ``predict`` interpolates that
    solution normalized by its sup, a proxy for the eigenfunction.
    """

    def __init__(self, operator: OperatorSpec | None = None, shape: dict | None = None,
                 h: float = 1 / 32, delta: float = 1.0, tol: float = 0.02, K: int = 16):
        self.operator = operator
        self.shape = shape
        self.h = h
        self.delta = delta
        self.tol = tol
        self.K = K

    def fit(self, X=None, y=None):
        if self.operator is None:
            raise InputError("operator is required")
        shape = self.shape or {"kind": "disk", "R": 1.0}
        self.domain_ = build_domain(shape, self.h, boundary_fn=self.delta, K=self.K)
        top = []

        def keep(st):
            top[:] = [st]

        self.bracket_ = estimate_lambda(self.operator, self.domain_, self.delta, self.tol,
                                        on_solve=keep)
        self.eigenvalue_ = self.bracket_.midpoint
        self.state_ = top[0]
        return self

    def predict(self, X):
        check_is_fitted(self, "state_")
        vals = self.state_.at(self.domain_, _points(X))
        return (vals - self.delta) / (self.state_.sup - self.delta)
