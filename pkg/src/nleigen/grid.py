"""Monotone finite-difference solver on masked 2-D grids.

Second derivatives are taken along stencil directions:

    D_w u(x) = 2/(t+ + t-) * [(U+ - u)/t+ + (U- - u)/t-]

where ``U+-`` are values at ``x +- t+- w``.  Lattice directions hit grid nodes
exactly; other directions use bilinear interpolation at a longer reach.  Arms
that leave the domain are cut at the boundary and take the boundary datum
there (when the shape has a level-set description).  Every operator is
assembled as a nonnegative combination of such differences, so with the
coefficients frozen the discrete operator is an M-matrix.  Weights and arm
choices that depend on ``u`` are picked so that the full nonlinear scheme is
still nondecreasing in every neighbour value; the one exception is the
p-Laplacian branch with ``a < 0`` (see ``Scheme.monotone``).
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse as sp
from scipy.interpolate import RegularGridInterpolator
from scipy.sparse.linalg import LinearOperator, gmres, spilu, splu

from .barriers import sup_inf_bound
from .errors import DomainError, InputError, NumericalError
from .operators import OperatorSpec, coercivity_profile

EXTERIOR, INTERIOR, BOUNDARY = 0, 1, 2
_CUT_MIN = 1e-2  # shortest arm, in units of h


# ----------------------------------------------------------------------
# domains
# ----------------------------------------------------------------------
@dataclass
class GridDomain:
    """Uniform grid with an interior/boundary/exterior mask.

    Node ``(j, i)`` sits at ``(x0 + i h, y0 + j h)``.  ``boundary_values``
    holds the Dirichlet datum on boundary nodes (NaN elsewhere), ``weight``
    the coefficient ``a`` on interior nodes.
    """

    h: float
    x0: float
    y0: float
    mask: np.ndarray
    boundary_values: np.ndarray
    weight: np.ndarray
    K: int = 16
    level_set: Callable | None = None
    boundary_fn: Callable | None = None
    shape: dict = field(default_factory=dict)
    center: tuple = (0.0, 0.0)
    R_o: float = 1.0
    diameter: float = 2.0
    reach: float | None = None

    def __post_init__(self):
        self.mask = np.asarray(self.mask, dtype=np.int8)
        ny, nx = self.mask.shape
        self.index = np.full(self.mask.shape, -1, dtype=np.int64)
        inner = self.mask == INTERIOR
        self.n_interior = int(inner.sum())
        if self.n_interior == 0:
            raise DomainError("domain has no interior nodes")
        self.index[inner] = np.arange(self.n_interior)
        self.interior_flat = np.flatnonzero(inner.ravel())
        self.boundary_flat = np.flatnonzero((self.mask == BOUNDARY).ravel())
        jj, ii = np.divmod(self.interior_flat, nx)
        self.xi = self.x0 + ii * self.h
        self.yi = self.y0 + jj * self.h
        jb, ib = np.divmod(self.boundary_flat, nx)
        self.xb = self.x0 + ib * self.h
        self.yb = self.y0 + jb * self.h
        if self.weight.shape != (self.n_interior,):
            raise DomainError("weight must have one value per interior node")
        if not np.all(self.weight > 0):
            raise DomainError("weight must be positive on interior nodes")
        if self.reach is None:
            self.reach = max(2.0 * self.h, math.sqrt(self.h * self.R_o))
        self._check_neighbours()

    def _check_neighbours(self):
        padded = np.pad(self.mask, 1, constant_values=EXTERIOR)
        ny, nx = self.mask.shape
        inner = self.mask == INTERIOR
        for dj in (-1, 0, 1):
            for di in (-1, 0, 1):
                nb = padded[1 + dj:1 + dj + ny, 1 + di:1 + di + nx]
                if np.any(inner & (nb == EXTERIOR)):
                    raise DomainError("interior node with an exterior neighbour")

    @property
    def shape2d(self):
        return self.mask.shape

    @property
    def points(self) -> np.ndarray:
        return np.column_stack([self.xi, self.yi])

    @property
    def nu(self) -> float:
        return float(self.weight.max())

    @property
    def mu(self) -> float:
        return float(self.weight.min())

    def boundary_array(self) -> np.ndarray:
        return self.boundary_values.ravel()[self.boundary_flat]

    def full_values(self, u: np.ndarray, boundary: np.ndarray | None = None) -> np.ndarray:
        """Flat full-grid array with interior ``u`` and boundary data."""
        out = np.zeros(self.mask.size)
        out[self.boundary_flat] = self.boundary_array() if boundary is None else boundary
        out[self.interior_flat] = u
        return out

    def with_boundary(self, fn: Callable) -> "GridDomain":
        """Copy of the domain with new boundary data ``fn(x, y)``."""
        values = np.full(self.mask.shape, np.nan)
        flat = values.ravel()
        flat[self.boundary_flat] = fn(self.xb, self.yb)
        return GridDomain(self.h, self.x0, self.y0, self.mask, values, self.weight.copy(),
                          self.K, self.level_set, fn, dict(self.shape), self.center,
                          self.R_o, self.diameter, self.reach)

    def distance(self, points) -> np.ndarray:
        """Distance from ``points`` (shape ``(..., 2)``) to the boundary:
        exact for disks and rectangles, nearest boundary node for masks."""
        pts = np.asarray(points, dtype=float)
        x, y = pts[..., 0], pts[..., 1]
        if self.shape.get("kind") == "disk":
            return self.shape["R"] - np.hypot(x - self.center[0], y - self.center[1])
        if self.shape.get("kind") == "rectangle":
            a, b = self.shape["a"], self.shape["b"]
            return np.minimum.reduce([x, a - x, y, b - y])
        from scipy.spatial import cKDTree
        return cKDTree(np.column_stack([self.xb, self.yb])).query(pts)[0]

    def interior_distance(self) -> np.ndarray:
        """Distance of interior nodes to the boundary."""
        return self.distance(self.points)

    def to_mask_text(self) -> str:
        return "\n".join("".join(str(int(v)) for v in row) for row in self.mask[::-1])


def _constant(value):
    return lambda x, y: np.full(np.shape(x), float(value))


def _as_field(fn, default):
    if fn is None:
        return _constant(default)
    if callable(fn):
        return fn
    return _constant(fn)


def _mark_boundary(inside: np.ndarray) -> np.ndarray:
    mask = np.where(inside, INTERIOR, EXTERIOR).astype(np.int8)
    padded = np.pad(inside, 1, constant_values=False)
    ny, nx = inside.shape
    near = np.zeros_like(inside)
    for dj in (-1, 0, 1):
        for di in (-1, 0, 1):
            near |= padded[1 + dj:1 + dj + ny, 1 + di:1 + di + nx]
    mask[near & ~inside] = BOUNDARY
    return mask


def read_mask_file(path) -> np.ndarray:
    """Rows of the digits 0/1/2 (exterior/interior/boundary).  The first text
    row is the top of the domain."""
    rows = []
    with open(path) as fh:
        for line in fh:
            digits = [c for c in line if c in "012"]
            bad = [c for c in line.strip() if c not in "012 ,\t"]
            if bad:
                raise DomainError(f"mask file contains invalid symbol {bad[0]!r}")
            if digits:
                rows.append([int(c) for c in digits])
    if not rows or len({len(r) for r in rows}) != 1:
        raise DomainError("mask rows must be nonempty and of equal length")
    return np.array(rows[::-1], dtype=np.int8)


def build_domain(shape: dict, h: float, boundary_fn=1.0, weight_fn=1.0, K: int = 16,
                 reach: float | None = None) -> GridDomain:
    """Build a masked grid.

    Parameters
    ----------
    shape : dict
        ``{"kind": "disk", "R": .., "center": [x, y]}``,
        ``{"kind": "rectangle", "a": .., "b": ..}`` or
        ``{"kind": "mask", "mask": array}`` / ``{"kind": "mask_file", "path": ..}``.
    h : float
        Grid spacing.
    boundary_fn, weight_fn : callable or float
        Dirichlet datum and coefficient ``a``; callables take ``(x, y)`` arrays.
    K : int
        Number of stencil directions (even, >= 8); lines are ``K/2`` angles
        spaced by ``2 pi / K``.
    reach : float, optional
        Arm length for off-lattice directions.
    """
    if not h > 0:
        raise InputError("h must be positive")
    if K < 8 or K % 2:
        raise InputError("K must be an even integer >= 8")
    g = _as_field(boundary_fn, 1.0)
    a = _as_field(weight_fn, 1.0)
    kind = shape.get("kind")
    margin = 3
    if kind == "disk":
        R = float(shape.get("R", 1.0))
        cx, cy = map(float, shape.get("center", (0.0, 0.0)))
        if not R > 0:
            raise DomainError("disk radius must be positive")
        m = int(math.ceil(R / h)) + margin
        x0, y0 = cx - m * h, cy - m * h
        n = 2 * m + 1

        def phi(x, y):
            return np.hypot(x - cx, y - cy) - R

        center, R_o, diam = (cx, cy), R, 2 * R
        desc = {"kind": "disk", "R": R, "center": [cx, cy]}
        ny = nx = n
    elif kind == "rectangle":
        A, B = float(shape.get("a", 1.0)), float(shape.get("b", 1.0))
        if not (A > 0 and B > 0):
            raise DomainError("rectangle sides must be positive")
        x0 = y0 = -margin * h
        nx = int(math.floor(A / h + 1e-9)) + 2 * margin + 1
        ny = int(math.floor(B / h + 1e-9)) + 2 * margin + 1

        def phi(x, y):
            return np.maximum.reduce([-x, x - A, -y, y - B])

        center, R_o, diam = (A / 2, B / 2), 0.5 * math.hypot(A, B), math.hypot(A, B)
        desc = {"kind": "rectangle", "a": A, "b": B}
    elif kind in ("mask", "mask_file"):
        mask = read_mask_file(shape["path"]) if kind == "mask_file" else np.asarray(shape["mask"], dtype=np.int8)
        if mask.ndim != 2 or not np.isin(mask, (0, 1, 2)).all():
            raise DomainError("mask must be a 2-D array of 0/1/2")
        ny, nx = mask.shape
        x0 = float(shape.get("x0", 0.0))
        y0 = float(shape.get("y0", 0.0))
        desc = {"kind": kind, **({"path": str(shape["path"])} if kind == "mask_file" else {})}
        return _from_mask(mask, h, x0, y0, g, a, K, desc, reach)
    else:
        raise InputError(f"unknown domain kind {kind!r}")

    xs = x0 + h * np.arange(nx)
    ys = y0 + h * np.arange(ny)
    X, Y = np.meshgrid(xs, ys)
    inside = phi(X, Y) < -1e-10 * h
    if not inside.any():
        raise DomainError("domain has no interior nodes")
    mask = _mark_boundary(inside)
    values = np.full(mask.shape, np.nan)
    bmask = mask == BOUNDARY
    values[bmask] = g(X[bmask], Y[bmask])
    weight = np.asarray(a(X[mask == INTERIOR], Y[mask == INTERIOR]), dtype=float)
    return GridDomain(h, x0, y0, mask, values, weight, K, phi, g, desc, center, R_o, diam, reach)


def _from_mask(mask, h, x0, y0, g, a, K, desc, reach):
    if not (mask == INTERIOR).any():
        raise DomainError("domain has no interior nodes")
    ny, nx = mask.shape
    X, Y = np.meshgrid(x0 + h * np.arange(nx), y0 + h * np.arange(ny))
    values = np.full(mask.shape, np.nan)
    b = mask == BOUNDARY
    values[b] = g(X[b], Y[b])
    inner = mask == INTERIOR
    weight = np.asarray(a(X[inner], Y[inner]), dtype=float)
    pts = np.column_stack([X[mask > 0], Y[mask > 0]])
    center = tuple(pts.mean(axis=0))
    R_o = float(np.max(np.hypot(pts[:, 0] - center[0], pts[:, 1] - center[1])))
    bpts = np.column_stack([X[b], Y[b]])
    if len(bpts) > 1:
        from scipy.spatial.distance import pdist
        diam = float(pdist(bpts).max())
    else:
        diam = 2 * R_o
    return GridDomain(h, x0, y0, mask, values, weight, K, None, g, desc, center, R_o,
                      max(diam, h), reach)


# ----------------------------------------------------------------------
# stencil arms
# ----------------------------------------------------------------------
@dataclass
class Affine:
    """``M @ u + c`` over interior unknowns."""

    M: sp.csr_matrix
    c: np.ndarray

    def __call__(self, u):
        return self.M @ u + self.c


def _bilinear(dom: GridDomain, X, Y):
    ny, nx = dom.mask.shape
    fx = (X - dom.x0) / dom.h
    fy = (Y - dom.y0) / dom.h
    i0 = np.floor(fx)
    j0 = np.floor(fy)
    sx = fx - i0
    sy = fy - j0
    near = sx > 1 - 1e-9
    i0 = np.where(near, i0 + 1, i0)
    sx = np.where(near | (sx < 1e-9), 0.0, sx)
    near = sy > 1 - 1e-9
    j0 = np.where(near, j0 + 1, j0)
    sy = np.where(near | (sy < 1e-9), 0.0, sy)
    i0 = i0.astype(np.int64)
    j0 = j0.astype(np.int64)
    ii = np.stack([i0, i0 + 1, i0, i0 + 1], axis=-1)
    jj = np.stack([j0, j0, j0 + 1, j0 + 1], axis=-1)
    w = np.stack([(1 - sx) * (1 - sy), sx * (1 - sy), (1 - sx) * sy, sx * sy], axis=-1)
    inside = (ii >= 0) & (ii < nx) & (jj >= 0) & (jj < ny)
    flat = np.where(inside, jj * nx + np.clip(ii, 0, nx - 1), 0)
    flat = np.where(inside, np.clip(jj, 0, ny - 1) * nx + np.clip(ii, 0, nx - 1), 0)
    kind = np.where(inside, dom.mask.ravel()[flat], EXTERIOR)
    return flat, w, kind, inside


def _crossing(dom: GridDomain, px, py, dx, dy, limit):
    """First level-set crossing along ``p + s d`` for ``s`` in ``(0, limit]``;
    ``inf`` where the ray stays inside."""
    phi = dom.level_set
    step = dom.h / 4.0
    count = int(math.ceil(limit / step))
    s = np.minimum(step * np.arange(1, count + 1), limit)
    vals = phi(px[:, None] + s[None, :] * dx[:, None], py[:, None] + s[None, :] * dy[:, None])
    outside = vals >= 0
    hit = outside.any(axis=1)
    first = np.argmax(outside, axis=1)
    t = np.full(px.shape, np.inf)
    if hit.any():
        idx = np.flatnonzero(hit)
        hi = s[first[idx]]
        lo = np.where(first[idx] > 0, s[np.maximum(first[idx] - 1, 0)], 0.0)
        ax, ay, bx, by = px[idx], py[idx], dx[idx], dy[idx]
        for _ in range(40):
            mid = 0.5 * (lo + hi)
            out = phi(ax + mid * bx, ay + mid * by) >= 0
            hi = np.where(out, mid, hi)
            lo = np.where(out, lo, mid)
        t[idx] = hi
    return t


def _arm(dom: GridDomain, dx, dy, reach):
    """Endpoint data for arms ``x + t d`` from every interior node.

    Returns ``(t, cols, w, bval)``: distance, full-grid corner indices,
    interpolation weights and a boundary value used when the arm is cut.
    """
    n = dom.n_interior
    dx = np.broadcast_to(np.asarray(dx, float), (n,)).copy()
    dy = np.broadcast_to(np.asarray(dy, float), (n,)).copy()
    reach = np.broadcast_to(np.asarray(reach, float), (n,)).copy()
    px, py = dom.xi, dom.yi
    h = dom.h
    t = reach.copy()
    cols = np.zeros((n, 4), dtype=np.int64)
    w = np.zeros((n, 4))
    bval = np.zeros(n)
    cut = np.zeros(n, dtype=bool)
    if dom.level_set is not None:
        tb = _crossing(dom, px, py, dx, dy, float(reach.max()))
        cut = tb <= reach
        t = np.where(cut, np.maximum(tb, _CUT_MIN * h), t)
        if cut.any():
            bx, by = px[cut] + tb[cut] * dx[cut], py[cut] + tb[cut] * dy[cut]
            bval[cut] = dom.boundary_fn(bx, by)
    pending = ~cut
    allowed = (INTERIOR,) if dom.level_set is not None else (INTERIOR, BOUNDARY)
    # shrink arms until the interpolation cell has admissible corners
    while pending.any():
        idx = np.flatnonzero(pending)
        f, wt, kind, _ = _bilinear(dom, px[idx] + t[idx] * dx[idx], py[idx] + t[idx] * dy[idx])
        ok = np.all((wt == 0) | np.isin(kind, allowed), axis=1)
        last = t[idx] <= h * (1 + 1e-12)
        ok_or_last = ok | last
        if (last & ~ok).any():
            bad = last & ~ok
            ok2 = np.all((wt[bad] == 0) | (kind[bad] != EXTERIOR), axis=1)
            if not ok2.all():
                raise DomainError("stencil reaches exterior nodes")
        sel = idx[ok_or_last]
        cols[sel] = f[ok_or_last]
        w[sel] = wt[ok_or_last]
        pending[sel] = False
        shrink = idx[~ok_or_last]
        t[shrink] = np.maximum(0.5 * t[shrink], h)
    return t, cols, w, bval


def _to_affine(dom: GridDomain, cols, w, bval) -> Affine:
    n = dom.n_interior
    col_int = dom.index.ravel()[cols]
    is_int = (col_int >= 0) & (w != 0)
    rows = np.repeat(np.arange(n), 4).reshape(n, 4)
    M = sp.csr_matrix((w[is_int], (rows[is_int], col_int[is_int])), shape=(n, n))
    bfull = np.nan_to_num(dom.boundary_values.ravel(), nan=0.0)
    c = bval + np.sum(np.where(is_int, 0.0, w * bfull[cols]), axis=1)
    return Affine(M, c)


@dataclass
class Direction:
    """Second difference and one-dimensional slopes along a direction field."""

    second: Affine
    plus: Affine
    minus: Affine
    t_plus: np.ndarray
    t_minus: np.ndarray

    def slope_centered(self, u):
        return (self.plus(u) - self.minus(u)) / (self.t_plus + self.t_minus)

    def slopes_one_sided(self, u):
        return (self.plus(u) - u) / self.t_plus, (u - self.minus(u)) / self.t_minus


def direction(dom: GridDomain, dx, dy, reach) -> Direction:
    tp, cp, wp, bp = _arm(dom, dx, dy, reach)
    tm, cm, wm, bm = _arm(dom, -np.asarray(dx), -np.asarray(dy), reach)
    P = _to_affine(dom, cp, wp, bp)
    Mn = _to_affine(dom, cm, wm, bm)
    ap = 2.0 / (tp * (tp + tm))
    am = 2.0 / (tm * (tp + tm))
    D = sp.diags(ap) @ P.M + sp.diags(am) @ Mn.M - sp.diags(ap + am)
    second = Affine(sp.csr_matrix(D), ap * P.c + am * Mn.c)
    return Direction(second, P, Mn, tp, tm)


class Scheme:
    """Discrete operator ``H_h`` for one operator on one domain.

    Every family is a sum of *terms*.  A term couples two arms ``i, j`` out
    of a node, with slopes ``s = (U - u) / t`` along them, a weight
    ``c >= 0`` and a power ``m``::

        c * 2 / (t_i + t_j) * (phi(s_i) + phi(s_j)) / (m + 1),   phi(x) = x |x|^m

    For opposite arms along ``e`` this tends to ``c |d_e u|^m d_ee u``.  A
    term is nondecreasing in the neighbour values and nonincreasing in ``u``,
    so schemes built from terms with frozen weights are monotone.  Gradient
    directions come from the arms of largest and smallest slope on a circle
    of ``circle`` directions, never from a normalized difference quotient.
    Gradient-size weights switch between the steepest ascending and the
    steepest descending slope with the sign of the term they multiply, which
    keeps the unfrozen scheme monotone as well.
    """

    def __init__(self, op: OperatorSpec, dom: GridDomain, circle: int = 64):
        if op.n != 2:
            raise InputError("the grid solver handles two-dimensional operators only")
        self.op = op
        self.dom = dom
        self.pv = op.param_dict
        fam = op.family
        self._state_free = (fam == "plap_type" and self.pv["q"] == 0 and self.pv["a"] == 0) or (
            fam == "pseudo_plap" and self.pv["p"] == 0 and self.pv["q"] == 0)
        self.axes = (direction(dom, 1.0, 0.0, dom.h), direction(dom, 0.0, 1.0, dom.h))
        arms = [(1.0, 0.0, dom.h), (-1.0, 0.0, dom.h), (0.0, 1.0, dom.h), (0.0, -1.0, dom.h)]
        self.circle = 0
        # arms are measured in the l_r norm with r = (q+2)/(q+1) for the
        # anisotropic infinity family, so the steepest arm points along |p_i|^q p_i
        r_norm = 2.0
        if fam == "inf_type" and self.pv["q"] > 0:
            r_norm = (self.pv["q"] + 2.0) / (self.pv["q"] + 1.0)
        norms = [1.0] * 4
        if not self._state_free:
            unit = 4 * dom.K // math.gcd(4, dom.K)
            self.circle = unit * max(1, math.ceil(circle / unit))
            for j in range(self.circle):
                ang = 2.0 * math.pi * j / self.circle
                e = np.array([math.cos(ang), math.sin(ang)])
                nr = float(np.sum(np.abs(e) ** r_norm) ** (1.0 / r_norm))
                arms.append((e[0], e[1], dom.reach / nr))
                norms.append(nr)
        # a short ring for gradient-size weights: one-sided slopes over arms of
        # length h carry an O(h) curvature bias instead of O(reach)
        self._ring = None
        if not self._state_free and fam != "inf_type" and self.pv.get("q", 0) > 0:
            self._ring = len(arms)
            for j in range(self.circle):
                ang = 2.0 * math.pi * j / self.circle
                arms.append((math.cos(ang), math.sin(ang), dom.h))
                norms.append(1.0)
        blocks, consts, lengths = [], [], []
        for (dx, dy, reach), nr in zip(arms, norms):
            t, cols, w, bval = _arm(dom, dx, dy, reach)
            aff = _to_affine(dom, cols, w, bval)
            blocks.append(aff.M)
            consts.append(aff.c)
            lengths.append(t * nr)
        self._bank = sp.vstack(blocks).tocsr()
        self._bank_c = np.concatenate(consts)
        self._T = np.array(lengths)
        self._cache = None
        n = dom.n_interior
        d = [self._slope_jac(np.full(n, a)) for a in range(4)]
        T = self._T[:4]
        self._grad_jac = (
            sp.diags(T[0] / (T[0] + T[1])) @ d[0] - sp.diags(T[1] / (T[0] + T[1])) @ d[1],
            sp.diags(T[2] / (T[2] + T[3])) @ d[2] - sp.diags(T[3] / (T[2] + T[3])) @ d[3])

    @property
    def monotone(self) -> bool:
        """False only for the p-Laplacian branch with ``a < 0``, whose
        perpendicular line follows the centered gradient and can move against
        a neighbour increase."""
        return not (self.op.family == "plap_type" and self.pv["a"] < 0)

    @property
    def state_free(self) -> bool:
        """True when the discrete operator is affine in ``u``."""
        return self._state_free

    def slopes(self, u) -> np.ndarray:
        """Slopes ``(U - u) / t`` along every arm, shape ``(arms, nodes)``."""
        n = self.dom.n_interior
        U = (self._bank @ u + self._bank_c).reshape(-1, n)
        return (U - u) / self._T

    def _slope_jac(self, arm):
        """Derivative of the slope along ``arm[r]`` at each node ``r``."""
        n = self.dom.n_interior
        rows = np.arange(n)
        B = self._bank[arm * n + rows]
        return sp.csr_matrix(sp.diags(1.0 / self._T[arm, rows]) @ (B - sp.identity(n, format="csr")))

    def _p_jac(self, dx, dy):
        """Chain rule through the centered gradient: ``dx dp_x/du + dy dp_y/du``."""
        return sp.diags(dx) @ self._grad_jac[0] + sp.diags(dy) @ self._grad_jac[1]

    def gradient(self, u) -> np.ndarray:
        """Centered gradient from the axis arms."""
        S = self.slopes(u)[:4]
        T = self._T[:4]
        px = (T[0] * S[0] - T[1] * S[1]) / (T[0] + T[1])
        py = (T[2] * S[2] - T[3] * S[3]) / (T[2] + T[3])
        return np.column_stack([px, py])

    # -- family terms ------------------------------------------------------
    def _terms(self, u, S, jac=False):
        """List of ``(i, j, c, m, dc)``; ``dc`` is ``dc/du`` (sparse) or None
        and is only formed when ``jac`` is true."""
        n = self.dom.n_interior
        ones = np.ones(n)
        fam, pv = self.op.family, self.pv

        def axis_terms(weight, m, dc=None):
            return [(np.zeros(n, int), np.ones(n, int), weight, m, dc),
                    (np.full(n, 2), np.full(n, 3), weight, m, dc)]

        if self._state_free:
            return axis_terms(ones, 0.0)
        cs = S[4:4 + self.circle]
        jp = np.argmax(cs, axis=0)
        jm = np.argmin(cs, axis=0)
        q = pv.get("q", 0)
        if fam == "inf_type":
            jp, jm = self._steepest_pair(cs, jp, jm, 2.0 * q + 2.0)
            return [(4 + jp, 4 + jm, ones, 2.0 * q + 2.0, None)]
        if fam == "pseudo_plap":
            return self._weighted(lambda w, dw: axis_terms(w, pv["p"], dw), S, q, jac)
        if fam == "plap_type":
            a = pv["a"]
            pair = []
            if a != 0:
                ip, im = self._steepest_pair(cs, jp, jm, q)
                pair = [(4 + ip, 4 + im, (a if a > 0 else 1.0 + a) * ones, q, None)]
            if a >= 0:
                # |p|^q (trace + a e.e): weighted five-point sum plus a steepest-pair term
                return self._weighted(lambda w, dw: axis_terms(w, 0.0, dw), S, q, jac) + pair
            p = self.gradient(u)
            dangle = self._rotated_angle_jac(p) if jac else None
            return pair + self._weighted(
                lambda w, dw: self._line_terms(-p[:, 1], p[:, 0], w, 0.0,
                                               None if dangle is None else (dw, dangle)),
                S, q, jac)
        return self._weighted(lambda w, dw: self._pucci_terms(S, w, dw), S, q, jac)

    def _value(self, terms, S) -> np.ndarray:
        """Sum of the given terms at every node."""
        rows = np.arange(self.dom.n_interior)
        total = np.zeros(rows.size)
        for i, j, c, m, _ in terms:
            si, sj = S[i, rows], S[j, rows]
            ti, tj = self._T[i, rows], self._T[j, rows]
            total += c * 2.0 / ((ti + tj) * (m + 1.0)) * (si * np.abs(si) ** m + sj * np.abs(sj) ** m)
        return total

    def _weighted(self, build, S, q, jac):
        """Terms ``build(weight, dweight)`` scaled by a gradient-size weight.

        Where the unweighted sum is nonnegative the weight is the largest
        ascending slope to the power ``q``, which only grows with the
        neighbours; elsewhere it is the largest descending slope, which only
        shrinks.  Either way the product stays nondecreasing in every
        neighbour, and the two choices agree to first order with ``|p|^q``.
        """
        n = self.dom.n_interior
        ones = np.ones(n)
        if not q:
            return build(ones, None)
        rows = np.arange(n)
        up = self._value(build(ones, None), S) >= 0
        base = 4 if self._ring is None else self._ring
        ring = S[base:base + self.circle]
        jp, jm = base + np.argmax(ring, axis=0), base + np.argmin(ring, axis=0)
        hi = np.maximum(S[jp, rows], 0.0)
        lo = np.maximum(-S[jm, rows], 0.0)
        steep = np.where(up, hi, lo)
        wq = steep ** q
        dwq = None
        if jac:
            slope = q * np.divide(wq, steep, out=np.zeros(n), where=steep > 0)
            dwq = (sp.diags(slope * up) @ self._slope_jac(jp)
                   - sp.diags(slope * ~up) @ self._slope_jac(jm))
        return build(wq, dwq)

    def _steepest_pair(self, cs, jp, jm, m):
        """Pair of arms attaining ``max_i min_j`` of the pair term.

        The max-min of terms that each grow with the neighbours grows with
        them too, and it is continuous where arms of unequal length tie.
        With equal arm lengths it is the plain (largest, smallest) slope pair,
        so only nodes with cut arms are searched.
        """
        T = self._T[4:4 + self.circle]
        full = np.flatnonzero(np.ptp(T, axis=0) > 0)
        jp, jm = jp.copy(), jm.copy()
        if full.size:
            si, sj = cs[:, full], T[:, full]
            phi = si * np.abs(si) ** m
            val = (phi[:, None, :] + phi[None, :, :]) / (sj[:, None, :] + sj[None, :, :])
            inner = np.argmin(val, axis=1)
            cols = np.arange(full.size)
            best = np.argmax(val[np.arange(self.circle)[:, None], inner, cols], axis=0)
            jp[full] = best
            jm[full] = inner[best, cols]
        return jp, jm

    def _rotated_angle_jac(self, p):
        """Derivative of the gradient angle, used by the perpendicular line of
        the plap branch with ``a < 0``."""
        r2 = np.sum(p * p, axis=1)
        dth = (np.divide(-p[:, 1], r2, out=np.zeros_like(r2), where=r2 > 0),
               np.divide(p[:, 0], r2, out=np.zeros_like(r2), where=r2 > 0))
        return self._p_jac(*dth)

    def _line_terms(self, wx, wy, weight, m, jac=None):
        """Terms along per-node directions ``(wx, wy)``, interpolated in angle
        between neighbouring circle lines so that they vary continuously.

        ``jac`` is ``(dweight/du, dangle/du)`` or None."""
        M = self.circle
        pos = np.mod(np.arctan2(wy, wx), 2.0 * math.pi) * M / (2.0 * math.pi)
        j0 = np.floor(pos).astype(np.int64) % M
        frac = pos - np.floor(pos)
        j1 = (j0 + 1) % M
        d0 = d1 = None
        if jac is not None:
            dweight, dangle = jac
            dfrac = sp.diags(weight * M / (2.0 * math.pi)) @ dangle
            d0 = -dfrac
            d1 = dfrac
            if dweight is not None:
                d0 = d0 + sp.diags(1.0 - frac) @ dweight
                d1 = d1 + sp.diags(frac) @ dweight
        return [(4 + j0, 4 + (j0 + M // 2) % M, (1.0 - frac) * weight, m, d0),
                (4 + j1, 4 + (j1 + M // 2) % M, frac * weight, m, d1)]

    def _pucci_terms(self, S, wq, dwq):
        n = self.dom.n_interior
        M, K = self.circle, self.dom.K
        pv = self.pv
        plus = self.op.family == "pucci_plus"
        up, down = (pv["Lam"], pv["lam"]) if plus else (pv["lam"], pv["Lam"])
        stride = M // K
        lines = [(4 + j * stride, 4 + j * stride + M // 2) for j in range(K // 2)]
        second = np.array([2.0 / (self._T[i] + self._T[j]) * (S[i] + S[j]) for i, j in lines])
        coef = np.where(second > 0, up, down)
        count = len(lines)
        frames = [(f, (f + K // 4) % count) for f in range(count)]
        sums = np.array([coef[f] * second[f] + coef[g] * second[g] for f, g in frames])
        pick = np.argmax(sums, axis=0) if plus else np.argmin(sums, axis=0)
        rows = np.arange(n)
        terms = []
        for slot in (0, 1):
            line = np.array([pair[slot] for pair in frames])[pick]
            i = np.array([lines[ell][0] for ell in range(len(lines))])[line]
            j = np.array([lines[ell][1] for ell in range(len(lines))])[line]
            cl = coef[line, rows]
            dc = None if dwq is None else sp.diags(cl) @ dwq
            terms.append((i, j, wq * cl, 0.0, dc))
        return terms

    # -- assembly ----------------------------------------------------------
    def linearize(self, u, jacobian: bool = False):
        """Frozen-coefficient form ``(L, b)`` with ``H_h[u] = L @ u + b``.

        With ``jacobian=True`` also returns ``J``, the derivative of ``H_h``
        with the arm selections held fixed; weights that depend on the
        gradient are differentiated too.
        """
        if self._state_free and self._cache is not None:
            L, b = self._cache
            return (L, b, L) if jacobian else (L, b)
        u = np.asarray(u, dtype=float)
        n = self.dom.n_interior
        S = self.slopes(u)
        rows = np.arange(n)
        r_idx, c_idx, vals, jvals = [], [], [], []
        diag = np.zeros(n)
        jdiag = np.zeros(n)
        extra = []
        for i, j, c, m, dc in self._terms(u, S, jac=jacobian):
            ti, tj = self._T[i, rows], self._T[j, rows]
            si, sj = S[i, rows], S[j, rows]
            f = c * 2.0 / ((ti + tj) * (m + 1.0))
            ci = f * np.abs(si) ** m / ti
            cj = f * np.abs(sj) ** m / tj
            r_idx += [rows, rows]
            c_idx += [i * n + rows, j * n + rows]
            vals += [ci, cj]
            jvals += [(m + 1.0) * ci, (m + 1.0) * cj]
            diag += ci + cj
            jdiag += (m + 1.0) * (ci + cj)
            if dc is not None:
                unit = 2.0 / ((ti + tj) * (m + 1.0)) * (si * np.abs(si) ** m + sj * np.abs(sj) ** m)
                extra.append(sp.diags(unit) @ dc)
        r_idx = np.concatenate(r_idx)
        c_idx = np.concatenate(c_idx)
        shape = (n, self._bank.shape[0])
        W = sp.csr_matrix((np.concatenate(vals), (r_idx, c_idx)), shape=shape)
        L = sp.csr_matrix(W @ self._bank - sp.diags(diag))
        b = W @ self._bank_c
        if self._state_free:
            self._cache = (L, b)
        if not jacobian:
            return L, b
        WJ = sp.csr_matrix((np.concatenate(jvals), (r_idx, c_idx)), shape=shape)
        J = WJ @ self._bank - sp.diags(jdiag)
        for piece in extra:
            J = J + piece
        return L, b, sp.csr_matrix(J)

    def apply(self, u):
        L, b = self.linearize(u)
        return L @ u + b

    def stiffness(self, u) -> np.ndarray:
        """``-dH_h/du`` at each node with the arm selections frozen."""
        return -self.linearize(u, jacobian=True)[2].diagonal()


def scheme_residual(op: OperatorSpec, dom: GridDomain, u, node=None, scheme: Scheme | None = None):
    """``H_h[u]`` at one interior node, or at all of them when ``node`` is None."""
    u = np.asarray(u.u if isinstance(u, FieldState) else u, dtype=float)
    vals = (scheme or Scheme(op, dom)).apply(u)
    return vals if node is None else float(vals[node])


# ----------------------------------------------------------------------
# solver
# ----------------------------------------------------------------------
@dataclass
class FieldState:
    """Interior nodal values plus the boundary data they were solved with."""

    u: np.ndarray
    boundary: np.ndarray
    iteration: int = 0
    residual_sup: float = math.inf
    status: str = "running"
    lam: float = 0.0
    meta: dict = field(default_factory=dict)
    history: list = field(default_factory=list)

    @property
    def sup(self) -> float:
        return float(max(self.u.max(), self.boundary.max()))

    @property
    def interior_min(self) -> float:
        return float(self.u.min())

    @property
    def interior_max(self) -> float:
        return float(self.u.max())

    def shifted(self, c: float) -> "FieldState":
        return FieldState(self.u + c, self.boundary + c, self.iteration, self.residual_sup,
                          self.status, self.lam, dict(self.meta))

    def scaled(self, c: float) -> "FieldState":
        return FieldState(self.u * c, self.boundary * c, self.iteration, self.residual_sup,
                          self.status, self.lam, dict(self.meta))

    def grid(self, dom: GridDomain) -> np.ndarray:
        """2-D array with NaN on exterior nodes."""
        out = np.full(dom.mask.size, np.nan)
        out[dom.boundary_flat] = self.boundary
        out[dom.interior_flat] = self.u
        return out.reshape(dom.mask.shape)

    def to_csv(self, path, dom: GridDomain) -> None:
        full = self.grid(dom)
        ny, nx = dom.mask.shape
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["i", "j", "x", "y", "u"])
            for j in range(ny):
                for i in range(nx):
                    if dom.mask[j, i] == EXTERIOR:
                        continue
                    writer.writerow([i, j, repr(dom.x0 + i * dom.h), repr(dom.y0 + j * dom.h),
                                     repr(float(full[j, i]))])

    @classmethod
    def from_csv(cls, path, dom: GridDomain, lam: float = 0.0) -> "FieldState":
        """Read a field written by :meth:`to_csv` back onto ``dom``."""
        full = np.full(dom.mask.shape, np.nan)
        with open(path, newline="") as fh:
            for row in csv.DictReader(fh):
                full[int(row["j"]), int(row["i"])] = float(row["u"])
        flat = full.ravel()
        u, g = flat[dom.interior_flat], flat[dom.boundary_flat]
        if np.any(np.isnan(u)) or np.any(np.isnan(g)):
            raise DomainError("field file does not cover the domain")
        return cls(u, g, status="loaded", lam=lam)

    def at(self, dom: GridDomain, points) -> np.ndarray:
        """Bilinear interpolation at ``points`` of shape ``(..., 2)``; NaN
        where a cell corner lies outside the domain."""
        pts = np.asarray(points, dtype=float)
        ny, nx = dom.mask.shape
        axes = (dom.y0 + dom.h * np.arange(ny), dom.x0 + dom.h * np.arange(nx))
        interp = RegularGridInterpolator(axes, self.grid(dom), bounds_error=False, fill_value=np.nan)
        return interp(np.stack([pts[..., 1], pts[..., 0]], axis=-1))

    def summary(self) -> dict:
        return {"status": self.status, "iterations": self.iteration,
                "residual_sup": float(self.residual_sup), "lambda": float(self.lam),
                "sup_u": self.sup, "interior_min": self.interior_min, **self.meta}


def initial_guess(op: OperatorSpec, dom: GridDomain, lam: float) -> np.ndarray:
    """Cone profile ``g_max + A (R_o^alpha - |x - z|^alpha) / R_o^alpha`` with
    ``A`` from the a priori bound at boundary level."""
    g = dom.boundary_array()
    top = float(g.max())
    sig = op.signature
    sigma = coercivity_profile(op).sigma
    amp = sigma * (lam * dom.nu * max(top, 0.0) ** sig.k) ** (1.0 / sig.k) * dom.R_o ** sig.alpha
    r = np.hypot(dom.xi - dom.center[0], dom.yi - dom.center[1])
    shape = np.clip(1.0 - (r / dom.R_o) ** sig.alpha, 0.0, 1.0)
    return top + amp * shape


def _scaled_residual(res, lam, nu, u, k):
    return float(np.max(np.abs(res)) / (1.0 + lam * nu * np.max(np.abs(u)) ** k))


class _LinearSolver:
    """Sparse LU for small or thin systems, ILU-preconditioned GMRES when the
    wide stencils would make the exact factors too dense."""

    DIRECT_NODES = 4000
    DIRECT_ROW_FILL = 12.0

    def __init__(self, A):
        self.A = A
        n = A.shape[0]
        self.direct = n <= self.DIRECT_NODES or A.nnz <= self.DIRECT_ROW_FILL * n
        if self.direct:
            self._lu = splu(A)
        else:
            ilu = spilu(A, drop_tol=1e-4, fill_factor=10)
            self._pre = LinearOperator(A.shape, ilu.solve)

    def solve(self, rhs):
        if self.direct:
            return self._lu.solve(rhs)
        x, info = gmres(self.A, rhs, M=self._pre, rtol=1e-12, atol=0.0, restart=60, maxiter=50)
        if info != 0:
            self.direct = True
            self._lu = splu(self.A)
            return self._lu.solve(rhs)
        return x


def solve_grid_bvp(op: OperatorSpec, dom: GridDomain, lam: float, tol: float = 1e-8,
                   M_cap: float | None = None, method: str = "auto",
                   max_iter: int | None = None, u0=None, step: float = 0.9,
                   scheme: Scheme | None = None, patience: int | None = None) -> FieldState:
    """Solve ``H_h[u] + lam a |u|^(k-1) u = 0`` with the domain's boundary data.

    Parameters
    ----------
    method : {"auto", "picard", "newton", "explicit"}
        ``picard`` solves the frozen M-matrix system with the reaction lagged
        one iterate (default for operators that are affine in ``u``).
        ``newton`` is a pseudo-transient Newton iteration on the same scheme
        (default otherwise).  ``explicit`` is the damped update
        ``u += tau (H_h[u] + lam a u^k)`` with a nodewise step
        ``tau = step / (stiffness + lam a k u^(k-1))`` at the monotonicity
        limit.  All three share the same fixed points.
    tol : float
        Bound on ``sup|H_h u + lam a u^k| / (1 + lam nu sup|u|^k)``.
    M_cap : float
        Blow-up cap on ``sup u``; default ``1e4 * sup |boundary data|``.
    patience : int
        Newton gives up (``stalled``) when the best residual has not dropped
        by 10% over this many iterations; default 100.

    Returns
    -------
    FieldState
        ``status`` is ``converged``, ``blowup`` or ``stalled``.
    """
    if lam < 0:
        raise InputError("lam must be nonnegative")
    if method not in ("auto", "picard", "newton", "explicit"):
        raise InputError(f"unknown method {method!r}")
    scheme = scheme or Scheme(op, dom)
    if method == "auto":
        method = "picard" if scheme.state_free else "newton"
    k = op.signature.k
    a = dom.weight
    nu = dom.nu
    g = dom.boundary_array()
    if M_cap is None:
        M_cap = 1e4 * max(float(np.abs(g).max()), 1e-300)
    if max_iter is None:
        max_iter = {"picard": 100_000, "newton": 2_000, "explicit": 1_000_000}[method]
    u = initial_guess(op, dom, lam) if u0 is None else np.array(u0, dtype=float)
    positive = lam > 0 and float(g.min()) > 0
    meta = {"method": method}
    if dom.shape.get("kind") in ("mask", "mask_file") and coercivity_profile(op).case_tag == "CaseII":
        meta["outer_ball"] = "hypothesis unverified"
    if not scheme.monotone:
        meta["monotone_scheme"] = False
    it = 0

    def state(v, status, r):
        return FieldState(v, g.copy(), it, r, status, lam, meta)

    def evaluate(v):
        L, b, J = scheme.linearize(v, jacobian=True)
        res = L @ v + b + lam * a * np.abs(v) ** (k - 1.0) * v
        r = _scaled_residual(res, lam, nu, v, k)
        if not math.isfinite(r):
            raise NumericalError("non-finite residual", state=state(v, "running", r))
        return L, J, res, r

    if method == "picard" and scheme.state_free and k == 1.0 and u0 is None:
        # the problem is linear: try the exact solve, keep it if it is admissible
        L, b = scheme.linearize(u)
        try:
            direct = splu(sp.csc_matrix(-L - sp.diags(lam * a))).solve(b)
        except RuntimeError:
            direct = None
        if direct is not None and np.all(np.isfinite(direct)) and float(direct.max()) <= M_cap \
                and (not positive or float(direct.min()) > 0):
            L, J, res, rsup = evaluate(direct)
            if rsup <= tol:
                meta["method"] = "direct"
                return state(direct, "converged", rsup)
    L, J, res, rsup = evaluate(u)
    shift = 0.0 if method == "picard" and scheme.state_free else 1.0
    lu, lu_key = None, None
    if patience is None:
        patience = 100 if method == "newton" else max_iter
    best, best_it = rsup, 0
    while True:
        if rsup <= tol:
            return state(u, "converged", rsup)
        if rsup < 0.9 * best:
            best, best_it = rsup, it
        if it >= max_iter or shift > 1e12 or it - best_it > patience:
            return state(u, "stalled", rsup)
        it += 1
        stiff = -J.diagonal()
        scale = float(np.median(stiff))
        scale = scale if scale > 0 else 1.0
        react_d = lam * a * k * np.abs(u) ** (k - 1.0)
        if method == "explicit":
            denom = np.maximum(stiff + react_d, 1e-12 * scale)
            trial = u + step * res / denom
        else:
            fix = np.where(stiff <= 1e-12 * scale, scale, 0.0)
            if method == "picard":
                relax = shift * scale + fix
                A = sp.csc_matrix(-L + sp.diags(relax))
                rhs = res - L @ u + relax * u
            else:
                A = sp.csc_matrix(sp.diags(shift * scale + fix - react_d) - J)
            key = (A.indptr.tobytes(), A.indices.tobytes(), A.data.tobytes())
            if lu is None or key != lu_key:
                try:
                    lu = _LinearSolver(A)
                except RuntimeError as exc:
                    raise NumericalError(f"singular system: {exc}",
                                         state=state(u, "running", rsup)) from None
                lu_key = key
            if method == "picard":
                trial = lu.solve(rhs)
            else:
                trial = u + lu.solve(res)
        if not np.all(np.isfinite(trial)):
            raise NumericalError("non-finite iterate", state=state(u, "running", rsup))
        if float(trial.max()) > M_cap:
            return state(trial, "blowup", rsup)
        if method == "explicit" or (method == "picard" and scheme.state_free):
            L, J, res, rsup = evaluate(trial)
            u = trial
            continue
        if positive and float(trial.min()) <= 0:
            shift = max(4.0 * shift, 1e-4)
            continue
        L_t, J_t, res_t, r_t = evaluate(trial)
        if r_t > 1.5 * rsup:
            shift = max(4.0 * shift, 1e-4)
            continue
        shift = shift / 3.0 if shift > 1e-10 else 0.0
        u, L, J, res, rsup = trial, L_t, J_t, res_t, r_t


def explicit_step(scheme: Scheme, u, lam: float, tau):
    """One damped update ``u + tau (H_h[u] + lam a |u|^(k-1) u)``."""
    k = scheme.op.signature.k
    a = scheme.dom.weight
    return u + tau * (scheme.apply(u) + lam * a * np.abs(u) ** (k - 1.0) * u)


def stable_tau(scheme: Scheme, fields, lam: float, factor: float = 0.9) -> float:
    """Global step below the monotonicity limit at every field in ``fields``."""
    k = scheme.op.signature.k
    nu = scheme.dom.nu
    rate = 0.0
    for u in fields:
        rate = max(rate, float(scheme.stiffness(u).max())
                   + lam * nu * k * float(np.max(np.abs(u))) ** (k - 1.0))
    return factor / rate


# ----------------------------------------------------------------------
# comparison
# ----------------------------------------------------------------------
@dataclass
class ComparisonReport:
    passed: bool
    margin: float
    interior_max: float
    boundary_max: float
    witness: int

    def to_dict(self):
        return dict(self.__dict__)


def comparison_check(u_sub: FieldState, u_super: FieldState, dom: GridDomain,
                     tol: float = 1e-9) -> ComparisonReport:
    """``max(u_sub - u_super)`` over the interior must not exceed its boundary
    maximum (plus ``tol``)."""
    diff = u_sub.u - u_super.u
    bdiff = u_sub.boundary - u_super.boundary
    imax = float(diff.max())
    bmax = float(bdiff.max())
    margin = bmax + tol - imax
    return ComparisonReport(margin >= 0, margin, imax, bmax, int(np.argmax(diff)))


def a_priori_sup(op: OperatorSpec, dom: GridDomain, state: FieldState) -> float:
    """Upper bound on ``sup u`` with ``f+ = lam nu (sup u)^k``."""
    g = state.boundary
    f_plus = state.lam * dom.nu * max(state.sup, 0.0) ** op.signature.k
    return sup_inf_bound(op, float(g.max()), float(g.min()), f_plus, 0.0, dom.R_o).value
