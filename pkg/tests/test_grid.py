import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nleigen.barriers import BarrierSpec, barrier_residual
from nleigen.errors import DomainError
from nleigen.grid import (FieldState, GridDomain, Scheme, build_domain, comparison_check, initial_guess,
                          scheme_residual, solve_grid_bvp)
from nleigen.operators import OperatorSpec, builtin_examples
from nleigen.verify import comparison_preservation_check

from oracles import bessel_profile

LAP = OperatorSpec.laplacian(2)
INF = OperatorSpec.inf_type(2)
OPS = builtin_examples(2)


def test_disk_node_count():
    dom = build_domain({"kind": "disk", "R": 1.0}, 1 / 32)
    assert dom.n_interior == pytest.approx(math.pi * 32 ** 2, rel=0.02)


def test_square_node_count():
    assert build_domain({"kind": "rectangle", "a": 1.0, "b": 1.0}, 0.25).n_interior == 9


def test_empty_mask_rejected():
    with pytest.raises(DomainError):
        build_domain({"kind": "mask", "mask": np.zeros((5, 5))}, 0.1)


def test_mask_file_domain(tmp_path):
    grid = np.zeros((9, 9), dtype=int)
    grid[1:8, 1:8] = 2
    grid[2:7, 2:7] = 1
    path = tmp_path / "m.txt"
    path.write_text("\n".join("".join(map(str, row)) for row in grid))
    dom = build_domain({"kind": "mask_file", "path": str(path)}, 0.1)
    assert dom.n_interior == 25
    st = solve_grid_bvp(LAP, dom, 0.0)
    assert np.allclose(st.u, 1.0)


def test_quadratic_is_exact_for_laplacian():
    dom = build_domain({"kind": "disk", "R": 1.0}, 1 / 16, boundary_fn=lambda x, y: x * x + y * y)
    u = dom.xi ** 2 + dom.yi ** 2
    assert np.allclose(scheme_residual(LAP, dom, u), 4.0, atol=1e-9)


@pytest.mark.parametrize("op", OPS, ids=lambda o: f"{o.family}-{o.param_dict}")
def test_affine_gives_zero(op):
    f = lambda x, y: 1.0 + 0.3 * x - 0.7 * y  # noqa: E731
    dom = build_domain({"kind": "disk", "R": 1.0}, 1 / 16, boundary_fn=f)
    assert np.abs(scheme_residual(op, dom, f(dom.xi, dom.yi))).max() < 1e-9


def test_single_node_residual():
    dom = build_domain({"kind": "rectangle", "a": 1.0, "b": 1.0}, 0.25, boundary_fn=lambda x, y: x * x)
    assert scheme_residual(LAP, dom, dom.xi ** 2, node=4) == pytest.approx(2.0)


def test_inf_cone_residual_near_closed_form():
    b = BarrierSpec("alpha_cone", "minus", c=1.0, d=1.0)
    fn = lambda x, y: b.value(INF, np.stack([x, y], -1))  # noqa: E731
    dom = build_domain({"kind": "disk", "R": 1.0}, 1 / 32, boundary_fn=fn)
    r = np.hypot(dom.xi, dom.yi)
    sel = (r > 0.25) & (r < 0.75)
    got = scheme_residual(INF, dom, fn(dom.xi, dom.yi))[sel]
    assert np.abs(got - barrier_residual(INF, b, 0.5)).max() < 4 * (1 / 32) ** (2 / 3)


@pytest.mark.parametrize("op", [LAP, INF, OperatorSpec.pucci_minus(2, 1.0, 2.0)],
                         ids=lambda o: o.family)
def test_zero_parameter_gives_boundary_constant(op):
    dom = build_domain({"kind": "disk", "R": 1.0}, 1 / 16, boundary_fn=2.0)
    st = solve_grid_bvp(op, dom, 0.0)
    assert st.status == "converged"
    assert np.allclose(st.u, 2.0, atol=1e-8)


def test_square_below_first_eigenvalue():
    dom = build_domain({"kind": "rectangle", "a": 1.0, "b": 1.0}, 1 / 32)
    st = solve_grid_bvp(LAP, dom, 10.0)
    assert st.status == "converged" and st.sup > 1.0 and st.interior_min > 1.0


def test_square_above_first_eigenvalue_blows_up():
    dom = build_domain({"kind": "rectangle", "a": 1.0, "b": 1.0}, 1 / 32)
    assert solve_grid_bvp(LAP, dom, 25.0).status == "blowup"


def test_disk_solution_matches_bessel():
    dom = build_domain({"kind": "disk", "R": 1.0}, 1 / 32)
    st = solve_grid_bvp(LAP, dom, 4.0)
    pts = np.array([[0.0, 0.0], [0.3, -0.2], [0.5, 0.5]])
    exact = [bessel_profile(4.0, math.hypot(*p)) for p in pts]
    assert st.at(dom, pts) == pytest.approx(exact, rel=0.02)


@pytest.mark.parametrize("method", ["newton", "explicit", "picard"])
def test_methods_share_fixed_points(method):
    op = OperatorSpec.plap_type(2, 1.0, 0.5)
    dom = build_domain({"kind": "disk", "R": 1.0}, 1 / 8)
    ref = solve_grid_bvp(op, dom, 0.3, method="newton")
    st = solve_grid_bvp(op, dom, 0.3, method=method, tol=1e-9, max_iter=200000)
    assert st.status == "converged"
    assert np.allclose(st.u, ref.u, atol=1e-6)


def test_field_csv_round_trip(tmp_path):
    dom = build_domain({"kind": "disk", "R": 1.0}, 1 / 16)
    st = solve_grid_bvp(LAP, dom, 3.0)
    st.to_csv(tmp_path / "f.csv", dom)
    back = FieldState.from_csv(tmp_path / "f.csv", dom, lam=3.0)
    assert np.array_equal(back.u, st.u) and np.array_equal(back.boundary, st.boundary)


def test_interpolation_outside_is_nan():
    dom = build_domain({"kind": "disk", "R": 1.0}, 1 / 16)
    st = solve_grid_bvp(LAP, dom, 1.0)
    assert np.isnan(st.at(dom, np.array([[2.0, 2.0]]))[0])


def test_comparison_with_shifted_copy():
    dom = build_domain({"kind": "disk", "R": 1.0}, 1 / 16)
    st = solve_grid_bvp(LAP, dom, 4.0)
    assert comparison_check(st, st.shifted(0.5), dom).passed


def test_comparison_sub_solution_below_solution():
    dom = build_domain({"kind": "disk", "R": 1.0}, 1 / 16)
    st = solve_grid_bvp(LAP, dom, 4.0)
    sub = FieldState(np.ones(dom.n_interior), dom.boundary_array().copy())
    assert comparison_check(sub, st, dom).passed


def test_subharmonic_max_on_boundary():
    dom = build_domain({"kind": "disk", "R": 1.0}, 1 / 16, boundary_fn=lambda x, y: x * x + y * y)
    u = FieldState(dom.xi ** 2 + dom.yi ** 2, dom.boundary_array())
    zero = FieldState(np.zeros(dom.n_interior), np.zeros(len(dom.boundary_flat)))
    assert comparison_check(u, zero, dom).passed


def test_initial_guess_is_finite():
    dom = build_domain({"kind": "disk", "R": 1.0}, 1 / 16)
    for op in OPS:
        assert np.all(np.isfinite(initial_guess(op, dom, 0.1)))


_DOM = build_domain({"kind": "disk", "R": 1.0}, 1 / 8)


@settings(max_examples=40, deadline=None)
@given(st.sampled_from(OPS), st.integers(0, 2 ** 31 - 1), st.floats(0.0, 1.0))
def test_explicit_update_preserves_order(op, seed, lam):
    rng = np.random.default_rng(seed)
    lower = 1.0 + rng.random(_DOM.n_interior)
    upper = lower + rng.random(_DOM.n_interior)
    assert comparison_preservation_check(op, _DOM, lower, upper, lam).passed


@settings(max_examples=40, deadline=None)
@given(st.sampled_from(OPS), st.integers(0, 2 ** 31 - 1), st.floats(0.01, 0.5))
def test_raising_one_node_never_lowers_its_neighbours(op, seed, bump):
    rng = np.random.default_rng(seed)
    x, y = _DOM.xi, _DOM.yi
    u = 2.0 - x * x - y * y + 0.3 * np.sin(3.0 * x + 6.0 * rng.random()) * y
    scheme = Scheme(op, _DOM)
    node = int(rng.integers(_DOM.n_interior))
    raised = u.copy()
    raised[node] += bump
    change = scheme.apply(raised) - scheme.apply(u)
    change[node] = 0.0
    assert change.min() >= -1e-9 * (1.0 + np.abs(scheme.apply(u)).max())


def test_negative_a_branch_is_flagged():
    op = OperatorSpec.plap_type(2, 1.0, -0.5)
    assert not Scheme(op, _DOM).monotone
    assert all(Scheme(o, _DOM).monotone for o in OPS)
    st_ = solve_grid_bvp(op, build_domain({"kind": "disk", "R": 1.0}, 1 / 16), 0.5)
    assert st_.meta["monotone_scheme"] is False


@settings(max_examples=40, deadline=None)
@given(st.sampled_from(OPS), st.integers(0, 2 ** 31 - 1), st.floats(0.01, 10.0))
def test_scheme_is_homogeneous(op, seed, c):
    rng = np.random.default_rng(seed)
    dom = _DOM.with_boundary(lambda x, y: np.zeros_like(x))
    u = rng.standard_normal(dom.n_interior)
    k = op.signature.k
    a, b = scheme_residual(op, dom, c * u), scheme_residual(op, dom, u)
    assert np.allclose(a, c ** k * b, rtol=1e-9, atol=1e-9 * np.abs(b).max())


def test_domain_is_grid_domain():
    assert isinstance(_DOM, GridDomain) and _DOM.diameter == 2.0
