import math

import numpy as np
import pytest

from nleigen.eigen import (EigenBracket, epsilon_improvement, estimate_lambda, lambda_derivative_check,
                           lower_bound_from_solution, seed_threshold)
from nleigen.errors import InputError
from nleigen.grid import build_domain
from nleigen.operators import OperatorSpec
from nleigen.verify import blowup_bracket_check, monotone_history_check

from oracles import bessel_j0

LAP = OperatorSpec.laplacian(2)


def bessel_field(lam, points, delta=1.0):
    r = np.hypot(*np.asarray(points, float).T)
    s = math.sqrt(lam)
    vals = np.array([delta * bessel_j0(s * x) / bessel_j0(s) for x in r])
    return vals, delta / bessel_j0(s)


@pytest.mark.parametrize("args,expected", [((1.0, 1.0, 2.0, 1.0), 2.0), ((5.0, 1.0, 4.0, 3.0), 10.0)])
def test_lower_bound_values(args, expected):
    assert lower_bound_from_solution(*args) == pytest.approx(expected)


def test_lower_bound_tends_to_parameter():
    assert lower_bound_from_solution(2.0, 1.0, 1e12, 1.0) == pytest.approx(2.0)


def test_lower_bound_needs_growth():
    assert lower_bound_from_solution(2.0, 1.0, 1.0, 1.0) is None


def test_epsilon_improvement_values():
    assert epsilon_improvement(3.0, 1 - 1e-12, 1.0, 2.0) == pytest.approx(3.0)
    assert epsilon_improvement(3.0, 0.5, 1.0, 1.0, k=2.0) == pytest.approx(6.0)
    assert epsilon_improvement(3.0, 1e-12, 1.0, 2.0) < 1e-10


def test_epsilon_improvement_rejects_bad_theta():
    with pytest.raises(InputError):
        epsilon_improvement(1.0, 1.0, 1.0, 2.0)


def test_square_bracket():
    dom = build_domain({"kind": "rectangle", "a": 1.0, "b": 1.0}, 1 / 32)
    br = estimate_lambda(LAP, dom, 1.0, tol=0.02)
    assert br.meta["converged"] and br.width <= 0.02
    assert br.contains(2 * math.pi ** 2, rel=0.02)
    assert br.lam_lo > seed_threshold(LAP, dom).value
    assert blowup_bracket_check(br).passed
    assert monotone_history_check(br).passed


def test_bracket_json_round_trip():
    br = EigenBracket(1.0, 1.1, [(1.0, 3.0, "converged"), (1.1, 1e9, "blowup")], 1.0, 1.0)
    assert br.feasible() == [(1.0, 3.0)]
    assert '"lam_hi": 1.1' in br.to_json()


def test_derivative_window_on_bessel_solution():
    pts = [[0.0, 0.0], [0.5, 0.0], [0.3, 0.6]]
    rep = lambda_derivative_check(LAP, None, 1.0, [4.0, 4.2, 4.4], pts, field_fn=bessel_field)
    assert rep.passed and len(rep.rows) == 9


def test_derivative_on_boundary_probe():
    rep = lambda_derivative_check(LAP, None, 1.0, [4.0], [[1.0, 0.0]], field_fn=bessel_field)
    row = rep.rows[0]
    assert row["lower"] == 0.0 and row["slope"] == pytest.approx(0.0, abs=1e-8)
    assert rep.passed


def test_derivative_detects_wrong_slope():
    def flat(lam, points):
        vals, sup = bessel_field(lam, points)
        return vals / lam, sup

    rep = lambda_derivative_check(LAP, None, 1.0, [4.0], [[0.0, 0.0]], field_fn=flat)
    assert not rep.passed


def test_derivative_on_grid_solutions():
    dom = build_domain({"kind": "disk", "R": 1.0}, 1 / 32)
    rep = lambda_derivative_check(LAP, dom, 1.0, [3.0, 4.0], [[0.0, 0.0], [0.4, 0.1]])
    assert rep.passed


def test_inf_type_bracket_near_radial_value():
    op = OperatorSpec.inf_type(2)
    dom = build_domain({"kind": "disk", "R": 1.0}, 1 / 32)
    br = estimate_lambda(op, dom, 1.0, tol=0.02)
    # frozen shooting oracle value, see test_radial
    assert br.contains(1.52201704740617, rel=0.05)
