import numpy as np
import pytest

from nleigen.errors import InputError, UnsupportedOperatorError
from nleigen.operators import OperatorSpec, radial_eval
from nleigen.radial import (Infeasible, RadialProblem, eigen_radial, near_origin_expansion,
                            scaling_invariant_check, solve_radial_bvp)

from oracles import bessel_j0, bessel_profile, first_j0_zero

LAP = OperatorSpec.laplacian(2)
INF = OperatorSpec.inf_type(2)
# Frozen from tests/oracles.py: squared first zero of J0, and the adaptive
# shooting value for the infinity-type operator at two step caps.
J01_SQ = 5.783185962946785
INF_EIGEN = 1.52201704740617


def test_oracle_zero_is_frozen():
    assert first_j0_zero() ** 2 == pytest.approx(J01_SQ, rel=1e-14)


def test_origin_expansion_inf_type():
    alpha, c = near_origin_expansion(INF, 1.0, 1.0)
    assert alpha == pytest.approx(4 / 3)
    assert c == pytest.approx(0.75 * 3 ** (1 / 3), rel=1e-10)
    assert (c * alpha) ** 3 / 3 == pytest.approx(1.0, rel=1e-10)


def test_origin_expansion_flat_start():
    assert near_origin_expansion(INF, 2.0, 0.0)[1] == 0.0


def test_origin_expansion_laplacian():
    alpha, c = near_origin_expansion(LAP, 1.0, 1.0)
    assert (alpha, c) == pytest.approx((2.0, 0.25))


def test_zero_parameter_gives_constant():
    sol = solve_radial_bvp(RadialProblem(LAP, delta=1.5, lam=0.0))
    assert sol.v0 == pytest.approx(1.5)
    assert np.allclose(sol.v, 1.5)


def test_bessel_solution_below_eigenvalue():
    sol = solve_radial_bvp(RadialProblem(LAP, R=1.0, delta=1.0, lam=4.0, N=4096, tol=1e-8))
    assert sol.v0 == pytest.approx(1 / bessel_j0(2.0), rel=1e-4)
    assert sol.v0 == pytest.approx(4.4665, rel=1e-4)
    for r in (0.25, 0.5, 0.75):
        assert sol(r) == pytest.approx(bessel_profile(4.0, r), rel=1e-4)


def test_infeasible_above_eigenvalue():
    out = solve_radial_bvp(RadialProblem(LAP, R=1.0, delta=1.0, lam=6.0))
    assert isinstance(out, Infeasible)
    assert out.summary()["status"] == "infeasible"


def test_radial_ode_holds_on_solution():
    lam = 0.8
    sol = solve_radial_bvp(RadialProblem(INF, R=1.0, delta=1.0, lam=lam, N=4096, tol=1e-8))
    i = len(sol.r) // 2
    r, h = sol.r[i], sol.r[1] - sol.r[0]
    v2 = (sol.v[i + 1] - 2 * sol.v[i] + sol.v[i - 1]) / h ** 2
    g = radial_eval(INF, r, sol.dv[i], v2)
    assert g + lam * sol.v[i] ** 3 == pytest.approx(0.0, abs=1e-3 * lam * sol.v[i] ** 3)


def test_laplacian_eigenvalue():
    lam, prof = eigen_radial(LAP, 1.0)
    assert lam == pytest.approx(J01_SQ, rel=1e-4)
    assert prof.v[0] == pytest.approx(1.0)
    assert np.all(prof.v[:-1] > 0)
    assert prof.r[-1] == pytest.approx(1.0, rel=1e-8)


def test_laplacian_eigenvalue_scales_with_radius():
    assert eigen_radial(LAP, 2.0)[0] == pytest.approx(J01_SQ / 4, rel=1e-4)


def test_inf_type_eigenvalue_matches_shooting_oracle():
    assert eigen_radial(INF, 1.0)[0] == pytest.approx(INF_EIGEN, rel=1e-4)


def test_scaling_invariance_inf_type():
    rep = scaling_invariant_check(INF, [0.5, 1.0, 2.0])
    assert rep.passed and rep.spread <= 1e-3


def test_scaling_single_radius_is_trivial():
    rep = scaling_invariant_check(LAP, [1.0])
    assert rep.passed and rep.spread == 0.0


def test_asymmetric_operator_rejected():
    with pytest.raises(UnsupportedOperatorError):
        eigen_radial(OperatorSpec.pseudo_plap(2, 2.0), 1.0)
    with pytest.raises(UnsupportedOperatorError):
        RadialProblem(OperatorSpec.pseudo_plap(2, 2.0))


def test_problem_validation():
    with pytest.raises(InputError):
        RadialProblem(LAP, R=-1.0)
    with pytest.raises(InputError):
        RadialProblem(LAP, N=10)


def test_profile_csv(tmp_path):
    lam, prof = eigen_radial(LAP, 1.0, N=256)
    prof.to_csv(tmp_path / "p.csv")
    lines = (tmp_path / "p.csv").read_text().splitlines()
    assert lines[0] == "r,v,dv" and len(lines) == len(prof.r) + 1
