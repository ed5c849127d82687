"""Independent reference computations used to freeze expected values.

Nothing here imports the package under test.
"""
import math

from scipy.integrate import solve_ivp


def bessel_j0(x: float, terms: int = 60) -> float:
    """J0 from its power series sum (-1)^m (x/2)^(2m) / (m!)^2."""
    total, term = 0.0, 1.0
    half_sq = (0.5 * x) ** 2
    for m in range(terms):
        if m:
            term *= -half_sq / (m * m)
        total += term
    return total


def bisect(f, lo: float, hi: float, iters: int = 200) -> float:
    flo = f(lo)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)


def first_j0_zero() -> float:
    return bisect(bessel_j0, 2.0, 3.0)


def bessel_profile(lam: float, r: float, R: float = 1.0, delta: float = 1.0) -> float:
    """Positive radial solution of the Laplacian problem on the disk."""
    s = math.sqrt(lam)
    return delta * bessel_j0(s * r) / bessel_j0(s * R)


def inf_laplacian_eigen(max_step: float, R: float = 1.0) -> float:
    """First eigenvalue of v'^2 v'' = -lam v^3 on the disk by adaptive shooting.

    Uses the exact cusp start v = 1 - c r^(4/3), c^3 = 81 lam / 64, and an
    adaptive Runge-Kutta integrator with event location for the first zero.
    """
    r0 = 1e-6

    def first_zero(lam):
        c = (81.0 * lam / 64.0) ** (1.0 / 3.0)
        y0 = [1.0 - c * r0 ** (4.0 / 3.0), -(4.0 / 3.0) * c * r0 ** (1.0 / 3.0)]

        def rhs(r, y):
            return [y[1], -lam * y[0] ** 3 / (y[1] * y[1])]

        def hit(r, y):
            return y[0]

        hit.terminal = True
        sol = solve_ivp(rhs, (r0, 10.0 * R), y0, method="DOP853", rtol=1e-12,
                        atol=1e-14, events=hit, max_step=max_step)
        return sol.t_events[0][0]

    return bisect(lambda lam: first_zero(lam) - R, 0.5, 5.0, iters=60)
