"""Principal eigenvalues and positive solutions for degenerate homogeneous
elliptic operators."""
from .errors import NLEigenError
from .operators import OperatorSpec, check_conditions, classify_case, coercivity, coercivity_profile, evaluate, signature
from .barriers import BarrierSpec, barrier_residual, lambda_big_and_solution_bounds, lambda_threshold, sup_inf_bound
from .radial import RadialProblem, eigen_radial, scaling_invariant_check, solve_radial_bvp
from .grid import FieldState, GridDomain, build_domain, comparison_check, scheme_residual, solve_grid_bvp
from .eigen import EigenBracket, estimate_lambda, lambda_derivative_check, lower_bound_from_solution
from .verify import VerificationReport, audit_state
from .estimators import EigenEstimator, GridBVPSolver, RadialEigenSolver

__version__ = "0.1.0"

__all__ = [
    "NLEigenError", "OperatorSpec", "check_conditions", "classify_case", "coercivity",
    "coercivity_profile", "evaluate", "signature", "BarrierSpec", "barrier_residual",
    "lambda_big_and_solution_bounds", "lambda_threshold", "sup_inf_bound", "RadialProblem",
    "eigen_radial", "scaling_invariant_check", "solve_radial_bvp", "FieldState", "GridDomain",
    "build_domain", "comparison_check", "scheme_residual", "solve_grid_bvp", "EigenBracket",
    "estimate_lambda", "lambda_derivative_check", "lower_bound_from_solution",
    "VerificationReport", "audit_state", "EigenEstimator", "GridBVPSolver", "RadialEigenSolver",
]
