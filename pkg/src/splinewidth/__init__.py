"""Spline spaces, projections and n-width computations on an interval."""

__version__ = "0.1.0"

from .functions import FunctionSpec, get_function, periodic_eigenfunction
from .knots import BreakSequence, ExtendedKnotVector, make_breaks, make_special_breaks
from .nwidth import (eigconv_report, exact_nwidth, kkstar_spectrum_check, optimal_space, optimality_ratio,
                     residual_operator_norm)
from .operators import FunctionClassSpec, KernelOperator, OperatorWord, discretize_operator
from .projection import (bound_report, check_hypotheses, l2_project, ritz_project_recursive,
                         ritz_project_variational, tensor_bound_report)
from .spaces import ConstraintFamily, SplineSpace, build_subspace, periodic_space
from .spectral import branch_profile, conjecture_explorer, inverse_report, laplace_spectrum, outlier_report

__all__ = [
    "BreakSequence", "ConstraintFamily", "ExtendedKnotVector", "FunctionClassSpec", "FunctionSpec",
    "KernelOperator", "OperatorWord", "SplineSpace", "bound_report", "branch_profile", "build_subspace",
    "check_hypotheses", "conjecture_explorer", "discretize_operator", "eigconv_report", "exact_nwidth",
    "get_function", "inverse_report", "kkstar_spectrum_check", "l2_project", "laplace_spectrum", "make_breaks",
    "make_special_breaks", "optimal_space", "optimality_ratio", "outlier_report", "periodic_eigenfunction",
    "periodic_space", "residual_operator_norm", "ritz_project_recursive", "ritz_project_variational",
    "tensor_bound_report",
]
