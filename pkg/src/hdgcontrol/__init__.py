"""HDG solver for distributed optimal control of convection-diffusion.

States and dual states are approximated with degree k+1 polynomials,
their fluxes with degree k, and the only globally coupled unknowns are
degree-k face traces; for k >= 1 the states and the control converge one
order faster than the fluxes.
"""

from .analysis import ConvergenceReport, all_errors, compute_rates, l2_error, \
    project_exact
from .assembly import DiscreteSolution, GlobalTraceSystem, compute_cost, condense, \
    conservation_residuals, recover, solve_problem, solve_traces
from .basis import EdgeBasis, QuadratureRule, QuadratureSet, TriBasis, \
    default_rules, edge_quadrature, eval_basis, eval_grad, tri_quadrature
from .cli import StudyConfig, run_checks, run_study
from .errors import ConfigError, LocalSingularityError, SolverError, \
    StabilizationError
from .local import HDGAssembler, LocalSystem, StabilizationConfig, \
    assemble_element, b1_apply, b2_apply, project_face, project_volume
from .mesh import FaceGeometry, Mesh, build_uniform, face_geometry
from .problems import BUILTIN_PROBLEMS, ExactSolution, ProblemData, \
    consistency_residual, example1, example2, poly_debug, sample_points

__all__ = [
    "BUILTIN_PROBLEMS", "ConfigError", "ConvergenceReport", "DiscreteSolution",
    "EdgeBasis", "ExactSolution", "FaceGeometry", "GlobalTraceSystem",
    "HDGAssembler", "LocalSingularityError", "LocalSystem", "Mesh",
    "ProblemData", "QuadratureRule", "QuadratureSet", "SolverError",
    "StabilizationConfig", "StabilizationError", "StudyConfig", "TriBasis",
    "all_errors", "assemble_element", "b1_apply", "b2_apply", "build_uniform",
    "compute_cost", "compute_rates", "condense", "conservation_residuals",
    "consistency_residual", "default_rules", "edge_quadrature", "eval_basis",
    "eval_grad", "example1", "example2", "face_geometry", "l2_error",
    "poly_debug", "project_exact", "project_face", "project_volume", "recover",
    "run_checks", "run_study", "sample_points", "solve_problem", "solve_traces",
    "tri_quadrature",
]
