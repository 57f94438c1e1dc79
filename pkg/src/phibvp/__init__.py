"""Solvers for curvature-type two-point boundary value problems.

The equation -[phi(u')]' = grad_u F(t, u) on [0, T] couples a gradient map
phi defined on a bounded ball (so every solution has |u'| < a) with a
boundary law given by a convex functional of the endpoint pair: the fluxes
(phi(u')(0), -phi(u')(T)) must lie in its subdifferential at
(u(0), u(T)).  Pinned, free, periodic, antiperiodic, linear-subspace and
strip-constrained endpoints are all instances of one catalog of convex sets
plus an optional smooth coupling term.

Entry points: ``PhiMap`` / ``ConvexSetK`` / ``BoundaryFunctional`` build the
operator and the boundary law, ``ProblemSpec`` packages a problem on a
``Grid``, ``minimize_energy`` / ``critical_point_iteration`` solve it,
``check_solution`` audits any candidate from its nodal values alone, and
``phibvp.cli:main`` is the command line.
"""

from .boundary import (
    BoundaryFunctional,
    ConvexSetK,
    SmoothBoundaryTerm,
    j_eval,
    normal_cone_membership,
    projections_bounded,
    prox_j,
    subdifferential_residual,
)
from .errors import (
    ConfigError,
    ConvergenceError,
    DomainError,
    Infeasible,
    PhibvpError,
    UnsupportedError,
)
from .grids import (
    Grid,
    GridFunction,
    ProblemSpec,
    energy_eval,
    rayleigh_lambda1,
    smooth_gradient,
)
from .auxiliary import (
    lambda_fixed_point,
    solve_dirichlet,
    solve_neumann,
    solve_P_partial_j,
    theta_eval,
)
from .phimaps import PhiMap
from .presets import build_problem, preset_config, preset_lines, preset_names
from .solvers import (
    SolverOptions,
    classify_regime,
    critical_point_iteration,
    minimize_energy,
    reduce_periodic,
    saddle_certificate,
    vi_margin_sample,
)
from .verify import check_solution, invariant_suite, refine_study, report_text

__version__ = "0.1.0"

__all__ = [
    "BoundaryFunctional",
    "ConfigError",
    "ConvergenceError",
    "ConvexSetK",
    "DomainError",
    "Grid",
    "GridFunction",
    "Infeasible",
    "PhiMap",
    "PhibvpError",
    "ProblemSpec",
    "SmoothBoundaryTerm",
    "SolverOptions",
    "UnsupportedError",
    "build_problem",
    "check_solution",
    "classify_regime",
    "critical_point_iteration",
    "energy_eval",
    "invariant_suite",
    "j_eval",
    "lambda_fixed_point",
    "minimize_energy",
    "normal_cone_membership",
    "preset_config",
    "preset_lines",
    "preset_names",
    "projections_bounded",
    "prox_j",
    "rayleigh_lambda1",
    "reduce_periodic",
    "refine_study",
    "report_text",
    "saddle_certificate",
    "smooth_gradient",
    "solve_P_partial_j",
    "solve_dirichlet",
    "solve_neumann",
    "subdifferential_residual",
    "theta_eval",
    "vi_margin_sample",
    "__version__",
]
