"""Weak supermartingale optimal transport on finitely supported marginals."""

from .cost import CostSpec, coupling_matrix, eval_cost
from .monotone import (
    MartingaleRegions,
    MonotonicityReport,
    Witness,
    check_finitely_optimal,
    check_monotone,
    martingale_regions,
    row_roles,
)
from .solvers import (
    ConvexResult,
    RowPolytope,
    frank_wolfe,
    solve,
    solve_convex,
    solve_linear,
    supermartingale_polytope,
    uniqueness_spread,
)
from .stability import Perturbation, StabilityRow, StabilityTable, linear_optimum_unique, stability_run

__all__ = [
    "CostSpec",
    "coupling_matrix",
    "eval_cost",
    "MartingaleRegions",
    "MonotonicityReport",
    "Witness",
    "check_finitely_optimal",
    "check_monotone",
    "martingale_regions",
    "row_roles",
    "ConvexResult",
    "RowPolytope",
    "frank_wolfe",
    "solve",
    "solve_convex",
    "solve_linear",
    "supermartingale_polytope",
    "uniqueness_spread",
    "Perturbation",
    "StabilityRow",
    "StabilityTable",
    "linear_optimum_unique",
    "stability_run",
]
