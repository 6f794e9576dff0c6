"""P1 algebraic flux correction with residual a posteriori estimates and red-green adaptivity."""
from .adaptivity import AdaptiveOptions, AdaptiveRunRecord, LevelRow, adaptive_loop, mark_cells
from .afc import BJK, KUZMIN, LimiterState, SolverOptions, compute_alpha, dh_edge, dh_point, solve_afc
from .assembly import DiscreteSystem, assemble_galerkin, energy_norm_error
from .estimators import (AFC_ENERGY, AFC_SUPG_ENERGY, EstimatorConstants, EstimatorReport, afc_energy_estimate,
                         afc_supg_energy_estimate, effectivity_index, smear_int)
from .mesh import Mesh, compute_cell_geometry, is_delaunay, refine_adaptive, refine_uniform, unit_square_macro
from .problems import ProblemSpec, get_problem
from .supg import solve_supg, stabilization_parameters

__all__ = [
    "AFC_ENERGY", "AFC_SUPG_ENERGY", "BJK", "KUZMIN", "AdaptiveOptions", "AdaptiveRunRecord", "DiscreteSystem",
    "EstimatorConstants", "EstimatorReport", "LevelRow", "LimiterState", "Mesh", "ProblemSpec", "SolverOptions",
    "adaptive_loop", "afc_energy_estimate", "afc_supg_energy_estimate", "assemble_galerkin", "compute_alpha",
    "compute_cell_geometry", "dh_edge", "dh_point", "effectivity_index", "energy_norm_error", "get_problem",
    "is_delaunay", "mark_cells", "refine_adaptive", "refine_uniform", "smear_int", "solve_afc", "solve_supg",
    "stabilization_parameters", "unit_square_macro",
]
