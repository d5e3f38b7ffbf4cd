"""Adaptive quadratic finite elements for frictionless unilateral contact in 2D elasticity."""

from .adapt import ConvergenceHistory, adaptive_solve, dorfler_mark, energy_error, solve_level
from .assembly import MaterialParams, assemble_load, assemble_stiffness, constrain_system, lame_from_young_poisson
from .contact_force import NodeClass, classify_nodes, discrete_contact_density, lump_weights, quasi_density_value
from .contact_solver import ContactSolution, PDASConvergenceError, pdas_solve, solve_linear
from .estimator import EstimatorReport, assemble_report
from .fespace import FeSpace, GapVector, build_space, contact_gap
from .hhalf import h_half_norm
from .mesh import Mesh, MeshError, load_mesh, make_mesh, nvb_refine, unit_square_mesh, uniform_refine
from .problems import Problem, example61, example62, get_problem, uncontacted

__version__ = "0.1.0"

__all__ = [
    "ContactSolution", "ConvergenceHistory", "EstimatorReport", "FeSpace", "GapVector", "MaterialParams",
    "Mesh", "MeshError", "NodeClass", "PDASConvergenceError", "Problem", "adaptive_solve", "assemble_load",
    "assemble_report", "assemble_stiffness", "build_space", "classify_nodes", "constrain_system", "contact_gap",
    "discrete_contact_density", "dorfler_mark", "energy_error", "example61", "example62", "get_problem",
    "h_half_norm", "lame_from_young_poisson", "load_mesh", "lump_weights", "make_mesh", "nvb_refine",
    "pdas_solve", "quasi_density_value", "solve_level", "solve_linear", "unit_square_mesh", "uniform_refine",
    "uncontacted",
]
