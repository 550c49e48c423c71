"""Quadratic interior penalty finite elements for fourth-order problems.

Solvers for the clamped biharmonic plate, the energy-space Dirichlet
boundary control problem (reduced-space KKT), and the elliptic problem with
Cahn-Hilliard type boundary conditions, plus convergence-study tooling.
"""

__version__ = "0.1.0"

from .c0ip import (
    AssembledForms,
    C0ipParams,
    assemble_a_h,
    assemble_boundary_load,
    assemble_forms,
    assemble_load,
    assemble_mass,
    norm_energy,
    norm_h,
    norm_qh,
)
from .cahn_hilliard import ChProblem, ChSolution, check_compatibility, solve_ch
from .control import (
    ControlProblem,
    KktSolution,
    forward_solve,
    lift,
    objective,
    solve_kkt,
    solve_kkt_monolithic,
)
from .fem import DofMap, P2, QuadratureRule, build_dofmap, eval_basis, interpolate
from .linalg import (
    PositiveDefiniteError,
    SolveReport,
    cg_solve,
    cholesky_solve,
    constrain,
)
from .mesh import (
    Polygon,
    Triangulation,
    built_in_polygon,
    load_polygon,
    mesh_hierarchy,
    refine_uniform,
    triangulate_initial,
)
from .study import ConvergenceReport, ManufacturedCase, eoc, run_study

__all__ = [
    "__version__",
    "AssembledForms",
    "C0ipParams",
    "ChProblem",
    "ChSolution",
    "ControlProblem",
    "ConvergenceReport",
    "DofMap",
    "KktSolution",
    "ManufacturedCase",
    "P2",
    "Polygon",
    "PositiveDefiniteError",
    "QuadratureRule",
    "SolveReport",
    "Triangulation",
    "assemble_a_h",
    "assemble_boundary_load",
    "assemble_forms",
    "assemble_load",
    "assemble_mass",
    "built_in_polygon",
    "cg_solve",
    "check_compatibility",
    "cholesky_solve",
    "constrain",
    "build_dofmap",
    "eoc",
    "eval_basis",
    "forward_solve",
    "interpolate",
    "lift",
    "load_polygon",
    "mesh_hierarchy",
    "norm_energy",
    "norm_h",
    "norm_qh",
    "objective",
    "refine_uniform",
    "run_study",
    "solve_ch",
    "solve_kkt",
    "solve_kkt_monolithic",
    "triangulate_initial",
]
