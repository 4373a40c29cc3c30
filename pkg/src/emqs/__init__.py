"""Finite Integration Technique solvers for Darwin-type electromagnetic quasistatics."""

from .fields import ComparisonReport, FieldSolution, compare_fields, export_fields, fields_from_potentials, read_fields_csv, reconstruct_fields
from .formulations import (
    FORMULATIONS,
    AssembledSystem,
    DofPartition,
    Excitation,
    StaticLimitError,
    assemble,
    default_gauge_matrix,
    fd_darwin_regularized,
    fd_dd_combined_gauge,
    fd_eqs_gauge,
    fd_full_maxwell_two_step,
    fd_graddiv_schur,
    fd_lagrange_coulomb,
    fd_monolithic_darwin,
    fd_symmetric_full_continuity,
    td_symmetric_step,
)
from .grid import Grid, GridSpec, build_grid, dual_metrics
from .materials import EPS0, MU0, KappaHatPolicy, MaterialBox, MaterialField, build_material_field
from .operators import OperatorSet, build_incidence, build_operators, export_matrix_market
from .oracle import DiagnosticsReport, condition_sweep, dense_diagnostics, gauge_residual, td_fd_consistency
from .scenarios import Problem, Scenario, ScenarioError, load_scenario, parse_scenario, run_scenario
from .solvers import (
    Breakdown,
    MaxIterations,
    NotBlockTriangular,
    SingularMatrix,
    SolveReport,
    SolverError,
    block_back_substitute,
    solve,
    solve_direct,
    solve_iterative,
)

__version__ = "0.1.0"
