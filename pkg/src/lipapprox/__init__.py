"""Approximation of data by 1-Lipschitz functions on grids.

Exact and iterative L2 projections onto graph-1-Lipschitz fields, their
finite-p penalized approximations, extremal envelopes, discrete checks of
the limit equations, and a 1D fidelity-plus-jumps solver.
"""

__version__ = "0.1.0"

from .envelope import cone_representation_error, lower_envelope, upper_envelope
from .grid import Grid, ScalarField, build_grid, field_from_function
from .lip1d import project_lip_1d, segment_cost, segment_cost_table, value_function
from .metric import boundary_distance, geodesic_distance
from .plap import energy_p, minimize_p, p_sweep
from .projector import kkt_residual, project_lip_dirichlet, project_lip_graph
from .sbv1d import minimize_sbv_1d, sbv_energy
from .viscosity import (
    boundary_condition_check,
    eikonal_residual,
    infinity_laplacian_residual,
    regions,
)

__all__ = [
    "Grid",
    "ScalarField",
    "boundary_condition_check",
    "boundary_distance",
    "build_grid",
    "cone_representation_error",
    "eikonal_residual",
    "energy_p",
    "field_from_function",
    "geodesic_distance",
    "infinity_laplacian_residual",
    "kkt_residual",
    "lower_envelope",
    "minimize_p",
    "minimize_sbv_1d",
    "p_sweep",
    "project_lip_1d",
    "project_lip_dirichlet",
    "project_lip_graph",
    "regions",
    "sbv_energy",
    "segment_cost",
    "segment_cost_table",
    "upper_envelope",
    "value_function",
]
