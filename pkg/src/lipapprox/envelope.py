"""Extremal 1-Lipschitz majorants and minorants, and cone representations.

Both envelopes are one generalized distance transform on the stencil
graph: ``max_y [f(y) - d(x, y)] = -min_y [-f(y) + d(x, y)]``.
"""

from __future__ import annotations

import numpy as np

from .errors import InfeasibleInput
from .grid import ScalarField, check_same_grid
from .metric import all_pairs_distance, label_setting
from .projector import max_violation
from .viscosity import region_boundary, regions


def upper_envelope(f: ScalarField) -> ScalarField:
    """Smallest graph-1-Lipschitz majorant ``max_y [f(y) - d(x, y)]``."""
    return f.with_values(-label_setting(f.grid, -f.values))


def lower_envelope(f: ScalarField) -> ScalarField:
    """Largest graph-1-Lipschitz minorant ``min_y [f(y) + d(x, y)]``."""
    return f.with_values(label_setting(f.grid, f.values))


def brute_force_envelopes(f: ScalarField):
    """``(upper, lower)`` from the dense distance matrix; O(V^2), small grids only."""
    D = all_pairs_distance(f.grid)
    up = np.max(f.values[None, :] - D, axis=1)
    lo = np.min(f.values[None, :] + D, axis=1)
    return f.with_values(up), f.with_values(lo)


def cone_representation_error(
    u: ScalarField,
    f: ScalarField,
    sign: int,
    tau: float | None = None,
    tol_feas: float | None = None,
) -> tuple[float, int]:
    """Deviation of ``u`` from its cone representation on ``A+`` or ``A-``.

    For ``sign = +1`` the representation is ``max_{y in dA+} [u(y) - d(x, y)]``
    and for ``sign = -1`` it is ``min_{y in dA-} [u(y) + d(x, y)]``.  The
    closed region ``A`` is the strict region ``{sign (u - f) > tau}`` grown
    by one stencil hop; ``dA`` holds its nodes with a neighbour outside
    ``A`` or on the domain boundary.

    Returns
    -------
    (error, size)
        Largest absolute deviation over ``A`` and the number of nodes of
        ``A``; ``(0.0, 0)`` when the region is empty.
    """
    grid = check_same_grid(u, f)
    wmax = float(grid.lengths.max()) if grid.num_edges else 1.0
    tol = 1e-6 * wmax if tol_feas is None else tol_feas
    viol = max_violation(grid, u.values)
    if viol > tol:
        raise InfeasibleInput(f"u violates an edge constraint by {viol:.3g}")
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    rep = regions(u, f, tau)
    a = rep.closure(sign)
    if not a.any():
        return 0.0, 0
    base = region_boundary(grid, a)
    lab = np.full(grid.num_nodes, np.inf)
    lab[base] = -sign * u.values[base]
    cone = -sign * label_setting(grid, lab)
    return float(np.max(np.abs(u.values[a] - cone[a]))), int(a.sum())
