"""L2 projection onto graph-1-Lipschitz fields by Dykstra's algorithm.

The feasible set is the intersection of one slab ``|v_i - v_j| <= l_ij`` per
stencil edge.  Dykstra's correction terms are stored as one signed scalar
per edge; they are the Lagrange multipliers of the edge constraints, so the
identity ``q * (u - f) + B^T mu = 0`` holds at every iterate and only
feasibility and complementary slackness improve with the sweeps.  All norms
use the grid quadrature weights ``q``.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass

import numpy as np
from numba import njit
from scipy.optimize import lsq_linear, nnls
from scipy.sparse import coo_matrix

from .errors import InfeasibleInput, MaxIterExceeded
from .grid import Grid, ScalarField, check_same_grid
from .metric import boundary_distance

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Certificate:
    iterations: int
    feasibility: float
    increment: float
    kkt: float
    slack: float
    converged: bool = True

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    def to_dict(self) -> dict:
        return {
            "iters": self.iterations,
            "feas": self.feasibility,
            "inc": self.increment,
            "kkt": self.kkt,
            "slack": self.slack,
            "converged": self.converged,
        }


@dataclass
class EdgeConstraintSystem:
    """Edge slabs of a grid plus the Dykstra multiplier memory."""

    grid: Grid
    bounds: np.ndarray
    multipliers: np.ndarray

    @classmethod
    def for_grid(cls, grid: Grid) -> "EdgeConstraintSystem":
        return cls(grid, np.asarray(grid.lengths, dtype=float), np.zeros(grid.num_edges))

    def violation(self, values) -> float:
        return max_violation(self.grid, values, self.bounds)


def max_violation(grid: Grid, values, bounds=None) -> float:
    """Largest ``|v_i - v_j| - l_ij`` over edges, clipped at zero."""
    if grid.num_edges == 0:
        return 0.0
    v = np.asarray(values, dtype=float)
    b = grid.lengths if bounds is None else bounds
    gap = np.abs(v[grid.edges[:, 0]] - v[grid.edges[:, 1]]) - b
    return float(max(gap.max(), 0.0))


@njit(cache=True)
def _sweeps(x, q, ei, ej, wb, mu, max_sweeps, tol_feas, tol_inc):
    n_e = ei.shape[0]
    prev = x.copy()
    feas = np.inf
    inc = np.inf
    for sweep in range(1, max_sweeps + 1):
        for k in range(n_e):
            i = ei[k]
            j = ej[k]
            qi = q[i]
            qj = q[j]
            m = mu[k]
            zi = x[i] + m / qi
            zj = x[j] - m / qj
            d = zi - zj
            w = wb[k]
            if d > w:
                m = (d - w) * qi * qj / (qi + qj)
            elif d < -w:
                m = (d + w) * qi * qj / (qi + qj)
            else:
                m = 0.0
            mu[k] = m
            x[i] = zi - m / qi
            x[j] = zj + m / qj
        inc2 = 0.0
        for i in range(x.shape[0]):
            dv = x[i] - prev[i]
            inc2 += q[i] * dv * dv
            prev[i] = x[i]
        inc = np.sqrt(inc2)
        if inc <= tol_inc:
            feas = 0.0
            for k in range(n_e):
                g = abs(x[ei[k]] - x[ej[k]]) - wb[k]
                if g > feas:
                    feas = g
            if feas <= tol_feas:
                return sweep, feas, inc
    feas = 0.0
    for k in range(n_e):
        g = abs(x[ei[k]] - x[ej[k]]) - wb[k]
        if g > feas:
            feas = g
    return max_sweeps, feas, inc


def project_lip_graph(
    f: ScalarField,
    tol_feas: float | None = None,
    tol_inc: float | None = None,
    max_iter: int = 200_000,
    strict: bool = False,
    with_kkt: bool = True,
):
    """Project ``f`` onto graph-1-Lipschitz fields.

    Returns ``(u, certificate)``.  When ``max_iter`` sweeps are not enough
    the best iterate is returned with ``certificate.converged = False``;
    pass ``strict=True`` to raise :class:`MaxIterExceeded` instead.
    """
    grid = f.grid
    system = EdgeConstraintSystem.for_grid(grid)
    wmax = float(system.bounds.max()) if grid.num_edges else 1.0
    tol_feas = 1e-8 * wmax if tol_feas is None else tol_feas
    tol_inc = 1e-9 * max(f.l2(), 1e-300) if tol_inc is None else tol_inc
    if tol_feas <= 0 or tol_inc <= 0:
        raise ValueError("tolerances must be positive")

    if grid.num_nodes < 2 or system.violation(f.values) <= 0.0:
        return f, Certificate(0, 0.0, 0.0, 0.0, 0.0, True)

    x = np.array(f.values, dtype=float)
    ei = np.ascontiguousarray(grid.edges[:, 0])
    ej = np.ascontiguousarray(grid.edges[:, 1])
    q = np.ascontiguousarray(grid.weights, dtype=float)
    iters, feas, inc = _sweeps(
        x, q, ei, ej, system.bounds, system.multipliers, int(max_iter), tol_feas, tol_inc
    )
    converged = feas <= tol_feas and inc <= tol_inc
    u = f.with_values(x)
    kkt = slack = float("nan")
    if with_kkt:
        cert = kkt_residual(
            u,
            f,
            tol_feas=max(tol_feas, 1e-6 * wmax),
            multipliers=system.multipliers,
            check_feasible=False,
        )
        kkt, slack = cert.kkt, cert.slack
    cert = Certificate(int(iters), float(feas), float(inc), kkt, slack, bool(converged))
    if not converged:
        logger.warning("Dykstra stopped after %d sweeps (feas=%.3g, inc=%.3g)", iters, feas, inc)
        if strict:
            raise MaxIterExceeded(f"no convergence in {max_iter} sweeps", result=(u, cert))
    return u, cert


def kkt_residual(
    u: ScalarField,
    f: ScalarField,
    grid: Grid | None = None,
    tol_feas: float | None = None,
    multipliers=None,
    check_feasible: bool = True,
) -> Certificate:
    """Optimality certificate of ``u`` as the projection of ``f``.

    Fits nonnegative multipliers on the active edges
    (``|u_i - u_j| >= l_ij - tol_feas``) to the stationarity condition
    ``q (u - f) + B^T mu = 0`` and reports the unexplained part in the dual
    weighted norm ``sqrt(sum r_i^2 / q_i)``.

    ``multipliers`` (signed, one per edge, as kept by the Dykstra solver)
    are used as the fit when given; any nonnegative choice bounds the
    least-squares residual from above, so the certificate stays valid.
    """
    g = check_same_grid(u, f) if grid is None else grid
    wmax = float(g.lengths.max()) if g.num_edges else 1.0
    tol = 1e-6 * wmax if tol_feas is None else tol_feas
    feas = max_violation(g, u.values)
    if check_feasible and feas > tol:
        raise InfeasibleInput(f"u violates an edge constraint by {feas:.3g}")
    q = g.weights
    rhs = -q * (u.values - f.values)
    diff = u.values[g.edges[:, 0]] - u.values[g.edges[:, 1]]
    active = np.flatnonzero(np.abs(diff) >= g.lengths - tol)
    if active.size == 0:
        r = rhs
        return Certificate(0, feas, 0.0, float(np.sqrt(np.sum(r * r / q))), 0.0)
    sign = np.sign(diff[active])
    ea = g.edges[active]
    m = active.size
    rows = np.concatenate([ea[:, 0], ea[:, 1]])
    cols = np.concatenate([np.arange(m), np.arange(m)])
    vals = np.concatenate([sign, -sign])
    scale = 1.0 / np.sqrt(q)
    A = coo_matrix((vals * scale[rows], (rows, cols)), shape=(g.num_nodes, m)).tocsr()
    b = rhs * scale
    if multipliers is not None:
        mu = np.maximum(sign * np.asarray(multipliers)[active], 0.0)
    elif g.num_nodes * m <= 4_000_000:
        mu, _ = nnls(A.toarray(), b, maxiter=50 * m)
    else:
        mu = lsq_linear(A, b, bounds=(0.0, np.inf), method="trf", tol=1e-14, max_iter=500).x
    res = A @ mu - b
    gaps = g.lengths[active] - np.abs(diff[active])
    slack = float(np.max(mu * np.maximum(gaps, 0.0))) if m else 0.0
    return Certificate(0, feas, 0.0, float(np.linalg.norm(res)), slack)


def project_lip_dirichlet(f: ScalarField, tol: float | None = None, **kwargs) -> ScalarField:
    """Projection with zero boundary values.

    Projects the clamped datum ``median(-delta, f, delta)`` (``delta`` the
    graph distance to the boundary) with the free-boundary solver, then
    checks that the result vanishes on the boundary nodes up to ``tol``
    (default ``1e-6 * max(1, ||f||_inf)``); a failed check is logged.
    """
    delta = boundary_distance(f.grid).values
    clamped = f.with_values(np.clip(f.values, -delta, delta))
    u, _ = project_lip_graph(clamped, **kwargs)
    tol = 1e-6 * max(1.0, f.linf()) if tol is None else tol
    trace = float(np.max(np.abs(u.values[f.grid.boundary]))) if f.grid.boundary.any() else 0.0
    if trace > tol:
        logger.warning("Dirichlet projection has boundary trace %.3g > %.3g", trace, tol)
    return u


def chain_multipliers(u: ScalarField, f: ScalarField) -> np.ndarray:
    """Signed edge multipliers of a 1D projection from stationarity alone.

    On a chain, ``q (u - f) + B^T mu = 0`` determines ``mu`` as prefix sums.
    """
    g = check_same_grid(u, f)
    if g.dim != 1:
        raise ValueError("1D grid required")
    return -np.cumsum(g.weights * (u.values - f.values))[:-1]
