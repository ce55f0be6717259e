"""Penalized finite-p energies and the p -> infinity sweep.

The discrete energy is

    J_p(v) = (1/p) sum_cells vol * |grad v|^p + 1/2 sum_nodes q * (v - f)^2

with one forward-difference gradient per grid cell (an interval in 1D, a
square with four masked corners in 2D).  It is minimized by L-BFGS with an
Armijo backtracking line search, working in the metric of the quadrature
weights ``q`` so that the stopping test measures the gradient in the dual
L2 norm ``sqrt(sum g_i^2 / q_i)``.
"""

from __future__ import annotations

import csv
import io
import logging
from collections import deque
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import csr_matrix

from .errors import LineSearchStalled, MaxIterExceeded, NonFiniteEnergy
from .grid import Grid, ScalarField, check_same_grid

logger = logging.getLogger(__name__)

_CELL_CACHE: dict[int, tuple] = {}


def cell_operators(grid: Grid):
    """Per-axis cell-gradient matrices and the cell volume.

    Returns ``(ops, vol)`` where ``ops[d] @ v`` is the ``d``-th gradient
    component on every complete cell.
    """
    key = id(grid)
    hit = _CELL_CACHE.get(key)
    if hit is not None and hit[0] is grid:
        return hit[1], hit[2]
    V = grid.num_nodes
    if grid.dim == 1:
        right = grid.axis_neighbor((1,))
        c = np.flatnonzero(right >= 0)
        m = c.size
        rows = np.repeat(np.arange(m), 2)
        cols = np.column_stack([c, right[c]]).ravel()
        vals = np.tile([-1.0, 1.0], m) / grid.h[0]
        ops = [csr_matrix((vals, (rows, cols)), shape=(m, V))]
        vol = grid.h[0]
    else:
        hx, hy = grid.h
        n10 = grid.axis_neighbor((1, 0))
        n01 = grid.axis_neighbor((0, 1))
        n11 = grid.axis_neighbor((1, 1))
        c = np.flatnonzero((n10 >= 0) & (n01 >= 0) & (n11 >= 0))
        m = c.size
        corners = np.column_stack([c, n10[c], n01[c], n11[c]])  # 00, 10, 01, 11
        rows = np.repeat(np.arange(m), 4)
        cols = corners.ravel()
        gx = np.tile([-1.0, 1.0, -1.0, 1.0], m) / (2 * hx)
        gy = np.tile([-1.0, -1.0, 1.0, 1.0], m) / (2 * hy)
        ops = [
            csr_matrix((gx, (rows, cols)), shape=(m, V)),
            csr_matrix((gy, (rows, cols)), shape=(m, V)),
        ]
        vol = hx * hy
    _CELL_CACHE.clear()
    _CELL_CACHE[key] = (grid, ops, vol)
    return ops, vol


def _energy_and_gradient(v, f, q, ops, vol, p, want_grad=True):
    comps = [G @ v for G in ops]
    with np.errstate(over="ignore", invalid="ignore"):
        mag2 = comps[0] ** 2
        for c in comps[1:]:
            mag2 = mag2 + c**2
        mag_p = mag2 ** (0.5 * p)
        r = v - f
        e = vol * mag_p.sum() / p + 0.5 * np.dot(q, r * r)
        if not want_grad:
            return e, None
        coef = vol * mag2 ** (0.5 * p - 1.0)
        g = q * r
        for G, c in zip(ops, comps):
            g = g + G.T @ (coef * c)
    return e, g


def energy_p(v: ScalarField, f: ScalarField, p: float) -> float:
    """Discrete penalized energy ``J_p(v)`` for the datum ``f``."""
    if p < 2:
        raise ValueError("p must be at least 2")
    grid = check_same_grid(v, f)
    ops, vol = cell_operators(grid)
    e, _ = _energy_and_gradient(v.values, f.values, grid.weights, ops, vol, p, False)
    if not np.isfinite(e):
        raise NonFiniteEnergy(f"J_p is not finite at p={p}")
    return float(e)


def gradient_norm(v: ScalarField, f: ScalarField, p: float) -> float:
    """Dual weighted norm of the energy gradient at ``v``."""
    grid = check_same_grid(v, f)
    ops, vol = cell_operators(grid)
    _, g = _energy_and_gradient(v.values, f.values, grid.weights, ops, vol, p)
    return float(np.sqrt(np.sum(g * g / grid.weights)))


@dataclass
class SolveInfo:
    iterations: int
    energy: float
    gradient_norm: float
    converged: bool
    history: list = field(default_factory=list, repr=False)


def minimize_p(
    f: ScalarField,
    p: float,
    tol: float = 1e-8,
    warm_start: ScalarField | None = None,
    max_iter: int = 50_000,
    memory: int = 10,
    strict: bool = False,
    record: bool = False,
):
    """Minimize ``J_p`` for the datum ``f``.

    Stops once the dual gradient norm is at most ``tol * (1 + ||f||_2)``.
    Without ``warm_start`` the iteration starts from the mean of ``f``.

    Returns
    -------
    u : ScalarField
    info : SolveInfo
        Iterations, final energy and gradient norm; ``history`` holds the
        energy per iteration when ``record`` is set.

    Raises
    ------
    LineSearchStalled
        If backtracking shrinks the step below 1e-16.
    MaxIterExceeded
        If ``strict`` and ``max_iter`` iterations were not enough.
    """
    if p < 2:
        raise ValueError("p must be at least 2")
    if tol <= 0:
        raise ValueError("tol must be positive")
    grid = f.grid
    q = np.asarray(grid.weights, dtype=float)
    fv = np.asarray(f.values, dtype=float)
    ops, vol = cell_operators(grid)
    if warm_start is None:
        x = np.full_like(fv, f.mean())
    else:
        check_same_grid(warm_start, f)
        x = np.array(warm_start.values, dtype=float)
    target = tol * (1.0 + f.l2())

    e, g = _energy_and_gradient(x, fv, q, ops, vol, p)
    if not np.isfinite(e):
        raise NonFiniteEnergy(f"J_p is not finite at the starting point (p={p})")
    hist = [e] if record else []
    S: deque = deque(maxlen=memory)
    Y: deque = deque(maxlen=memory)
    RHO: deque = deque(maxlen=memory)
    gnorm = float(np.sqrt(np.sum(g * g / q)))
    it = 0
    while gnorm > target and it < max_iter:
        # two-loop recursion, initial inverse Hessian gamma * diag(1/q)
        d = g.copy()
        alphas = []
        for s, y, rho in zip(reversed(S), reversed(Y), reversed(RHO)):
            a = rho * np.dot(s, d)
            alphas.append(a)
            d -= a * y
        if S:
            y = Y[-1]
            gamma = np.dot(S[-1], y) / np.dot(y, y / q)
        else:
            gamma = 1.0 / max(gnorm, 1.0)
        d = gamma * d / q
        for (s, y, rho), a in zip(zip(S, Y, RHO), reversed(alphas)):
            b = rho * np.dot(y, d)
            d += (a - b) * s
        d = -d
        slope = np.dot(g, d)
        if slope >= 0:
            S.clear(), Y.clear(), RHO.clear()
            d = -g / q / max(gnorm, 1.0)
            slope = np.dot(g, d)

        t = 1.0
        while True:
            xn = x + t * d
            en, gn = _energy_and_gradient(xn, fv, q, ops, vol, p)
            if np.isfinite(en):
                drop = en - e
                if abs(drop) <= 1e-10 * abs(e):
                    # energy difference lost in roundoff: use the trapezoid
                    # of the directional derivatives instead
                    drop = 0.5 * t * (slope + np.dot(gn, d))
                if drop <= 1e-4 * t * slope:
                    break
            t *= 0.5
            if t < 1e-16:
                raise LineSearchStalled(
                    f"line search stalled at p={p} after {it} iterations "
                    f"(gradient norm {gnorm:.3g}, target {target:.3g})"
                )
        s = xn - x
        y = gn - g
        sy = np.dot(s, y)
        if sy > 1e-300:
            S.append(s)
            Y.append(y)
            RHO.append(1.0 / sy)
        x, e, g = xn, en, gn
        gnorm = float(np.sqrt(np.sum(g * g / q)))
        it += 1
        if record:
            hist.append(e)

    converged = gnorm <= target
    u = f.with_values(x)
    info = SolveInfo(it, float(e), gnorm, converged, hist)
    if not converged:
        logger.warning("minimize_p(p=%g) stopped after %d iterations, |g|=%.3g", p, it, gnorm)
        if strict:
            raise MaxIterExceeded(f"no convergence in {max_iter} iterations", result=(u, info))
    return u, info


def cell_gradient_norm(v: ScalarField, p: float) -> float:
    """``(sum_cells vol * |grad v|^p)^(1/p)``, evaluated with scaling to avoid overflow."""
    ops, vol = cell_operators(v.grid)
    comps = [G @ v.values for G in ops]
    mag = np.sqrt(sum(c**2 for c in comps))
    top = float(mag.max()) if mag.size else 0.0
    if top == 0.0:
        return 0.0
    return top * float(np.sum(vol * (mag / top) ** p)) ** (1.0 / p)


@dataclass(frozen=True)
class SweepRow:
    p: float
    sup_distance: float
    sup_norm: float
    gradient_norm: float
    mean_offset: float
    iterations: int
    l2_norm: float
    gradient_bound: float
    converged: bool


@dataclass(frozen=True)
class PSweepReport:
    rows: tuple
    datum_l2: float
    datum_linf: float
    datum_l1: float

    def __post_init__(self):
        ps = [r.p for r in self.rows]
        if any(b <= a for a, b in zip(ps, ps[1:])):
            raise ValueError("p values must be strictly increasing")

    @property
    def ps(self) -> np.ndarray:
        return np.array([r.p for r in self.rows])

    @property
    def sup_distances(self) -> np.ndarray:
        return np.array([r.sup_distance for r in self.rows])

    def check_estimates(self, slack: float = 0.1, mean_tol: float = 1e-6) -> dict:
        """Pass/fail of the a priori bounds for every row."""
        return {
            "l2": all(r.l2_norm <= self.datum_l2 * (1 + 1e-12) for r in self.rows),
            "gradient": all(r.gradient_norm <= (1 + slack) * r.gradient_bound for r in self.rows),
            "sup": all(r.sup_norm <= self.datum_linf * (1 + 1e-9) for r in self.rows),
            "mean": all(abs(r.mean_offset) <= mean_tol * max(self.datum_l1, 1e-300) for r in self.rows),
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(
            ["p", "sup_distance", "sup_norm", "grad_lp_norm", "mean_offset", "iterations",
             "l2_norm", "grad_bound", "converged"]
        )
        for r in self.rows:
            w.writerow(
                [f"{r.p:.17g}", f"{r.sup_distance:.17g}", f"{r.sup_norm:.17g}",
                 f"{r.gradient_norm:.17g}", f"{r.mean_offset:.17g}", r.iterations,
                 f"{r.l2_norm:.17g}", f"{r.gradient_bound:.17g}", int(r.converged)]
            )
        return buf.getvalue()


def reference_projection(f: ScalarField) -> ScalarField:
    """Exact DP projection in 1D, Dykstra on the stencil graph otherwise."""
    if f.grid.dim == 1:
        from .lip1d import project_lip_1d

        return project_lip_1d(f)
    from .projector import project_lip_graph

    return project_lip_graph(f)[0]


def p_sweep(
    f: ScalarField,
    ps=(4, 8, 16, 32, 64),
    tol: float = 1e-8,
    warm: bool = True,
    max_iter: int = 50_000,
    projection: ScalarField | None = None,
) -> PSweepReport:
    """Solve ``J_p`` for increasing ``p`` and tabulate convergence to the projection."""
    ps = [float(p) for p in ps]
    if not ps or any(p < 2 for p in ps) or any(b <= a for a, b in zip(ps, ps[1:])):
        raise ValueError("ps must be strictly increasing and each at least 2")
    proj = reference_projection(f) if projection is None else projection
    f2 = f.l2()
    rows = []
    u = None
    for p in ps:
        u, info = minimize_p(f, p, tol=tol, warm_start=u if warm else None, max_iter=max_iter)
        rows.append(
            SweepRow(
                p=p,
                sup_distance=float(np.max(np.abs(u.values - proj.values))),
                sup_norm=u.linf(),
                gradient_norm=cell_gradient_norm(u, p),
                mean_offset=(u - f).mean(),
                iterations=info.iterations,
                l2_norm=u.l2(),
                gradient_bound=(p * f2 * f2) ** (1.0 / p),
                converged=info.converged,
            )
        )
    return PSweepReport(tuple(rows), f2, f.linf(), f.l1())
