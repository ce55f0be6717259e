"""Discrete checks of the limit equations satisfied by the projection.

Sign convention: ``Omega+ = {u - f > tau}`` and ``Omega- = {u - f < -tau}``.
In ``Omega-`` the solution is a minimum of upward cones, so the
Rouy-Tourin upwind gradient is applied to ``u``; in ``Omega+`` it is a
maximum of downward cones and the same scheme is applied to ``-u``.
Pointwise residuals do not vanish at kinks, so statistics skip a collar
of nodes around region boundaries and around ridges, where the cones from
two distinct base points meet.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import GridMismatch
from .grid import Grid, ScalarField, check_same_grid
from .metric import label_setting, origin_ridge


def grow(grid: Grid, mask, steps: int = 1) -> np.ndarray:
    """Dilate a node mask by ``steps`` stencil hops."""
    out = np.asarray(mask, dtype=bool).copy()
    src, dst, _ = grid.directed_edges()
    for _ in range(steps):
        nxt = out.copy()
        np.logical_or.at(nxt, src, out[dst])
        out = nxt
    return out


def region_boundary(grid: Grid, region) -> np.ndarray:
    """Nodes of ``region`` with a stencil neighbour outside it, or on the domain boundary."""
    region = np.asarray(region, dtype=bool)
    src, dst, _ = grid.directed_edges()
    edge = np.zeros(grid.num_nodes, dtype=bool)
    np.logical_or.at(edge, src, ~region[dst])
    return region & (edge | grid.boundary)


def _stats(values, mask) -> dict:
    v = np.asarray(values)[mask]
    if v.size == 0:
        return {"max": 0.0, "mean": 0.0, "count": 0}
    return {"max": float(v.max()), "mean": float(v.mean()), "count": int(v.size)}


@dataclass
class RegionReport:
    """Sign regions of ``u - f`` and their graph closures.

    ``plus``/``minus`` are the strict regions, ``a_plus``/``a_minus`` their
    closures (one stencil hop), ``bd_plus``/``bd_minus`` the domain boundary
    nodes in each strict region.
    """

    grid: Grid
    tau: float
    plus: np.ndarray
    minus: np.ndarray
    a_plus: np.ndarray
    a_minus: np.ndarray
    bd_plus: np.ndarray
    bd_minus: np.ndarray
    residuals: dict = field(default_factory=dict)

    def region(self, sign: int) -> np.ndarray:
        return self.plus if sign > 0 else self.minus

    def closure(self, sign: int) -> np.ndarray:
        return self.a_plus if sign > 0 else self.a_minus

    def summary(self) -> dict:
        out = {"tau": self.tau}
        for name in ("plus", "minus", "a_plus", "a_minus", "bd_plus", "bd_minus"):
            out[name] = int(np.count_nonzero(getattr(self, name)))
        if self.grid.dim == 1:
            x = self.grid.coords[:, 0]
            for name in ("plus", "minus"):
                m = getattr(self, name)
                out[f"{name}_extent"] = [float(x[m].min()), float(x[m].max())] if m.any() else None
        out["residuals"] = self.residuals
        return out

    def to_json(self) -> str:
        return json.dumps(self.summary(), sort_keys=True, indent=1)


def default_tau(grid: Grid) -> float:
    return max(1e-6, grid.hmax)


def regions(u: ScalarField, f: ScalarField, tau: float | None = None) -> RegionReport:
    """Threshold ``u - f`` at ``+-tau`` (default ``max(1e-6, h)``)."""
    grid = check_same_grid(u, f)
    tau = default_tau(grid) if tau is None else float(tau)
    if tau < 0:
        raise ValueError("tau must be nonnegative")
    d = u.values - f.values
    plus = d > tau
    minus = d < -tau
    return RegionReport(
        grid, tau, plus, minus, grow(grid, plus), grow(grid, minus),
        plus & grid.boundary, minus & grid.boundary,
    )


def forced_regions(grid: Grid, plus=None, minus=None, tau: float = 0.0) -> RegionReport:
    """Region report with prescribed node sets (for testing the detectors)."""
    z = np.zeros(grid.num_nodes, dtype=bool)
    plus = z if plus is None else np.asarray(plus, dtype=bool)
    minus = z if minus is None else np.asarray(minus, dtype=bool)
    return RegionReport(
        grid, tau, plus, minus, grow(grid, plus), grow(grid, minus),
        plus & grid.boundary, minus & grid.boundary,
    )


def _axis_offsets(dim):
    return [tuple(int(k == d) for k in range(dim)) for d in range(dim)]


def upwind_gradient(u, grid: Grid | None = None) -> np.ndarray:
    """Rouy-Tourin magnitude ``sqrt(sum_d max(D-_d u, -D+_d u, 0)^2)``.

    Differences towards missing neighbours are dropped.
    """
    if isinstance(u, ScalarField):
        grid, u = u.grid, u.values
    u = np.asarray(u, dtype=float)
    total = np.zeros(grid.num_nodes)
    for d, e in enumerate(_axis_offsets(grid.dim)):
        h = grid.h[d]
        term = np.zeros(grid.num_nodes)
        back = grid.axis_neighbor(tuple(-k for k in e))
        fwd = grid.axis_neighbor(e)
        ok = back >= 0
        term[ok] = np.maximum(term[ok], (u[ok] - u[back[ok]]) / h)
        ok = fwd >= 0
        term[ok] = np.maximum(term[ok], -(u[fwd[ok]] - u[ok]) / h)
        total += term**2
    return np.sqrt(total)


def oriented_gradient(u: ScalarField, report: RegionReport) -> np.ndarray:
    """Upwind gradient of ``u`` on ``Omega-`` and of ``-u`` on ``Omega+`` (zero elsewhere)."""
    out = np.zeros(u.grid.num_nodes)
    out[report.minus] = upwind_gradient(u)[report.minus]
    out[report.plus] = upwind_gradient(-u)[report.plus]
    return out


def ridge_nodes(u: ScalarField, report: RegionReport, sign: int, spread: float = 3.0) -> np.ndarray:
    """Nodes of the closed region where cones from distant base points meet.

    The base point of every node is the minimizer of the cone formula over
    the region boundary, found by one label-setting pass.
    """
    grid = u.grid
    a = report.closure(sign)
    base = region_boundary(grid, a)
    if not base.any():
        return np.zeros(grid.num_nodes, dtype=bool)
    lab = np.full(grid.num_nodes, np.inf)
    lab[base] = -sign * u.values[base]
    _, origin = label_setting(grid, lab, return_origin=True)
    origin = np.where(a, origin, -1)
    return origin_ridge(grid, origin, spread) & a


def analysis_mask(u: ScalarField, report: RegionReport, sign: int, collar: int = 2,
                  exclude=None) -> np.ndarray:
    """Nodes of the strict region that are at least ``collar`` hops from its
    complement and from ridge nodes."""
    grid = u.grid
    region = report.region(sign)
    bad = grow(grid, ~region, collar) | grow(grid, ridge_nodes(u, report, sign), collar)
    if exclude is not None:
        bad |= np.asarray(exclude, dtype=bool)
    return region & ~bad


def eikonal_residual(u: ScalarField, report: RegionReport, collar: int = 2, exclude=None,
                     store: bool = True) -> dict:
    """``| |grad u| - 1 |`` on both regions, with collars and ridges excluded.

    Returns ``{"plus": stats, "minus": stats, "field": per-node residual}``
    where ``stats`` has ``max``, ``mean`` and ``count``; an empty region
    gives zero statistics.
    """
    if not u.grid.same_as(report.grid):
        raise GridMismatch("field and region report live on different grids")
    res = np.abs(oriented_gradient(u, report) - 1.0)
    out = {"field": res}
    for name, sign in (("plus", 1), ("minus", -1)):
        m = analysis_mask(u, report, sign, collar, exclude)
        out[name] = _stats(res, m)
        out[name + "_mask"] = m
    if store:
        report.residuals["eikonal"] = {"plus": out["plus"], "minus": out["minus"]}
    return out


def infinity_laplacian(u: ScalarField, normalized: bool = True) -> np.ndarray:
    """Two-extreme-neighbour approximation of the infinity Laplacian.

    ``(1/s^2) [max_y (u_y - u_x) s / l_xy + min_y (u_y - u_x) s / l_xy]``
    with ``s = hmax``: the second derivative along the steepest direction
    (the normalized operator).  With ``normalized=False`` it is multiplied
    by the squared central-difference gradient, giving ``<D^2u Du, Du>``.
    """
    grid = u.grid
    s = grid.hmax
    src, dst, ln = grid.directed_edges()
    slope = (u.values[dst] - u.values[src]) / ln
    hi = np.full(grid.num_nodes, -np.inf)
    lo = np.full(grid.num_nodes, np.inf)
    np.maximum.at(hi, src, slope)
    np.minimum.at(lo, src, slope)
    lap = (hi + lo) / s
    lap[~np.isfinite(lap)] = 0.0
    if normalized:
        return lap
    return lap * central_gradient(u) ** 2


def central_gradient(u: ScalarField) -> np.ndarray:
    """Euclidean norm of the central (one-sided at the boundary) difference gradient."""
    grid = u.grid
    total = np.zeros(grid.num_nodes)
    for d, e in enumerate(_axis_offsets(grid.dim)):
        back = grid.axis_neighbor(tuple(-k for k in e))
        fwd = grid.axis_neighbor(e)
        i0 = np.where(back >= 0, back, np.arange(grid.num_nodes))
        i1 = np.where(fwd >= 0, fwd, np.arange(grid.num_nodes))
        span = (i1 != np.arange(grid.num_nodes)).astype(float) + (i0 != np.arange(grid.num_nodes))
        g = np.zeros(grid.num_nodes)
        ok = span > 0
        g[ok] = (u.values[i1[ok]] - u.values[i0[ok]]) / (span[ok] * grid.h[d])
        total += g**2
    return np.sqrt(total)


def infinity_laplacian_residual(u: ScalarField, normalized: bool = True) -> ScalarField:
    """Per-node ``Delta_inf u`` as a field (raw, unsigned by region)."""
    return u.with_values(infinity_laplacian(u, normalized))


def combined_residual(u: ScalarField, report: RegionReport, collar: int = 2, exclude=None) -> dict:
    """Residual of the equivalent second-order form.

    ``max{1 - |grad u|, -Delta_inf u}`` on ``Omega+`` and
    ``min{|grad u| - 1, -Delta_inf u}`` on ``Omega-``, in absolute value,
    next to the eikonal residual on the same nodes.
    """
    grad = oriented_gradient(u, report)
    lap = infinity_laplacian(u)
    eik = np.abs(grad - 1.0)
    comb = np.zeros(u.grid.num_nodes)
    comb[report.plus] = np.abs(np.maximum(1.0 - grad, -lap))[report.plus]
    comb[report.minus] = np.abs(np.minimum(grad - 1.0, -lap))[report.minus]
    out = {"field": comb}
    for name, sign in (("plus", 1), ("minus", -1)):
        m = analysis_mask(u, report, sign, collar, exclude)
        out[name] = _stats(comb, m)
        out[name + "_excess"] = float(np.max(comb[m] - eik[m])) if m.any() else 0.0
        out[name + "_mask"] = m
    report.residuals["combined"] = {k: out[k] for k in ("plus", "minus", "plus_excess", "minus_excess")}
    return out


def normal_derivative(u: ScalarField) -> np.ndarray:
    """Outward normal derivative at boundary nodes, one-sided from inside.

    Uses the difference quotient towards the stencil neighbour best aligned
    with the inward normal; zero away from the boundary.
    """
    grid = u.grid
    out = np.zeros(grid.num_nodes)
    for i in grid.boundary_nodes:
        nbr, ln = grid.neighbors(i)
        if nbr.size == 0:
            continue
        step = grid.coords[nbr] - grid.coords[i]
        align = -(step @ grid.normals[i]) / ln
        k = int(np.argmax(align))
        out[i] = (u.values[i] - u.values[nbr[k]]) / ln[k]
    return out


@dataclass
class BoundaryCheck:
    slack: float
    rows: list

    @property
    def passed(self) -> bool:
        return all(r["violations"] == 0 for r in self.rows)

    def to_dict(self) -> dict:
        return {"slack": self.slack, "passed": self.passed, "conditions": self.rows}


def boundary_condition_check(u: ScalarField, f: ScalarField, report: RegionReport | None = None,
                             slack: float | None = None) -> BoundaryCheck:
    """Evaluate the four boundary inequalities with slack ``3h``.

    On ``(dOmega)+``: ``1 - |grad u| <= 0`` and ``max{1 - |grad u|, du/dnu} >= 0``.
    On ``(dOmega)-``: ``|grad u| - 1 >= 0`` and ``min{|grad u| - 1, du/dnu} <= 0``.
    """
    grid = check_same_grid(u, f)
    report = regions(u, f) if report is None else report
    s = 3 * grid.hmax if slack is None else slack
    grad = oriented_gradient(u, report)
    dn = normal_derivative(u)
    bp, bm = report.bd_plus, report.bd_minus
    conds = [
        ("plus: 1-|Du| <= 0", bp, 1.0 - grad, lambda v: v <= s),
        ("plus: max{1-|Du|, du/dn} >= 0", bp, np.maximum(1.0 - grad, dn), lambda v: v >= -s),
        ("minus: |Du|-1 >= 0", bm, grad - 1.0, lambda v: v >= -s),
        ("minus: min{|Du|-1, du/dn} <= 0", bm, np.minimum(grad - 1.0, dn), lambda v: v <= s),
    ]
    rows = []
    for name, where, val, ok in conds:
        v = val[where]
        bad = np.flatnonzero(where)[~ok(v)]
        rows.append({
            "condition": name,
            "nodes": int(v.size),
            "violations": int(bad.size),
            "worst": float(v.max() if "<=" in name else v.min()) if v.size else None,
            "violating_nodes": bad[:20].tolist(),
        })
    report.residuals["boundary"] = {r["condition"]: r["violations"] for r in rows}
    return BoundaryCheck(s, rows)


def max_stencil_slope(u: ScalarField) -> float:
    """Largest ``|u_y - u_x| / l_xy`` over stencil edges.

    A value at most 1 means both ``1 - |grad u| >= 0`` and ``|grad u| - 1 <= 0``
    hold along every stencil direction.
    """
    g = u.grid
    if g.num_edges == 0:
        return 0.0
    d = np.abs(u.values[g.edges[:, 0]] - u.values[g.edges[:, 1]]) / g.lengths
    return float(d.max())


def double_inequality_check(u: ScalarField, tol: float = 1e-6) -> dict:
    slope = max_stencil_slope(u)
    rt = float(np.max(np.maximum(upwind_gradient(u), upwind_gradient(-u))))
    return {"max_slope": slope, "upwind_max": rt, "passed": slope <= 1.0 + tol}
