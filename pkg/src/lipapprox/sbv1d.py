"""Exact 1D minimization of fidelity plus jump count under a slope bound.

A candidate is a set of jump bonds (between consecutive nodes) and a
1-Lipschitz field on every segment between jumps.  Its energy is

    sum_segments (1/r) sum_i w_i |v_i - f_i|^r  +  penalty * #jumps

and the optimum is a shortest path over segment end points using the
table of best segment costs.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

from .errors import InfeasibleSegment, UnsupportedExponent
from .grid import ScalarField
from .lip1d import lip_dp, segment_cost_table


@dataclass(frozen=True)
class JumpSolution:
    """Optimal jump set and fields.

    ``jumps`` holds bond indices: bond ``k`` separates nodes ``k`` and
    ``k + 1``.  ``segments`` lists inclusive node ranges.
    """

    f: ScalarField
    jumps: tuple
    segments: tuple
    values: np.ndarray
    fidelity: float
    penalty: float
    r: int

    @property
    def njumps(self) -> int:
        return len(self.jumps)

    @property
    def energy(self) -> float:
        return self.fidelity + self.penalty * self.njumps

    @property
    def jump_positions(self) -> list:
        x = self.f.x
        return [0.5 * (x[k] + x[k + 1]) for k in self.jumps]

    @property
    def field(self) -> ScalarField:
        return self.f.with_values(self.values)

    def to_dict(self) -> dict:
        return {
            "jumps": self.jump_positions,
            "bonds": list(self.jumps),
            "energy": self.energy,
            "fidelity": self.fidelity,
            "njumps": self.njumps,
            "penalty": self.penalty,
            "r": self.r,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=1)

    def segments_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["segment", "x", "value"])
        x = self.f.x
        for s, (i, j) in enumerate(self.segments):
            for k in range(i, j + 1):
                w.writerow([s, f"{x[k]:.17g}", f"{self.values[k]:.17g}"])
        return buf.getvalue()


def _segment_field(vals, w, b, r):
    n = len(vals)
    if n == 1 or np.all(np.abs(np.diff(vals)) <= b):
        return vals.copy()
    if r == 2:
        return lip_dp(vals, w, b)[0]
    # r = 1: LP in (v, t) with t >= |v - f|
    c = np.concatenate([np.zeros(n), w])
    eye = np.eye(n)
    diff = eye[1:] - eye[:-1]
    z = np.zeros((n - 1, n))
    A = np.block([[eye, -eye], [-eye, -eye], [diff, z], [-diff, z]])
    ub = np.concatenate([vals, -vals, b, b])
    res = linprog(c, A_ub=A, b_ub=ub, bounds=[(None, None)] * (2 * n), method="highs")
    if not res.success:
        raise RuntimeError(f"segment LP failed: {res.message}")
    return res.x[:n]


def _fidelity(v, f, w, r):
    return float(np.sum(w * np.abs(v - f) ** r) / r)


def minimize_sbv_1d(f: ScalarField, r: int = 2, penalty: float = 1.0, table=None) -> JumpSolution:
    """Globally optimal jump set for the discrete functional.

    Among configurations whose energies agree to 1e-12 (relative), fewer
    jumps win, then the one whose last jump is leftmost.  ``table`` may
    pass a precomputed :func:`segment_cost_table`.
    """
    if f.grid.dim != 1:
        raise ValueError("1D grid required")
    if r not in (1, 2):
        raise UnsupportedExponent(f"r={r} not supported (use 1 or 2)")
    if not penalty > 0:
        raise ValueError("penalty must be positive")
    n = f.grid.num_nodes
    T = segment_cost_table(f, r) if table is None else np.asarray(table)
    best = np.empty(n)
    count = np.empty(n, dtype=np.int64)
    start = np.empty(n, dtype=np.int64)
    entry = np.empty(n)  # cost before a segment starting at node i
    entry_count = np.empty(n, dtype=np.int64)
    entry[0], entry_count[0] = 0.0, 0
    for j in range(n):
        cand = entry[: j + 1] + T[: j + 1, j]
        lo = cand.min()
        tie = np.flatnonzero(cand <= lo + 1e-12 * max(1.0, abs(lo)))
        k = tie[np.argmin(entry_count[tie])]
        best[j], count[j], start[j] = cand[k], entry_count[k], k
        if j + 1 < n:
            entry[j + 1] = best[j] + penalty
            entry_count[j + 1] = count[j] + 1

    segs = []
    j = n - 1
    while j >= 0:
        i = int(start[j])
        segs.append((i, j))
        j = i - 1
    segs.reverse()
    vals = np.asarray(f.values, dtype=float)
    w = np.asarray(f.grid.weights, dtype=float)
    b = np.full(n - 1, f.grid.h[0])
    v = np.empty(n)
    for i, j in segs:
        v[i : j + 1] = _segment_field(vals[i : j + 1], w[i : j + 1], b[i:j], r)
    jumps = tuple(j for _, j in segs[:-1])
    return JumpSolution(f, jumps, tuple(segs), v, _fidelity(v, vals, w, r), float(penalty), r)


def sbv_energy(v, jumps, f: ScalarField, r: int = 2, penalty: float = 1.0,
               tol: float = 1e-9) -> float:
    """Energy of a candidate ``v`` with jumps on the given bonds.

    Raises :class:`InfeasibleSegment` if ``v`` exceeds slope 1 (plus
    ``tol``) on a bond that is not a jump.
    """
    vv = np.asarray(v.values if isinstance(v, ScalarField) else v, dtype=float)
    if vv.size == 0:
        return 0.0
    if vv.shape != (f.grid.num_nodes,):
        raise ValueError("v must have one value per node")
    if r not in (1, 2):
        raise UnsupportedExponent(f"r={r} not supported (use 1 or 2)")
    jumps = sorted(set(int(k) for k in jumps))
    free = np.ones(max(vv.size - 1, 0), dtype=bool)
    free[jumps] = False
    slope = np.abs(np.diff(vv)) / f.grid.h[0]
    bad = np.flatnonzero(free & (slope > 1.0 + tol))
    if bad.size:
        raise InfeasibleSegment(f"slope {slope[bad[0]]:.6g} > 1 on bond {bad[0]}")
    w = np.asarray(f.grid.weights, dtype=float)
    return _fidelity(vv, f.values, w, r) + penalty * len(jumps)


def finite_p_bound(energy: float, f: ScalarField, p: float) -> float:
    """Upper bound ``|Omega| / p + energy`` on the finite-p energy of a candidate
    whose gradient is at most 1 off its jump set."""
    return float(f.grid.weights.sum()) / p + energy


def threshold_scan(ks, n: int = 801, half_width: float = 0.5, extent=(-1.0, 1.0),
                   r: int = 2, penalty: float = 1.0):
    """Jump counts and energies of ``k * 1{|x| < half_width}`` over heights ``ks``.

    Returns ``(njumps, energies, k_star)`` where ``k_star`` is the first
    height with jumps (``nan`` if none).
    """
    from .data import case1
    from .grid import build_grid, field_from_function

    grid = build_grid(1, extent, n)
    nj, en = [], []
    for k in ks:
        sol = minimize_sbv_1d(field_from_function(grid, case1(k, half_width)), r, penalty)
        nj.append(sol.njumps)
        en.append(sol.energy)
    nj = np.array(nj)
    hit = np.flatnonzero(nj > 0)
    return nj, np.array(en), (float(ks[hit[0]]) if hit.size else float("nan"))
