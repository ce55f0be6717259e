"""Exact 1D projection onto Lipschitz-bounded sequences.

Solves::

    minimize   sum_i  w_i/2 (v_i - f_i)^2
    subject to |v_{i+1} - v_i| <= b_i

by forward dynamic programming over convex piecewise-quadratic value
functions ``V_i`` followed by backtracking.  The derivative ``V_i'`` is a
continuous, increasing, piecewise-linear function; it is stored as two
stacks of knots (left and right of the current minimiser) with lazy affine
offsets, so that

* the min-convolution with the interval ``[-b, b]`` shifts the left stack
  by ``-b``, the right stack by ``+b`` and inserts two zero knots, and
* adding the next quadratic term adds ``w (v - f)`` to every knot,

both in O(1).  Locating the new minimiser walks knots between the stacks.
The minimum value of every prefix is tracked along the walk, which yields
all segment costs ``[i, j]`` of a fixed start ``i`` in one pass.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit
from scipy.ndimage import minimum_filter1d

from .errors import IndexOutOfRange, NonConvexValueFunction, UnsupportedExponent
from .grid import ScalarField

_OK = 0
_NONCONVEX = 1


@njit(cache=True)
def _dp_kernel(f, w, b, stop, want_state):
    n = f.shape[0]
    cap = 2 * n + 4
    lx = np.empty(cap)
    ly = np.empty(cap)
    rx = np.empty(cap)
    ry = np.empty(cap)
    nl = 0
    nr = 0
    # true x = xs + X ; true y = ys + C * xs + Y
    LX = 0.0
    LC = 0.0
    LY = 0.0
    RX = 0.0
    RC = 0.0
    RY = 0.0
    sL = w[0]
    sR = w[0]
    mins = np.empty(n)
    argm = np.empty(n)
    argm[0] = f[0]
    mins[0] = 0.0
    status = 0
    last = stop if stop < n else n - 1
    for j in range(1, last + 1):
        m = argm[j - 1]
        bj = b[j - 1]
        LX -= bj
        RX += bj
        xs = (m - bj) - LX
        lx[nl] = xs
        ly[nl] = 0.0 - LC * xs - LY
        nl += 1
        xs = (m + bj) - RX
        rx[nr] = xs
        ry[nr] = 0.0 - RC * xs - RY
        nr += 1

        wj = w[j]
        fj = f[j]
        LC += wj
        LY += wj * (LX - fj)
        RC += wj
        RY += wj * (RX - fj)
        sL += wj
        sR += wj

        xl = lx[nl - 1] + LX
        yl = ly[nl - 1] + LC * lx[nl - 1] + LY
        xr = rx[nr - 1] + RX
        yr = ry[nr - 1] + RC * rx[nr - 1] + RY
        integ = 0.0
        if yl > 0.0:
            a = xl
            while True:
                # move the left top to the right stack
                nl -= 1
                xs = xl - RX
                rx[nr] = xs
                ry[nr] = yl - RC * xs - RY
                nr += 1
                if nl == 0:
                    mj = xl - yl / sL
                    integ -= 0.5 * yl * (xl - mj)
                    break
                x2 = lx[nl - 1] + LX
                y2 = ly[nl - 1] + LC * lx[nl - 1] + LY
                if x2 > xl + 1e-12 * (1.0 + abs(xl)) or y2 > yl + 1e-9 * (1.0 + abs(yl)):
                    status = _NONCONVEX
                if y2 > 0.0:
                    integ -= 0.5 * (y2 + yl) * (xl - x2)
                    xl = x2
                    yl = y2
                    continue
                if yl - y2 > 0.0:
                    mj = x2 - y2 * (xl - x2) / (yl - y2)
                else:
                    mj = x2
                integ -= 0.5 * yl * (xl - mj)
                break
        elif yr < 0.0:
            a = xr
            while True:
                nr -= 1
                xs = xr - LX
                lx[nl] = xs
                ly[nl] = yr - LC * xs - LY
                nl += 1
                if nr == 0:
                    mj = xr - yr / sR
                    integ += 0.5 * yr * (mj - xr)
                    break
                x2 = rx[nr - 1] + RX
                y2 = ry[nr - 1] + RC * rx[nr - 1] + RY
                if x2 < xr - 1e-12 * (1.0 + abs(xr)) or y2 < yr - 1e-9 * (1.0 + abs(yr)):
                    status = _NONCONVEX
                if y2 < 0.0:
                    integ += 0.5 * (y2 + yr) * (x2 - xr)
                    xr = x2
                    yr = y2
                    continue
                if y2 - yr > 0.0:
                    mj = xr - yr * (x2 - xr) / (y2 - yr)
                else:
                    mj = xr
                integ += 0.5 * yr * (mj - xr)
                break
        else:
            a = xl
            if yr - yl > 0.0:
                mj = xl - yl * (xr - xl) / (yr - yl)
            else:
                mj = xl
            integ = 0.5 * yl * (mj - xl)
        argm[j] = mj
        mins[j] = mins[j - 1] + 0.5 * wj * (a - fj) ** 2 + integ

    u = np.empty(n)
    kx = np.empty(0)
    ky = np.empty(0)
    if last == n - 1:
        u[n - 1] = argm[n - 1]
        for j in range(n - 2, -1, -1):
            lo = u[j + 1] - b[j]
            hi = u[j + 1] + b[j]
            mj = argm[j]
            u[j] = lo if mj < lo else (hi if mj > hi else mj)
    if want_state:
        kx = np.empty(nl + nr)
        ky = np.empty(nl + nr)
        for k in range(nl):
            kx[k] = lx[k] + LX
            ky[k] = ly[k] + LC * lx[k] + LY
        for k in range(nr):
            kx[nl + k] = rx[nr - 1 - k] + RX
            ky[nl + k] = ry[nr - 1 - k] + RC * rx[nr - 1 - k] + RY
    return u, mins, argm, status, kx, ky, sL, sR


@njit(cache=True)
def _segment_table_l2(f, w, b):
    n = f.shape[0]
    table = np.full((n, n), np.inf)
    worst = 0
    for i in range(n):
        _, mins, _, status, _, _, _, _ = _dp_kernel(f[i:], w[i:], b[i:], n, False)
        if status > worst:
            worst = status
        for j in range(i, n):
            table[i, j] = mins[j - i]
    return table, worst


def _as_arrays(f, L, weights):
    if isinstance(f, ScalarField):
        if f.grid.dim != 1:
            raise ValueError("1D grid required")
        vals = np.asarray(f.values, dtype=float)
        w = np.asarray(f.grid.weights if weights is None else weights, dtype=float)
        h = f.grid.h[0]
    else:
        vals = np.asarray(f, dtype=float)
        w = np.ones_like(vals) if weights is None else np.asarray(weights, dtype=float)
        h = 1.0
    if not L > 0:
        raise ValueError("Lipschitz bound must be positive")
    if w.shape != vals.shape or np.any(w <= 0):
        raise ValueError("weights must be positive, one per node")
    b = np.full(max(len(vals) - 1, 0), L * h)
    return vals, w, b


def lip_dp(values, weights, bounds):
    """Run the DP on raw arrays; returns ``(u, prefix_minima)``.

    ``bounds[i]`` limits ``|v[i+1] - v[i]|``.  ``prefix_minima[j]`` is the
    optimal objective of the sub-problem on nodes ``0..j``.
    """
    f = np.ascontiguousarray(values, dtype=float)
    w = np.ascontiguousarray(weights, dtype=float)
    b = np.ascontiguousarray(bounds, dtype=float)
    if len(f) == 1:
        return f.copy(), np.zeros(1)
    u, mins, _, status, *_ = _dp_kernel(f, w, b, len(f), False)
    if status != _OK:
        raise NonConvexValueFunction("value-function derivative lost monotonicity")
    return u, mins


def project_lip_1d(f, L: float = 1.0, weights=None):
    """Weighted L2 projection of a 1D field onto ``|v[i+1]-v[i]| <= L*h``.

    For a :class:`ScalarField` the grid quadrature weights are used and a
    field is returned; plain arrays use unit weights and unit spacing and an
    array is returned.
    """
    vals, w, b = _as_arrays(f, L, weights)
    if np.all(np.abs(np.diff(vals)) <= b):
        return f if isinstance(f, ScalarField) else vals.copy()
    u, _ = lip_dp(vals, w, b)
    return f.with_values(u) if isinstance(f, ScalarField) else u


@dataclass(frozen=True)
class PiecewiseQuadratic:
    """Convex piecewise-quadratic function ``a t^2 + b t + c`` per interval.

    ``pieces[k]`` is valid on ``[breakpoints[k-1], breakpoints[k]]`` with the
    first and last pieces extending to -inf and +inf.
    """

    breakpoints: np.ndarray
    pieces: np.ndarray
    convex: bool

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        k = np.searchsorted(self.breakpoints, t)
        a, b, c = self.pieces[k].T
        return a * t * t + b * t + c

    def check(self, rtol: float = 1e-12):
        """Raise :class:`NonConvexValueFunction` if an invariant fails."""
        scale = 1.0 + float(np.max(np.abs(self(self.breakpoints)))) if len(self.breakpoints) else 1.0
        if np.any(self.pieces[:, 0] < -rtol):
            raise NonConvexValueFunction("negative curvature on a piece")
        for k, t in enumerate(self.breakpoints):
            a0, b0, c0 = self.pieces[k]
            a1, b1, c1 = self.pieces[k + 1]
            v0, v1 = a0 * t * t + b0 * t + c0, a1 * t * t + b1 * t + c1
            if abs(v0 - v1) > 1e-9 * scale:
                raise NonConvexValueFunction(f"jump of {v1 - v0:g} at breakpoint {t:g}")
            if 2 * a1 * t + b1 < 2 * a0 * t + b0 - 1e-9 * scale:
                raise NonConvexValueFunction(f"slope decreases at breakpoint {t:g}")
        return self


def value_function(f, step: int, L: float = 1.0, weights=None) -> PiecewiseQuadratic:
    """The DP value function ``V_step`` as an explicit piecewise quadratic."""
    vals, w, b = _as_arrays(f, L, weights)
    if not 0 <= step < len(vals):
        raise IndexOutOfRange(f"step {step} outside 0..{len(vals) - 1}")
    _, mins, argm, status, kx, ky, sL, sR = _dp_kernel(vals, w, b, step, True)
    if status != _OK:
        raise NonConvexValueFunction("value-function derivative lost monotonicity")
    m, vmin = argm[step], mins[step]
    if step == 0:
        a = 0.5 * w[0]
        return PiecewiseQuadratic(np.empty(0), np.array([[a, -2 * a * m, a * m * m]]), True)
    # derivative D is linear between knots; integrate from the minimiser
    xs = kx
    ys = ky
    slopes = np.concatenate([[sL], np.diff(ys) / np.where(np.diff(xs) > 0, np.diff(xs), 1.0), [sR]])
    # D on piece k: slopes[k] * (t - xk) + yk, anchored at a knot of that piece
    anchors_x = np.concatenate([[xs[0]], xs])
    anchors_y = np.concatenate([[ys[0]], ys])
    pieces = np.empty((len(xs) + 1, 3))
    for k in range(len(xs) + 1):
        al = slopes[k]
        be = anchors_y[k] - al * anchors_x[k]
        pieces[k, 0] = 0.5 * al
        pieces[k, 1] = be
    # fix constants by continuity, starting from the piece holding m
    km = int(np.searchsorted(xs, m))
    a_, b_ = pieces[km, :2]
    pieces[km, 2] = vmin - (a_ * m * m + b_ * m)
    for k in range(km + 1, len(xs) + 1):
        t = xs[k - 1]
        prev = pieces[k - 1]
        pieces[k, 2] = prev[0] * t * t + prev[1] * t + prev[2] - (pieces[k, 0] * t * t + pieces[k, 1] * t)
    for k in range(km - 1, -1, -1):
        t = xs[k]
        nxt = pieces[k + 1]
        pieces[k, 2] = nxt[0] * t * t + nxt[1] * t + nxt[2] - (pieces[k, 0] * t * t + pieces[k, 1] * t)
    return PiecewiseQuadratic(xs.copy(), pieces, True).check()


def _l1_value_axis_costs(vals, w, b, start, levels, want_row):
    """Discretised-level DP for the r=1 fidelity; minima of all prefixes from ``start``."""
    step = levels[1] - levels[0] if len(levels) > 1 else np.inf
    V = w[start] * np.abs(levels - vals[start])
    out = [float(V.min())]
    for j in range(start + 1, len(vals) if want_row else start + 1):
        rad = int(np.floor(b[j - 1] / step * (1 + 1e-12))) if np.isfinite(step) else 0
        if rad > 0:
            V = minimum_filter1d(V, size=2 * rad + 1, mode="nearest")
        V = V + w[j] * np.abs(levels - vals[j])
        out.append(float(V.min()))
    return np.array(out)


def _l1_levels(lo, hi, b, count):
    """About ``count`` levels covering ``[lo, hi]``; the spacing divides ``b``
    when the bounds are uniform, so slope constraints stay exact on the lattice."""
    if len(b) and np.all(b == b[0]):
        m = max(1, int(np.ceil((count - 1) * b[0] / (hi - lo))))
        step = b[0] / m
        k = int(np.ceil((hi - lo) / step - 1e-9))
        return lo + step * np.arange(k + 1)
    return np.linspace(lo, hi, count)


def _l1_costs(vals, w, b, start, stop, lo, hi, levels0=1024, tol=1e-4, max_refine=8):
    if hi - lo <= 0:
        return np.zeros(stop - start + 1)
    k = levels0
    prev = None
    for _ in range(max_refine):
        levels = _l1_levels(lo, hi, b, k)
        cur = _l1_value_axis_costs(vals[: stop + 1], w[: stop + 1], b, start, levels, True)
        if prev is not None and np.max(np.abs(cur - prev)) < tol:
            return cur
        prev = cur
        k = 2 * (k - 1) + 1
    return prev


def segment_cost(f: ScalarField, i: int, j: int, r: int = 2, L: float = 1.0) -> float:
    """Best fidelity ``(1/r) sum w |v - f|^r`` over L-Lipschitz ``v`` on nodes ``i..j``.

    Weights are the whole-grid quadrature weights restricted to the slice,
    so that costs of a partition add up to a whole-domain integral.
    """
    n = f.grid.num_nodes
    if not (0 <= i <= j < n):
        raise IndexOutOfRange(f"slice [{i}, {j}] outside 0..{n - 1}")
    if r not in (1, 2):
        raise UnsupportedExponent(f"r={r} not supported (use 1 or 2)")
    if i == j:
        return 0.0
    vals, w, b = _as_arrays(f, L, None)
    seg = slice(i, j + 1)
    if np.all(np.abs(np.diff(vals[seg])) <= b[i:j]):
        return 0.0
    if r == 2:
        _, mins = lip_dp(vals[seg], w[seg], b[i:j])
        return float(mins[-1])
    sv = vals[seg]
    costs = _l1_costs(sv, w[seg], b[i:j], 0, j - i, sv.min(), sv.max())
    return float(costs[-1])


def segment_cost_table(f: ScalarField, r: int = 2, L: float = 1.0) -> np.ndarray:
    """``table[i, j] = segment_cost(f, i, j, r)`` for all ``i <= j`` (inf below the diagonal)."""
    if r not in (1, 2):
        raise UnsupportedExponent(f"r={r} not supported (use 1 or 2)")
    vals, w, b = _as_arrays(f, L, None)
    n = len(vals)
    if r == 2:
        table, status = _segment_table_l2(vals, w, b)
        if status != _OK:
            raise NonConvexValueFunction("value-function derivative lost monotonicity")
        return table
    table = np.full((n, n), np.inf)
    lo, hi = vals.min(), vals.max()
    for i in range(n):
        table[i, i:] = _l1_costs(vals, w, b, i, n - 1, lo, hi)
        table[i, i] = 0.0
    return table
