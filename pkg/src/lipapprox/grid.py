"""Node-centred uniform grids on masked domains, and scalar fields on them.

A :class:`Grid` stores the masked node set of a 1D interval or a 2D box,
the stencil graph used as the discrete geodesic metric, boundary nodes with
outward normals, and trapezoid quadrature weights.  Nodes are numbered in
row-major order of the full index box, skipping unmasked nodes; axis 0 is
``x`` and axis 1 is ``y``.

Edge lengths are snapped to a dyadic lattice (a power of two roughly
``2**-44`` times the box diameter).  Sums of snapped lengths are then exact
in floating point, which makes shortest-path distances independent of the
direction in which a path is accumulated.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .errors import DegenerateExtent, DisconnectedDomain, GridMismatch, NonFiniteSample

STENCIL_1D = ((-1,), (1,))
STENCIL_8 = tuple(
    (di, dj) for di in (-1, 0, 1) for dj in (-1, 0, 1) if (di, dj) != (0, 0)
)
STENCIL_16 = STENCIL_8 + tuple(
    (a * s, b * t)
    for a, b in ((1, 2), (2, 1))
    for s in (-1, 1)
    for t in (-1, 1)
)

_QUANTUM_BITS = 44


def _frozen(a):
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Grid:
    """Immutable masked grid; build instances with :func:`build_grid`."""

    dim: int
    extent: tuple
    n: tuple
    h: tuple
    mask: np.ndarray
    stencil: tuple
    mask_kind: str
    node_index: np.ndarray = field(repr=False)
    multi_index: np.ndarray = field(repr=False)
    coords: np.ndarray = field(repr=False)
    edges: np.ndarray = field(repr=False)
    lengths: np.ndarray = field(repr=False)
    lengths_int: np.ndarray = field(repr=False)
    quantum: float = field(repr=False)
    adj_ptr: np.ndarray = field(repr=False)
    adj_nbr: np.ndarray = field(repr=False)
    adj_len: np.ndarray = field(repr=False)
    adj_len_int: np.ndarray = field(repr=False)
    boundary: np.ndarray = field(repr=False)
    normals: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)

    @property
    def num_nodes(self) -> int:
        return len(self.coords)

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    @property
    def hmax(self) -> float:
        return max(self.h)

    @property
    def boundary_nodes(self) -> np.ndarray:
        return np.flatnonzero(self.boundary)

    def neighbors(self, i: int):
        """Stencil neighbours of node ``i`` and the corresponding edge lengths."""
        lo, hi = self.adj_ptr[i], self.adj_ptr[i + 1]
        return self.adj_nbr[lo:hi], self.adj_len[lo:hi]

    def directed_edges(self):
        """Both orientations of every edge as ``(src, dst, length)`` arrays."""
        src = np.repeat(np.arange(self.num_nodes), np.diff(self.adj_ptr))
        return src, self.adj_nbr, self.adj_len

    def axis_neighbor(self, offset) -> np.ndarray:
        """Node id of ``node + offset`` for every node, -1 where it does not exist."""
        idx = self.multi_index + np.asarray(offset)
        ok = np.all((idx >= 0) & (idx < np.asarray(self.n)), axis=1)
        out = np.full(self.num_nodes, -1, dtype=np.int64)
        out[ok] = self.node_index[tuple(idx[ok].T)]
        return out

    def nearest_node(self, point) -> int:
        """Masked node closest (Euclidean) to ``point``."""
        p = np.atleast_1d(np.asarray(point, dtype=float))
        d2 = np.sum((self.coords - p) ** 2, axis=1)
        return int(np.argmin(d2))

    def same_as(self, other: "Grid") -> bool:
        return self is other or (
            self.dim == other.dim
            and self.n == other.n
            and self.extent == other.extent
            and self.stencil == other.stencil
            and np.array_equal(self.mask, other.mask)
        )

    def describe(self) -> dict:
        """Plain-dict summary used in provenance headers."""
        return {
            "dim": self.dim,
            "extent": [list(e) for e in self.extent],
            "n": list(self.n),
            "h": list(self.h),
            "mask": self.mask_kind,
            "stencil": len(self.stencil),
            "nodes": self.num_nodes,
            "edges": self.num_edges,
        }


def _box_mask(dim, extent, n, mask_spec):
    axes = [np.linspace(lo, hi, m) for (lo, hi), m in zip(extent, n)]
    pts = np.meshgrid(*axes, indexing="ij")
    if isinstance(mask_spec, np.ndarray) or (
        isinstance(mask_spec, (list, tuple)) and mask_spec and not isinstance(mask_spec[0], str)
    ):
        mask = np.asarray(mask_spec, dtype=bool)
        if mask.shape != tuple(n):
            raise ValueError(f"explicit mask has shape {mask.shape}, expected {tuple(n)}")
        return mask.copy(), "bitmap"
    kind = mask_spec[0] if isinstance(mask_spec, (list, tuple)) else mask_spec
    if kind == "full":
        return np.ones(tuple(n), dtype=bool), "full"
    if kind == "disk":
        _, center, radius = mask_spec
        center = np.atleast_1d(np.asarray(center, dtype=float))
        r2 = sum((p - c) ** 2 for p, c in zip(pts, center))
        tol = 1e-12 * radius * radius
        return r2 <= radius * radius + tol, f"disk(center={center.tolist()},R={radius})"
    if kind == "lshape":
        if dim != 2:
            raise ValueError("lshape mask needs a 2D grid")
        cx = 0.5 * (extent[0][0] + extent[0][1])
        cy = 0.5 * (extent[1][0] + extent[1][1])
        return ~((pts[0] > cx) & (pts[1] > cy)), "lshape"
    raise ValueError(f"unknown mask spec {mask_spec!r}")


def build_grid(dim: int, extent, n, mask_spec="full", stencil: int | None = None) -> Grid:
    """Build a masked uniform grid.

    Parameters
    ----------
    dim : int
        1 or 2.
    extent : sequence
        ``(lo, hi)`` for 1D, or one ``(lo, hi)`` pair per axis.  A single pair
        in 2D is reused for both axes.
    n : int or sequence of int
        Node count per axis, at least 3.
    mask_spec : str, tuple or ndarray
        ``"full"``, ``("disk", center, R)``, ``"lshape"`` (removes the
        quadrant ``x > cx and y > cy``), or an explicit boolean array of
        shape ``n``.
    stencil : int, optional
        2D only: 8 (default) or 16 neighbours.
    """
    if dim not in (1, 2):
        raise ValueError("dim must be 1 or 2")
    ext = np.asarray(extent, dtype=float)
    if ext.ndim == 1:
        ext = np.tile(ext, (dim, 1))
    if ext.shape != (dim, 2):
        raise ValueError(f"extent must give (lo, hi) for {dim} axes")
    extent_t = tuple((float(lo), float(hi)) for lo, hi in ext)
    for lo, hi in extent_t:
        if not hi > lo:
            raise DegenerateExtent(f"extent [{lo}, {hi}] has hi <= lo")
    n_t = tuple(int(m) for m in np.broadcast_to(np.asarray(n), (dim,)))
    if min(n_t) < 3:
        raise ValueError("need at least 3 nodes per axis")
    h_t = tuple((hi - lo) / (m - 1) for (lo, hi), m in zip(extent_t, n_t))

    if dim == 1:
        offsets = STENCIL_1D
    else:
        offsets = {None: STENCIL_8, 8: STENCIL_8, 16: STENCIL_16}.get(stencil)
        if offsets is None:
            raise ValueError("stencil must be 8 or 16")

    mask, kind = _box_mask(dim, extent_t, n_t, mask_spec)
    if mask.sum() < 2:
        raise DisconnectedDomain("mask needs at least two nodes")

    node_index = np.full(n_t, -1, dtype=np.int64)
    multi = np.argwhere(mask)
    node_index[tuple(multi.T)] = np.arange(len(multi))
    lo_vec = np.array([e[0] for e in extent_t])
    h_vec = np.array(h_t)
    coords = lo_vec + multi * h_vec
    V = len(multi)
    n_vec = np.array(n_t)

    diam = float(np.sqrt(np.sum((np.array([e[1] for e in extent_t]) - lo_vec) ** 2)))
    quantum = 2.0 ** (math.ceil(math.log2(diam)) - _QUANTUM_BITS)

    src_l, dst_l, len_l = [], [], []
    for off in offsets:
        off = np.array(off)
        idx = multi + off
        ok = np.all((idx >= 0) & (idx < n_vec), axis=1)
        nb = np.full(V, -1, dtype=np.int64)
        nb[ok] = node_index[tuple(idx[ok].T)]
        keep = nb >= 0
        src_l.append(np.flatnonzero(keep))
        dst_l.append(nb[keep])
        length = float(np.sqrt(np.sum((off * h_vec) ** 2)))
        len_l.append(np.full(keep.sum(), length))
    src = np.concatenate(src_l)
    dst = np.concatenate(dst_l)
    length = np.concatenate(len_l)
    length_int = np.rint(length / quantum).astype(np.int64)
    length = length_int * quantum

    order = np.lexsort((dst, src))
    src, dst, length, length_int = src[order], dst[order], length[order], length_int[order]
    adj_ptr = np.zeros(V + 1, dtype=np.int64)
    np.add.at(adj_ptr, src + 1, 1)
    adj_ptr = np.cumsum(adj_ptr)

    und = src < dst
    edges = np.stack([src[und], dst[und]], axis=1)
    e_len, e_len_int = length[und], length_int[und]

    graph = coo_matrix((np.ones(len(src)), (src, dst)), shape=(V, V))
    ncomp, _ = connected_components(graph, directed=False)
    if ncomp != 1:
        raise DisconnectedDomain(f"masked region has {ncomp} edge-connected components")

    # boundary detection always uses the 3^dim neighbourhood
    near = [o for o in itertools.product((-1, 0, 1), repeat=dim) if any(o)]
    normal_sum = np.zeros((V, dim))
    boundary = np.zeros(V, dtype=bool)
    for off in near:
        off = np.array(off)
        idx = multi + off
        ok = np.all((idx >= 0) & (idx < n_vec), axis=1)
        present = np.zeros(V, dtype=bool)
        present[ok] = node_index[tuple(idx[ok].T)] >= 0
        missing = ~present
        boundary |= missing
        normal_sum[missing] += off / np.linalg.norm(off)
    norms = np.linalg.norm(normal_sum, axis=1)
    normals = np.zeros((V, dim))
    good = norms > 1e-12
    normals[good] = normal_sum[good] / norms[good, None]

    weights = np.ones(V)
    for d in range(dim):
        e = np.zeros(dim, dtype=int)
        e[d] = 1
        half = np.zeros(V, dtype=bool)
        for sgn in (-1, 1):
            idx = multi + sgn * e
            ok = np.all((idx >= 0) & (idx < n_vec), axis=1)
            present = np.zeros(V, dtype=bool)
            present[ok] = node_index[tuple(idx[ok].T)] >= 0
            half |= ~present
        weights *= np.where(half, 0.5 * h_t[d], h_t[d])

    return Grid(
        dim=dim,
        extent=extent_t,
        n=n_t,
        h=h_t,
        mask=_frozen(mask),
        stencil=tuple(tuple(o) for o in offsets),
        mask_kind=kind,
        node_index=_frozen(node_index),
        multi_index=_frozen(multi),
        coords=_frozen(coords),
        edges=_frozen(edges),
        lengths=_frozen(e_len),
        lengths_int=_frozen(e_len_int),
        quantum=quantum,
        adj_ptr=_frozen(adj_ptr),
        adj_nbr=_frozen(dst),
        adj_len=_frozen(length),
        adj_len_int=_frozen(length_int),
        boundary=_frozen(boundary),
        normals=_frozen(normals),
        weights=_frozen(weights),
    )


@dataclass(frozen=True, eq=False)
class ScalarField:
    """One real value per masked node of ``grid``."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != (self.grid.num_nodes,):
            raise ValueError(
                f"field has {v.shape} values, grid has {self.grid.num_nodes} masked nodes"
            )
        if not np.all(np.isfinite(v)):
            raise NonFiniteSample("field values must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def coords(self) -> np.ndarray:
        return self.grid.coords

    @property
    def x(self) -> np.ndarray:
        return self.grid.coords[:, 0]

    def with_values(self, values) -> "ScalarField":
        return ScalarField(self.grid, values)

    def integral(self) -> float:
        return float(np.dot(self.grid.weights, self.values))

    def mean(self) -> float:
        return self.integral() / float(self.grid.weights.sum())

    def l1(self) -> float:
        return float(np.dot(self.grid.weights, np.abs(self.values)))

    def l2(self) -> float:
        return float(np.sqrt(np.dot(self.grid.weights, self.values**2)))

    def linf(self) -> float:
        return float(np.max(np.abs(self.values)))

    def __neg__(self):
        return self.with_values(-self.values)

    def __sub__(self, other):
        if isinstance(other, ScalarField):
            check_same_grid(self, other)
            other = other.values
        return self.with_values(self.values - other)

    def __add__(self, other):
        if isinstance(other, ScalarField):
            check_same_grid(self, other)
            other = other.values
        return self.with_values(self.values + other)


def check_same_grid(*fields: ScalarField) -> Grid:
    g = fields[0].grid
    for f in fields[1:]:
        if not g.same_as(f.grid):
            raise GridMismatch("fields live on different grids")
    return g


def field_from_function(grid: Grid, rule: Callable) -> ScalarField:
    """Sample ``rule`` at every masked node.

    ``rule`` receives one coordinate array per axis (``rule(x)`` or
    ``rule(x, y)``) and should be vectorised; scalar rules are retried
    node by node.
    """
    cols = [grid.coords[:, d] for d in range(grid.dim)]
    with np.errstate(all="ignore"):
        try:
            vals = np.asarray(rule(*cols), dtype=float)
            vals = np.broadcast_to(vals, (grid.num_nodes,)).copy()
        except (TypeError, ValueError):
            vals = np.array([float(rule(*p)) for p in grid.coords])
    bad = ~np.isfinite(vals)
    if bad.any():
        first = grid.coords[np.flatnonzero(bad)[0]]
        raise NonFiniteSample(f"rule is not finite at {first.tolist()} ({bad.sum()} nodes)")
    return ScalarField(grid, vals)


def interval(n: int, lo: float = -1.0, hi: float = 1.0) -> Grid:
    """Shorthand for a full 1D grid."""
    return build_grid(1, (lo, hi), n)
