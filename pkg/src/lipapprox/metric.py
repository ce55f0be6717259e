"""Geodesic distances on the stencil graph of a masked grid."""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field

import numpy as np

from .errors import EmptySourceSet, UnmaskedSource
from .grid import Grid, ScalarField

# 8-stencil worst-case overestimate of the Euclidean norm: 1/cos(pi/8) - 1
ANISOTROPY_8 = 1.0 / np.cos(np.pi / 8) - 1.0


@dataclass(frozen=True, eq=False)
class DistanceField(ScalarField):
    """Graph distance to a source set, with the nearest source of every node."""

    sources: np.ndarray = field(default=None, repr=False)
    origin: np.ndarray = field(default=None, repr=False)

    def ridge_mask(self, spread: float = 3.0) -> np.ndarray:
        """Nodes next to a neighbour whose nearest source is far from their own.

        These are the nodes where two distinct source projections meet.
        """
        return origin_ridge(self.grid, self.origin, spread)


def origin_ridge(grid: Grid, origin, spread: float = 3.0) -> np.ndarray:
    """Nodes with a neighbour whose origin lies more than ``spread * hmax`` away.

    Nodes without an origin (``-1``) are never flagged.
    """
    origin = np.asarray(origin)
    src, dst, _ = grid.directed_edges()
    ok = (origin[src] >= 0) & (origin[dst] >= 0)
    src, dst = src[ok], dst[ok]
    gap = np.linalg.norm(grid.coords[origin[src]] - grid.coords[origin[dst]], axis=1)
    ridge = np.zeros(grid.num_nodes, dtype=bool)
    np.logical_or.at(ridge, src, gap > spread * grid.hmax)
    return ridge


def _check_sources(grid: Grid, sources) -> np.ndarray:
    s = np.unique(np.asarray(sources, dtype=np.int64).ravel())
    if s.size == 0:
        raise EmptySourceSet("source set is empty")
    if s.min() < 0 or s.max() >= grid.num_nodes:
        raise UnmaskedSource("source ids must be masked node ids")
    return s


def source_ids(grid: Grid, points) -> np.ndarray:
    """Map coordinates to node ids, rejecting points that are not masked nodes."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if grid.dim == 1 and pts.shape[0] == 1 and pts.shape[1] != 1:
        pts = pts.T
    lo = np.array([e[0] for e in grid.extent])
    idx = np.rint((pts - lo) / np.array(grid.h)).astype(np.int64)
    if np.any(np.abs(lo + idx * np.array(grid.h) - pts) > 1e-9 * max(grid.h)):
        raise UnmaskedSource("point is not a grid node")
    if np.any(idx < 0) or np.any(idx >= np.array(grid.n)):
        raise UnmaskedSource("point outside the grid extent")
    ids = grid.node_index[tuple(idx.T)]
    if np.any(ids < 0):
        raise UnmaskedSource("point lies outside the mask")
    return ids


def geodesic_distance(grid: Grid, sources) -> DistanceField:
    """Exact multi-source shortest-path distance on the stencil graph.

    Path lengths are summed as integers on the grid's length lattice, so the
    result is symmetric in source and target to the last bit.  Ties in the
    queue are broken by the lowest node id.
    """
    s = _check_sources(grid, sources)
    V = grid.num_nodes
    dist = [-1] * V
    best = {int(i): 0 for i in s}
    origin = np.full(V, -1, dtype=np.int64)
    origin[s] = s
    heap = [(0, int(i)) for i in s]
    heapq.heapify(heap)
    ptr, nbr, lint = grid.adj_ptr, grid.adj_nbr.tolist(), grid.adj_len_int.tolist()
    ptr = ptr.tolist()
    while heap:
        d, i = heapq.heappop(heap)
        if dist[i] >= 0:
            continue
        dist[i] = d
        oi = origin[i]
        for k in range(ptr[i], ptr[i + 1]):
            j = nbr[k]
            if dist[j] >= 0:
                continue
            nd = d + lint[k]
            bj = best.get(j)
            if bj is None or nd < bj:
                best[j] = nd
                origin[j] = oi
                heapq.heappush(heap, (nd, j))
    d_int = np.array(dist, dtype=np.int64)
    return DistanceField(grid, d_int * grid.quantum, sources=s, origin=origin)


def label_setting(grid: Grid, labels, return_origin: bool = False):
    """Generalised distance transform ``out[x] = min_y (labels[y] + d(x, y))``.

    One Dijkstra pass seeded with every finite label.  With
    ``return_origin`` the minimizing seed of every node is returned too.
    """
    lab = np.asarray(labels, dtype=float)
    V = grid.num_nodes
    out = np.full(V, np.inf)
    done = np.zeros(V, dtype=bool)
    seeds = np.flatnonzero(np.isfinite(lab))
    if seeds.size == 0:
        raise EmptySourceSet("no finite labels")
    out[seeds] = lab[seeds]
    origin = np.full(V, -1, dtype=np.int64)
    origin[seeds] = seeds
    heap = [(float(lab[i]), int(i)) for i in seeds]
    heapq.heapify(heap)
    ptr = grid.adj_ptr.tolist()
    nbr = grid.adj_nbr.tolist()
    length = grid.adj_len.tolist()
    best = out.tolist()
    while heap:
        d, i = heapq.heappop(heap)
        if done[i]:
            continue
        done[i] = True
        oi = origin[i]
        for k in range(ptr[i], ptr[i + 1]):
            j = nbr[k]
            nd = d + length[k]
            if nd < best[j]:
                best[j] = nd
                origin[j] = oi
                heapq.heappush(heap, (nd, j))
    out = np.array(best)
    return (out, origin) if return_origin else out


def boundary_distance(grid: Grid) -> DistanceField:
    """Graph distance to the boundary node set, zero exactly on it."""
    b = grid.boundary_nodes
    if b.size == 0:
        raise EmptySourceSet("grid has no boundary nodes")
    return geodesic_distance(grid, b)


def all_pairs_distance(grid: Grid) -> np.ndarray:
    """Dense ``V x V`` matrix of graph distances; for small grids only."""
    return np.stack([geodesic_distance(grid, [i]).values for i in range(grid.num_nodes)])
