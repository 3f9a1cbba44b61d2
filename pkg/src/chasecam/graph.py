"""Layered viewpoint graph and its single-source shortest path.

Vertices are candidate camera positions grouped by time step. Edges only join
consecutive steps, so numbering vertices layer by layer is already a
topological order; the shortest path is one sweep of edge relaxation in that
order. A generic DFS-sorted backend is kept for benchmarking.
"""

from __future__ import annotations

import csv
import io
import math
import time
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray

from chasecam.geom import as_vec3


class InfeasiblePlanError(RuntimeError):
    """No viewpoint sequence satisfies the step-length limit."""

    def __init__(self, step: int, message: str | None = None):
        self.step = step
        super().__init__(message or f"no reachable viewpoint at step {step}")


def view_sphere(target_pos: ArrayLike, r_d: float, azimuth_count: int, elevation: float = math.radians(20.0),
                extra_elevations: Sequence[float] = ()) -> NDArray[np.float64]:
    """Candidate camera centers on a ring of radius ``r_d`` around ``target_pos``.

    Returns an ``(azimuth_count * (1 + len(extra_elevations)), 3)`` array; ring
    ``e`` holds ``target + r_d * (cos e cos a_k, cos e sin a_k, sin e)`` with
    ``a_k = 2 pi k / azimuth_count``.
    """
    if azimuth_count < 1:
        raise ValueError("azimuth_count must be >= 1")
    if not r_d > 0:
        raise ValueError("r_d must be positive")
    target_pos = as_vec3(target_pos)
    a = 2.0 * np.pi * np.arange(azimuth_count) / azimuth_count
    rings = []
    for e in (elevation, *extra_elevations):
        if not 0.0 <= e < np.pi / 2:
            raise ValueError("elevation must lie in [0, pi/2)")
        ring = np.column_stack([np.cos(e) * np.cos(a), np.cos(e) * np.sin(a), np.full_like(a, np.sin(e))])
        rings.append(target_pos + r_d * ring)
    return np.vstack(rings)


@dataclass
class ViewLayer:
    """Candidates for one step. ``costs`` holds the detectability cost per
    candidate; ``inf`` marks an occluded candidate."""

    step: int
    candidates: NDArray[np.float64]
    costs: NDArray[np.float64]
    target: Optional[NDArray[np.float64]] = None

    def __post_init__(self):
        self.candidates = np.asarray(self.candidates, dtype=np.float64).reshape(-1, 3)
        self.costs = np.asarray(self.costs, dtype=np.float64).reshape(-1)
        if len(self.costs) != len(self.candidates):
            raise ValueError("one cost per candidate required")


@dataclass
class LayeredDag:
    """Pruned layered graph.

    ``points[i]`` are the surviving vertices of layer ``i`` (layer 0 is the
    root) and ``source_ids[i]`` their positions in the originating candidate
    list. ``edges[i]`` joins layer ``i`` to ``i + 1`` as ``(tail, head, weight)``
    arrays of within-layer indices.
    """

    points: list[NDArray[np.float64]]
    source_ids: list[NDArray[np.int64]]
    detect_costs: list[NDArray[np.float64]]
    edges: list[tuple[NDArray[np.int64], NDArray[np.int64], NDArray[np.float64]]]
    lam: float = 0.0
    r_max: float = math.inf
    _offsets: Optional[NDArray[np.int64]] = field(default=None, repr=False)

    @property
    def layer_sizes(self) -> tuple[int, ...]:
        return tuple(len(p) for p in self.points)

    @property
    def n_vertices(self) -> int:
        return sum(self.layer_sizes)

    @property
    def n_edges(self) -> int:
        return sum(len(e[0]) for e in self.edges)

    @property
    def offsets(self) -> NDArray[np.int64]:
        if self._offsets is None:
            self._offsets = np.concatenate([[0], np.cumsum(self.layer_sizes)]).astype(np.int64)
        return self._offsets

    def index(self, i: int, j: int) -> int:
        """1-based topological index of within-layer vertex ``j`` (0-based) in layer ``i``."""
        return topological_index(self.layer_sizes, i, j + 1)

    def global_edges(self) -> tuple[NDArray[np.int64], NDArray[np.int64], NDArray[np.float64]]:
        """All edges as 0-based global vertex ids ordered by tail id."""
        off = self.offsets
        tails, heads, ws = [], [], []
        for i, (t, h, w) in enumerate(self.edges):
            tails.append(t + off[i])
            heads.append(h + off[i + 1])
            ws.append(w)
        if not tails:
            return np.zeros(0, np.int64), np.zeros(0, np.int64), np.zeros(0)
        return np.concatenate(tails), np.concatenate(heads), np.concatenate(ws)

    def edge_list_lines(self) -> list[str]:
        """Text dump, one ``i j1 i+1 j2 weight`` line per edge (1-based ``j``)."""
        lines = []
        for i, (t, h, w) in enumerate(self.edges):
            for a, b, c in zip(t.tolist(), h.tolist(), w.tolist()):
                lines.append(f"{i} {a + 1} {i + 1} {b + 1} {c!r}")
        return lines


def topological_index(layer_sizes: Sequence[int], i: int, j: int) -> int:
    """Analytic topological index: 1 for the root, else the size of all earlier
    layers plus ``j`` (``j`` is 1-based within layer ``i``)."""
    if not 0 <= i < len(layer_sizes):
        raise IndexError(f"layer {i} out of range")
    if not 1 <= j <= layer_sizes[i]:
        raise IndexError(f"vertex {j} out of range for layer {i} of size {layer_sizes[i]}")
    if i == 0:
        return 1
    return int(sum(layer_sizes[:i])) + j


def build_dag(root: ArrayLike, layers: Sequence[ViewLayer], r_max: float = math.inf, lam: float = 0.0) -> LayeredDag:
    """Wire consecutive layers within ``r_max`` and drop vertices the root cannot reach.

    Occluded candidates (infinite cost) never become vertices. Edge weight is
    step length plus ``lam`` times the head's detectability cost.
    """
    if not layers:
        raise ValueError("at least one layer required")
    if not r_max > 0:
        raise ValueError("r_max must be positive")
    if lam < 0:
        raise ValueError("lambda must be nonnegative")

    points = [as_vec3(root)[None, :]]
    source_ids = [np.zeros(1, dtype=np.int64)]
    detect_costs = [np.zeros(1)]
    edges = []
    for layer in layers:
        prev = points[-1]
        ok = np.flatnonzero(np.isfinite(layer.costs))
        cand = layer.candidates[ok]
        dist = np.linalg.norm(prev[:, None, :] - cand[None, :, :], axis=2)
        adj = dist <= r_max
        reachable = np.flatnonzero(adj.any(axis=0))
        if len(reachable) == 0:
            raise InfeasiblePlanError(layer.step)
        adj = adj[:, reachable]
        tail, head = np.nonzero(adj)  # row-major: sorted by tail then head
        keep = ok[reachable]
        cost = layer.costs[keep]
        w = dist[tail, reachable[head]] + lam * cost[head]
        edges.append((tail.astype(np.int64), head.astype(np.int64), w))
        points.append(layer.candidates[keep])
        source_ids.append(keep.astype(np.int64))
        detect_costs.append(cost)
    return LayeredDag(points, source_ids, detect_costs, edges, lam=lam, r_max=r_max)


# ---------------------------------------------------------------- relaxation

def _csr(n: int, tails: NDArray[np.int64], heads: NDArray[np.int64], weights: NDArray[np.float64]):
    order = np.argsort(tails, kind="stable")
    t, h, w = tails[order], heads[order], weights[order]
    start = np.searchsorted(t, np.arange(n + 1))
    return start.tolist(), h.tolist(), w.tolist()


def relax_in_order(order: Sequence[int], n: int, start: list[int], heads: list[int], weights: list[float],
                   source: int = 0) -> tuple[list[float], list[int]]:
    """Single-pass edge relaxation visiting vertices in ``order``.

    Strict comparison: the first predecessor to reach the best distance keeps it.
    """
    dist = [math.inf] * n
    pred = [-1] * n
    dist[source] = 0.0
    for u in order:
        du = dist[u]
        if du == math.inf:
            continue
        for k in range(start[u], start[u + 1]):
            v = heads[k]
            nd = du + weights[k]
            if nd < dist[v]:
                dist[v] = nd
                pred[v] = u
    return dist, pred


def dfs_topological_order(n: int, start: list[int], heads: list[int]) -> list[int]:
    """Generic topological sort: iterative DFS with reverse postorder."""
    visited = [False] * n
    post: list[int] = []
    for s in range(n):
        if visited[s]:
            continue
        visited[s] = True
        stack = [(s, start[s])]
        while stack:
            u, k = stack[-1]
            if k < start[u + 1]:
                stack[-1] = (u, k + 1)
                v = heads[k]
                if not visited[v]:
                    visited[v] = True
                    stack.append((v, start[v]))
            else:
                stack.pop()
                post.append(u)
    post.reverse()
    return post


@dataclass
class ViewpointPath:
    points: NDArray[np.float64]  # (N, 3), excludes the root
    cost: float
    layer_indices: tuple[int, ...]  # within-layer vertex index per step
    source_ids: tuple[int, ...]  # index into the original candidate list per step
    distance_cost: float = 0.0
    detect_cost: float = 0.0


def shortest_viewpoint_path(dag: LayeredDag, backend: str = "analytic") -> ViewpointPath:
    """Minimum-cost root-to-last-layer path.

    ``backend="analytic"`` visits vertices in layer order (their topological
    index); ``"dfs"`` first derives an order by depth-first search.
    """
    n = dag.n_vertices
    start, heads, weights = _csr(n, *dag.global_edges())
    if backend == "analytic":
        order = range(n)
    elif backend == "dfs":
        order = dfs_topological_order(n, start, heads)
    else:
        raise ValueError(f"unknown backend {backend!r}")
    dist, pred = relax_in_order(order, n, start, heads, weights)
    return _backtrack(dag, dist, pred)


def _backtrack(dag: LayeredDag, dist: list[float], pred: list[int]) -> ViewpointPath:
    off = dag.offsets
    last = len(dag.points) - 1
    tail_d = dist[off[last]:off[last + 1]]
    j = int(np.argmin(tail_d))  # first minimum on ties
    if not math.isfinite(tail_d[j]):
        raise InfeasiblePlanError(last, "last layer unreachable")
    v = int(off[last]) + j
    chain = []
    while v > 0:
        chain.append(v)
        v = pred[v]
    chain.reverse()
    idx = []
    for i, g in enumerate(chain, start=1):
        idx.append(g - int(off[i]))
    pts = np.array([dag.points[i][k] for i, k in enumerate(idx, start=1)])
    src = tuple(int(dag.source_ids[i][k]) for i, k in enumerate(idx, start=1))
    full = np.vstack([dag.points[0], pts])
    d_cost = float(np.sum(np.linalg.norm(np.diff(full, axis=0), axis=1)))
    det = float(sum(dag.detect_costs[i][k] for i, k in enumerate(idx, start=1)))
    return ViewpointPath(pts, float(tail_d[j]), tuple(idx), src, d_cost, det)


def path_objective(root: ArrayLike, points: ArrayLike, detect_costs: Sequence[float], lam: float) -> float:
    """Summed step lengths from the root plus ``lam`` times summed detectability costs."""
    full = np.vstack([as_vec3(root)[None, :], np.asarray(points, dtype=np.float64).reshape(-1, 3)])
    return float(np.sum(np.linalg.norm(np.diff(full, axis=0), axis=1)) + lam * np.sum(detect_costs))


# ------------------------------------------------------------------ benchmark

def random_layered_dag(layer_count: int, layer_width: int, rng: np.random.Generator) -> LayeredDag:
    """Complete bipartite wiring between consecutive layers with U(0, 1) weights."""
    points = [np.zeros((1, 3))] + [np.zeros((layer_width, 3)) for _ in range(layer_count)]
    source_ids = [np.arange(len(p)) for p in points]
    costs = [np.zeros(len(p)) for p in points]
    edges = []
    for i in range(layer_count):
        n_t = len(points[i])
        tail = np.repeat(np.arange(n_t), layer_width)
        head = np.tile(np.arange(layer_width), n_t)
        edges.append((tail, head, rng.random(len(tail))))
    return LayeredDag(points, source_ids, costs, edges)


def _time_backend(dag: LayeredDag, backend: str) -> tuple[float, float]:
    n = dag.n_vertices
    t0 = time.perf_counter()
    start, heads, weights = _csr(n, *dag.global_edges())
    if backend == "analytic":
        order = range(n)
    else:
        order = dfs_topological_order(n, start, heads)
    dist, pred = relax_in_order(order, n, start, heads, weights)
    off = dag.offsets
    best = min(dist[off[-2]:off[-1]])
    return time.perf_counter() - t0, best


def bench_sssp(layer_counts: Sequence[int], layer_width: int = 10, trials: int = 3, seed: int = 0) -> list[dict]:
    """Time both backends on random layered graphs.

    One row per (graph size, backend) with the minimum wall time over
    ``trials`` and the optimal cost found. Raises if the backends disagree.
    """
    if layer_width < 1 or trials < 1 or not layer_counts or min(layer_counts) < 1:
        raise ValueError("sizes must be positive")
    rng = np.random.default_rng(seed)
    rows = []
    for lc in layer_counts:
        dag = random_layered_dag(lc, layer_width, rng)
        res = {}
        for backend in ("analytic", "dfs"):
            times, costs = zip(*(_time_backend(dag, backend) for _ in range(trials)))
            res[backend] = (min(times), costs[0])
        if res["analytic"][1] != res["dfs"][1]:
            raise AssertionError(f"backend cost mismatch at {dag.n_edges} edges")
        for backend, (sec, cost) in res.items():
            rows.append({"edges": dag.n_edges, "backend": backend, "seconds": sec, "cost": cost})
    return rows


def layer_counts_for_edges(edge_targets: Sequence[int], layer_width: int = 10) -> list[int]:
    """Layer counts whose complete wiring yields roughly the requested edge counts."""
    out = []
    for e in edge_targets:
        extra = max(e - layer_width, 0)
        out.append(1 + max(int(round(extra / layer_width**2)), 0))
    return out


def bench_csv(rows: Sequence[dict]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["edges", "backend", "seconds"])
    for r in rows:
        w.writerow([r["edges"], r["backend"], f"{r['seconds']:.9f}"])
    return buf.getvalue()
