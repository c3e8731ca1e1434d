"""Shortest-path distances and the spatio-temporal similarity kernel.

Similarity of ``Q`` and ``T`` over an interval ``s``::

    Sim(Q, T, s) = 1/|s| * sum_{i,j} |s & t_i & s_j| * exp(-d(v_i, u_j))

and ``Dist = 1 - Sim``. The kernel evaluates it with a two-pointer merge
over the time-ordered steps of both trajectories, touching at most
``|Q| + |T|`` step pairs.
"""

from __future__ import annotations

import heapq
import math
import threading
from bisect import bisect_right
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import EmptyQueryInterval, IntervalNotNested, UnknownVertex
from .model import Graph, Interval, Trajectory


class DistanceOracle:
    """Lazily computed, permanently cached single-source shortest-path rows.

    Dijkstra runs over exact integers: every float weight is a dyadic
    rational, so scaling by the largest denominator makes all path sums
    exact. The float distance is the correctly rounded exact value, hence
    ``d(u, v) == d(v, u)`` bit for bit no matter which row it is read from.

    Safe for concurrent readers. Two threads asking for the same new row may
    both compute it; only the first result is published.
    """

    def __init__(self, graph: Graph):
        self.graph = graph
        ratios = [w.as_integer_ratio() for _, _, w in graph.edges]
        self._scale = max((den for _, den in ratios), default=1)
        adj = [[] for _ in range(graph.n)]
        for (u, v, _), (num, den) in zip(graph.edges, ratios):
            iw = num * (self._scale // den)
            adj[u].append((v, iw))
            adj[v].append((u, iw))
        self._int_adj = adj
        self._rows = {}
        self._exp_rows = {}
        self._lock = threading.Lock()
        self.dijkstra_runs = 0

    def _check(self, u):
        if not 0 <= u < self.graph.n:
            raise UnknownVertex(u)

    def _dijkstra(self, source):
        n = self.graph.n
        dist = [None] * n
        dist[source] = 0
        done = [False] * n
        heap = [(0, source)]
        adj = self._int_adj
        while heap:
            d, u = heapq.heappop(heap)
            if done[u]:
                continue
            done[u] = True
            for v, w in adj[u]:
                nd = d + w
                old = dist[v]
                if old is None or nd < old:
                    dist[v] = nd
                    heapq.heappush(heap, (nd, v))
        scale = self._scale
        return np.array([math.inf if d is None else d / scale for d in dist], dtype=np.float64)

    def row(self, source: int) -> np.ndarray:
        """Distances from ``source`` to every vertex (read-only array)."""
        r = self._rows.get(source)
        if r is not None:
            return r
        self._check(source)
        r = self._dijkstra(source)
        r.setflags(write=False)
        with self._lock:
            self.dijkstra_runs += 1
            return self._rows.setdefault(source, r)

    def exp_row(self, source: int) -> list:
        """``exp(-d(source, v))`` for every ``v``, as a list for fast scalar indexing."""
        e = self._exp_rows.get(source)
        if e is not None:
            return e
        e = np.exp(-self.row(source)).tolist()
        with self._lock:
            return self._exp_rows.setdefault(source, e)

    def exp_row_array(self, source: int) -> np.ndarray:
        return np.asarray(self.exp_row(source), dtype=np.float64)

    def distance(self, u: int, v: int) -> float:
        self._check(v)
        return float(self.row(u)[v])

    @property
    def cached_sources(self) -> int:
        return len(self._rows)


def shortest_path_row(graph: Graph, source: int, oracle: DistanceOracle | None = None) -> np.ndarray:
    oracle = oracle if oracle is not None else DistanceOracle(graph)
    return oracle.row(source)


@dataclass(frozen=True)
class SimilarityBudget:
    """Abort threshold for upper-bounded similarity evaluation.

    Evaluation stops as soon as the optimistic bound on the similarity drops
    strictly below ``threshold``.
    """

    threshold: float = 0.0
    enabled: bool = True

    def __post_init__(self):
        if not 0.0 <= self.threshold <= 1.0:
            raise ValueError(f"threshold must lie in [0, 1], got {self.threshold}")


NO_BUDGET = SimilarityBudget(0.0, enabled=False)


class SimResult(NamedTuple):
    value: float        # exact similarity, or the upper bound at the abort point
    completed: bool
    steps: int          # pointer advances performed by the merge


def merge_similarity(q_w, q_starts, q_ends, t_verts, t_starts, t_ends, alpha, beta, floor=None):
    """Two-pointer merge on raw step arrays.

    ``q_w[j]`` is the ``exp(-d(u_j, .))`` row of the j-th query vertex. With
    ``floor`` set, the merge aborts once ``(S + beta - frontier) / |s|`` is
    strictly below it, where ``S`` is the weighted overlap accumulated so
    far and ``frontier`` the time up to which every pair has been seen.

    Returns ``(value, completed, steps)``.
    """
    width = beta - alpha
    nq = len(q_ends)
    nt = len(t_ends)
    if t_starts[0] >= beta or t_ends[-1] <= alpha or q_starts[0] >= beta or q_ends[-1] <= alpha:
        return 0.0, True, 0
    j = bisect_right(q_ends, alpha)
    i = bisect_right(t_ends, alpha)
    total = 0.0
    steps = 0
    while j < nq and i < nt:
        qe = q_ends[j]
        te = t_ends[i]
        front = qe if qe < te else te
        lo = q_starts[j]
        if t_starts[i] > lo:
            lo = t_starts[i]
        if alpha > lo:
            lo = alpha
        hi = front if front < beta else beta
        if hi > lo:
            total += (hi - lo) * q_w[j][t_verts[i]]
        if front >= beta:
            break
        if floor is not None and (total + (beta - front)) / width < floor:
            return (total + (beta - front)) / width, False, steps
        if qe < te:
            j += 1
            steps += 1
        elif qe > te:
            i += 1
            steps += 1
        else:
            j += 1
            i += 1
            steps += 2
    return total / width, True, steps


def _check_interval(s):
    if not s:
        raise EmptyQueryInterval("similarity interval must be non-empty")


def similarity(Q: Trajectory, T: Trajectory, s: Interval, oracle: DistanceOracle,
               budget: SimilarityBudget | None = None) -> SimResult:
    """Similarity of ``Q`` and ``T`` over ``s``, optionally upper-bounded.

    Without a budget (or with a disabled one) the result is exact. With an
    enabled budget the evaluation may stop early; the returned value is then
    an upper bound on the true similarity that lies strictly below
    ``budget.threshold`` and ``completed`` is False.
    """
    _check_interval(s)
    floor = budget.threshold if budget is not None and budget.enabled else None
    q_w = [oracle.exp_row(u) for u in Q.vertices]
    return SimResult(*merge_similarity(q_w, Q.starts, Q.ends, T.vertices, T.starts, T.ends,
                                       s.start, s.end, floor))


def distance(Q: Trajectory, T: Trajectory, s: Interval, oracle: DistanceOracle) -> float:
    return 1.0 - similarity(Q, T, s, oracle).value


class _UnitRow:
    def __getitem__(self, v):
        return 1.0


def merge_step_count(Q: Trajectory, T: Trajectory, s: Interval, oracle: DistanceOracle | None = None) -> int:
    """Pointer advances the merge makes for ``(Q, T, s)``; never more than ``|Q| + |T|``.

    The count does not depend on distances, so the oracle is optional.
    """
    _check_interval(s)
    q_w = [oracle.exp_row(u) for u in Q.vertices] if oracle is not None else [_UnitRow()] * len(Q)
    return merge_similarity(q_w, Q.starts, Q.ends, T.vertices, T.starts, T.ends, s.start, s.end)[2]


def rescale_distance(dist_s: float, s: Interval, t: Interval) -> float:
    """Distance over a wider interval ``t`` from the distance over ``s``.

    Valid when the query's lifespan equals ``s`` and ``s`` is inside ``t``.
    """
    if not s.issubset(t):
        raise IntervalNotNested(f"{s!r} is not contained in {t!r}")
    ratio = len(s) / len(t)
    return 1.0 - ratio + ratio * dist_s


def naive_similarity(Q: Trajectory, T: Trajectory, s: Interval, oracle: DistanceOracle) -> float:
    """Reference evaluation: an explicit double loop over every pair of steps."""
    _check_interval(s)
    total = 0.0
    for u, a, b in zip(Q.vertices, Q.starts, Q.ends):
        for v, c, d in zip(T.vertices, T.starts, T.ends):
            overlap = min(b, d, s.end) - max(a, c, s.start)
            if overlap > 0:
                total += overlap * math.exp(-oracle.distance(v, u))
    return total / len(s)
