"""Intervals, trajectories and the weighted graph they live on.

All time intervals are half-open ``[start, end)`` over integer time units, so
the steps of a trajectory partition its lifespan into unit slots exactly and
``len([a, b)) == b - a``.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from typing import Iterable, NamedTuple, Sequence

from .errors import DisconnectedGraph, InvalidInterval, NonPositiveWeight, UnknownVertex


@dataclass(frozen=True, slots=True)
class Interval:
    """Non-empty half-open integer interval ``[start, end)``."""

    start: int
    end: int

    def __post_init__(self):
        if not self.start < self.end:
            raise InvalidInterval(f"need start < end, got [{self.start}, {self.end})")

    def __len__(self):
        return self.end - self.start

    def __contains__(self, t):
        return self.start <= t < self.end

    def issubset(self, other) -> bool:
        if not other:
            return False
        return other.start <= self.start and self.end <= other.end

    def __repr__(self):
        return f"[{self.start}, {self.end})"


class _EmptyInterval:
    """The empty interval. Falsy, length 0, a subset of everything."""

    __slots__ = ()
    start = None
    end = None

    def __len__(self):
        return 0

    def __contains__(self, t):
        return False

    def issubset(self, other) -> bool:
        return True

    def __repr__(self):
        return "EMPTY"

    def __reduce__(self):
        return "EMPTY"


EMPTY = _EmptyInterval()


def intersect(a, b):
    """Intersection of two intervals; returns :data:`EMPTY` when they share no unit step."""
    if not a or not b:
        return EMPTY
    lo = max(a.start, b.start)
    hi = min(a.end, b.end)
    if lo < hi:
        return Interval(lo, hi)
    return EMPTY


class Step(NamedTuple):
    vertex: int
    interval: Interval


class Trajectory:
    """A walk through a graph with a dwell interval at each visited vertex.

    Internally the steps are kept as three parallel tuples (``vertices``,
    ``starts``, ``ends``) because the similarity kernel indexes them in tight
    loops. Construction does not enforce the chaining rules; use
    :func:`validate` for that.
    """

    __slots__ = ("id", "vertices", "starts", "ends")

    def __init__(self, id: int, vertices: Sequence[int], starts: Sequence[int], ends: Sequence[int]):
        if not (len(vertices) == len(starts) == len(ends)):
            raise ValueError("vertices, starts and ends must have equal length")
        self.id = int(id)
        self.vertices = tuple(int(v) for v in vertices)
        self.starts = tuple(int(a) for a in starts)
        self.ends = tuple(int(b) for b in ends)

    @classmethod
    def from_steps(cls, id: int, steps: Iterable) -> "Trajectory":
        """Build from ``(vertex, interval)`` pairs; intervals may be :class:`Interval` or ``(a, b)``."""
        vs, ss, es = [], [], []
        for v, iv in steps:
            a, b = (iv.start, iv.end) if isinstance(iv, Interval) else iv
            vs.append(v)
            ss.append(a)
            es.append(b)
        return cls(id, vs, ss, es)

    @classmethod
    def stationary(cls, id: int, vertex: int, interval: Interval) -> "Trajectory":
        return cls(id, (vertex,), (interval.start,), (interval.end,))

    @property
    def steps(self) -> tuple:
        return tuple(Step(v, Interval(a, b)) for v, a, b in zip(self.vertices, self.starts, self.ends))

    @property
    def start(self) -> int:
        return self.starts[0]

    @property
    def end(self) -> int:
        return self.ends[-1]

    @property
    def lifespan(self) -> Interval:
        return Interval(self.starts[0], self.ends[-1])

    def intersects(self, t) -> bool:
        return bool(t) and self.starts[0] < t.end and t.start < self.ends[-1]

    def __len__(self):
        return len(self.vertices)

    def __eq__(self, other):
        if not isinstance(other, Trajectory):
            return NotImplemented
        return (self.id, self.vertices, self.starts, self.ends) == (
            other.id, other.vertices, other.starts, other.ends)

    def same_path(self, other: "Trajectory") -> bool:
        """Equality of the step sequences, ignoring ids."""
        return (self.vertices, self.starts, self.ends) == (other.vertices, other.starts, other.ends)

    def __hash__(self):
        return hash((self.id, self.vertices, self.starts, self.ends))

    def __repr__(self):
        body = ", ".join(f"({v}, [{a}, {b}))" for v, a, b in zip(self.vertices, self.starts, self.ends))
        return f"Trajectory(id={self.id}, {body})"


def restrict(T: Trajectory, t: Interval):
    """The time-restricted trajectory ``T[t]``.

    Steps entirely outside ``t`` are dropped and the first and last surviving
    steps are clipped to ``t``. Returns ``None`` when ``T`` does not intersect
    ``t`` at all.
    """
    if not t:
        raise InvalidInterval("restriction interval must be non-empty")
    vs, ss, es = [], [], []
    for v, a, b in zip(T.vertices, T.starts, T.ends):
        lo = max(a, t.start)
        hi = min(b, t.end)
        if lo < hi:
            vs.append(v)
            ss.append(lo)
            es.append(hi)
    if not vs:
        return None
    return Trajectory(T.id, vs, ss, es)


class Violation(NamedTuple):
    kind: str       # "empty", "interval", "gap", "repeat" or "vertex"
    step: int
    detail: str

    def __str__(self):
        return f"{self.kind} at step {self.step}: {self.detail}"


def validate(T: Trajectory, G: "Graph | None" = None) -> list:
    """Return every trajectory invariant ``T`` violates; an empty list means valid."""
    out = []
    if len(T) == 0:
        return [Violation("empty", 0, "trajectory has no steps")]
    for i, (v, a, b) in enumerate(zip(T.vertices, T.starts, T.ends)):
        if not a < b:
            out.append(Violation("interval", i, f"[{a}, {b}) is empty"))
        if G is not None and not 0 <= v < G.n:
            out.append(Violation("vertex", i, f"vertex {v} not in graph with {G.n} vertices"))
        if i > 0:
            if a != T.ends[i - 1]:
                out.append(Violation("gap", i, f"step starts at {a} but previous ends at {T.ends[i - 1]}"))
            if v == T.vertices[i - 1]:
                out.append(Violation("repeat", i, f"vertex {v} repeated"))
    return out


class Graph:
    """Undirected graph with strictly positive edge costs on vertices ``0..n-1``."""

    def __init__(self, n: int, edges: Iterable, require_connected: bool = True):
        self.n = int(n)
        if self.n < 1:
            raise ValueError("graph needs at least one vertex")
        adj = [[] for _ in range(self.n)]
        seen = set()
        clean = []
        for u, v, w in edges:
            u, v, w = int(u), int(v), float(w)
            for x in (u, v):
                if not 0 <= x < self.n:
                    raise UnknownVertex(x)
            if u == v:
                raise ValueError(f"self-loop at vertex {u}")
            if not (w > 0 and math.isfinite(w)):
                raise NonPositiveWeight(f"edge ({u}, {v}) has weight {w}")
            key = (min(u, v), max(u, v))
            if key in seen:
                raise ValueError(f"duplicate edge {key}")
            seen.add(key)
            clean.append((u, v, w))
            adj[u].append((v, w))
            adj[v].append((u, w))
        self.edges = tuple(clean)
        self.adjacency = tuple(tuple(a) for a in adj)
        if require_connected and not self.is_connected():
            raise DisconnectedGraph(f"graph with {self.n} vertices is not connected")

    @property
    def m(self) -> int:
        return len(self.edges)

    def neighbors(self, u: int) -> tuple:
        return tuple(v for v, _ in self.adjacency[u])

    def has_edge(self, u: int, v: int) -> bool:
        return any(x == v for x, _ in self.adjacency[u])

    def is_connected(self) -> bool:
        seen = [False] * self.n
        seen[0] = True
        todo = deque([0])
        count = 1
        while todo:
            u = todo.popleft()
            for v, _ in self.adjacency[u]:
                if not seen[v]:
                    seen[v] = True
                    count += 1
                    todo.append(v)
        return count == self.n

    def __eq__(self, other):
        if not isinstance(other, Graph):
            return NotImplemented
        return self.n == other.n and self.edges == other.edges

    def __repr__(self):
        return f"Graph(n={self.n}, m={self.m})"
