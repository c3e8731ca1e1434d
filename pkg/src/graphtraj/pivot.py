"""Pivot-based spatial filter.

``h`` pivot trajectories each sit still at one of the most visited vertices
for the whole indexed time range ``t``. Every indexed trajectory stores its
distance to each pivot over ``t``; at query time the reverse triangle
inequality

    |Dist(Q, P_i, t) - Dist(T, P_i, t)| <= Dist(Q, T, t)

lets any ``T`` whose pivot profile differs from the query's by more than a
radius ``r`` be dropped.
"""

from __future__ import annotations

import io
import struct
from typing import Mapping, Sequence

import numpy as np

from .errors import IndexFormatError, QueryOutsideIndexInterval
from .metric import DistanceOracle
from .model import Interval, Trajectory

PIVOT_MAGIC = b"GTPIVOT\x00"
FORMAT_VERSION = 1


def _as_list(trajectories) -> list:
    if isinstance(trajectories, Mapping):
        return list(trajectories.values())
    return list(trajectories)


def select_pivots(trajectories, h: int) -> list:
    """The ``h`` most visited vertices; each step is one visit, ties go to the smaller id."""
    if h < 1:
        raise ValueError("h must be at least 1")
    trajs = _as_list(trajectories)
    if not trajs:
        raise ValueError("cannot select pivots from an empty trajectory set")
    verts = np.fromiter((v for T in trajs for v in T.vertices), dtype=np.int64)
    counts = np.bincount(verts)
    ids = np.nonzero(counts)[0]
    order = np.lexsort((ids, -counts[ids]))
    return ids[order[:h]].tolist()


def global_interval(trajectories) -> Interval:
    trajs = _as_list(trajectories)
    return Interval(min(T.start for T in trajs), max(T.end for T in trajs))


class StepArrays:
    """Flattened step arrays for a trajectory list, for vectorised pivot distances."""

    def __init__(self, trajectories: Sequence[Trajectory]):
        self.ids = np.array([T.id for T in trajectories], dtype=np.int64)
        lengths = np.array([len(T) for T in trajectories], dtype=np.int64)
        self.offsets = np.zeros(len(trajectories), dtype=np.int64)
        if len(trajectories) > 1:
            np.cumsum(lengths[:-1], out=self.offsets[1:])
        self.vertices = np.fromiter((v for T in trajectories for v in T.vertices), dtype=np.int64)
        starts = np.fromiter((a for T in trajectories for a in T.starts), dtype=np.int64)
        ends = np.fromiter((b for T in trajectories for b in T.ends), dtype=np.int64)
        self.starts = starts
        self.ends = ends

    def pivot_distances(self, pivots: Sequence[int], t: Interval, oracle: DistanceOracle) -> np.ndarray:
        """``|T| x h`` matrix of ``Dist(T, P_i, t)``.

        Against a single-step partner spanning ``t`` the merge reduces to a
        sum over the steps of ``T`` in time order, which is what this does,
        one segment per trajectory.
        """
        n = len(self.ids)
        out = np.empty((n, len(pivots)), dtype=np.float64)
        if n == 0:
            return out
        overlap = (np.minimum(self.ends, t.end) - np.maximum(self.starts, t.start)).clip(min=0)
        overlap = overlap.astype(np.float64)
        for col, p in enumerate(pivots):
            w = oracle.exp_row_array(p)
            contrib = overlap * w[self.vertices]
            sums = np.add.reduceat(contrib, self.offsets)
            out[:, col] = 1.0 - sums / len(t)
        return out


def query_pivot_distances(Q: Trajectory, pivots: Sequence[int], t: Interval,
                          oracle: DistanceOracle) -> np.ndarray:
    """``Dist(Q, P_i, t)`` for each pivot.

    Goes through the same reduction as the index rows so that a query equal
    to an indexed trajectory reproduces its row bit for bit.
    """
    return StepArrays([Q]).pivot_distances(pivots, t, oracle)[0]


class PivotIndex:
    """Immutable pivot filter over a fixed set of trajectories."""

    def __init__(self, pivots, t: Interval, matrix: np.ndarray, roster):
        self.pivots = [int(p) for p in pivots]
        self.t = t
        self.matrix = np.ascontiguousarray(matrix, dtype=np.float64)
        self.roster = np.ascontiguousarray(roster, dtype=np.int64)
        if self.matrix.shape != (len(self.roster), len(self.pivots)):
            raise ValueError(f"matrix shape {self.matrix.shape} does not match "
                             f"{len(self.roster)} trajectories x {len(self.pivots)} pivots")
        self.matrix.setflags(write=False)
        self.roster.setflags(write=False)

    @classmethod
    def build(cls, trajectories, oracle: DistanceOracle, h: int = 8,
              pivots=None, t: Interval | None = None) -> "PivotIndex":
        """Select pivots (unless given) and fill the ``|T| x h`` distance matrix.

        ``t`` defaults to the span of all given trajectories; pass it explicitly
        to index a subset against a wider interval.
        """
        trajs = _as_list(trajectories)
        if pivots is None:
            pivots = select_pivots(trajs, h)
        if t is None:
            t = global_interval(trajs)
        arrays = StepArrays(trajs)
        matrix = arrays.pivot_distances(pivots, t, oracle)
        return cls(pivots, t, matrix, arrays.ids)

    @property
    def h(self) -> int:
        return len(self.pivots)

    @property
    def entry_count(self) -> int:
        return self.matrix.size

    def query_distances(self, Q: Trajectory, oracle: DistanceOracle) -> np.ndarray:
        return query_pivot_distances(Q, self.pivots, self.t, oracle)

    def check_interval(self, s: Interval):
        if not s.issubset(self.t):
            raise QueryOutsideIndexInterval(f"query interval {s!r} not inside index interval {self.t!r}")

    def mask(self, qdist: np.ndarray, r: float) -> np.ndarray:
        """Boolean mask over the roster of trajectories passing every pivot test."""
        if self.h == 0:
            return np.ones(len(self.roster), dtype=bool)
        return (np.abs(self.matrix - qdist[None, :]) <= r).all(axis=1)

    def filter(self, Q: Trajectory, s: Interval, r: float, oracle: DistanceOracle,
               qdist: np.ndarray | None = None) -> np.ndarray:
        """Ids of indexed trajectories within radius ``r`` of ``Q`` on every pivot.

        ``Q`` should already be restricted so that its lifespan is ``s``.
        ``qdist`` may carry precomputed query-pivot distances.
        """
        if r < 0:
            raise ValueError("radius must be non-negative")
        self.check_interval(s)
        if qdist is None:
            qdist = self.query_distances(Q, oracle)
        return self.roster[self.mask(qdist, r)]

    # -- serialisation --------------------------------------------------

    def write_block(self, fh):
        fh.write(struct.pack("<qqqq", self.h, self.t.start, self.t.end, len(self.roster)))
        fh.write(np.asarray(self.pivots, dtype="<i8").tobytes())
        fh.write(self.roster.astype("<i8").tobytes())
        fh.write(self.matrix.astype("<f8").tobytes())

    @classmethod
    def read_block(cls, fh) -> "PivotIndex":
        h, a, b, n = struct.unpack("<qqqq", _read_exact(fh, 32))
        pivots = np.frombuffer(_read_exact(fh, 8 * h), dtype="<i8")
        roster = np.frombuffer(_read_exact(fh, 8 * n), dtype="<i8")
        matrix = np.frombuffer(_read_exact(fh, 8 * n * h), dtype="<f8").reshape(n, h)
        return cls(pivots.tolist(), Interval(a, b), matrix.copy(), roster.copy())

    def to_bytes(self) -> bytes:
        buf = io.BytesIO()
        buf.write(PIVOT_MAGIC)
        buf.write(struct.pack("<H", FORMAT_VERSION))
        self.write_block(buf)
        return buf.getvalue()

    @classmethod
    def from_bytes(cls, data: bytes) -> "PivotIndex":
        fh = io.BytesIO(data)
        if _read_exact(fh, len(PIVOT_MAGIC)) != PIVOT_MAGIC:
            raise IndexFormatError("not a pivot index file")
        (version,) = struct.unpack("<H", _read_exact(fh, 2))
        if version != FORMAT_VERSION:
            raise IndexFormatError(f"unsupported pivot index version {version}")
        out = cls.read_block(fh)
        if fh.read(1):
            raise IndexFormatError("trailing bytes after pivot index")
        return out

    def save(self, path):
        with open(path, "wb") as fh:
            fh.write(self.to_bytes())

    @classmethod
    def load(cls, path) -> "PivotIndex":
        with open(path, "rb") as fh:
            return cls.from_bytes(fh.read())

    def __repr__(self):
        return f"PivotIndex(h={self.h}, t={self.t!r}, n={len(self.roster)})"


def _read_exact(fh, n: int) -> bytes:
    data = fh.read(n)
    if len(data) != n:
        raise IndexFormatError("truncated index file")
    return data
