"""Interval tree over trajectory lifespans with a pivot filter at every node.

Each node splits its trajectories at the lower median ``m`` of their ending
times: lifespans ending at or before ``m`` go left, those starting at or
after ``m`` go right, the rest straddle ``m`` and stay at the node. The
pivots are chosen once over the whole set; every node keeps the pivot
distance rows of the trajectories it stores, so total memory stays at
``|T| * h`` floats.
"""

from __future__ import annotations

import io
import struct
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import IndexFormatError, QueryOutsideIndexInterval
from .metric import DistanceOracle
from .model import Interval, Trajectory
from .pivot import (FORMAT_VERSION, PivotIndex, StepArrays, _as_list, _read_exact,
                    global_interval, query_pivot_distances, select_pivots)

TREE_MAGIC = b"GTTREE\x00\x00"
DEFAULT_LEAF_MIN = 100


@dataclass(eq=False)
class TreeNode:
    median: Optional[int]
    pivot: PivotIndex          # roster = trajectories stored at this node
    starts: np.ndarray         # lifespan starts, aligned with pivot.roster
    ends: np.ndarray
    left: Optional["TreeNode"] = None
    right: Optional["TreeNode"] = None

    @property
    def roster(self) -> np.ndarray:
        return self.pivot.roster

    @property
    def is_leaf(self) -> bool:
        return self.median is None


def lower_median(values) -> int:
    ordered = np.sort(np.asarray(values))
    return int(ordered[(len(ordered) - 1) // 2])


def split(starts, ends, m):
    """Boolean masks (left, mid, right) of the routing rule at median ``m``."""
    left = ends <= m
    right = starts >= m
    return left, ~(left | right), right


class TreeIndex:
    def __init__(self, root: TreeNode, pivots, t: Interval, leaf_min: int):
        self.root = root
        self.pivots = list(pivots)
        self.t = t
        self.leaf_min = leaf_min

    @classmethod
    def build(cls, trajectories, oracle: DistanceOracle, h: int = 8,
              leaf_min: int = DEFAULT_LEAF_MIN, pivots=None) -> "TreeIndex":
        if leaf_min < 1:
            raise ValueError("leaf_min must be at least 1")
        trajs = _as_list(trajectories)
        if pivots is None:
            pivots = select_pivots(trajs, h)
        t = global_interval(trajs)
        arrays = StepArrays(trajs)
        # Rows depend only on their own trajectory, so computing them once
        # and slicing per node equals building each node's filter separately.
        matrix = arrays.pivot_distances(pivots, t, oracle)
        ids = arrays.ids
        starts = np.array([T.start for T in trajs], dtype=np.int64)
        ends = np.array([T.end for T in trajs], dtype=np.int64)

        def leaf(idx):
            return TreeNode(None, PivotIndex(pivots, t, matrix[idx], ids[idx]), starts[idx], ends[idx])

        def make(idx, streak):
            n = len(idx)
            if n <= leaf_min:
                return leaf(idx)
            m = lower_median(ends[idx])
            lmask, mmask, rmask = split(starts[idx], ends[idx], m)
            nl, nm, nr = int(lmask.sum()), int(mmask.sum()), int(rmask.sum())
            if n in (nl, nm, nr):
                return leaf(idx)
            streak = streak + 1 if (nl == 0 or nr == 0) else 0
            if streak >= 2:
                return leaf(idx)
            here = idx[mmask]
            node = TreeNode(m, PivotIndex(pivots, t, matrix[here], ids[here]), starts[here], ends[here])
            if nl:
                node.left = make(idx[lmask], streak)
            if nr:
                node.right = make(idx[rmask], streak)
            return node

        root = make(np.arange(len(trajs)), 0)
        return cls(root, pivots, t, leaf_min)

    def nodes(self):
        """Pre-order node iterator."""
        stack = [self.root]
        while stack:
            node = stack.pop()
            yield node
            if node.right is not None:
                stack.append(node.right)
            if node.left is not None:
                stack.append(node.left)

    @property
    def h(self) -> int:
        return len(self.pivots)

    @property
    def node_count(self) -> int:
        return sum(1 for _ in self.nodes())

    @property
    def entry_count(self) -> int:
        return sum(node.pivot.entry_count for node in self.nodes())

    def roster_sizes(self) -> list:
        return [len(node.roster) for node in self.nodes()]

    def depth(self) -> int:
        def rec(node):
            if node is None:
                return 0
            return 1 + max(rec(node.left), rec(node.right))
        return rec(self.root)

    def check_interval(self, s: Interval):
        if not s.issubset(self.t):
            raise QueryOutsideIndexInterval(f"query interval {s!r} not inside index interval {self.t!r}")

    def filter(self, Q: Trajectory, s: Interval, r: float, oracle: DistanceOracle,
               qdist: np.ndarray | None = None, check_lifespans: bool = True) -> np.ndarray:
        """Sorted ids of trajectories that survive the temporal and pivot filters.

        Only subtrees that can hold trajectories overlapping ``s`` are
        visited. With ``check_lifespans`` each node-stored trajectory is also
        tested against ``s``; without it a visited node contributes its whole
        pivot-filtered roster.
        """
        if r < 0:
            raise ValueError("radius must be non-negative")
        self.check_interval(s)
        if qdist is None:
            qdist = query_pivot_distances(Q, self.pivots, self.t, oracle)
        found = []
        stack = [self.root]
        while stack:
            node = stack.pop()
            if len(node.roster):
                keep = node.pivot.mask(qdist, r)
                if check_lifespans:
                    keep &= (node.starts < s.end) & (node.ends > s.start)
                found.append(node.roster[keep])
            if node.median is not None:
                if node.left is not None and s.start < node.median:
                    stack.append(node.left)
                if node.right is not None and s.end > node.median:
                    stack.append(node.right)
        if not found:
            return np.empty(0, dtype=np.int64)
        return np.sort(np.concatenate(found))

    # -- serialisation --------------------------------------------------

    def to_bytes(self) -> bytes:
        buf = io.BytesIO()
        buf.write(TREE_MAGIC)
        buf.write(struct.pack("<H", FORMAT_VERSION))
        buf.write(struct.pack("<qqqq", self.h, self.t.start, self.t.end, self.leaf_min))
        buf.write(np.asarray(self.pivots, dtype="<i8").tobytes())
        for node in self.nodes():
            flags = (node.median is not None) | (node.left is not None) << 1 | (node.right is not None) << 2
            buf.write(struct.pack("<Bq", flags, node.median if node.median is not None else 0))
            node.pivot.write_block(buf)
            buf.write(node.starts.astype("<i8").tobytes())
            buf.write(node.ends.astype("<i8").tobytes())
        return buf.getvalue()

    @classmethod
    def from_bytes(cls, data: bytes) -> "TreeIndex":
        fh = io.BytesIO(data)
        if _read_exact(fh, len(TREE_MAGIC)) != TREE_MAGIC:
            raise IndexFormatError("not a tree index file")
        (version,) = struct.unpack("<H", _read_exact(fh, 2))
        if version != FORMAT_VERSION:
            raise IndexFormatError(f"unsupported tree index version {version}")
        h, a, b, leaf_min = struct.unpack("<qqqq", _read_exact(fh, 32))
        pivots = np.frombuffer(_read_exact(fh, 8 * h), dtype="<i8").tolist()
        t = Interval(a, b)

        def read_node():
            flags, median = struct.unpack("<Bq", _read_exact(fh, 9))
            pivot = PivotIndex.read_block(fh)
            if pivot.pivots != pivots or pivot.t != t:
                raise IndexFormatError("node pivot block disagrees with tree header")
            n = len(pivot.roster)
            starts = np.frombuffer(_read_exact(fh, 8 * n), dtype="<i8").astype(np.int64)
            ends = np.frombuffer(_read_exact(fh, 8 * n), dtype="<i8").astype(np.int64)
            node = TreeNode(median if flags & 1 else None, pivot, starts, ends)
            if flags & 2:
                node.left = read_node()
            if flags & 4:
                node.right = read_node()
            return node

        root = read_node()
        if fh.read(1):
            raise IndexFormatError("trailing bytes after tree index")
        return cls(root, pivots, t, leaf_min)

    def save(self, path):
        with open(path, "wb") as fh:
            fh.write(self.to_bytes())

    @classmethod
    def load(cls, path) -> "TreeIndex":
        with open(path, "rb") as fh:
            return cls.from_bytes(fh.read())

    def __repr__(self):
        return f"TreeIndex(h={self.h}, t={self.t!r}, nodes={self.node_count}, leaf_min={self.leaf_min})"


def load_index(path):
    """Load a pivot or tree index, dispatching on the file's magic bytes."""
    with open(path, "rb") as fh:
        data = fh.read()
    if data.startswith(TREE_MAGIC):
        return TreeIndex.from_bytes(data)
    if data.startswith(b"GTPIVOT\x00"):
        return PivotIndex.from_bytes(data)
    raise IndexFormatError(f"{path}: unrecognised index file")
