"""Graph and trajectory files, synthetic workloads, and GPS-to-graph construction.

File formats (UTF-8, LF line endings, whitespace separated):

``.graph``
    header ``n m``, then ``m`` lines ``u v w`` with 0-based vertex ids and a
    positive float cost. Each undirected edge appears once.

``.traj``
    one trajectory per line: ``id l v1 a1 b1 ... vl al bl``, integers only,
    each step dwelling at ``v`` during ``[a, b)``.

GPS input
    CSV with header ``trace_id,timestamp,x,y``; ``x``/``y`` are planar
    coordinates (metres), ``timestamp`` in seconds.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, NamedTuple

import numpy as np

from .errors import NonPositiveWeight, ParseError, TooFewPoints, ValidationError
from .model import Graph, Trajectory, validate

log = logging.getLogger(__name__)


# -- graphs ---------------------------------------------------------------

def parse_graph(lines: Iterable[str], require_connected: bool = True) -> Graph:
    rows = [(no, line.split()) for no, line in enumerate(lines, 1)]
    rows = [(no, parts) for no, parts in rows if parts]
    if not rows:
        raise ParseError("missing header 'n m'", 1)
    no, header = rows[0]
    if len(header) != 2:
        raise ParseError("header must be 'n m'", no)
    try:
        n, m = int(header[0]), int(header[1])
    except ValueError:
        raise ParseError("header must hold two integers", no) from None
    if len(rows) - 1 != m:
        raise ParseError(f"header announces {m} edges, found {len(rows) - 1}", no)
    edges = []
    seen = {}
    for no, parts in rows[1:]:
        if len(parts) != 3:
            raise ParseError("edge line must be 'u v w'", no)
        try:
            u, v, w = int(parts[0]), int(parts[1]), float(parts[2])
        except ValueError:
            raise ParseError(f"cannot parse edge {' '.join(parts)!r}", no) from None
        if not (0 <= u < n and 0 <= v < n):
            raise ParseError(f"vertex out of range 0..{n - 1}", no)
        if u == v:
            raise ParseError(f"self-loop at vertex {u}", no)
        if not (w > 0 and math.isfinite(w)):
            raise NonPositiveWeight(f"line {no}: edge ({u}, {v}) has weight {parts[2]}")
        key = (min(u, v), max(u, v))
        if key in seen:
            raise ParseError(f"duplicate edge {key} (first on line {seen[key]})", no)
        seen[key] = no
        edges.append((u, v, w))
    return Graph(n, edges, require_connected=require_connected)


def load_graph(path, require_connected: bool = True) -> Graph:
    with open(path, encoding="utf-8") as fh:
        return parse_graph(fh, require_connected)


def format_graph(G: Graph) -> str:
    lines = [f"{G.n} {G.m}"]
    lines += [f"{u} {v} {w!r}" for u, v, w in G.edges]
    return "\n".join(lines) + "\n"


def save_graph(G: Graph, path):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(format_graph(G))


# -- trajectories -----------------------------------------------------------

def parse_trajectories(lines: Iterable[str], G: Graph | None = None) -> dict:
    store = {}
    for no, line in enumerate(lines, 1):
        parts = line.split()
        if not parts:
            continue
        try:
            nums = [int(p) for p in parts]
        except ValueError:
            raise ParseError("trajectory lines hold integers only", no) from None
        if len(nums) < 2:
            raise ParseError("expected 'id l v1 a1 b1 ...'", no)
        tid, length = nums[0], nums[1]
        if tid < 0:
            raise ParseError(f"negative trajectory id {tid}", no)
        if length < 1 or len(nums) != 2 + 3 * length:
            raise ParseError(f"trajectory {tid}: length {length} does not match {len(nums) - 2} fields", no)
        body = nums[2:]
        T = Trajectory(tid, body[0::3], body[1::3], body[2::3])
        if tid in store:
            raise ParseError(f"duplicate trajectory id {tid}", no)
        problems = validate(T, G)
        if problems:
            raise ValidationError(tid, problems)
        store[tid] = T
    return store


def load_trajectories(path, G: Graph | None = None) -> dict:
    """Read a ``.traj`` file into an id -> :class:`Trajectory` dict (validated)."""
    with open(path, encoding="utf-8") as fh:
        return parse_trajectories(fh, G)


def format_trajectory(T: Trajectory) -> str:
    body = " ".join(f"{v} {a} {b}" for v, a, b in zip(T.vertices, T.starts, T.ends))
    return f"{T.id} {len(T)} {body}"


def save_trajectories(store, path):
    trajs = store.values() if isinstance(store, Mapping) else store
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for T in trajs:
            fh.write(format_trajectory(T) + "\n")


# -- built-in and random graphs -----------------------------------------------

def chain_graph(n: int, weight: float = 1.0) -> Graph:
    return Graph(n, [(i, i + 1, weight) for i in range(n - 1)])


def grid_graph(rows: int, cols: int, weight: float = 1.0) -> Graph:
    edges = []
    for r in range(rows):
        for c in range(cols):
            u = r * cols + c
            if c + 1 < cols:
                edges.append((u, u + 1, weight))
            if r + 1 < rows:
                edges.append((u, u + cols, weight))
    return Graph(rows * cols, edges)


def random_graph(n: int, seed: int, extra_edges: int | None = None,
                 weight_range=(0.1, 2.0)) -> Graph:
    """Connected random graph: a random spanning tree plus ``extra_edges`` random chords.

    Weights are uniform in ``weight_range``. ``extra_edges`` defaults to ``n``.
    """
    rng = np.random.default_rng(seed)
    if extra_edges is None:
        extra_edges = n
    order = rng.permutation(n)
    edges = {}
    lo, hi = weight_range
    for i in range(1, n):
        u = int(order[i])
        v = int(order[rng.integers(0, i)])
        edges[(min(u, v), max(u, v))] = float(rng.uniform(lo, hi))
    max_edges = n * (n - 1) // 2
    target = min(max_edges, len(edges) + extra_edges)
    while len(edges) < target:
        u, v = (int(x) for x in rng.integers(0, n, size=2))
        if u == v:
            continue
        key = (min(u, v), max(u, v))
        if key not in edges:
            edges[key] = float(rng.uniform(lo, hi))
    return Graph(n, [(u, v, w) for (u, v), w in sorted(edges.items())])


def builtin_graph(name: str) -> Graph:
    """Graph fixtures by name: ``chainN``, ``gridRxC`` or ``randomN`` (seed 0)."""
    try:
        if name.startswith("chain"):
            return chain_graph(int(name[5:]))
        if name.startswith("grid"):
            rows, cols = name[4:].split("x")
            return grid_graph(int(rows), int(cols))
        if name.startswith("random"):
            return random_graph(int(name[6:]), seed=0)
    except ValueError:
        pass
    raise ValueError(f"unknown built-in graph {name!r}; use chainN, gridRxC or randomN")


# -- synthetic workloads --------------------------------------------------------

@dataclass(frozen=True)
class WorkloadConfig:
    """Random-walk workload parameters; all ranges are inclusive."""

    count: int
    seed: int
    length: tuple = (5, 30)
    dwell: tuple = (1, 20)
    start: tuple = (0, 1000)

    def __post_init__(self):
        if self.count < 0:
            raise ValueError("count must be non-negative")
        for name in ("length", "dwell", "start"):
            lo, hi = getattr(self, name)
            if lo > hi:
                raise ValueError(f"{name} range is empty: {lo} > {hi}")
        if self.length[0] < 1 or self.dwell[0] < 1:
            raise ValueError("walk length and dwell must be at least 1")


def generate_synthetic(G: Graph, config: WorkloadConfig) -> dict:
    """Uniform random walks with uniform dwell times; ids are ``0..count-1``."""
    rng = np.random.default_rng(config.seed)
    neighbors = [G.neighbors(u) for u in range(G.n)]
    store = {}
    for tid in range(config.count):
        length = int(rng.integers(config.length[0], config.length[1] + 1))
        v = int(rng.integers(0, G.n))
        t = int(rng.integers(config.start[0], config.start[1] + 1))
        dwells = rng.integers(config.dwell[0], config.dwell[1] + 1, size=length)
        vs, ss, es = [], [], []
        for i in range(length):
            if i:
                nbrs = neighbors[v]
                if not nbrs:
                    break
                v = nbrs[int(rng.integers(0, len(nbrs)))]
            vs.append(v)
            ss.append(t)
            t += int(dwells[i])
            es.append(t)
        store[tid] = Trajectory(tid, vs, ss, es)
    return store


# -- GPS traces to graph -----------------------------------------------------

class GpsPoint(NamedTuple):
    trace_id: str
    timestamp: float
    x: float
    y: float


def load_gps_csv(path) -> list:
    """Read ``trace_id,timestamp,x,y`` rows; points come back sorted per trace by time."""
    points = []
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        missing = {"trace_id", "timestamp", "x", "y"} - set(reader.fieldnames or ())
        if missing:
            raise ParseError(f"GPS CSV lacks columns {sorted(missing)}", 1)
        for no, row in enumerate(reader, 2):
            try:
                points.append(GpsPoint(row["trace_id"], float(row["timestamp"]),
                                       float(row["x"]), float(row["y"])))
            except (TypeError, ValueError):
                raise ParseError(f"bad GPS row {row!r}", no) from None
    return sort_points(points)


def sort_points(points) -> list:
    return sorted(points, key=lambda p: (str(p.trace_id), p.timestamp))


def kmeans(X: np.ndarray, k: int, seed: int, max_iter: int = 100, tol: float = 1e-6):
    """Lloyd's k-means with k-means++ seeding.

    Stops once no center moves by ``tol`` or more. A cluster that runs empty
    is re-seeded at the point farthest from its assigned center.
    Returns ``(centers, labels)``.
    """
    from scipy.spatial import cKDTree
    from sklearn.cluster import kmeans_plusplus

    X = np.asarray(X, dtype=np.float64)
    centers, _ = kmeans_plusplus(X, k, random_state=seed)
    for _ in range(max_iter):
        dist, labels = cKDTree(centers).query(X)
        counts = np.bincount(labels, minlength=k)
        new = np.zeros_like(centers)
        np.add.at(new, labels, X)
        nonempty = counts > 0
        new[nonempty] /= counts[nonempty, None]
        for c in np.nonzero(~nonempty)[0]:
            far = int(dist.argmax())
            new[c] = X[far]
            dist[far] = 0.0
        shift = np.sqrt(((new - centers) ** 2).sum(axis=1)).max()
        centers = new
        if shift < tol:
            break
    _, labels = cKDTree(centers).query(X)
    return centers, labels


@dataclass
class GpsReport:
    traces: int = 0
    clusters_used: int = 0
    repaired_steps: int = 0
    dropped: list = field(default_factory=list)
    connected: bool = True


def trace_steps(clusters, buckets):
    """Collapse a trace's (cluster, time bucket) sequence into trajectory steps.

    Consecutive points in the same cluster form one step. A step that would
    have zero length (two clusters in one bucket) is widened to one unit and
    later steps are shifted along. Returns ``(vertices, starts, ends, repairs)``.
    """
    runs = []
    for c, b in zip(clusters, buckets):
        if runs and runs[-1][0] == c:
            runs[-1][2] = b
        else:
            runs.append([c, b, b])
    vertices = [r[0] for r in runs]
    starts = [r[1] for r in runs]
    repairs = 0
    for i in range(1, len(starts)):
        if starts[i] <= starts[i - 1]:
            starts[i] = starts[i - 1] + 1
            repairs += 1
    ends = starts[1:] + [max(runs[-1][2], starts[-1]) + 1]
    return vertices, starts, ends, repairs


def gps_to_graph(points, cluster_count: int, time_resolution: float, seed: int = 0):
    """Cluster GPS points into graph vertices and turn traces into trajectories.

    Each point is assigned to its k-means cluster; clusters that end up
    empty are discarded and the remaining ones renumbered ``0..n-1``. Two
    clusters are joined by an edge when some trace moves directly from one to
    the other, weighted by the distance between their centers. Timestamps
    become integer units ``floor(t / time_resolution)``.

    Returns ``(graph, store, report)``. The graph may be disconnected (the
    report says so); distances across components are infinite.
    """
    if cluster_count < 2:
        raise ValueError("cluster_count must be at least 2")
    if time_resolution <= 0:
        raise ValueError("time_resolution must be positive")
    points = sort_points(points)
    traces = {}
    for p in points:
        traces.setdefault(p.trace_id, []).append(p)
    if not any(len(ps) >= 2 for ps in traces.values()):
        raise TooFewPoints("need at least one trace with two or more points")
    if len(points) < cluster_count:
        raise TooFewPoints(f"{len(points)} points cannot form {cluster_count} clusters")

    X = np.array([(p.x, p.y) for p in points], dtype=np.float64)
    centers, labels = kmeans(X, cluster_count, seed)
    used = np.unique(labels)
    relabel = {int(c): i for i, c in enumerate(used)}
    centers = centers[used]
    report = GpsReport(traces=len(traces), clusters_used=len(used))

    store = {}
    edges = {}
    members = {}
    for i, p in enumerate(points):
        members.setdefault(p.trace_id, []).append(i)
    for tid, name in enumerate(sorted(members, key=str)):
        idx = members[name]
        clusters = [relabel[int(labels[i])] for i in idx]
        buckets = [int(math.floor(points[i].timestamp / time_resolution)) for i in idx]
        vs, ss, es, repairs = trace_steps(clusters, buckets)
        report.repaired_steps += repairs
        T = Trajectory(tid, vs, ss, es)
        if validate(T):
            report.dropped.append(name)
            continue
        store[tid] = T
        for a, b in zip(vs, vs[1:]):
            key = (min(a, b), max(a, b))
            if key not in edges:
                edges[key] = float(np.hypot(*(centers[a] - centers[b])))
    graph = Graph(len(used), [(u, v, w) for (u, v), w in sorted(edges.items())], require_connected=False)
    report.connected = graph.is_connected()
    if not report.connected:
        log.warning("GPS graph with %d vertices is not connected", graph.n)
    return graph, store, report


def write_gps_csv(points, path):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["trace_id", "timestamp", "x", "y"])
        for p in points:
            w.writerow([p.trace_id, repr(p.timestamp), repr(p.x), repr(p.y)])

