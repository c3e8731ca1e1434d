import math

import numpy as np
import pytest
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import dijkstra

from graphtraj import Graph, Interval, Trajectory


def random_connected_graph(rng, n, extra=None, integer_weights=False):
    """Random spanning tree plus chords. Independent of the package's own generator."""
    edges = {}
    for v in range(1, n):
        u = int(rng.integers(0, v))
        edges[(u, v)] = None
    extra = n // 2 if extra is None else extra
    for _ in range(extra):
        u, v = sorted(int(x) for x in rng.integers(0, n, size=2))
        if u != v:
            edges[(u, v)] = None
    out = []
    for (u, v) in sorted(edges):
        w = float(rng.integers(1, 5)) if integer_weights else float(rng.uniform(0.05, 3.0))
        out.append((u, v, w))
    return Graph(n, out)


def random_trajectory(rng, n, tid=0, max_len=50, start_range=(0, 60), max_dwell=8):
    """Valid trajectory over arbitrary (not necessarily adjacent) vertices."""
    length = int(rng.integers(1, max_len + 1))
    t = int(rng.integers(*start_range))
    vs, ss, es = [], [], []
    prev = -1
    for _ in range(length):
        v = int(rng.integers(0, n))
        while v == prev and n > 1:
            v = int(rng.integers(0, n))
        if v == prev:
            break
        d = int(rng.integers(1, max_dwell + 1))
        vs.append(v)
        ss.append(t)
        es.append(t + d)
        t += d
        prev = v
    return Trajectory(tid, vs, ss, es)


def random_interval(rng, lo, hi):
    a = int(rng.integers(lo, hi))
    b = int(rng.integers(a + 1, hi + 1))
    return Interval(a, b)


def random_store(rng, n, count, **kw):
    return {i: random_trajectory(rng, n, tid=i, **kw) for i in range(count)}


def all_pairs(G):
    """Shortest-path matrix from scipy, independent of the package's oracle."""
    rows, cols, vals = [], [], []
    for a, b, c in G.edges:
        rows += [a, b]
        cols += [b, a]
        vals += [c, c]
    return dijkstra(csr_matrix((vals, (rows, cols)), shape=(G.n, G.n)))


def double_loop(Q, T, s, D):
    """Similarity by summing over every step pair; ``D`` is an all-pairs matrix."""
    total = 0.0
    for v, a, b in zip(T.vertices, T.starts, T.ends):
        for u, c, d in zip(Q.vertices, Q.starts, Q.ends):
            shared = min(b, d, s.end) - max(a, c, s.start)
            if shared > 0:
                total += shared * math.exp(-D[v][u])
    return total / len(s)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def chain3():
    return Graph(3, [(0, 1, 1.0), (1, 2, 1.0)])


# -- acceptance reporting -------------------------------------------------------

_acceptance = []


def pytest_runtest_logreport(report):
    if "test_acceptance.py" in report.nodeid and report.when == "call":
        _acceptance.append((report.nodeid.split("::")[-1], report.outcome))
    elif "test_acceptance.py" in report.nodeid and report.when == "setup" and report.outcome != "passed":
        _acceptance.append((report.nodeid.split("::")[-1], report.outcome))


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for name, outcome in _acceptance:
        terminalreporter.write_line(f"{'PASS' if outcome == 'passed' else 'FAIL'}  {name}")
