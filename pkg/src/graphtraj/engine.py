"""Top-k query evaluation, the similarity score ratio and the experiment driver."""

from __future__ import annotations

import heapq
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .errors import EmptyQueryInterval, IndexMissing, QueryOutsideIndexInterval, ZeroReference
from .metric import DistanceOracle, merge_similarity, naive_similarity, similarity
from .model import Interval, Trajectory, restrict
from .pivot import PivotIndex
from .tree import TreeIndex

log = logging.getLogger(__name__)

INDEX_TYPES = ("exact", "pivot", "tree")


@dataclass
class QuerySpec:
    Q: Trajectory
    k: int = 1
    s: Interval | None = None
    r: float = 1.0
    index: str = "exact"

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be at least 1")
        if self.index not in INDEX_TYPES:
            raise ValueError(f"index must be one of {INDEX_TYPES}, got {self.index!r}")
        if self.s is None:
            self.s = self.Q.lifespan
        if not 0 <= self.r:
            raise ValueError("radius must be non-negative")


@dataclass
class TopKResult:
    items: list                     # (trajectory id, similarity), best first
    candidate_count: int
    filter_ms: float = 0.0
    eval_ms: float = 0.0
    merge_steps: int = 0
    aborted: int = 0
    fallback: bool = False

    @property
    def ids(self) -> list:
        return [i for i, _ in self.items]

    def to_dict(self) -> dict:
        return {
            "results": [[i, sim] for i, sim in self.items],
            "candidate_count": self.candidate_count,
            "filter_ms": self.filter_ms,
            "eval_ms": self.eval_ms,
            "merge_steps": self.merge_steps,
            "aborted": self.aborted,
            "fallback": self.fallback,
        }


def _scan(Qs, s, candidates, store, oracle, k, upper_bound):
    """Evaluate ``candidates`` in order, keeping the best ``k`` in a min-heap.

    Heap keys are ``(sim, -id)`` so the root is the current k-th best under
    the order (similarity desc, id asc). Once the heap is full, its root
    similarity is the abort threshold for later evaluations; aborting only
    on a strictly smaller bound means ties still reach the comparison.
    Trajectories with similarity 0 never enter the result.
    """
    q_w = [oracle.exp_row(u) for u in Qs.vertices]
    qs, qe = Qs.starts, Qs.ends
    alpha, beta = s.start, s.end
    heap = []
    steps = 0
    aborted = 0
    for tid in candidates:
        T = store[tid]
        floor = heap[0][0] if upper_bound and len(heap) == k else None
        value, done, n = merge_similarity(q_w, qs, qe, T.vertices, T.starts, T.ends, alpha, beta, floor)
        steps += n
        if not done:
            aborted += 1
            continue
        if value <= 0.0:
            continue
        key = (value, -tid)
        if len(heap) < k:
            heapq.heappush(heap, key)
        elif key > heap[0]:
            heapq.heapreplace(heap, key)
    return heap, steps, aborted


def _ranked(heap, k):
    best = sorted(((-neg_id, sim) for sim, neg_id in heap), key=lambda p: (-p[1], p[0]))
    return best[:k]


def _indexed(indexes: Mapping, name: str):
    idx = indexes.get(name) if indexes else None
    if idx is None:
        raise IndexMissing(f"no {name} index available")
    return idx


def topk(spec: QuerySpec, store: Mapping, oracle: DistanceOracle, indexes: Mapping | None = None,
         upper_bound: bool = True, workers: int = 1) -> TopKResult:
    """Answer a top-k similarity query.

    ``store`` maps trajectory id to :class:`Trajectory`; ``indexes`` maps
    ``"pivot"``/``"tree"`` to built indexes. Results are ordered by
    similarity descending then id ascending, hold at most ``k`` entries and
    omit trajectories with zero similarity. The exact path scans the whole
    store. The indexed paths evaluate only their candidate set; if the query
    interval leaves the index interval they fall back to an exact scan and
    set ``fallback``.
    """
    s = spec.s
    Qs = restrict(spec.Q, s)
    if Qs is None:
        raise EmptyQueryInterval(f"query trajectory {spec.Q.id} does not intersect {s!r}")
    # Sim(Q, T, s) is proportional to Sim(Q, T, lifespan(Q[s])), so filtering
    # over the narrower interval preserves the ranking.
    s_filter = Qs.lifespan

    fallback = False
    t0 = time.perf_counter()
    if spec.index == "exact":
        candidates = sorted(store)
    else:
        idx = _indexed(indexes, spec.index)
        try:
            candidates = idx.filter(Qs, s_filter, spec.r, oracle).tolist()
        except QueryOutsideIndexInterval as exc:
            log.warning("%s; falling back to exact scan", exc)
            fallback = True
            candidates = sorted(store)
    t1 = time.perf_counter()

    if workers <= 1 or len(candidates) < 2 * workers:
        heap, steps, aborted = _scan(Qs, s, candidates, store, oracle, spec.k, upper_bound)
    else:
        chunks = np.array_split(np.asarray(candidates, dtype=np.int64), workers)
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(
                lambda c: _scan(Qs, s, c.tolist(), store, oracle, spec.k, upper_bound), chunks))
        heap = [key for part, _, _ in parts for key in part]
        steps = sum(p[1] for p in parts)
        aborted = sum(p[2] for p in parts)
    t2 = time.perf_counter()

    return TopKResult(
        items=_ranked(heap, spec.k),
        candidate_count=len(candidates),
        filter_ms=(t1 - t0) * 1e3,
        eval_ms=(t2 - t1) * 1e3,
        merge_steps=steps,
        aborted=aborted,
        fallback=fallback,
    )


def brute_force_topk(Q: Trajectory, s: Interval, k: int, store: Mapping, oracle: DistanceOracle,
                     candidates=None) -> list:
    """Reference top-k: naive double-loop similarity for every trajectory, then a full sort."""
    Qs = restrict(Q, s)
    ids = sorted(store) if candidates is None else sorted(candidates)
    scored = [(tid, naive_similarity(Qs, store[tid], s, oracle)) for tid in ids]
    scored = [p for p in scored if p[1] > 0.0]
    scored.sort(key=lambda p: (-p[1], p[0]))
    return scored[:k]


def ssr(result_ids: Sequence[int], reference_ids: Sequence[int], Q: Trajectory, s: Interval,
        store: Mapping, oracle: DistanceOracle) -> float:
    """Similarity score ratio: total similarity of a result set over that of a reference set."""
    Qs = restrict(Q, s)
    if Qs is None:
        raise ZeroReference("query does not intersect its interval")
    num = math.fsum(similarity(Qs, store[i], s, oracle).value for i in result_ids)
    den = math.fsum(similarity(Qs, store[i], s, oracle).value for i in reference_ids)
    if den == 0.0:
        raise ZeroReference("reference set has zero total similarity")
    return num / den


def ssr_or_nan(*args, **kwargs) -> float:
    try:
        return ssr(*args, **kwargs)
    except ZeroReference:
        return math.nan


@dataclass
class ProtocolConfig:
    ks: tuple = (1, 4, 16, 64)
    index_types: tuple = ("exact", "pivot", "tree")
    r: float = 0.1
    h: int = 8
    leaf_min: int = 100
    queries: int = 100
    seed: int = 0
    upper_bound: bool = True
    warmup: bool = True
    workers: int = 1


@dataclass
class ProtocolReport:
    per_query: list = field(default_factory=list)
    aggregate: list = field(default_factory=list)
    build: dict = field(default_factory=dict)
    histogram: list = field(default_factory=list)


def choose_queries(store: Mapping, count: int, seed: int) -> list:
    ids = np.array(sorted(store), dtype=np.int64)
    rng = np.random.default_rng(seed)
    count = min(count, len(ids))
    return rng.choice(ids, size=count, replace=False).tolist()


def _mean_std(values):
    arr = np.asarray(values, dtype=np.float64)
    if arr.size == 0 or np.all(np.isnan(arr)):
        return math.nan, math.nan
    return float(np.nanmean(arr)), float(np.nanstd(arr))


def similarity_histogram(query_ids, store, oracle, bins: int = 20) -> list:
    """Counts of all query/trajectory similarities per bin over ``[0, 1]``.

    Raw data for plotting the similarity distribution of a workload.
    """
    counts = np.zeros(bins, dtype=np.int64)
    for qid in query_ids:
        Q = store[qid]
        s = Q.lifespan
        sims = [similarity(Q, T, s, oracle).value for T in store.values()]
        c, _ = np.histogram(sims, bins=bins, range=(0.0, 1.0))
        counts += c
    total = counts.sum()
    edges = np.linspace(0.0, 1.0, bins + 1)
    return [
        {"bin_lo": float(edges[i]), "bin_hi": float(edges[i + 1]), "count": int(counts[i]),
         "fraction": float(counts[i] / total) if total else 0.0}
        for i in range(bins)
    ]


def build_indexes(store: Mapping, oracle: DistanceOracle, config: ProtocolConfig) -> tuple:
    indexes = {}
    build = {}
    trajs = [store[i] for i in sorted(store)]
    if "pivot" in config.index_types:
        t0 = time.perf_counter()
        indexes["pivot"] = PivotIndex.build(trajs, oracle, h=config.h)
        build["pivot_s"] = time.perf_counter() - t0
        build["pivot_entries"] = indexes["pivot"].entry_count
    if "tree" in config.index_types:
        t0 = time.perf_counter()
        indexes["tree"] = TreeIndex.build(trajs, oracle, h=config.h, leaf_min=config.leaf_min)
        build["tree_s"] = time.perf_counter() - t0
        build["tree_entries"] = indexes["tree"].entry_count
        build["tree_nodes"] = indexes["tree"].node_count
    return indexes, build


def run_protocol(store: Mapping, oracle: DistanceOracle, config: ProtocolConfig,
                 indexes: Mapping | None = None, histogram_bins: int = 0) -> ProtocolReport:
    """Run every (query, k, index) combination and summarise it.

    Queries are drawn without replacement using ``config.seed``; each uses
    its own lifespan as the query interval. SSR is measured against the
    exact result for the same query and ``k``.
    """
    if not store:
        raise ValueError("store is empty")
    report = ProtocolReport()
    if indexes is None:
        indexes, report.build = build_indexes(store, oracle, config)
    query_ids = choose_queries(store, config.queries, config.seed)

    if config.warmup and query_ids:
        topk(QuerySpec(store[query_ids[0]], k=max(config.ks)), store, oracle)

    for qid in query_ids:
        Q = store[qid]
        s = Q.lifespan
        for k in config.ks:
            exact = topk(QuerySpec(Q, k=k, s=s), store, oracle, upper_bound=config.upper_bound,
                         workers=config.workers)
            for name in config.index_types:
                if name == "exact":
                    res = exact
                else:
                    spec = QuerySpec(Q, k=k, s=s, r=config.r, index=name)
                    res = topk(spec, store, oracle, indexes, upper_bound=config.upper_bound,
                               workers=config.workers)
                value = 1.0 if name == "exact" else ssr_or_nan(res.ids, exact.ids, Q, s, store, oracle)
                report.per_query.append({
                    "query_id": qid, "k": k, "index": name, "r": config.r, "h": config.h,
                    "results": [[i, sim] for i, sim in res.items],
                    "candidate_count": res.candidate_count,
                    "filter_ms": res.filter_ms, "eval_ms": res.eval_ms,
                    "ssr": value, "fallback": res.fallback,
                })

    for name in config.index_types:
        for k in config.ks:
            rows = [row for row in report.per_query if row["index"] == name and row["k"] == k]
            times = [row["filter_ms"] + row["eval_ms"] for row in rows]
            cand_mean, cand_std = _mean_std([row["candidate_count"] for row in rows])
            ssr_mean, ssr_std = _mean_std([row["ssr"] for row in rows])
            t_mean, t_std = _mean_std(times)
            report.aggregate.append({
                "index": name, "k": k, "r": config.r, "h": config.h, "queries": len(rows),
                "candidates_mean": cand_mean, "candidates_std": cand_std,
                "ssr_mean": ssr_mean, "ssr_std": ssr_std,
                "time_ms_mean": t_mean, "time_ms_std": t_std,
            })

    if histogram_bins:
        report.histogram = similarity_histogram(query_ids, store, oracle, histogram_bins)
    return report
