"""Command-line interface: ``graphtraj <subcommand> ...``.

Data goes to files (``--out``) or standard output; diagnostics go to
standard error. Exit status is 0 on success, 1 on a runtime error and 2 on
a usage error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .engine import INDEX_TYPES, ProtocolConfig, QuerySpec, brute_force_topk, run_protocol, ssr, topk
from .errors import GraphTrajError
from .ingest import (WorkloadConfig, builtin_graph, generate_synthetic, gps_to_graph, load_gps_csv,
                     load_graph, load_trajectories, save_graph, save_trajectories)
from .metric import DistanceOracle
from .model import Interval, restrict
from .pivot import PivotIndex
from .tree import DEFAULT_LEAF_MIN, TreeIndex, load_index

log = logging.getLogger("graphtraj")

THREADS_ENV = "GRAPHTRAJ_THREADS"


def _default_threads() -> int:
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


def _resolve_graph(spec: str):
    """A graph file path, or the name of a built-in fixture graph."""
    if os.path.exists(spec):
        return load_graph(spec), False
    return builtin_graph(spec), True


def _load_inputs(args):
    G, _ = _resolve_graph(args.graph)
    store = load_trajectories(args.traj, G)
    if not store:
        raise GraphTrajError(f"{args.traj}: no trajectories")
    return G, store


def _write_csv(path, rows, columns):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=columns, lineterminator="\n", extrasaction="ignore")
        w.writeheader()
        for row in rows:
            w.writerow({c: _fmt(row.get(c)) for c in columns})


def _fmt(value):
    if isinstance(value, float):
        return "nan" if math.isnan(value) else repr(value)
    return value


def _emit(payload, out):
    text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


# -- subcommands -------------------------------------------------------------

def cmd_gen(args):
    G, builtin = _resolve_graph(args.graph)
    config = WorkloadConfig(args.count, args.seed, tuple(args.length), tuple(args.dwell), tuple(args.start))
    store = generate_synthetic(G, config)
    out = Path(args.out)
    traj_path = out.with_suffix(".traj")
    save_trajectories(store, traj_path)
    print(f"wrote {len(store)} trajectories to {traj_path}")
    if builtin or args.write_graph:
        graph_path = out.with_suffix(".graph")
        save_graph(G, graph_path)
        print(f"wrote graph ({G.n} vertices, {G.m} edges) to {graph_path}")


def cmd_ingest_gps(args):
    points = load_gps_csv(args.csv)
    G, store, report = gps_to_graph(points, args.clusters, args.time_resolution, seed=args.seed)
    out = Path(args.out)
    save_graph(G, out.with_suffix(".graph"))
    save_trajectories(store, out.with_suffix(".traj"))
    print(f"{report.traces} traces -> {len(store)} trajectories on {G.n} vertices / {G.m} edges; "
          f"{report.repaired_steps} steps repaired, {len(report.dropped)} traces dropped"
          + ("" if report.connected else "; graph is NOT connected"))


def cmd_build(args):
    G, store = _load_inputs(args)
    oracle = DistanceOracle(G)
    trajs = [store[i] for i in sorted(store)]
    t0 = time.perf_counter()
    if args.type == "pivot":
        index = PivotIndex.build(trajs, oracle, h=args.h)
    else:
        index = TreeIndex.build(trajs, oracle, h=args.h, leaf_min=args.leaf_min)
    elapsed = time.perf_counter() - t0
    index.save(args.out)
    summary = {"type": args.type, "trajectories": len(trajs), "h": index.h,
               "entries": index.entry_count, "build_s": round(elapsed, 6)}
    if args.type == "tree":
        sizes = index.roster_sizes()
        summary.update(nodes=len(sizes), depth=index.depth(), roster_total=sum(sizes))
    print(" ".join(f"{k}={v}" for k, v in summary.items()))


def _query_trajectory(args, store):
    if args.query_file:
        queries = load_trajectories(args.query_file)
        if not queries:
            raise GraphTrajError(f"{args.query_file}: no trajectory")
        return next(iter(queries.values()))
    if args.query_id not in store:
        raise GraphTrajError(f"unknown query id {args.query_id}")
    return store[args.query_id]


def cmd_query(args):
    G, store = _load_inputs(args)
    oracle = DistanceOracle(G)
    Q = _query_trajectory(args, store)
    s = Interval(*args.interval) if args.interval else Q.lifespan
    indexes = {}
    index_name = args.index
    if args.index_file:
        idx = load_index(args.index_file)
        index_name = "tree" if isinstance(idx, TreeIndex) else "pivot"
        indexes[index_name] = idx
    elif index_name != "exact":
        trajs = [store[i] for i in sorted(store)]
        if index_name == "pivot":
            indexes["pivot"] = PivotIndex.build(trajs, oracle, h=args.h)
        else:
            indexes["tree"] = TreeIndex.build(trajs, oracle, h=args.h, leaf_min=args.leaf_min)
    if index_name != "exact" and args.r is None:
        raise GraphTrajError("--r is required for the pivot and tree indexes")
    spec = QuerySpec(Q, k=args.k, s=s, r=args.r if args.r is not None else 1.0, index=index_name)
    res = topk(spec, store, oracle, indexes, upper_bound=not args.no_upper_bound, workers=args.threads)
    if res.fallback:
        log.warning("query interval %r outside index interval; answered by exact scan", s)
    payload = {"query_id": Q.id, "k": args.k, "index": index_name, "r": args.r, "h": args.h,
               "s": [s.start, s.end], **res.to_dict()}
    if args.no_timing:
        del payload["filter_ms"], payload["eval_ms"]
    if args.oracle:
        candidates = None
        if index_name != "exact" and not res.fallback:
            Qs = restrict(Q, s)
            candidates = indexes[index_name].filter(Qs, Qs.lifespan, spec.r, oracle)
        ref = brute_force_topk(Q, s, args.k, store, oracle, candidates=candidates)
        same = [i for i, _ in ref] == res.ids and all(
            abs(a - b) <= 1e-12 for (_, a), (_, b) in zip(ref, res.items))
        payload["oracle"] = "match" if same else "mismatch"
        print(f"oracle: {payload['oracle']}", file=sys.stderr)
    _emit(payload, args.out)
    if args.oracle and payload["oracle"] != "match":
        return 1
    return 0


AGGREGATE_COLUMNS = ["index", "k", "r", "h", "queries", "candidates_mean", "candidates_std",
                     "ssr_mean", "ssr_std"]
TIMING_COLUMNS = ["index", "k", "r", "h", "queries", "time_ms_mean", "time_ms_std"]


def cmd_protocol(args):
    G, store = _load_inputs(args)
    oracle = DistanceOracle(G)
    config = ProtocolConfig(ks=tuple(args.ks), index_types=tuple(args.indexes), r=args.r, h=args.h,
                            leaf_min=args.leaf_min, queries=args.queries, seed=args.seed,
                            upper_bound=not args.no_upper_bound, workers=args.threads)
    report = run_protocol(store, oracle, config, histogram_bins=args.bins)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out.with_suffix(".jsonl"), "w", encoding="utf-8", newline="\n") as fh:
        for row in report.per_query:
            if args.no_timing:
                row = {k: v for k, v in row.items() if k not in ("filter_ms", "eval_ms")}
            fh.write(json.dumps(row, sort_keys=True) + "\n")
    _write_csv(out.with_suffix(".csv"), report.aggregate, AGGREGATE_COLUMNS)
    _write_csv(out.with_name(out.stem + "_timing.csv"), report.aggregate, TIMING_COLUMNS)
    if report.histogram:
        _write_csv(out.with_name(out.stem + "_hist.csv"), report.histogram,
                   ["bin_lo", "bin_hi", "count", "fraction"])
    for key, value in report.build.items():
        print(f"build {key}={value:.6g}" if isinstance(value, float) else f"build {key}={value}")
    for row in report.aggregate:
        print(f"{row['index']:>5} k={row['k']:<3} candidates={row['candidates_mean']:.1f}"
              f" ssr={row['ssr_mean']:.3f} time_ms={row['time_ms_mean']:.2f}±{row['time_ms_std']:.2f}")


def _read_ids(path):
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    if isinstance(data, dict):
        data = data["results"]
    return [int(item[0]) if isinstance(item, list) else int(item) for item in data]


def cmd_eval_ssr(args):
    G, store = _load_inputs(args)
    oracle = DistanceOracle(G)
    Q = _query_trajectory(args, store)
    s = Interval(*args.interval) if args.interval else Q.lifespan
    value = ssr(_read_ids(args.result), _read_ids(args.reference), Q, s, store, oracle)
    print(repr(value))


def cmd_stats(args):
    G, _ = _resolve_graph(args.graph)
    print(f"vertices={G.n} edges={G.m} connected={G.is_connected()}")
    if args.traj:
        store = load_trajectories(args.traj, G)
        lengths = np.array([len(T) for T in store.values()], dtype=float)
        spans = np.array([len(T.lifespan) for T in store.values()], dtype=float)
        if len(store):
            first = min(T.start for T in store.values())
            last = max(T.end for T in store.values())
            print(f"trajectories={len(store)} length={lengths.mean():.1f}±{lengths.std():.1f} "
                  f"lifespan={spans.mean():.1f}±{spans.std():.1f} time=[{first}, {last})")
        else:
            print("trajectories=0")


# -- argument parsing ----------------------------------------------------------

def _add_inputs(p):
    p.add_argument("--graph", required=True, help="graph file or built-in name (chainN, gridRxC, randomN)")
    p.add_argument("--traj", required=True, help="trajectory file")


def _add_query(p):
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--query-id", type=int)
    g.add_argument("--query-file", help=".traj file whose first trajectory is the query")
    p.add_argument("--interval", type=int, nargs=2, metavar=("START", "END"),
                   help="query interval [START, END); defaults to the query's lifespan")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="graphtraj", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="count", default=0)
    parser.add_argument("--threads", type=int, default=_default_threads(),
                        help=f"worker threads for candidate evaluation (default ${THREADS_ENV} or 1)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a seeded random-walk workload")
    p.add_argument("--graph", required=True)
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--length", type=int, nargs=2, default=[5, 30], metavar=("MIN", "MAX"))
    p.add_argument("--dwell", type=int, nargs=2, default=[1, 20], metavar=("MIN", "MAX"))
    p.add_argument("--start", type=int, nargs=2, default=[0, 1000], metavar=("MIN", "MAX"))
    p.add_argument("--out", required=True, help="output path prefix (.traj/.graph appended)")
    p.add_argument("--write-graph", action="store_true", help="also write the graph for file inputs")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("ingest-gps", help="cluster GPS traces into a graph and trajectories")
    p.add_argument("--csv", required=True)
    p.add_argument("--clusters", type=int, required=True)
    p.add_argument("--time-resolution", type=float, required=True, help="seconds per time unit")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output path prefix")
    p.set_defaults(func=cmd_ingest_gps)

    p = sub.add_parser("build", help="build and save a pivot or tree index")
    _add_inputs(p)
    p.add_argument("--type", choices=("pivot", "tree"), required=True)
    p.add_argument("--h", type=int, default=8)
    p.add_argument("--leaf-min", type=int, default=DEFAULT_LEAF_MIN)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("query", help="answer one top-k query")
    _add_inputs(p)
    _add_query(p)
    p.add_argument("--k", type=int, default=1)
    p.add_argument("--r", type=float, default=None)
    p.add_argument("--index", choices=INDEX_TYPES, default="exact")
    p.add_argument("--index-file")
    p.add_argument("--h", type=int, default=8)
    p.add_argument("--leaf-min", type=int, default=DEFAULT_LEAF_MIN)
    p.add_argument("--no-upper-bound", action="store_true")
    p.add_argument("--oracle", action="store_true", help="cross-check with the brute-force evaluator")
    p.add_argument("--no-timing", action="store_true", help="omit timings from the output")
    p.add_argument("--out")
    p.set_defaults(func=cmd_query)

    p = sub.add_parser("protocol", help="run the query/quality experiment over random queries")
    _add_inputs(p)
    p.add_argument("--ks", type=int, nargs="+", default=[1, 4, 16, 64])
    p.add_argument("--indexes", nargs="+", choices=INDEX_TYPES, default=list(INDEX_TYPES))
    p.add_argument("--r", type=float, required=True)
    p.add_argument("--h", type=int, default=8)
    p.add_argument("--leaf-min", type=int, default=DEFAULT_LEAF_MIN)
    p.add_argument("--queries", type=int, default=100)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--bins", type=int, default=20, help="similarity histogram bins (0 disables)")
    p.add_argument("--no-upper-bound", action="store_true")
    p.add_argument("--no-timing", action="store_true", help="omit timings from the per-query log")
    p.add_argument("--out", required=True, help="output path prefix")
    p.set_defaults(func=cmd_protocol)

    p = sub.add_parser("eval-ssr", help="similarity score ratio of two result sets")
    _add_inputs(p)
    _add_query(p)
    p.add_argument("--result", required=True, help="JSON result (query output or id list)")
    p.add_argument("--reference", required=True)
    p.set_defaults(func=cmd_eval_ssr)

    p = sub.add_parser("stats", help="graph and workload statistics")
    p.add_argument("--graph", required=True)
    p.add_argument("--traj")
    p.set_defaults(func=cmd_stats)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    if getattr(args, "h", 1) < 1 or getattr(args, "k", 1) < 1 or args.threads < 1:
        parser.error("--h, --k and --threads must be positive")
    try:
        return args.func(args) or 0
    except (GraphTrajError, OSError, ValueError) as exc:
        print(f"graphtraj: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
