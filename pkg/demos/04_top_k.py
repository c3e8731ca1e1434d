"""
Top-k queries and early termination
===================================
"""

from graphtraj import DistanceOracle, PivotIndex, QuerySpec, TreeIndex, ssr, topk
from graphtraj.ingest import WorkloadConfig, generate_synthetic, random_graph

G = random_graph(500, seed=2)
oracle = DistanceOracle(G)
store = generate_synthetic(G, WorkloadConfig(count=3000, seed=2, start=(0, 300)))
indexes = {"pivot": PivotIndex.build(store, oracle, h=8),
           "tree": TreeIndex.build(store, oracle, h=8)}

Q = store[10]
exact = topk(QuerySpec(Q, k=8), store, oracle)
for tid, sim in exact.items:
    print(f"{tid:5d}  {sim:.4f}")

# the running k-th best similarity lets most evaluations stop early
slow = topk(QuerySpec(Q, k=8), store, oracle, upper_bound=False)
print("same answer:", slow.items == exact.items)
print("merge steps", exact.merge_steps, "vs", slow.merge_steps, "; aborted", exact.aborted)

# the index paths look at fewer trajectories and may miss a few
for name in ("pivot", "tree"):
    res = topk(QuerySpec(Q, k=8, r=0.03, index=name), store, oracle, indexes)
    print(name, "candidates", res.candidate_count, "SSR", ssr(res.ids, exact.ids, Q, Q.lifespan, store, oracle))
