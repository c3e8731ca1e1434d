"""
Pruning candidates with pivots
==============================
"""

import numpy as np

from graphtraj import DistanceOracle, PivotIndex, distance
from graphtraj.ingest import WorkloadConfig, generate_synthetic, random_graph

G = random_graph(300, seed=0)
oracle = DistanceOracle(G)
store = generate_synthetic(G, WorkloadConfig(count=2000, seed=0, start=(0, 200)))

# pivots sit at the most visited vertices; every trajectory stores its
# distance to a stationary trajectory at each pivot
index = PivotIndex.build(store, oracle, h=8)
print(index, "pivots:", index.pivots)
print("stored distances:", index.entry_count)

# a query keeps only trajectories whose pivot distances are all within r
# of its own
Q = store[42]
for r in (1.0, 0.1, 0.05, 0.02, 0.01):
    kept = index.filter(Q, Q.lifespan, r, oracle)
    print(f"r={r:<5} keeps {len(kept):4d} of {len(store)}")

# the differences never exceed the true distance over the index interval
q = index.query_distances(Q, oracle)
row = int(np.searchsorted(index.roster, 7))
gap = np.abs(q - index.matrix[row]).max()
print("largest pivot gap", gap, "<= Dist", distance(Q, store[7], index.t, oracle))
