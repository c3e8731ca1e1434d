"""
Temporal pruning with an interval tree
======================================

Each node splits its trajectories at the median end time: those that end
before it go left, those that start after it go right, and the rest stay.
"""

from graphtraj import DistanceOracle, Interval, Trajectory, TreeIndex
from graphtraj.ingest import WorkloadConfig, generate_synthetic, random_graph

G = random_graph(300, seed=1)
oracle = DistanceOracle(G)
store = generate_synthetic(G, WorkloadConfig(count=3000, seed=1, start=(0, 2000), length=(3, 10)))

tree = TreeIndex.build(store, oracle, h=8, leaf_min=100)
print(tree)
print("depth", tree.depth(), "roster sizes", tree.roster_sizes())
print(sum(tree.roster_sizes()) == len(store))

# a short query interval only touches a few subtrees
Q = store[0]
s = Interval(Q.start, Q.start + 5)
Qs = Trajectory(Q.id, Q.vertices[:1], [s.start], [s.end])
overlap = sum(1 for T in store.values() if T.start < s.end and T.end > s.start)
print("overlapping", overlap, "found", len(tree.filter(Qs, s, 1.0, oracle)))
print("with r=0.05:", len(tree.filter(Qs, s, 0.05, oracle)))
