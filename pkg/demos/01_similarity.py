"""
Similarity of two trajectories on a graph
==========================================

A trajectory dwells at one vertex per time interval. Two trajectories are
similar when, time step by time step, they sit at vertices that are close
in the graph.
"""

import math

from graphtraj import DistanceOracle, Interval, Trajectory, distance, similarity
from graphtraj.ingest import chain_graph

# three vertices in a row, unit edge costs
G = chain_graph(3)
oracle = DistanceOracle(G)
print(G)

# Q waits at vertex 0 for two steps; T walks 1 -> 2 over the same time
Q = Trajectory.from_steps(0, [(0, (0, 2))])
T = Trajectory.from_steps(1, [(1, (0, 1)), (2, (1, 2))])
s = Interval(0, 2)

# one step at distance 1, one at distance 2
res = similarity(Q, T, s, oracle)
print("Sim =", res.value, " by hand:", (math.exp(-1) + math.exp(-2)) / 2)
print("Dist =", distance(Q, T, s, oracle))

# symmetric, and a trajectory is at distance 0 from itself
print(similarity(T, Q, s, oracle).value == res.value)
print(distance(T, T, T.lifespan, oracle))

# widening the interval dilutes the similarity by |s| / |t|
t = Interval(0, 4)
print("Sim over", t, "=", similarity(Q, T, t, oracle).value)
