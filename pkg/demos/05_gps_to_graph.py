"""
From GPS traces to a graph
==========================

Points are clustered with k-means; clusters become vertices, and two
clusters get an edge when a trace moves straight from one to the other.
"""

import numpy as np

from graphtraj import validate
from graphtraj.ingest import GpsPoint, gps_to_graph

rng = np.random.default_rng(5)
sites = np.array([[0, 0], [800, 0], [800, 600], [0, 600]], dtype=float)

# ten taxis, each visiting a few sites with a point every 15 seconds
points = []
for car in range(10):
    route = rng.choice(4, size=4)
    t = float(rng.integers(0, 300))
    for site in route:
        for _ in range(int(rng.integers(2, 6))):
            x, y = sites[site] + rng.normal(0, 20, 2)
            points.append(GpsPoint(f"car{car}", t, x, y))
            t += 15.0

G, store, report = gps_to_graph(points, cluster_count=4, time_resolution=15.0, seed=0)
print(G)
for u, v, w in G.edges:
    print(f"  {u} - {v}  {w:7.1f} m")
print(report)
print(all(validate(T, G) == [] for T in store.values()))
