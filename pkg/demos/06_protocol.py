"""
A small version of the query experiment
=======================================

Random queries, several k, exact against pivot and tree, reporting
candidate counts, similarity score ratio and time per query.
"""

from graphtraj import DistanceOracle, ProtocolConfig, run_protocol
from graphtraj.ingest import WorkloadConfig, generate_synthetic, random_graph

G = random_graph(1000, seed=6)
store = generate_synthetic(G, WorkloadConfig(count=4000, seed=6))
config = ProtocolConfig(ks=(1, 16, 64), r=0.02, h=8, queries=20, seed=6)
rep = run_protocol(store, DistanceOracle(G), config)

print(rep.build)
print(f"{'index':>6} {'k':>3} {'candidates':>11} {'SSR':>6} {'ms':>8}")
for row in rep.aggregate:
    print(f"{row['index']:>6} {row['k']:>3} {row['candidates_mean']:>11.0f} "
          f"{row['ssr_mean']:>6.3f} {row['time_ms_mean']:>8.2f}")
