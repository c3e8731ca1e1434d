"""Top-k spatio-temporal similarity search for trajectories on weighted graphs.

Trajectories are walks through a graph with an integer dwell interval at
every vertex. Two trajectories are similar when they spend the same time
steps at nearby vertices; ``1 - similarity`` is a distance that obeys a
triangle inequality once the first argument covers the query interval, which
is what the pivot and interval-tree indexes use to prune candidates.
"""

from .errors import (DisconnectedGraph, EmptyQueryInterval, GraphTrajError, IndexFormatError,
                     IndexMissing, IntervalNotNested, InvalidInterval, NonPositiveWeight,
                     ParseError, QueryOutsideIndexInterval, TooFewPoints, UnknownVertex,
                     ValidationError, ZeroReference)
from .model import EMPTY, Graph, Interval, Step, Trajectory, Violation, intersect, restrict, validate
from .metric import (NO_BUDGET, DistanceOracle, SimilarityBudget, SimResult, distance,
                     merge_step_count, naive_similarity, rescale_distance, shortest_path_row,
                     similarity)
from .pivot import PivotIndex, global_interval, select_pivots
from .tree import TreeIndex, TreeNode, load_index
from .engine import (ProtocolConfig, ProtocolReport, QuerySpec, TopKResult, brute_force_topk,
                     run_protocol, ssr, topk)
from .ingest import (GpsPoint, WorkloadConfig, builtin_graph, chain_graph, generate_synthetic,
                     gps_to_graph, grid_graph, load_gps_csv, load_graph, load_trajectories,
                     random_graph, save_graph, save_trajectories)

__version__ = "0.1.0"
