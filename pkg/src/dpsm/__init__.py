"""Density propagation and subcluster merging (DPSM) for graph clustering."""

from .config import RunConfig
from .density import DensityRank, PropagationMatrix, density_order, propagate, propagation_matrix
from .graph import PointSet, WeightedGraph, knn_graph, load_edges, load_points
from .merge import NOISE, MergeTrace, assign_remainder, clucut, r_inter, r_intra, run_merging
from .metrics import adjusted_mutual_info, adjusted_rand_index, evaluate, v_measure
from .partition import PartitionState, partition, verify_properties
from .pipeline import ClusteringResult, cluster_graph, cluster_points

__version__ = "0.1.0"
