"""End-to-end DPSM run: graph, density, partition, merge, remainder."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .config import RunConfig
from .density import DensityRank, density_order, propagate, propagation_matrix
from .graph import PointSet, WeightedGraph, knn_graph
from .merge import MergeTrace, assign_remainder, run_merging
from .partition import PartitionState, partition

__all__ = ["ClusteringResult", "cluster_graph", "cluster_points"]


@dataclass
class ClusteringResult:
    labels: np.ndarray
    graph: WeightedGraph
    density: DensityRank
    initial: PartitionState
    final: PartitionState
    trace: MergeTrace

    @property
    def n_clusters(self) -> int:
        return len(np.unique(self.labels[self.labels >= 0]))


def cluster_graph(graph: WeightedGraph, config: Optional[RunConfig] = None) -> ClusteringResult:
    cfg = config or RunConfig()
    if graph.n_edges == 0:
        # every node is its own peak; nothing to propagate or merge
        f = np.ones(graph.n_nodes)
    else:
        f = propagate(propagation_matrix(graph), cfg.iterations, cfg.lazy)
    dr = density_order(f)
    initial = partition(graph, dr)
    prune = cfg.prune_fraction
    if cfg.target_k is not None and not cfg.prune_with_target:
        prune = 0.0
    final, trace = run_merging(
        initial, graph,
        target_k=cfg.target_k,
        drop_ratio=cfg.drop_ratio,
        prune_fraction=prune,
        rank=dr,
        absorb=cfg.absorb,
        cluster_range=cfg.cluster_range,
    )
    labels = assign_remainder(final, graph, dr, cfg.remainder_policy, noise=trace.pruned_nodes)
    return ClusteringResult(labels, graph, dr, initial, final, trace)


def cluster_points(points: PointSet, config: Optional[RunConfig] = None) -> ClusteringResult:
    cfg = config or RunConfig()
    graph = knn_graph(points, cfg.k_neighbors, cfg.sigma_scale, cfg.kernel_form)
    return cluster_graph(graph, cfg)
