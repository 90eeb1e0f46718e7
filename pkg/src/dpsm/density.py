"""Density by mass propagation over the graph, and the induced node order."""

from __future__ import annotations

from dataclasses import dataclass
from typing import TextIO

import numpy as np
import scipy.sparse as sp

from .graph import GraphError, WeightedGraph

__all__ = [
    "PropagationMatrix",
    "DensityRank",
    "propagation_matrix",
    "propagate",
    "density_order",
    "write_density",
]


@dataclass(frozen=True)
class PropagationMatrix:
    """Column-stochastic operator; ``matrix[i, j]`` is the share node j sends to i.

    Columns of isolated nodes are all zero and flagged in ``isolated``.
    """

    matrix: sp.csr_matrix
    isolated: np.ndarray

    @property
    def n(self) -> int:
        return self.matrix.shape[0]


@dataclass(frozen=True)
class DensityRank:
    f: np.ndarray
    order: np.ndarray
    rank: np.ndarray

    @property
    def n(self) -> int:
        return len(self.f)


def propagation_matrix(graph: WeightedGraph) -> PropagationMatrix:
    if graph.n_edges == 0:
        raise GraphError("graph has no edges; nothing to propagate")
    deg = graph.degree()
    isolated = deg == 0
    inv = np.zeros_like(deg)
    inv[~isolated] = 1.0 / deg[~isolated]
    # W is symmetric, so scaling its columns by 1/deg gives p_ij = w(j,i) / deg(j)
    p = sp.csr_matrix(graph.matrix @ sp.diags(inv))
    p.sort_indices()
    return PropagationMatrix(p, isolated)


def propagate(P: PropagationMatrix, iterations: int = 100, lazy: float = 0.0) -> np.ndarray:
    """Iterate ``f <- lazy * f + (1 - lazy) * P f`` from the all-ones vector.

    ``lazy=0`` is the plain update. Isolated nodes neither send nor receive
    mass and stay at 1.
    """
    if iterations < 0:
        raise ValueError("iterations must be >= 0")
    if not 0.0 <= lazy < 1.0:
        raise ValueError("lazy must lie in [0, 1)")
    f = np.ones(P.n)
    keep = P.isolated.astype(float)
    for _ in range(iterations):
        moved = P.matrix @ f + keep * f
        f = lazy * f + (1.0 - lazy) * moved if lazy else moved
    return f


def density_order(f) -> DensityRank:
    """Strict total order: larger density first, ties to the smaller node id."""
    f = np.asarray(f, dtype=float)
    if not np.all(np.isfinite(f)):
        raise ValueError("densities must be finite")
    order = np.lexsort((np.arange(len(f)), -f))
    rank = np.empty_like(order)
    rank[order] = np.arange(len(f))
    return DensityRank(f, order, rank)


def write_density(out: TextIO, dr: DensityRank) -> None:
    """One ``node_id f_value rank`` line per node."""
    for node in range(dr.n):
        out.write(f"{node} {float(dr.f[node])!r} {dr.rank[node]}\n")
