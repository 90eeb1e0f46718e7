"""Root-anchored clusters and margin sets from a single descending-density sweep."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, FrozenSet, List, Optional, TextIO

import numpy as np

from .density import DensityRank
from .graph import WeightedGraph

__all__ = [
    "UNASSIGNED",
    "DisjointSet",
    "PartitionState",
    "PropertyCheck",
    "PropertyReport",
    "partition",
    "margins_of",
    "verify_properties",
    "write_partition",
]

UNASSIGNED = -1


class DisjointSet:
    """Union-find over ``0..n-1`` with path halving.

    ``union(keep, drop)`` always leaves ``keep`` as the representative, so
    callers control which root id survives a merge.
    """

    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, x: int) -> int:
        parent = self.parent
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def union(self, keep: int, drop: int) -> int:
        keep, drop = self.find(keep), self.find(drop)
        if keep != drop:
            self.parent[drop] = keep
        return keep


@dataclass(frozen=True)
class PartitionState:
    """Clusters keyed by root id plus their margin sets.

    Nodes in no cluster are *unassigned*; those adjacent to some cluster are
    margin nodes, the rest are gray.
    """

    n_nodes: int
    clusters: Dict[int, FrozenSet[int]]
    margin_sets: Dict[int, FrozenSet[int]]

    @property
    def roots(self) -> List[int]:
        return sorted(self.clusters)

    @property
    def cluster_of(self) -> np.ndarray:
        out = np.full(self.n_nodes, UNASSIGNED, dtype=np.int64)
        for r, members in self.clusters.items():
            out[list(members)] = r
        return out

    @property
    def unassigned(self) -> FrozenSet[int]:
        taken = set()
        for members in self.clusters.values():
            taken |= members
        return frozenset(range(self.n_nodes)) - taken

    def margin_roots(self) -> Dict[int, List[int]]:
        """Map each margin node to the sorted roots whose margin contains it."""
        out: Dict[int, List[int]] = {}
        for r in sorted(self.margin_sets):
            for m in self.margin_sets[r]:
                out.setdefault(m, []).append(r)
        return out

    def status(self) -> List[str]:
        cluster_of = self.cluster_of
        margin = self.margin_roots()
        out = []
        for v in range(self.n_nodes):
            if cluster_of[v] == v:
                out.append("ROOT")
            elif cluster_of[v] != UNASSIGNED:
                out.append("MEMBER")
            elif v in margin:
                out.append("MARGIN")
            else:
                out.append("GRAY")
        return out


def margins_of(graph: WeightedGraph, clusters: Dict[int, FrozenSet[int]]) -> Dict[int, FrozenSet[int]]:
    """Margin set of every cluster: outside nodes adjacent to one of its members."""
    m = graph.matrix
    out = {}
    for r, members in clusters.items():
        idx = np.fromiter(members, dtype=np.int64, count=len(members))
        touched = np.unique(m[idx].indices) if len(idx) else np.empty(0, dtype=np.int64)
        out[r] = frozenset(touched.tolist()) - members
    return out


def partition(graph: WeightedGraph, rank: DensityRank) -> PartitionState:
    """Sweep nodes from densest to sparsest and grow clusters by monotone descent.

    A node with no denser neighbor starts a cluster. A node joins a cluster
    only when every denser neighbor already belongs to that one cluster; if
    the denser neighbors span several clusters or include an unassigned
    node, it stays unassigned.
    """
    n = graph.n_nodes
    if rank.n != n:
        raise ValueError(f"rank covers {rank.n} nodes, graph has {n}")
    nbrs, _ = graph.adjacency_lists()
    pos = rank.rank.tolist()
    label = [UNASSIGNED] * n
    members: Dict[int, List[int]] = {}
    for v in rank.order.tolist():
        pv = pos[v]
        owner = None
        blocked = False
        for u in nbrs[v]:
            if pos[u] < pv:
                lu = label[u]
                if lu == UNASSIGNED or (owner is not None and lu != owner):
                    blocked = True
                    break
                owner = lu
        if blocked:
            continue
        if owner is None:
            owner = v
            members[v] = []
        label[v] = owner
        members[owner].append(v)
    clusters = {r: frozenset(ms) for r, ms in members.items()}
    return PartitionState(n, clusters, margins_of(graph, clusters))


@dataclass
class PropertyCheck:
    name: str
    passed: bool
    witness: Optional[object] = None
    vacuous: bool = False

    def __str__(self):
        tag = "PASS" if self.passed else "FAIL"
        extra = " (vacuous)" if self.vacuous else ""
        wit = f" witness={self.witness}" if self.witness is not None else ""
        return f"{self.name}: {tag}{extra}{wit}"


@dataclass
class PropertyReport:
    checks: List[PropertyCheck] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def __getitem__(self, i: int) -> PropertyCheck:
        return self.checks[i - 1]

    def __str__(self):
        return "\n".join(str(c) for c in self.checks)


def verify_properties(state: PartitionState, graph: WeightedGraph) -> PropertyReport:
    """Check the four structural guarantees of a partition.

    1. clusters are disjoint and each root lies in its own cluster;
    2. no margin node is a cluster member;
    3. no edge joins two different clusters directly;
    4. every connected component holding two or more clusters has a node
       shared by at least two margin sets.

    ``report[i]`` is the check for property ``i``; failures carry a witness.
    """
    owners: Dict[int, List[int]] = {}
    for r in sorted(state.clusters):
        for v in state.clusters[r]:
            owners.setdefault(v, []).append(r)

    p1 = PropertyCheck("property 1: disjoint clusters", True)
    for r in sorted(state.clusters):
        if r not in state.clusters[r]:
            p1 = PropertyCheck(p1.name, False, ("root outside own cluster", r))
            break
    if p1.passed:
        for v in sorted(owners):
            if len(owners[v]) > 1:
                p1 = PropertyCheck(p1.name, False, (v, owners[v]))
                break

    p2 = PropertyCheck("property 2: margins outside clusters", True)
    for r in sorted(state.margin_sets):
        bad = sorted(v for v in state.margin_sets[r] if v in owners)
        if bad:
            p2 = PropertyCheck(p2.name, False, (r, bad[0]))
            break

    p3 = PropertyCheck("property 3: no direct inter-cluster edge", True)
    u, v, _ = graph.edges()
    for a, b in zip(u.tolist(), v.tolist()):
        oa, ob = owners.get(a), owners.get(b)
        if oa and ob and set(oa) != set(ob):
            p3 = PropertyCheck(p3.name, False, (a, b))
            break

    p4 = PropertyCheck("property 4: shared margin node per component", True, vacuous=True)
    comp = graph.components()
    by_comp: Dict[int, List[int]] = {}
    for r in sorted(state.clusters):
        by_comp.setdefault(int(comp[r]), []).append(r)
    shared = state.margin_roots()
    witnesses = []
    for c in sorted(by_comp):
        if len(by_comp[c]) < 2:
            continue
        p4.vacuous = False
        hits = sorted(m for m, rs in shared.items() if comp[m] == c and len(rs) >= 2)
        if not hits:
            p4 = PropertyCheck(p4.name, False, ("component", c))
            break
        witnesses.append(hits[0])
    if p4.passed and witnesses:
        p4.witness = witnesses[0] if len(witnesses) == 1 else witnesses

    return PropertyReport([p1, p2, p3, p4])


def write_partition(out: TextIO, state: PartitionState) -> None:
    """``node_id status root_id`` per node; margin nodes list all their roots."""
    cluster_of = state.cluster_of
    margin = state.margin_roots()
    for v, status in enumerate(state.status()):
        if status == "MARGIN":
            roots = ",".join(str(r) for r in margin[v])
        elif status == "GRAY":
            roots = "-"
        else:
            roots = str(cluster_of[v])
        out.write(f"{v} {status} {roots}\n")
