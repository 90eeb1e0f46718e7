"""Subcluster merging by maximal CluCut, pruning, and remainder assignment."""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, FrozenSet, Iterable, List, Optional, Set, TextIO, Tuple

import numpy as np

from .density import DensityRank
from .graph import WeightedGraph
from .partition import UNASSIGNED, DisjointSet, PartitionState

__all__ = [
    "NOISE",
    "MergeError",
    "Candidate",
    "MergeRecord",
    "MergeTrace",
    "MergeEngine",
    "r_intra",
    "r_inter",
    "clucut",
    "clucut_value",
    "clucut_key",
    "scratch_stats",
    "half_drop_halts",
    "executed_prefix",
    "run_merging",
    "assign_remainder",
    "write_trace",
    "write_labels",
]

NOISE = -1


class MergeError(RuntimeError):
    """A merge was requested on dead or non-adjacent clusters."""


def r_intra(cluster: Iterable[int], graph: WeightedGraph) -> float:
    """Total weight of edges with both endpoints in ``cluster``."""
    idx = np.fromiter(sorted(set(cluster)), dtype=np.int64)
    if len(idx) < 2:
        return 0.0
    sub = graph.matrix[idx][:, idx]
    return float(sub.sum()) / 2.0


def _weight_into(graph: WeightedGraph, node: int, members: FrozenSet[int]) -> float:
    nbr, w = graph.neighbors(node)
    return float(sum(wi for u, wi in zip(nbr.tolist(), w.tolist()) if u in members))


def r_inter(state: PartitionState, a: int, b: int, graph: WeightedGraph) -> float:
    """Sum over shared margin nodes of the weaker of their two connections."""
    if a == b:
        raise ValueError("r_inter needs two different roots")
    ca, cb = state.clusters[a], state.clusters[b]
    shared = sorted(state.margin_sets[a] & state.margin_sets[b])
    return float(sum(min(_weight_into(graph, m, ca), _weight_into(graph, m, cb)) for m in shared))


def clucut_value(inter: float, intra_a: float, intra_b: float) -> float:
    """``inter / intra_a + inter / intra_b``; a zero-intra side counts as infinite."""
    if inter <= 0.0:
        return 0.0
    if intra_a <= 0.0 or intra_b <= 0.0:
        return math.inf
    return inter / intra_a + inter / intra_b


def clucut_key(inter: float, intra_a: float, intra_b: float) -> Tuple[int, float]:
    """Sort key: number of infinite terms first, then the sum of the finite ones."""
    if inter <= 0.0:
        return (0, 0.0)
    n_inf = 0
    finite = 0.0
    for intra in (intra_a, intra_b):
        if intra <= 0.0:
            n_inf += 1
        else:
            finite += inter / intra
    return (n_inf, finite)


def clucut(state: PartitionState, a: int, b: int, graph: WeightedGraph) -> float:
    inter = r_inter(state, a, b, graph)
    return clucut_value(inter, r_intra(state.clusters[a], graph), r_intra(state.clusters[b], graph))


@dataclass(frozen=True)
class Candidate:
    a: int
    b: int
    inter: float
    key: Tuple[int, float]

    @property
    def clucut(self) -> float:
        return math.inf if self.key[0] else self.key[1]

    @property
    def finite(self) -> bool:
        return self.key[0] == 0


@dataclass(frozen=True)
class MergeRecord:
    step: int
    root_a: int
    root_b: int
    clucut: float
    clusters_after: int


@dataclass
class MergeTrace:
    records: List[MergeRecord] = field(default_factory=list)
    stop_reason: str = ""
    halt_candidate: Optional[Candidate] = None
    pruned_roots: List[int] = field(default_factory=list)
    pruned_nodes: List[int] = field(default_factory=list)
    notes: List[str] = field(default_factory=list)

    @property
    def clucuts(self) -> List[float]:
        return [r.clucut for r in self.records]


def scratch_stats(graph: WeightedGraph, clusters: Dict[int, FrozenSet[int]]):
    """Recompute intra weights, margins and every adjacent pair's CluCut from scratch.

    Returns ``(intra, margins, pairs)`` with ``pairs[(a, b)] = (inter, key)``
    for ``a < b``. Independent of :class:`MergeEngine`'s incremental bookkeeping.
    """
    owner = {}
    for r, members in clusters.items():
        for v in members:
            owner[v] = r
    intra = {r: r_intra(members, graph) for r, members in clusters.items()}
    u, v, w = graph.edges()
    toward: Dict[int, Dict[int, float]] = {}
    for x, y, wt in zip(u.tolist(), v.tolist(), w.tolist()):
        ox, oy = owner.get(x), owner.get(y)
        if ox is None and oy is not None:
            toward.setdefault(x, {}).setdefault(oy, 0.0)
            toward[x][oy] += wt
        elif oy is None and ox is not None:
            toward.setdefault(y, {}).setdefault(ox, 0.0)
            toward[y][ox] += wt
    margins: Dict[int, Set[int]] = {r: set() for r in clusters}
    for m, d in toward.items():
        for r in d:
            margins[r].add(m)
    pairs: Dict[Tuple[int, int], float] = {}
    for m, d in toward.items():
        rs = sorted(d)
        for i, a in enumerate(rs):
            for b in rs[i + 1:]:
                pairs[(a, b)] = pairs.get((a, b), 0.0) + min(d[a], d[b])
    out = {p: (inter, clucut_key(inter, intra[p[0]], intra[p[1]])) for p, inter in pairs.items()}
    return intra, {r: frozenset(s) for r, s in margins.items()}, out


class MergeEngine:
    """Incremental merge state over a partition.

    Keeps, for every live cluster, its members, intra weight and margin set,
    and for every margin node its total weight into each adjacent cluster.
    Candidate pairs sit in a max-heap with per-root version stamps; entries
    whose stamps are stale are skipped when popped.

    With ``absorb=True``, after each merge the margin nodes whose denser
    neighbors now all lie in the merged cluster are pulled into it
    (repeatedly, densest first). This needs ``rank``.
    """

    def __init__(self, graph: WeightedGraph, state: PartitionState,
                 rank: Optional[DensityRank] = None, absorb: bool = False):
        if absorb and rank is None:
            raise ValueError("absorb=True requires the density rank")
        self.graph = graph
        self.n = graph.n_nodes
        self.absorb = absorb
        self.pos = rank.rank.tolist() if rank is not None else None
        self.nbrs, self.wts = graph.adjacency_lists()
        self.dsu = DisjointSet(self.n)
        self.label = [UNASSIGNED] * self.n
        self.members: Dict[int, List[int]] = {}
        for r in sorted(state.clusters):
            ms = sorted(state.clusters[r])
            self.members[r] = ms
            for v in ms:
                self.label[v] = r
        self.intra: Dict[int, float] = {r: 0.0 for r in self.members}
        self.links: Dict[int, Dict[int, float]] = {}
        for x in range(self.n):
            lx = self.label[x]
            for y, w in zip(self.nbrs[x], self.wts[x]):
                ly = self.label[y]
                if lx != UNASSIGNED:
                    if ly == lx and x < y:
                        self.intra[lx] += w
                elif ly != UNASSIGNED:
                    d = self.links.setdefault(x, {})
                    d[ly] = d.get(ly, 0.0) + w
        self.margin: Dict[int, Set[int]] = {r: set() for r in self.members}
        for m, d in self.links.items():
            for r in d:
                self.margin[r].add(m)
        self.version: Dict[int, int] = {r: 0 for r in self.members}
        self.heap: list = []
        pairs: Dict[Tuple[int, int], float] = {}
        for m in sorted(self.links):
            d = self.links[m]
            rs = sorted(d)
            for i, a in enumerate(rs):
                for b in rs[i + 1:]:
                    pairs[(a, b)] = pairs.get((a, b), 0.0) + min(d[a], d[b])
        for (a, b), inter in pairs.items():
            self._push(a, b, inter)

    # -- queries -------------------------------------------------------------

    @property
    def live(self) -> List[int]:
        return sorted(self.members)

    def __len__(self) -> int:
        return len(self.members)

    def clusters(self) -> Dict[int, FrozenSet[int]]:
        return {r: frozenset(ms) for r, ms in self.members.items()}

    def margins(self) -> Dict[int, FrozenSet[int]]:
        return {r: frozenset(s) for r, s in self.margin.items()}

    def state(self) -> PartitionState:
        return PartitionState(self.n, self.clusters(), self.margins())

    def root_of(self, node: int) -> int:
        lab = self.label[node]
        return UNASSIGNED if lab == UNASSIGNED else self.dsu.find(lab)

    def adjacent(self, a: int, b: int) -> bool:
        sa, sb = self.margin.get(a), self.margin.get(b)
        if sa is None or sb is None:
            return False
        if len(sa) > len(sb):
            sa, sb = sb, sa
        return any(m in sb for m in sa)

    def pairs(self) -> Dict[Tuple[int, int], Tuple[float, Tuple[int, float]]]:
        """Current adjacent pairs from the incremental link table."""
        acc: Dict[Tuple[int, int], float] = {}
        for m, d in self.links.items():
            rs = sorted(d)
            for i, a in enumerate(rs):
                for b in rs[i + 1:]:
                    acc[(a, b)] = acc.get((a, b), 0.0) + min(d[a], d[b])
        return {p: (v, clucut_key(v, self.intra[p[0]], self.intra[p[1]])) for p, v in acc.items()}

    def peek(self) -> Optional[Candidate]:
        """Best live adjacent pair (ties to the lexicographically smallest)."""
        heap = self.heap
        while heap:
            neg_inf, neg_fin, a, b, va, vb, inter = heap[0]
            if self.version.get(a) == va and self.version.get(b) == vb:
                return Candidate(a, b, inter, (-neg_inf, -neg_fin))
            heapq.heappop(heap)
        return None

    # -- updates -------------------------------------------------------------

    def _push(self, a: int, b: int, inter: float) -> None:
        if a > b:
            a, b = b, a
        n_inf, fin = clucut_key(inter, self.intra[a], self.intra[b])
        heapq.heappush(self.heap, (-n_inf, -fin, a, b, self.version[a], self.version[b], inter))

    def _refresh(self, root: int) -> None:
        """Invalidate every pair touching ``root`` and push fresh ones."""
        self.version[root] += 1
        acc: Dict[int, float] = {}
        for m in self.margin[root]:
            d = self.links[m]
            mine = d[root]
            for c, wc in d.items():
                if c != root:
                    acc[c] = acc.get(c, 0.0) + min(mine, wc)
        for c in sorted(acc):
            self._push(root, c, acc[c])

    def merge(self, a: int, b: int) -> int:
        """Merge two adjacent live clusters; the smaller root id survives."""
        if a == b or a not in self.members or b not in self.members:
            raise MergeError(f"cannot merge {a} and {b}: both must be distinct live roots")
        if not self.adjacent(a, b):
            raise MergeError(f"cannot merge {a} and {b}: margin sets do not overlap")
        keep, drop = min(a, b), max(a, b)
        self.dsu.union(keep, drop)
        self.members[keep].extend(self.members.pop(drop))
        # no edge joins two clusters directly, so intra weights just add up
        self.intra[keep] += self.intra.pop(drop)
        for m in self.margin.pop(drop):
            d = self.links[m]
            d[keep] = d.get(keep, 0.0) + d.pop(drop)
            self.margin[keep].add(m)
        del self.version[drop]
        if self.absorb:
            self._absorb(keep)
        self._refresh(keep)
        return keep

    def _absorb(self, root: int) -> None:
        pos = self.pos
        queue = [(pos[m], m) for m in self.margin[root]]
        heapq.heapify(queue)
        while queue:
            pm, m = heapq.heappop(queue)
            if self.label[m] != UNASSIGNED:
                continue
            ok = True
            for u in self.nbrs[m]:
                if pos[u] < pm and self.root_of(u) != root:
                    ok = False
                    break
            if not ok:
                continue
            # every clustered neighbor of m is denser and in `root`, so m links to root alone
            d = self.links.pop(m)
            self.intra[root] += d[root]
            self.margin[root].discard(m)
            self.label[m] = root
            self.members[root].append(m)
            for u, w in zip(self.nbrs[m], self.wts[m]):
                if self.label[u] == UNASSIGNED:
                    du = self.links.setdefault(u, {})
                    du[root] = du.get(root, 0.0) + w
                    self.margin[root].add(u)
                    heapq.heappush(queue, (pos[u], u))

    def prune(self, fraction: float) -> Tuple[List[int], List[int]]:
        """Delete clusters whose size and intra weight are both below
        ``fraction`` times the live averages. Returns pruned roots and nodes."""
        if fraction <= 0 or not self.members:
            return [], []
        sizes = {r: len(ms) for r, ms in self.members.items()}
        mean_size = sum(sizes.values()) / len(sizes)
        mean_intra = sum(self.intra.values()) / len(sizes)
        doomed = [r for r in sorted(self.members)
                  if sizes[r] < fraction * mean_size and self.intra[r] < fraction * mean_intra]
        nodes: List[int] = []
        for r in doomed:
            ms = self.members.pop(r)
            nodes.extend(ms)
            for v in ms:
                self.label[v] = UNASSIGNED
            del self.intra[r]
            for m in self.margin.pop(r):
                d = self.links[m]
                del d[r]
                if not d:
                    del self.links[m]
            # pairs with r go stale with its version entry; other pairs are untouched
            del self.version[r]
        return doomed, sorted(nodes)


def half_drop_halts(candidate: float, previous: Optional[float], drop_ratio: float = 0.5) -> bool:
    """True when a merge at ``candidate`` falls below ``drop_ratio`` x the previous one."""
    if previous is None or math.isinf(candidate):
        return False
    return candidate < drop_ratio * previous


def executed_prefix(values: Iterable[float], drop_ratio: float = 0.5) -> int:
    """How many merges of a CluCut sequence run before the half-drop rule stops."""
    previous = None
    count = 0
    for value in values:
        if half_drop_halts(value, previous, drop_ratio):
            break
        count += 1
        if not math.isinf(value):
            previous = value
    return count


def run_merging(
    state: PartitionState,
    graph: WeightedGraph,
    target_k: Optional[int] = None,
    drop_ratio: float = 0.5,
    prune_fraction: Optional[float] = None,
    rank: Optional[DensityRank] = None,
    absorb: Optional[bool] = None,
    cluster_range: Optional[Tuple[int, int]] = None,
    on_merge: Optional[Callable[[MergeEngine, Candidate], None]] = None,
) -> Tuple[PartitionState, MergeTrace]:
    """Greedily merge the adjacent pair with the largest CluCut.

    With ``target_k`` set, stop once that many clusters remain (or nothing
    adjacent is left). Otherwise stop before a merge whose CluCut falls
    below ``drop_ratio`` times the previous executed one; merges with an
    infinite CluCut always run and do not reset that baseline.

    ``absorb`` (default: on whenever ``rank`` is given) re-grows a merged
    cluster over margin nodes whose denser neighbors all lie inside it.

    ``cluster_range=(lo, hi)`` (automatic mode only) restricts the answer to
    a known range: the drop test is ignored while more than ``hi`` clusters
    remain, and merging stops at ``lo``.

    ``prune_fraction`` defaults to 0.05 in automatic mode and 0 with a
    target count. ``on_merge(engine, candidate)`` is called just before each
    merge executes.
    """
    if target_k is not None and target_k < 1:
        raise ValueError("target_k must be >= 1")
    if target_k is None and not 0.0 < drop_ratio <= 1.0:
        raise ValueError("drop_ratio must lie in (0, 1]")
    if cluster_range is not None:
        lo, hi = cluster_range
        if target_k is not None or not 1 <= lo <= hi:
            raise ValueError("cluster_range needs automatic mode and 1 <= lo <= hi")
    if prune_fraction is None:
        prune_fraction = 0.0 if target_k is not None else 0.05
    if not 0.0 <= prune_fraction < 1.0:
        raise ValueError("prune_fraction must lie in [0, 1)")

    if absorb is None:
        absorb = rank is not None
    engine = MergeEngine(graph, state, rank=rank, absorb=absorb)
    trace = MergeTrace()
    previous = None
    step = 0
    while True:
        if target_k is not None and len(engine) <= target_k:
            trace.stop_reason = "target reached"
            break
        if cluster_range is not None and len(engine) <= cluster_range[0]:
            trace.stop_reason = "range floor reached"
            break
        cand = engine.peek()
        if cand is None:
            trace.stop_reason = "no adjacent pairs"
            if target_k is not None:
                trace.notes.append(
                    f"cannot merge across components: {len(engine)} clusters remain, target {target_k}")
            break
        armed = cluster_range is None or len(engine) <= cluster_range[1]
        if target_k is None and armed and half_drop_halts(cand.clucut, previous, drop_ratio):
            trace.stop_reason = "clucut drop"
            trace.halt_candidate = cand
            break
        if on_merge is not None:
            on_merge(engine, cand)
        engine.merge(cand.a, cand.b)
        step += 1
        trace.records.append(MergeRecord(step, cand.a, cand.b, cand.clucut, len(engine)))
        if cand.finite:
            previous = cand.clucut

    roots, nodes = engine.prune(prune_fraction)
    trace.pruned_roots, trace.pruned_nodes = roots, nodes
    return engine.state(), trace


def assign_remainder(
    state: PartitionState,
    graph: WeightedGraph,
    rank: Optional[DensityRank] = None,
    policy: str = "nearest",
    noise: Iterable[int] = (),
) -> np.ndarray:
    """Final labels ``0..K-1`` (by ascending root id), ``-1`` for noise.

    ``policy="drop"`` labels every unassigned node as noise. ``"nearest"``
    visits unassigned nodes densest first; each joins the cluster it has the
    largest total edge weight to among already-labeled neighbors (ties to the
    smaller root id), or becomes noise if it has none. Nodes in ``noise``
    (pruned clusters) stay noise either way.
    """
    if policy not in ("nearest", "drop"):
        raise ValueError(f"unknown remainder policy {policy!r}")
    n = state.n_nodes
    roots = state.roots
    index = {r: i for i, r in enumerate(roots)}
    owner = [UNASSIGNED] * n
    for r in roots:
        for v in state.clusters[r]:
            owner[v] = r
    if policy == "nearest":
        if rank is None:
            raise ValueError("nearest policy needs the density rank")
        skip = set(noise)
        nbrs, wts = graph.adjacency_lists()
        for v in rank.order.tolist():
            if owner[v] != UNASSIGNED or v in skip:
                continue
            score: Dict[int, float] = {}
            for u, w in zip(nbrs[v], wts[v]):
                ou = owner[u]
                if ou != UNASSIGNED:
                    score[ou] = score.get(ou, 0.0) + w
            if score:
                owner[v] = min(score, key=lambda r: (-score[r], r))
    return np.array([index[o] if o != UNASSIGNED else NOISE for o in owner], dtype=np.int64)


def write_trace(out: TextIO, trace: MergeTrace) -> None:
    out.write("step,root_a,root_b,clucut,clusters_after\n")
    for r in trace.records:
        out.write(f"{r.step},{r.root_a},{r.root_b},{r.clucut!r},{r.clusters_after}\n")


def write_labels(out: TextIO, labels) -> None:
    out.write("node_id,label\n")
    for i, lab in enumerate(np.asarray(labels).tolist()):
        out.write(f"{i},{lab}\n")
