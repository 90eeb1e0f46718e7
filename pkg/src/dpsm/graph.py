"""Point/edge ingestion and symmetrized kNN graph construction."""

from __future__ import annotations

import io
import re
from dataclasses import dataclass
from typing import Iterable, Optional, TextIO, Union

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree
from scipy.spatial.distance import cdist

__all__ = [
    "GraphError",
    "ParseError",
    "PointSet",
    "WeightedGraph",
    "load_points",
    "load_edges",
    "knn_graph",
    "max_pairwise_distance",
    "knn_indices",
]

# edges lighter than this are not kept in the graph
MIN_WEIGHT = 1e-12
EXACT_DMAX_LIMIT = 20_000
DMAX_SAMPLE = 1_000
TREE_THRESHOLD = 5_000


class GraphError(ValueError):
    """Invalid graph, edge file, or construction parameter."""


class ParseError(ValueError):
    """Malformed point file."""


@dataclass(frozen=True)
class PointSet:
    points: np.ndarray
    labels: Optional[np.ndarray] = None

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[0] < 1 or pts.shape[1] < 1:
            raise ParseError(f"points must be a non-empty n x d array, got shape {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise ParseError("points contain non-finite coordinates")
        object.__setattr__(self, "points", pts)
        if self.labels is not None:
            labels = np.asarray(self.labels, dtype=np.int64)
            if labels.shape != (pts.shape[0],):
                raise ParseError("labels must have one entry per point")
            object.__setattr__(self, "labels", labels)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]


@dataclass(frozen=True)
class WeightedGraph:
    """Undirected graph stored as a symmetric CSR matrix.

    Entry ``matrix[u, v]`` is the weight of edge ``{u, v}``; absent entries
    mean no edge. Weights are strictly positive and the diagonal is empty.
    """

    matrix: sp.csr_matrix

    @classmethod
    def from_edges(cls, u, v, w, n_nodes: int) -> "WeightedGraph":
        """Build from one record per unordered pair (either orientation)."""
        u = np.asarray(u, dtype=np.int64)
        v = np.asarray(v, dtype=np.int64)
        w = np.asarray(w, dtype=float)
        if n_nodes < 1:
            raise GraphError("graph needs at least one node")
        if len(u) and (min(u.min(), v.min()) < 0 or max(u.max(), v.max()) >= n_nodes):
            raise GraphError("node id out of range")
        if np.any(u == v):
            raise GraphError("self-loops are not allowed")
        if np.any(~np.isfinite(w)) or np.any(w <= 0):
            raise GraphError("edge weights must be positive and finite")
        lo, hi = np.minimum(u, v), np.maximum(u, v)
        keys = lo * n_nodes + hi
        if len(np.unique(keys)) != len(keys):
            raise GraphError("duplicate unordered pair")
        rows = np.concatenate([lo, hi])
        cols = np.concatenate([hi, lo])
        data = np.concatenate([w, w])
        m = sp.csr_matrix((data, (rows, cols)), shape=(n_nodes, n_nodes))
        m.sort_indices()
        return cls(m)

    @property
    def n_nodes(self) -> int:
        return self.matrix.shape[0]

    @property
    def n_edges(self) -> int:
        return self.matrix.nnz // 2

    def edges(self):
        """Return ``(u, v, w)`` arrays with one row per edge, ``u < v``."""
        coo = sp.triu(self.matrix, k=1).tocoo()
        order = np.lexsort((coo.col, coo.row))
        return coo.row[order].astype(np.int64), coo.col[order].astype(np.int64), coo.data[order]

    def neighbors(self, node: int):
        m = self.matrix
        lo, hi = m.indptr[node], m.indptr[node + 1]
        return m.indices[lo:hi], m.data[lo:hi]

    def degree(self) -> np.ndarray:
        """Weighted degree of every node."""
        return np.asarray(self.matrix.sum(axis=1)).ravel()

    def weight(self, u: int, v: int) -> float:
        return float(self.matrix[u, v])

    def adjacency_lists(self):
        """Per-node ``(neighbor list, weight list)`` as plain Python lists."""
        m = self.matrix
        idx = m.indices.tolist()
        dat = m.data.tolist()
        ptr = m.indptr.tolist()
        return (
            [idx[ptr[i]:ptr[i + 1]] for i in range(self.n_nodes)],
            [dat[ptr[i]:ptr[i + 1]] for i in range(self.n_nodes)],
        )

    def components(self) -> np.ndarray:
        _, labels = connected_components(self.matrix, directed=False)
        return labels


Source = Union[str, TextIO, Iterable[str]]


def _lines(source: Source):
    if isinstance(source, str):
        source = io.StringIO(source)
    for lineno, line in enumerate(source, start=1):
        text = line.strip()
        if not text or text.startswith("#"):
            continue
        yield lineno, text


_SPLIT = re.compile(r"[,\s]+")


def load_points(source: Source, label_column: Optional[int] = None) -> PointSet:
    """Parse comma- or whitespace-separated rows into a :class:`PointSet`.

    ``label_column`` (0-based, negative allowed) is split off as integer labels.
    Row numbers in errors count data rows, skipping comments and blanks.
    """
    rows, labels = [], []
    width = None
    for rowno, (_, text) in enumerate(_lines(source), start=1):
        fields = [f for f in _SPLIT.split(text) if f]
        if width is None:
            width = len(fields)
            if label_column is not None and not -width <= label_column < width:
                raise ParseError(f"row {rowno}: label column {label_column} out of range")
        elif len(fields) != width:
            raise ParseError(f"row {rowno}: expected {width} columns, found {len(fields)}")
        if label_column is not None:
            lab = fields.pop(label_column)
            try:
                labels.append(int(float(lab)))
            except ValueError:
                raise ParseError(f"row {rowno}: label {lab!r} is not an integer") from None
        try:
            vals = [float(f) for f in fields]
        except ValueError:
            raise ParseError(f"row {rowno}: non-numeric feature in {text!r}") from None
        if not all(np.isfinite(vals)):
            raise ParseError(f"row {rowno}: non-finite feature")
        if not vals:
            raise ParseError(f"row {rowno}: no feature columns")
        rows.append(vals)
    if not rows:
        raise ParseError("empty input: no data rows")
    return PointSet(np.array(rows), np.array(labels, dtype=np.int64) if label_column is not None else None)


def load_edges(source: Source, node_count: Optional[int] = None) -> WeightedGraph:
    """Parse ``u v w`` lines (0-based ids) into a :class:`WeightedGraph`."""
    us, vs, ws = [], [], []
    seen = {}
    for lineno, text in _lines(source):
        fields = [f for f in _SPLIT.split(text) if f]
        if len(fields) != 3:
            raise GraphError(f"line {lineno}: expected 'u v w', got {text!r}")
        try:
            u, v, w = int(fields[0]), int(fields[1]), float(fields[2])
        except ValueError:
            raise GraphError(f"line {lineno}: cannot parse {text!r}") from None
        if u < 0 or v < 0:
            raise GraphError(f"line {lineno}: negative node id")
        if u == v:
            raise GraphError(f"line {lineno}: self-loop on node {u}")
        if not np.isfinite(w) or w <= 0:
            raise GraphError(f"line {lineno}: weight must be positive and finite, got {w}")
        if node_count is not None and max(u, v) >= node_count:
            raise GraphError(f"line {lineno}: node id {max(u, v)} >= node_count {node_count}")
        key = (min(u, v), max(u, v))
        if key in seen:
            raise GraphError(f"line {lineno}: duplicate pair {key} (first on line {seen[key]})")
        seen[key] = lineno
        us.append(u)
        vs.append(v)
        ws.append(w)
    if node_count is None:
        if not us:
            raise GraphError("empty edge list and no node_count given")
        node_count = 1 + max(max(us), max(vs))
    return WeightedGraph.from_edges(us, vs, ws, node_count)


def max_pairwise_distance(points: np.ndarray, seed: int = 0, chunk: int = 1024) -> float:
    """Largest Euclidean distance between two points.

    Exact for up to 20,000 points; above that, the diameter of a random
    1,000-point sample.
    """
    x = np.asarray(points, dtype=float)
    n = len(x)
    if n > EXACT_DMAX_LIMIT:
        rng = np.random.default_rng(seed)
        x = x[rng.choice(n, DMAX_SAMPLE, replace=False)]
        n = DMAX_SAMPLE
    sq = np.einsum("ij,ij->i", x, x)
    best = 0.0
    for start in range(0, n, chunk):
        block = x[start:start + chunk]
        d2 = sq[start:start + chunk, None] + sq[None, :] - 2.0 * block @ x.T
        best = max(best, float(d2.max()))
    return float(np.sqrt(max(best, 0.0)))


def _select_k(dist: np.ndarray, k: int) -> np.ndarray:
    """Boolean mask of the k smallest entries per row, ties to lower column."""
    kth = np.partition(dist, k - 1, axis=1)[:, k - 1:k]
    strict = dist < kth
    need = k - strict.sum(axis=1, keepdims=True)
    eq = dist == kth
    return strict | (eq & (np.cumsum(eq, axis=1) <= need))


def _knn_brute(x: np.ndarray, k: int, chunk: int = 512):
    n = len(x)
    idx = np.empty((n, k), dtype=np.int64)
    dst = np.empty((n, k))
    for start in range(0, n, chunk):
        block = x[start:start + chunk]
        d = cdist(block, x)
        rows = np.arange(len(block))
        d[rows, start + rows] = np.inf
        mask = _select_k(d, k)
        r, c = np.nonzero(mask)
        ci = c.reshape(len(block), k)
        cd = d[r, c].reshape(len(block), k)
        # ci is already ascending per row, so a stable sort on distance keeps index order within ties
        order = np.argsort(cd, axis=1, kind="stable")
        idx[start:start + len(block)] = np.take_along_axis(ci, order, axis=1)
        dst[start:start + len(block)] = np.take_along_axis(cd, order, axis=1)
    return idx, dst


def _knn_tree(x: np.ndarray, k: int):
    tree = cKDTree(x)
    n = len(x)
    idx = np.empty((n, k), dtype=np.int64)
    dst = np.empty((n, k))
    # over-query so that ties at the k-th distance can be re-ordered by index
    extra = min(n, k + 9)
    d, i = tree.query(x, k=extra)
    for row in range(n):
        di, ii = d[row], i[row]
        q = extra
        # the tie group at the k-th distance may run past the queried window
        while q < n and di[-1] <= np.sort(di)[k]:
            q = min(n, 2 * q)
            di, ii = tree.query(x[row], k=q)
        keep = ii != row
        di, ii = di[keep], ii[keep]
        order = np.lexsort((ii, di))[:k]
        idx[row], dst[row] = ii[order], di[order]
    return idx, dst


def knn_indices(points: np.ndarray, k: int, method: str = "auto"):
    """k nearest neighbors of every point (self excluded).

    Returns ``(indices, distances)``, both ``n x k``. Ties at equal distance go
    to the smaller index. ``method`` is ``"brute"``, ``"tree"`` or ``"auto"``.
    """
    x = np.asarray(points, dtype=float)
    n = len(x)
    if not 1 <= k < n:
        raise GraphError(f"need 1 <= k < n, got k={k}, n={n}")
    if method == "auto":
        method = "tree" if n > TREE_THRESHOLD else "brute"
    if method == "brute":
        return _knn_brute(x, k)
    if method == "tree":
        return _knn_tree(x, k)
    raise GraphError(f"unknown kNN method {method!r}")


def knn_graph(
    points: Union[PointSet, np.ndarray],
    k: int = 20,
    sigma_scale: float = 0.1,
    kernel_form: str = "product",
    method: str = "auto",
) -> WeightedGraph:
    """Symmetrized, row-normalized kNN similarity graph.

    Each point's k neighbors get kernel weights ``exp(-sigma * d)``
    (``kernel_form="product"``) or ``exp(-d / sigma)`` (``"ratio"``), where
    ``sigma = sigma_scale * d_max``. Weights are normalized over each row and
    combined as ``w = a + b - a * b`` for the two directed values.
    """
    x = points.points if isinstance(points, PointSet) else np.asarray(points, dtype=float)
    n = len(x)
    if not 1 <= k < n:
        raise GraphError(f"need 1 <= k < n, got k={k}, n={n}")
    if not sigma_scale > 0:
        raise GraphError("sigma_scale must be positive")
    if kernel_form not in ("product", "ratio"):
        raise GraphError(f"unknown kernel_form {kernel_form!r}")

    sigma = sigma_scale * max_pairwise_distance(x)
    idx, dist = knn_indices(x, k, method)

    # shift by the row minimum; it cancels under row normalization
    shifted = dist - dist.min(axis=1, keepdims=True)
    if kernel_form == "product":
        a = np.exp(-sigma * shifted)
    elif sigma > 0:
        a = np.exp(-shifted / sigma)
    else:
        a = np.ones_like(shifted)
    a /= a.sum(axis=1, keepdims=True)

    rows = np.repeat(np.arange(n), k)
    directed = sp.csr_matrix((a.ravel(), (rows, idx.ravel())), shape=(n, n))
    sym = directed + directed.T - directed.multiply(directed.T)
    sym = sp.csr_matrix(sym)
    sym.data[sym.data < MIN_WEIGHT] = 0.0
    sym.eliminate_zeros()
    sym.sort_indices()
    return WeightedGraph(sym)
