"""External clustering metrics: V-measure, ARI, AMI."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np
from scipy.special import gammaln

__all__ = [
    "MetricUndefined",
    "ContingencyTable",
    "MetricReport",
    "contingency",
    "entropy",
    "mutual_info",
    "expected_mutual_info",
    "v_measure",
    "adjusted_rand_index",
    "adjusted_mutual_info",
    "evaluate",
]

NOISE = -1


class MetricUndefined(ValueError):
    """Nothing left to score (for instance every prediction is noise)."""


@dataclass(frozen=True)
class ContingencyTable:
    counts: np.ndarray  # classes x clusters

    @property
    def a(self) -> np.ndarray:
        return self.counts.sum(axis=1)

    @property
    def b(self) -> np.ndarray:
        return self.counts.sum(axis=0)

    @property
    def total(self) -> int:
        return int(self.counts.sum())


def _prepare(truth, pred, noise: str = "exclude"):
    truth = np.asarray(truth).ravel()
    pred = np.asarray(pred).ravel()
    if truth.shape != pred.shape:
        raise ValueError(f"length mismatch: {truth.size} truth labels vs {pred.size} predictions")
    if noise == "exclude":
        keep = pred != NOISE
        truth, pred = truth[keep], pred[keep]
    elif noise != "cluster":
        raise ValueError(f"unknown noise handling {noise!r}")
    if truth.size == 0:
        raise MetricUndefined("no labeled items left to score")
    return truth, pred


def contingency(truth, pred) -> ContingencyTable:
    _, ti = np.unique(np.asarray(truth), return_inverse=True)
    _, pi = np.unique(np.asarray(pred), return_inverse=True)
    counts = np.zeros((ti.max() + 1, pi.max() + 1), dtype=np.int64)
    np.add.at(counts, (ti.ravel(), pi.ravel()), 1)
    return ContingencyTable(counts)


def entropy(counts) -> float:
    c = np.asarray(counts, dtype=float)
    c = c[c > 0]
    n = c.sum()
    return float(-np.sum(c / n * (np.log(c) - np.log(n))))


def mutual_info(table: ContingencyTable) -> float:
    n = table.total
    nz = table.counts > 0
    nij = table.counts[nz].astype(float)
    ai = np.broadcast_to(table.a[:, None], table.counts.shape)[nz].astype(float)
    bj = np.broadcast_to(table.b[None, :], table.counts.shape)[nz].astype(float)
    mi = np.sum(nij / n * (np.log(n) + np.log(nij) - np.log(ai) - np.log(bj)))
    return max(float(mi), 0.0)


def expected_mutual_info(table: ContingencyTable) -> float:
    """Mean mutual information over random labelings with the same marginals."""
    n = table.total
    a, b = table.a, table.b
    emi = 0.0
    lg_n = gammaln(n + 1)
    for ai in a:
        for bj in b:
            lo, hi = max(1, ai + bj - n), min(ai, bj)
            if lo > hi:
                continue
            k = np.arange(lo, hi + 1, dtype=float)
            log_p = (gammaln(ai + 1) + gammaln(bj + 1) + gammaln(n - ai + 1) + gammaln(n - bj + 1)
                     - lg_n - gammaln(k + 1) - gammaln(ai - k + 1) - gammaln(bj - k + 1)
                     - gammaln(n - ai - bj + k + 1))
            term = k / n * (np.log(n) + np.log(k) - np.log(ai) - np.log(bj))
            emi += float(np.sum(term * np.exp(log_p)))
    return emi


def _same_partition(table: ContingencyTable) -> bool:
    c = table.counts
    return c.shape[0] == c.shape[1] and np.count_nonzero(c) == c.shape[0]


def v_measure(truth, pred, noise: str = "exclude") -> float:
    """Harmonic mean of homogeneity and completeness."""
    t = contingency(*_prepare(truth, pred, noise))
    if _same_partition(t):
        return 1.0
    h_c, h_k = entropy(t.a), entropy(t.b)
    mi = mutual_info(t)
    homogeneity = 1.0 if h_c == 0 else mi / h_c
    completeness = 1.0 if h_k == 0 else mi / h_k
    if homogeneity + completeness == 0:
        return 0.0
    return float(2 * homogeneity * completeness / (homogeneity + completeness))


def adjusted_rand_index(truth, pred, noise: str = "exclude") -> float:
    t = contingency(*_prepare(truth, pred, noise))
    comb = lambda x: x * (x - 1) / 2.0  # noqa: E731
    index = float(comb(t.counts.astype(float)).sum())
    sa = float(comb(t.a.astype(float)).sum())
    sb = float(comb(t.b.astype(float)).sum())
    total = comb(float(t.total))
    expected = sa * sb / total if total else 0.0
    top = (sa + sb) / 2.0
    if top == expected:
        return 1.0
    return (index - expected) / (top - expected)


def adjusted_mutual_info(truth, pred, noise: str = "exclude") -> float:
    """Chance-adjusted mutual information, normalized by the larger entropy."""
    t = contingency(*_prepare(truth, pred, noise))
    if _same_partition(t):
        return 1.0
    mi = mutual_info(t)
    emi = expected_mutual_info(t)
    norm = max(entropy(t.a), entropy(t.b))
    return float((mi - emi) / (norm - emi))


@dataclass
class MetricReport:
    vm: float
    ari: float
    ami: float
    clusters_found: int
    noise_fraction: float
    excluded: int

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    def to_text(self) -> str:
        return "".join(f"{k}={v}\n" for k, v in asdict(self).items())


def evaluate(truth, pred, noise: str = "exclude") -> MetricReport:
    pred_arr = np.asarray(pred).ravel()
    n_noise = int(np.sum(pred_arr == NOISE))
    clusters = len(np.unique(pred_arr[pred_arr != NOISE]))
    return MetricReport(
        vm=v_measure(truth, pred, noise),
        ari=adjusted_rand_index(truth, pred, noise),
        ami=adjusted_mutual_info(truth, pred, noise),
        clusters_found=clusters,
        noise_fraction=n_noise / pred_arr.size if pred_arr.size else 0.0,
        excluded=n_noise if noise == "exclude" else 0,
    )
