"""Synthetic two-class point sets: concentric rings and interleaved moons."""

from __future__ import annotations

from typing import TextIO

import numpy as np

from .graph import PointSet

__all__ = ["circles", "moons", "generate", "write_points", "SHAPES"]


def _split(n: int):
    first = n // 2
    return first, n - first


def circles(n: int = 1500, noise: float = 0.05, seed: int = 0,
            radii=(1.0, 2.0)) -> PointSet:
    """Two concentric rings; each radius gets Gaussian jitter of scale ``noise``."""
    if n < 4:
        raise ValueError("need n >= 4")
    rng = np.random.default_rng(seed)
    sizes = _split(n)
    pts, labels = [], []
    for cls, (m, r) in enumerate(zip(sizes, radii)):
        theta = rng.uniform(0.0, 2.0 * np.pi, m)
        rad = r + noise * rng.standard_normal(m)
        pts.append(np.column_stack([rad * np.cos(theta), rad * np.sin(theta)]))
        labels.append(np.full(m, cls))
    return PointSet(np.vstack(pts), np.concatenate(labels))


def moons(n: int = 1000, noise: float = 0.05, seed: int = 0) -> PointSet:
    """Two interleaved half circles with isotropic Gaussian jitter."""
    if n < 4:
        raise ValueError("need n >= 4")
    rng = np.random.default_rng(seed)
    m0, m1 = _split(n)
    t0 = rng.uniform(0.0, np.pi, m0)
    t1 = rng.uniform(0.0, np.pi, m1)
    upper = np.column_stack([np.cos(t0), np.sin(t0)])
    lower = np.column_stack([1.0 - np.cos(t1), 0.5 - np.sin(t1)])
    pts = np.vstack([upper, lower]) + noise * rng.standard_normal((n, 2))
    return PointSet(pts, np.concatenate([np.zeros(m0, int), np.ones(m1, int)]))


SHAPES = {"circles": circles, "moons": moons}


def generate(shape: str, n: int, noise: float = 0.05, seed: int = 0) -> PointSet:
    try:
        maker = SHAPES[shape]
    except KeyError:
        raise ValueError(f"unknown shape {shape!r}; choose from {sorted(SHAPES)}") from None
    return maker(n=n, noise=noise, seed=seed)


def write_points(out: TextIO, ps: PointSet) -> None:
    """Comma-separated rows; the label, when present, is the last column."""
    for i in range(ps.n):
        row = [repr(float(x)) for x in ps.points[i]]
        if ps.labels is not None:
            row.append(str(int(ps.labels[i])))
        out.write(",".join(row) + "\n")
