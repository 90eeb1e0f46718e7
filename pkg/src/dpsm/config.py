"""Run configuration with the published experimental defaults."""

from __future__ import annotations

from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Optional

__all__ = ["RunConfig", "load_config_file"]


@dataclass(frozen=True)
class RunConfig:
    k_neighbors: int = 20
    sigma_scale: float = 0.1
    kernel_form: str = "product"
    iterations: int = 100
    lazy: float = 0.0
    # None selects automatic termination by CluCut drop
    target_k: Optional[int] = None
    drop_ratio: float = 0.5
    # optional (lo, hi) bound on the cluster count in automatic mode
    min_clusters: Optional[int] = None
    max_clusters: Optional[int] = None
    prune_fraction: float = 0.05
    prune_with_target: bool = False
    remainder_policy: str = "nearest"
    absorb: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.k_neighbors < 1:
            raise ValueError("k_neighbors must be >= 1")
        if self.sigma_scale <= 0:
            raise ValueError("sigma_scale must be positive")
        if self.kernel_form not in ("product", "ratio"):
            raise ValueError(f"kernel_form must be 'product' or 'ratio', got {self.kernel_form!r}")
        if self.iterations < 0:
            raise ValueError("iterations must be >= 0")
        if not 0.0 <= self.lazy < 1.0:
            raise ValueError("lazy must lie in [0, 1)")
        if self.target_k is not None and self.target_k < 1:
            raise ValueError("target_k must be >= 1")
        if not 0.0 < self.drop_ratio <= 1.0:
            raise ValueError("drop_ratio must lie in (0, 1]")
        if (self.min_clusters is None) != (self.max_clusters is None):
            raise ValueError("min_clusters and max_clusters must be given together")
        if self.min_clusters is not None and not 1 <= self.min_clusters <= self.max_clusters:
            raise ValueError("need 1 <= min_clusters <= max_clusters")
        if not 0.0 <= self.prune_fraction < 1.0:
            raise ValueError("prune_fraction must lie in [0, 1)")
        if self.remainder_policy not in ("nearest", "drop"):
            raise ValueError(f"remainder_policy must be 'nearest' or 'drop', got {self.remainder_policy!r}")

    @property
    def cluster_range(self):
        if self.min_clusters is None or self.target_k is not None:
            return None
        return (self.min_clusters, self.max_clusters)

    def updated(self, **changes) -> "RunConfig":
        return replace(self, **{k: v for k, v in changes.items() if v is not None})


_BOOL = {"true": True, "yes": True, "1": True, "on": True,
         "false": False, "no": False, "0": False, "off": False}


def _coerce(name: str, raw: str):
    kinds = {f.name: f.type for f in fields(RunConfig)}
    if name not in kinds:
        raise ValueError(f"unknown config key {name!r}")
    kind = str(kinds[name])
    raw = raw.strip()
    if name in ("target_k", "min_clusters", "max_clusters"):
        return None if raw.lower() in ("", "none", "auto") else int(raw)
    if "bool" in kind:
        try:
            return _BOOL[raw.lower()]
        except KeyError:
            raise ValueError(f"{name}: expected a boolean, got {raw!r}") from None
    if "int" in kind:
        return int(raw)
    if "float" in kind:
        return float(raw)
    return raw


def load_config_file(path) -> dict:
    """Read ``key = value`` (or ``key: value``) lines; ``#`` starts a comment."""
    out = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        text = line.split("#", 1)[0].strip()
        if not text:
            continue
        for sep in ("=", ":"):
            if sep in text:
                key, value = text.split(sep, 1)
                break
        else:
            raise ValueError(f"{path}:{lineno}: expected 'key = value'")
        key = key.strip().replace("-", "_")
        try:
            out[key] = _coerce(key, value)
        except ValueError as exc:
            raise ValueError(f"{path}:{lineno}: {exc}") from None
    return out
