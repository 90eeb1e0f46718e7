"""Command line: ``dpsm generate | cluster | eval``.

Exit codes: 0 success, 1 internal invariant violation, 2 input error,
3 metric undefined.
"""

from __future__ import annotations

import argparse
import contextlib
import json
import logging
import sys
from dataclasses import asdict, fields
from pathlib import Path
from typing import List, Optional

import numpy as np

from . import datasets
from .config import RunConfig, load_config_file
from .density import density_order, propagate, propagation_matrix, write_density
from .graph import knn_graph, load_edges, load_points
from .merge import assign_remainder, run_merging, write_labels, write_trace
from .metrics import MetricUndefined, evaluate
from .partition import partition, verify_properties, write_partition

log = logging.getLogger("dpsm")

EXIT_OK, EXIT_INTERNAL, EXIT_INPUT, EXIT_METRIC = 0, 1, 2, 3


class StageError(Exception):
    def __init__(self, stage: str, message: str, code: int):
        super().__init__(message)
        self.stage = stage
        self.code = code


@contextlib.contextmanager
def stage(name: str):
    try:
        yield
    except StageError:
        raise
    except MetricUndefined as exc:
        raise StageError(name, str(exc), EXIT_METRIC) from exc
    except (OSError, ValueError) as exc:
        raise StageError(name, str(exc), EXIT_INPUT) from exc
    except Exception as exc:  # anything else is a broken invariant
        raise StageError(name, f"{type(exc).__name__}: {exc}", EXIT_INTERNAL) from exc


def _open_out(path: Optional[str]):
    if path is None or path == "-":
        return contextlib.nullcontext(sys.stdout)
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    return open(path, "w", encoding="utf-8", newline="\n")


def read_labels(path: str) -> np.ndarray:
    """Labels from ``node_id,label`` rows or one label per row; a header is skipped."""
    ids, labels = [], []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.strip()
            if not text or text.startswith("#"):
                continue
            parts = [p for p in text.replace(",", " ").split() if p]
            try:
                nums = [int(float(p)) for p in parts]
            except ValueError:
                if not labels:
                    continue  # header
                raise ValueError(f"{path}:{lineno}: cannot parse {text!r}") from None
            if len(nums) == 1:
                ids.append(len(ids))
                labels.append(nums[0])
            elif len(nums) == 2:
                ids.append(nums[0])
                labels.append(nums[1])
            else:
                raise ValueError(f"{path}:{lineno}: expected 'label' or 'node_id,label'")
    if not labels:
        raise ValueError(f"{path}: no labels found")
    order = np.argsort(ids, kind="stable")
    ids_sorted = np.asarray(ids)[order]
    if not np.array_equal(ids_sorted, np.arange(len(ids))):
        raise ValueError(f"{path}: node ids must cover 0..{len(ids) - 1} exactly once")
    return np.asarray(labels, dtype=np.int64)[order]


# -- generate ----------------------------------------------------------------

def cmd_generate(args) -> int:
    with stage("generate"):
        ps = datasets.generate(args.shape, args.n, args.noise, args.seed)
    with stage("output"), _open_out(args.out) as fh:
        datasets.write_points(fh, ps)
    return EXIT_OK


# -- cluster -----------------------------------------------------------------

_FLAG_FIELDS = [f.name for f in fields(RunConfig)]


def build_config(args) -> RunConfig:
    values = {}
    if args.config:
        values.update(load_config_file(args.config))
    for name in _FLAG_FIELDS:
        v = getattr(args, name, None)
        if v is not None:
            values[name] = v
    if getattr(args, "auto", False):
        values["target_k"] = None
    return RunConfig(**values)


def cmd_cluster(args) -> int:
    with stage("input"):
        cfg = build_config(args)
        path = Path(args.input)
        if not path.is_file():
            raise FileNotFoundError(f"input file not found: {path}")
        truth = None
        with open(path, encoding="utf-8") as fh:
            if args.kind == "edges":
                graph = load_edges(fh, args.node_count)
            else:
                points = load_points(fh, args.label_column)
                truth = points.labels
    if args.kind == "points":
        with stage("graph"):
            graph = knn_graph(points, cfg.k_neighbors, cfg.sigma_scale, cfg.kernel_form)
    if args.truth:
        with stage("input"):
            truth = read_labels(args.truth)
            if len(truth) != graph.n_nodes:
                raise ValueError(f"truth has {len(truth)} labels, graph has {graph.n_nodes} nodes")
    log.info("graph: %d nodes, %d edges", graph.n_nodes, graph.n_edges)

    with stage("density"):
        if graph.n_edges:
            f = propagate(propagation_matrix(graph), cfg.iterations, cfg.lazy)
        else:
            f = np.ones(graph.n_nodes)
        rank = density_order(f)
    with stage("partition"):
        initial = partition(graph, rank)
    log.info("partition: %d initial clusters, %d unassigned", len(initial.clusters), len(initial.unassigned))
    with stage("merge"):
        prune = cfg.prune_fraction
        if cfg.target_k is not None and not cfg.prune_with_target:
            prune = 0.0
        final, trace = run_merging(
            initial, graph,
            target_k=cfg.target_k,
            drop_ratio=cfg.drop_ratio,
            prune_fraction=prune,
            rank=rank,
            absorb=cfg.absorb,
            cluster_range=cfg.cluster_range,
        )
        report = verify_properties(final, graph)
        checked = report.checks if cfg.absorb else report.checks[:3]
        broken = [c for c in checked if not c.passed]
        if broken:
            raise AssertionError("; ".join(str(c) for c in broken))
    with stage("remainder"):
        labels = assign_remainder(final, graph, rank, cfg.remainder_policy, noise=trace.pruned_nodes)

    summary = {
        "n_nodes": graph.n_nodes,
        "n_edges": graph.n_edges,
        "initial_clusters": len(initial.clusters),
        "clusters_found": int(len(np.unique(labels[labels >= 0]))),
        "merges": len(trace.records),
        "stop_reason": trace.stop_reason,
        "pruned_clusters": trace.pruned_roots,
        "noise_count": int(np.sum(labels < 0)),
        "notes": trace.notes,
        "properties": {c.name: c.passed for c in report.checks},
        "config": asdict(cfg),
    }
    if trace.halt_candidate is not None:
        h = trace.halt_candidate
        summary["halt_candidate"] = {"root_a": h.a, "root_b": h.b, "clucut": h.clucut}
    if truth is not None:
        with stage("eval"):
            summary["metrics"] = _metric_dict(evaluate(truth, labels, args.noise))

    with stage("output"):
        with _open_out(args.labels_out) as fh:
            write_labels(fh, labels)
        if args.trace_out:
            with _open_out(args.trace_out) as fh:
                write_trace(fh, trace)
        if args.density_out:
            with _open_out(args.density_out) as fh:
                write_density(fh, rank)
        if args.partition_out:
            with _open_out(args.partition_out) as fh:
                write_partition(fh, initial)
        text = json.dumps(summary, indent=2, sort_keys=True)
        if args.summary_out:
            with _open_out(args.summary_out) as fh:
                fh.write(text + "\n")
        elif args.labels_out not in (None, "-"):
            print(text)
    return EXIT_OK


def _metric_dict(rep) -> dict:
    return {"vm": rep.vm, "ari": rep.ari, "ami": rep.ami,
            "clusters_found": rep.clusters_found, "noise_fraction": rep.noise_fraction}


# -- eval --------------------------------------------------------------------

def cmd_eval(args) -> int:
    with stage("input"):
        pred = read_labels(args.labels)
        if args.truth_column is not None:
            with open(args.truth, encoding="utf-8") as fh:
                truth = load_points(fh, args.truth_column).labels
        else:
            truth = read_labels(args.truth)
        if len(pred) != len(truth):
            raise ValueError(f"length mismatch: {len(pred)} labels vs {len(truth)} truth labels")
    with stage("eval"):
        rep = evaluate(truth, pred, args.noise)
    out = _metric_dict(rep)
    with stage("output"), _open_out(args.out) as fh:
        if args.json:
            fh.write(json.dumps(out, indent=2, sort_keys=True) + "\n")
        else:
            fh.write("".join(f"{k}={v}\n" for k, v in out.items()))
    return EXIT_OK


# -- parser ------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dpsm", description="Density propagation and subcluster merging.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a synthetic labeled point file")
    g.add_argument("--shape", required=True, help="circles or moons")
    g.add_argument("--n", type=int, default=None)
    g.add_argument("--noise", type=float, default=0.05)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", default="-")
    g.set_defaults(func=cmd_generate)

    c = sub.add_parser("cluster", help="run the full clustering pipeline")
    c.add_argument("--input", required=True)
    c.add_argument("--kind", choices=("points", "edges"), default="points")
    c.add_argument("--label-column", type=int, default=None,
                   help="column holding ground truth labels (points input), e.g. -1")
    c.add_argument("--node-count", type=int, default=None, help="node count for edge input")
    c.add_argument("--truth", default=None, help="label file with ground truth")
    c.add_argument("--config", default=None, help="key = value config file; flags override it")
    c.add_argument("--k-neighbors", dest="k_neighbors", type=int)
    c.add_argument("--sigma-scale", dest="sigma_scale", type=float)
    c.add_argument("--kernel-form", dest="kernel_form", choices=("product", "ratio"))
    c.add_argument("--iterations", type=int)
    c.add_argument("--lazy", type=float)
    mode = c.add_mutually_exclusive_group()
    mode.add_argument("--target-k", dest="target_k", type=int)
    mode.add_argument("--auto", action="store_true", help="terminate by CluCut drop (default)")
    c.add_argument("--drop-ratio", dest="drop_ratio", type=float)
    c.add_argument("--min-clusters", dest="min_clusters", type=int)
    c.add_argument("--max-clusters", dest="max_clusters", type=int)
    c.add_argument("--prune-fraction", dest="prune_fraction", type=float)
    c.add_argument("--prune-with-target", dest="prune_with_target", action="store_const", const=True)
    c.add_argument("--remainder", dest="remainder_policy", choices=("nearest", "drop"))
    c.add_argument("--no-absorb", dest="absorb", action="store_const", const=False,
                   help="keep margin nodes unassigned after merges")
    c.add_argument("--noise", choices=("exclude", "cluster"), default="exclude",
                   help="how noise labels enter the metrics")
    c.add_argument("--labels-out", default="-")
    c.add_argument("--trace-out")
    c.add_argument("--density-out")
    c.add_argument("--partition-out")
    c.add_argument("--summary-out")
    c.set_defaults(func=cmd_cluster)

    e = sub.add_parser("eval", help="score a labeling against ground truth")
    e.add_argument("--labels", required=True)
    e.add_argument("--truth", required=True)
    e.add_argument("--truth-column", type=int, default=None,
                   help="read truth as this column of a point file")
    e.add_argument("--noise", choices=("exclude", "cluster"), default="exclude")
    e.add_argument("--json", action="store_true")
    e.add_argument("--out", default="-")
    e.set_defaults(func=cmd_eval)
    return p


_DEFAULT_N = {"circles": 1500, "moons": 1000}


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s")
    if args.command == "generate" and args.n is None:
        args.n = _DEFAULT_N.get(args.shape, 1000)
    try:
        return args.func(args)
    except StageError as exc:
        print(f"dpsm: error in stage '{exc.stage}': {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
