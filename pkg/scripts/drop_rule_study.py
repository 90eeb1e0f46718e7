"""How the automatic stop behaves across seeds and drop ratios.

For each dataset and seed, runs the full merge sequence once and replays the
half-drop rule at several ratios, reporting the cluster count it would stop
at and the count of connected components (the best a merge can reach).

    python3 scripts/drop_rule_study.py --seeds 0 1 2 3 4
"""

import argparse

from dpsm import datasets
from dpsm.config import RunConfig
from dpsm.merge import executed_prefix
from dpsm.pipeline import cluster_points


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2, 3, 4])
    ap.add_argument("--ratios", type=float, nargs="+", default=[0.5, 0.3, 0.1, 0.05])
    args = ap.parse_args()

    print("dataset  seed  initial  components  " + "  ".join(f"r={r:<5}" for r in args.ratios))
    for shape, n in (("circles", 1500), ("moons", 1000)):
        for seed in args.seeds:
            ps = datasets.generate(shape, n, 0.05, seed)
            res = cluster_points(ps, RunConfig(target_k=1))
            start = len(res.initial.clusters)
            comps = len(set(res.graph.components().tolist()))
            stops = [start - executed_prefix(res.trace.clucuts, r) for r in args.ratios]
            print(f"{shape:8} {seed:4d} {start:8d} {comps:11d}  " + "  ".join(f"{s:7d}" for s in stops))


if __name__ == "__main__":
    main()
