"""Test loss versus training-set size for DLNN students of increasing depth.

Runs the same teacher against the three students [2,10,1], [2,10,10,10,1]
and [2,10,10,10,10,10,1], writing one output directory per student plus
gnuplot-ready summaries.

    python scripts/depth_sweep.py --out runs/depth_sweep [--trials 100] [--workers 4]
"""

import argparse
import dataclasses
import os

from interplab.harness import ExperimentConfig, run_experiment
from interplab.models import NetworkSpec

HERE = os.path.dirname(os.path.abspath(__file__))
STUDENTS = [(2, 10, 1), (2, 10, 10, 10, 1), (2, 10, 10, 10, 10, 10, 1)]


def main():
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--config", default=os.path.join(HERE, "configs", "dlnn_depth_sweep.json"))
    p.add_argument("--out", default="runs/depth_sweep")
    p.add_argument("--trials", type=int)
    p.add_argument("--n-grid", type=lambda s: tuple(int(t) for t in s.split(",")))
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--all-students", action="store_true", help="also run the deeper students")
    args = p.parse_args()

    base = ExperimentConfig.from_json(args.config)
    changes = {"n_workers": args.workers}
    if args.trials:
        changes["trials_per_n"] = args.trials
    if args.n_grid:
        changes["n_grid"] = args.n_grid
    base = dataclasses.replace(base, **changes)

    students = STUDENTS if args.all_students else STUDENTS[:1]
    for widths in students:
        name = "student_" + "-".join(map(str, widths))
        cfg = dataclasses.replace(base, student=NetworkSpec(widths), output_dir=os.path.join(args.out, name))
        _, summary = run_experiment(cfg)
        print(f"{name}  (k_upper={summary.k_upper}, eps={summary.epsilon})")
        for n, count, mean, std, median in summary.rows:
            print(f"  n={n:<4d} ok={count:<4d} mean={mean:.4g}  std={std:.4g}  median={median:.4g}")
        rows = dict((r[0], r[4]) for r in summary.rows)
        lo, hi = min(rows), max(rows)
        print(f"  median ratio n={lo} / n={hi}: {rows[lo] / rows[hi]:.1f}")


if __name__ == "__main__":
    main()
