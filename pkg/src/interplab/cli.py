"""Command-line entry point: ``interplab <subcommand> ...``."""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor

from .data import make_teacher
from .dimest import PointCloud, lpca_estimate
from .errors import BoxOverflow, InterplabError, SingularMatrix
from .harness import (
    ExperimentConfig,
    check_proposition2,
    params_name,
    read_records_csv,
    run_experiment,
)
from .linalg import SeededRng, stable_hash
from .models import DomainBox, NetworkSpec, estimate_lipschitz
from .samplers import SHORT_NAMES, run_sampler
from .theory import bound_for, embed

TOLERANCE = {"dlnn": 1e-8, "fcdnn": 1e-12}


def widths(text: str) -> tuple:
    try:
        return tuple(int(t) for t in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def make_spec(family: str, w, activation) -> NetworkSpec:
    act = activation or ("identity" if family == "dlnn" else "tanh")
    return NetworkSpec(w, act, family)


def load_config(args) -> ExperimentConfig:
    cfg = ExperimentConfig.from_json(args.config)
    changes = {}
    if getattr(args, "out", None):
        changes["output_dir"] = args.out
    if getattr(args, "workers", None):
        changes["n_workers"] = args.workers
    if getattr(args, "sampler", None):
        changes["sampler"] = SHORT_NAMES.get(args.sampler, args.sampler)
    return dataclasses.replace(cfg, **changes) if changes else cfg


def cmd_bound(args) -> int:
    teacher = make_spec(args.family, args.teacher, args.activation)
    student = make_spec(args.family, args.student or args.teacher, args.activation)
    print(json.dumps(bound_for(teacher, student).to_dict()))
    return 0


def _sample_one(job):
    cfg, n, trial = job
    srng = cfg.trial_rng(n, trial, "sampler")
    head = {"n": n, "trial": trial}
    try:
        out = run_sampler(cfg.sampler, cfg.student, cfg.dataset(n, trial), cfg.sampler_config, srng)
    except InterplabError as exc:
        line = {"sampler": cfg.sampler, "seed": srng.stream_id, "status": type(exc).__name__}
        return {**head, **line}, None
    return {**head, "status": "success", **json.loads(out.to_json(params_name(n, trial), cfg.record_timing))}, out.params


def cmd_sample(args) -> int:
    cfg = load_config(args)
    jobs = [(cfg, n, t) for n in cfg.n_grid for t in range(cfg.trials_per_n)]
    if cfg.n_workers > 1:
        with ProcessPoolExecutor(cfg.n_workers) as pool:
            results = list(pool.map(_sample_one, jobs))
    else:
        results = [_sample_one(j) for j in jobs]
    results.sort(key=lambda r: (r[0]["n"], r[0]["trial"]))
    os.makedirs(os.path.join(args.out, "params"), exist_ok=True)
    with open(os.path.join(args.out, "outcomes.jsonl"), "w") as fh:
        for line, params in results:
            fh.write(json.dumps(line) + "\n")
            if params is not None:
                params.save(os.path.join(args.out, line["params_file"]))
    return 0


def cmd_experiment(args) -> int:
    cfg = load_config(args)
    _, summary = run_experiment(cfg)
    for n, count, mean, std, median in summary.rows:
        print(f"n={n:<6d} ok={count:<5d} mean={mean:.4g} std={std:.4g} median={median:.4g}")
    return 0


def cmd_dim_estimate(args) -> int:
    with open(args.points) as fh:
        cloud = PointCloud.from_csv(fh.read(), args.points)
    print(lpca_estimate(cloud, args.k, args.alpha, noise_floor=args.floor).to_json())
    return 0


def cmd_verify_embedding(args) -> int:
    teacher_spec = make_spec(args.family, args.teacher, args.activation)
    student_spec = make_spec(args.family, args.student, args.activation)
    tol = TOLERANCE[args.family]
    box = DomainBox(args.box)
    print(f"{'seed':>6} {'residual':>12} {'free_dim':>9} {'tolerance':>10}  result")
    failures = 0
    for seed in range(args.seeds):
        teacher = make_teacher(teacher_spec, SeededRng(seed, stable_hash("teacher")))
        try:
            w = embed(teacher, student_spec, SeededRng(seed, stable_hash("embed")), box)
        except (BoxOverflow, SingularMatrix) as exc:
            failures += 1
            print(f"{seed:>6} {'-':>12} {'-':>9} {tol:>10.0e}  FAIL ({type(exc).__name__})")
            continue
        ok = w.residual <= tol
        failures += not ok
        print(f"{seed:>6} {w.residual:>12.3e} {w.free_dimension:>9d} {tol:>10.0e}  {'PASS' if ok else 'FAIL'}")
    print(f"{args.seeds - failures}/{args.seeds} passed")
    return 1 if failures else 0


def cmd_lipschitz(args) -> int:
    cfg = load_config(args)
    box = cfg.sampler_config.box
    q = estimate_lipschitz(cfg.student, box, cfg.input_box, args.probes,
                           SeededRng(cfg.master_seed, stable_hash("lipschitz")))
    print(json.dumps({"q_hat": q, "probes": args.probes, "box_half_width": box.half_width,
                      "student": cfg.student.to_dict()}))
    return 0


@dataclasses.dataclass(frozen=True)
class _Row:
    n: int
    status: str
    test_loss: float


def cmd_check_prop2(args) -> int:
    with open(os.path.join(args.run, "manifest.json")) as fh:
        manifest = json.load(fh)
    with open(os.path.join(args.run, "records.csv")) as fh:
        rows = read_records_csv(fh.read())
    records = [_Row(int(r["n"]), r["status"], float(r["test_loss"]) if r["test_loss"] else float("nan"))
               for r in rows]
    eps = manifest["config"]["sampler_config"]["epsilon"]
    k_upper = manifest["bound"]["k_upper"] if manifest.get("bound") else None
    report = check_proposition2(records, eps, args.q_hat, args.safety, min_n=k_upper)
    print(json.dumps(report))
    print(f"caveat: {report['caveat']}", file=sys.stderr)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="interplab", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    b = sub.add_parser("bound", help="strong sample complexity upper bound (JSON)")
    b.add_argument("--family", choices=("dlnn", "fcdnn"), required=True)
    b.add_argument("--teacher", type=widths, required=True)
    b.add_argument("--student", type=widths)
    b.add_argument("--activation")
    b.set_defaults(func=cmd_bound)

    s = sub.add_parser("sample", help="run a sampler over a config's grid (JSONL + params)")
    s.add_argument("--sampler", choices=("gc", "ps", "adam", "guess_check", "pattern_search"))
    s.add_argument("--config", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--workers", type=int)
    s.set_defaults(func=cmd_sample)

    e = sub.add_parser("experiment", help="test loss versus n sweep")
    e.add_argument("--config", required=True)
    e.add_argument("--out", required=True)
    e.add_argument("--workers", type=int)
    e.set_defaults(func=cmd_experiment)

    d = sub.add_parser("dim-estimate", help="local-PCA dimension of a CSV point cloud")
    d.add_argument("--points", required=True)
    d.add_argument("--k", type=int)
    d.add_argument("--alpha", type=float, default=0.05)
    d.add_argument("--floor", type=float, default=0.0, help="eigenvalue noise floor (variance)")
    d.set_defaults(func=cmd_dim_estimate)

    v = sub.add_parser("verify-embedding", help="check teacher-equivalent embeddings")
    v.add_argument("--family", choices=("dlnn", "fcdnn"), required=True)
    v.add_argument("--teacher", type=widths, required=True)
    v.add_argument("--student", type=widths, required=True)
    v.add_argument("--activation")
    v.add_argument("--seeds", type=int, default=20)
    v.add_argument("--box", type=float, default=10.0, help="parameter box half-width B")
    v.set_defaults(func=cmd_verify_embedding)

    lp = sub.add_parser("lipschitz", help="Monte-Carlo Lipschitz constant in theta (JSON)")
    lp.add_argument("--config", required=True)
    lp.add_argument("--probes", type=int, default=10_000)
    lp.set_defaults(func=cmd_lipschitz)

    c = sub.add_parser("check-prop2", help="near-interpolator test-loss diagnostic on a finished run")
    c.add_argument("--run", required=True, help="experiment output directory")
    c.add_argument("--q-hat", type=float, required=True)
    c.add_argument("--safety", type=float, default=2.0)
    c.set_defaults(func=cmd_check_prop2)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (InterplabError, OSError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
