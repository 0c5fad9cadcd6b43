"""Test-loss-versus-n experiments, the near-interpolator diagnostic, and output files."""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .data import DEFAULT_N_TEST, InputBox, make_teacher, sample_dataset, test_loss, train_loss
from .errors import (
    Exhausted,
    InvalidConfig,
    NoSuccessfulTrials,
    NonFiniteLoss,
    StepUnderflow,
    WidthCondition,
    DepthMismatch,
)
from .linalg import SeededRng, stable_hash
from .models import NetworkSpec, ParamVector
from .samplers import SHORT_NAMES, SamplerConfig, run_sampler
from .theory import bound_for

log = logging.getLogger(__name__)

RECORD_COLUMNS = ("n", "trial", "seed", "status", "iterations", "train_loss", "test_loss", "wall_time_ms")
RUNTIME_FIELDS = ("n_workers", "output_dir")
SUMMARY_COLUMNS = ("n", "count", "mean", "std", "median")
PROP2_CAVEAT = (
    "heuristic: the bound (q*eps)^2 holds for parameters within distance eps of the "
    "interpolating set; samplers here stop on training loss <= eps, so eps is converted "
    "to a distance scale sqrt(2*eps)*safety"
)


def fmt(x) -> str:
    if x is None:
        return ""
    return f"{x:.17g}" if isinstance(x, float) else str(x)


@dataclass(frozen=True)
class ExperimentConfig:
    teacher: NetworkSpec
    student: NetworkSpec
    sampler: str = "pattern_search"
    sampler_config: SamplerConfig = SamplerConfig()
    n_grid: tuple = (2, 10, 22, 30)
    trials_per_n: int = 100
    n_test: int = DEFAULT_N_TEST
    input_box: InputBox = InputBox()
    master_seed: int = 0
    output_dir: Optional[str] = None
    n_workers: int = 1
    record_timing: bool = False

    def __post_init__(self):
        object.__setattr__(self, "n_grid", tuple(int(n) for n in self.n_grid))
        object.__setattr__(self, "sampler", SHORT_NAMES.get(self.sampler, self.sampler))
        if not self.n_grid or list(self.n_grid) != sorted(self.n_grid) or self.n_grid[0] < 1:
            raise InvalidConfig("n_grid must be non-empty, positive and sorted ascending")
        if self.trials_per_n < 1:
            raise InvalidConfig("trials_per_n must be >= 1")
        if self.n_test < 1:
            raise InvalidConfig("n_test must be >= 1")
        if self.n_workers < 1:
            raise InvalidConfig("n_workers must be >= 1")
        if self.sampler not in ("guess_check", "pattern_search", "adam"):
            raise InvalidConfig(f"unknown sampler {self.sampler!r}")

    def to_dict(self) -> dict:
        return {
            "teacher": self.teacher.to_dict(),
            "student": self.student.to_dict(),
            "sampler": self.sampler,
            "sampler_config": self.sampler_config.to_dict(),
            "n_grid": list(self.n_grid),
            "trials_per_n": self.trials_per_n,
            "n_test": self.n_test,
            "input_box": [self.input_box.low, self.input_box.high],
            "master_seed": self.master_seed,
            "output_dir": self.output_dir,
            "n_workers": self.n_workers,
            "record_timing": self.record_timing,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise InvalidConfig(f"unknown config keys: {sorted(unknown)}")
        if "teacher" not in d or "student" not in d:
            raise InvalidConfig("config needs 'teacher' and 'student'")
        kw = dict(d)
        kw["teacher"] = NetworkSpec.from_dict(d["teacher"])
        kw["student"] = NetworkSpec.from_dict(d["student"])
        if "sampler_config" in d:
            sc_known = {f.name for f in dataclasses.fields(SamplerConfig)}
            bad = set(d["sampler_config"]) - sc_known
            if bad:
                raise InvalidConfig(f"unknown sampler_config keys: {sorted(bad)}")
            kw["sampler_config"] = SamplerConfig(**d["sampler_config"])
        if "input_box" in d:
            kw["input_box"] = InputBox(*d["input_box"])
        return cls(**kw)

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    # RNG streams; keyed by purpose so adding trials never perturbs others.
    def teacher_rng(self) -> SeededRng:
        return SeededRng(self.master_seed, stable_hash("teacher"))

    def trial_rng(self, n: int, trial: int, purpose: str) -> SeededRng:
        return SeededRng(self.master_seed, stable_hash(n, trial, purpose))

    def teacher_model(self):
        return make_teacher(self.teacher, self.teacher_rng())

    def dataset(self, n: int, trial: int):
        return sample_dataset(self.teacher_model(), n, self.input_box, self.trial_rng(n, trial, "dataset"))


@dataclass(frozen=True, eq=False)
class ExperimentRecord:
    n: int
    trial: int
    seed: int
    status: str
    iterations: Optional[int]
    train_loss: Optional[float]
    test_loss: Optional[float]
    wall_time_ms: Optional[float]
    params: Optional[ParamVector] = field(default=None, repr=False)

    def row(self, record_timing: bool = True) -> list[str]:
        wall = self.wall_time_ms if record_timing else None
        return [fmt(self.n), fmt(self.trial), fmt(self.seed), self.status, fmt(self.iterations),
                fmt(self.train_loss), fmt(self.test_loss), fmt(wall)]


@dataclass(frozen=True)
class CurveSummary:
    rows: tuple = ()
    k_upper: Optional[int] = None
    epsilon: Optional[float] = None
    q_hat: Optional[float] = None
    failure_rate: tuple = ()


_ERRORS = {
    Exhausted: "exhausted",
    StepUnderflow: "step_underflow",
    NonFiniteLoss: "nonfinite",
}


def run_trial(cfg: ExperimentConfig, n: int, trial: int) -> ExperimentRecord:
    teacher = cfg.teacher_model()
    dataset = cfg.dataset(n, trial)
    srng = cfg.trial_rng(n, trial, "sampler")
    try:
        out = run_sampler(cfg.sampler, cfg.student, dataset, cfg.sampler_config, srng)
    except tuple(_ERRORS) as exc:
        status = next(v for k, v in _ERRORS.items() if isinstance(exc, k))
        return ExperimentRecord(n, trial, srng.stream_id, status, None, None, None, None)
    tl = test_loss(out.params, teacher, cfg.n_test, cfg.input_box, cfg.trial_rng(n, trial, "test"))
    return ExperimentRecord(n, trial, srng.stream_id, "success", out.iterations, out.final_loss,
                            tl, out.wall_time_ms, out.params)


def _run_trial_args(args):
    return run_trial(*args)


def annotation_bound(cfg: ExperimentConfig):
    try:
        return bound_for(cfg.teacher, cfg.student)
    except (WidthCondition, DepthMismatch) as exc:
        log.warning("bound preconditions fail, curve left unannotated: %s", exc)
        return None


def summarize(records, k_upper=None, epsilon=None, q_hat=None) -> CurveSummary:
    rows, fails = [], []
    for n in sorted({r.n for r in records}):
        at_n = [r for r in records if r.n == n]
        ok = np.array([r.test_loss for r in at_n if r.status == "success"], dtype=float)
        fails.append((n, 1.0 - ok.size / len(at_n)))
        if ok.size == 0:
            rows.append((n, 0, float("nan"), float("nan"), float("nan")))
            continue
        std = float(np.std(ok, ddof=1)) if ok.size > 1 else 0.0
        rows.append((n, int(ok.size), float(np.mean(ok)), std, float(np.median(ok))))
    return CurveSummary(tuple(rows), k_upper, epsilon, q_hat, tuple(fails))


def run_experiment(cfg: ExperimentConfig):
    """Sweep ``n_grid`` x ``trials_per_n``; returns ``(records, summary)``.

    Trials may run on a process pool; records are sorted by ``(n, trial)``
    before anything is written, so outputs do not depend on scheduling.
    """
    jobs = [(cfg, n, t) for n in cfg.n_grid for t in range(cfg.trials_per_n)]
    if cfg.n_workers > 1:
        with ProcessPoolExecutor(cfg.n_workers) as pool:
            records = list(pool.map(_run_trial_args, jobs, chunksize=max(1, len(jobs) // (4 * cfg.n_workers))))
    else:
        records = [run_trial(*job) for job in jobs]
    records.sort(key=lambda r: (r.n, r.trial))
    bound = annotation_bound(cfg)
    summary = summarize(records, bound.k_upper if bound else None, cfg.sampler_config.epsilon)
    if cfg.output_dir:
        write_outputs(cfg, records, summary, bound)
    return records, summary


def records_csv(records, record_timing: bool = True) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(RECORD_COLUMNS)
    for r in records:
        w.writerow(r.row(record_timing))
    return buf.getvalue()


def read_records_csv(text: str) -> list[dict]:
    return list(csv.DictReader(io.StringIO(text)))


def params_name(n: int, trial: int) -> str:
    return os.path.join("params", f"n{n}_t{trial}.bin")


def write_outputs(cfg: ExperimentConfig, records, summary: CurveSummary, bound) -> None:
    out = cfg.output_dir
    os.makedirs(os.path.join(out, "params"), exist_ok=True)
    with open(os.path.join(out, "records.csv"), "w") as fh:
        fh.write(records_csv(records, cfg.record_timing))
    for r in records:
        if r.params is not None:
            r.params.save(os.path.join(out, params_name(r.n, r.trial)))
    emit_plot_data(summary, os.path.join(out, "summary.csv"))
    # pool size and output location do not affect results, so they stay out
    config = {k: v for k, v in cfg.to_dict().items() if k not in RUNTIME_FIELDS}
    manifest = {
        "config": config,
        "bound": bound.to_dict() if bound else None,
        "failure_rate": {str(n): rate for n, rate in summary.failure_rate},
        "files": ["records.csv", "summary.csv", "summary.gp", "params/"],
    }
    with open(os.path.join(out, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def emit_plot_data(summary: CurveSummary, path) -> None:
    """Write ``summary`` as CSV with ``#`` annotation lines, plus a gnuplot script.

    The annotations carry ``k_upper`` so a plot can mark the bound with a
    vertical line. Rewriting the same summary produces identical files.
    """
    lines = []
    if summary.k_upper is not None:
        lines.append(f"# k_upper={summary.k_upper}")
    if summary.epsilon is not None:
        lines.append(f"# epsilon={fmt(float(summary.epsilon))}")
    if summary.q_hat is not None:
        lines.append(f"# q_hat={fmt(float(summary.q_hat))}")
    if summary.failure_rate:
        rates = ";".join(f"{n}:{fmt(float(r))}" for n, r in summary.failure_rate)
        lines.append(f"# failure_rate={rates}")
    lines.append(",".join(SUMMARY_COLUMNS))
    for n, count, mean, std, median in summary.rows:
        lines.append(",".join([str(n), str(count), fmt(float(mean)), fmt(float(std)), fmt(float(median))]))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    base = os.path.basename(str(path))
    script = [
        "set datafile separator ','",
        "set key autotitle columnhead",
        "set logscale y",
        "set xlabel 'number of training samples'",
        "set ylabel 'test loss'",
    ]
    if summary.k_upper is not None:
        script.append(f"set arrow from {summary.k_upper}, graph 0 to {summary.k_upper}, graph 1 nohead lc rgb 'red'")
    script.append(f"plot '{base}' using 1:3:4 with yerrorbars title 'mean +- std'")
    with open(os.path.splitext(str(path))[0] + ".gp", "w") as fh:
        fh.write("\n".join(script) + "\n")


def parse_plot_data(path) -> CurveSummary:
    ann, rows = {}, []
    with open(path) as fh:
        lines = [ln.rstrip("\n") for ln in fh if ln.strip()]
    for ln in lines:
        if ln.startswith("#"):
            key, _, val = ln[1:].strip().partition("=")
            ann[key] = val
    body = [ln for ln in lines if not ln.startswith("#")][1:]
    for ln in body:
        n, count, mean, std, median = ln.split(",")
        rows.append((int(n), int(count), float(mean), float(std), float(median)))
    fails = ()
    if ann.get("failure_rate"):
        fails = tuple((int(a), float(b)) for a, b in (p.split(":") for p in ann["failure_rate"].split(";")))
    return CurveSummary(
        tuple(rows),
        int(ann["k_upper"]) if "k_upper" in ann else None,
        float(ann["epsilon"]) if "epsilon" in ann else None,
        float(ann["q_hat"]) if "q_hat" in ann else None,
        fails,
    )


def check_proposition2(records, epsilon: float, q_hat: float, safety: float = 2.0,
                       min_n: Optional[int] = None) -> dict:
    """Fraction of successful trials whose test loss is within ``(q_hat * eps_eff)^2``.

    ``eps_eff = sqrt(2 * epsilon) * safety`` converts the training-loss
    threshold into a parameter-distance scale. This is a diagnostic, not a
    verification of the metric-neighbourhood statement (see ``caveat``).
    """
    ok = [r for r in records if r.status == "success" and (min_n is None or r.n >= min_n)]
    if not ok:
        raise NoSuccessfulTrials("no successful trials to check")
    eps_eff = float(np.sqrt(2.0 * epsilon) * safety)
    threshold = (q_hat * eps_eff) ** 2
    hits = sum(r.test_loss <= threshold for r in ok)
    return {
        "fraction": hits / len(ok),
        "trials": len(ok),
        "q_hat": q_hat,
        "epsilon": epsilon,
        "safety": safety,
        "epsilon_effective": eps_eff,
        "threshold": threshold,
        "caveat": PROP2_CAVEAT,
    }
