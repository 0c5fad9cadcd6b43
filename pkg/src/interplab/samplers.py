"""Random near-interpolator samplers.

Three procedures return a parameter vector whose training loss is at most
``epsilon``:

* ``guess_and_check``: rejection sampling from a fixed proposal.
* ``pattern_search``: derivative-free random-coordinate search with
  geometric step decay.
* ``adam_near_interpolator``: full-batch Adam from a Xavier start.

All three are pure functions of ``(spec, dataset, cfg, rng)``. Note that they
sample a loss sublevel set ``{L_n <= eps}``, not the metric neighbourhood of
the interpolating set, so none of them claims uniformity on the latter.
"""

from __future__ import annotations

import json
import time
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .errors import Exhausted, InvalidConfig, NonFiniteLoss, StepUnderflow
from .linalg import SeededRng
from .models import (
    DomainBox,
    NetworkSpec,
    ParamVector,
    batch_losses,
    loss_and_gradient,
    loss_from_arrays,
    param_count,
    xavier_uniform,
)

SAMPLERS = ("guess_check", "pattern_search", "adam")
SHORT_NAMES = {"gc": "guess_check", "ps": "pattern_search", "adam": "adam"}
DIVERGENCE_LIMIT = 1e12
MIN_ALPHA = 1e-300
ZERO_COORD = 1e-12


@dataclass(frozen=True)
class SamplerConfig:
    epsilon: float = 0.01
    max_iterations: int = 1_000_000
    proposal: str = "xavier_uniform"
    alpha0: float = 1.0
    gamma_dec: float = 0.5
    sweep: str = "full"
    adam_lr: float = 0.001
    adam_betas: tuple[float, float] = (0.9, 0.999)
    adam_eps: float = 1e-8
    box_half_width: float = 10.0
    gc_chunk: int = 2048
    record_trace: bool = False

    def __post_init__(self):
        object.__setattr__(self, "adam_betas", tuple(self.adam_betas))
        if not self.epsilon > 0:
            raise InvalidConfig("epsilon must be positive")
        if not 0 < self.gamma_dec < 1:
            raise InvalidConfig("gamma_dec must lie in (0, 1)")
        if not self.alpha0 > 0:
            raise InvalidConfig("alpha0 must be positive")
        if self.max_iterations < 0:
            raise InvalidConfig("max_iterations must be >= 0")
        if self.proposal not in ("xavier_uniform", "box_uniform"):
            raise InvalidConfig(f"unknown proposal {self.proposal!r}")
        if self.sweep not in ("single", "full"):
            raise InvalidConfig(f"sweep must be 'single' or 'full', got {self.sweep!r}")
        if self.gc_chunk < 1:
            raise InvalidConfig("gc_chunk must be >= 1")

    @property
    def box(self) -> DomainBox:
        return DomainBox(self.box_half_width)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["adam_betas"] = list(self.adam_betas)
        return d


@dataclass(frozen=True, eq=False)
class SamplerOutcome:
    params: ParamVector
    final_loss: float
    iterations: int
    wall_time_ms: float
    seed: int
    sampler_name: str
    status: str = "success"
    loss_trace: Optional[np.ndarray] = field(default=None, repr=False)
    alpha_trace: Optional[np.ndarray] = field(default=None, repr=False)

    def to_json(self, params_file: Optional[str] = None, record_timing: bool = True) -> str:
        return json.dumps(
            {
                "sampler": self.sampler_name,
                "seed": self.seed,
                "iterations": self.iterations,
                "final_loss": float(f"{self.final_loss:.17g}"),
                "wall_time_ms": self.wall_time_ms if record_timing else None,
                "params_file": params_file,
            }
        )


def _arrays(dataset):
    return (
        np.asarray(dataset.inputs, dtype=np.float64),
        np.asarray(dataset.outputs, dtype=np.float64),
    )


def _outcome(spec, theta, x, y, iterations, t0, rng, name, **traces):
    loss = loss_from_arrays(spec, theta, x, y)
    return SamplerOutcome(
        params=ParamVector(spec, theta),
        final_loss=loss,
        iterations=iterations,
        wall_time_ms=(time.perf_counter() - t0) * 1e3,
        seed=rng.stream_id,
        sampler_name=name,
        **traces,
    )


def _propose(spec: NetworkSpec, cfg: SamplerConfig, gen, size: int) -> np.ndarray:
    if cfg.proposal == "xavier_uniform":
        return xavier_uniform(spec, gen, size=size)
    return cfg.box.sample(param_count(spec), gen, size=size)


def guess_and_check(spec: NetworkSpec, dataset, cfg: SamplerConfig, rng: SeededRng) -> SamplerOutcome:
    """Draw from the proposal until the training loss is at most ``epsilon``.

    Draws are generated and scored in chunks of ``cfg.gc_chunk`` for speed;
    the first accepted draw in stream order is returned and ``iterations``
    is its 1-based index, exactly as a one-at-a-time loop would report.
    """
    t0 = time.perf_counter()
    x, y = _arrays(dataset)
    gen = rng.generator()
    used = 0
    best = np.inf
    while used < cfg.max_iterations:
        size = min(cfg.gc_chunk, cfg.max_iterations - used)
        thetas = _propose(spec, cfg, gen, size)
        losses = batch_losses(spec, thetas, x, y)
        # batch scores pre-filter; the single-vector loss decides acceptance
        for i in np.flatnonzero(losses <= cfg.epsilon * (1 + 1e-9)):
            if loss_from_arrays(spec, thetas[i], x, y) <= cfg.epsilon:
                return _outcome(spec, thetas[i], x, y, used + int(i) + 1, t0, rng, "guess_check")
        finite = losses[np.isfinite(losses)]
        if finite.size:
            best = min(best, float(finite.min()))
        used += size
    raise Exhausted(cfg.max_iterations, best)


def pattern_search(spec: NetworkSpec, dataset, cfg: SamplerConfig, rng: SeededRng) -> SamplerOutcome:
    """Random-coordinate pattern search started from a Xavier draw.

    Each iteration picks a coordinate ``i`` and tries ``theta_i + delta`` and
    then ``theta_i - delta`` with ``delta = alpha * theta_i`` (or ``alpha``
    when ``|theta_i| <= 1e-12``, since a multiplicative step cannot move a
    zero coordinate). The first trial that strictly lowers the loss is kept;
    if neither does, ``alpha`` shrinks by ``gamma_dec``. Trials that leave the
    parameter box count as failures.

    With ``cfg.sweep == "full"`` an iteration instead scans every coordinate
    in random order and decays ``alpha`` only if none improves.
    """
    t0 = time.perf_counter()
    x, y = _arrays(dataset)
    gen = rng.generator()
    d = param_count(spec)
    bound = cfg.box_half_width
    theta = xavier_uniform(spec, gen)
    loss = loss_from_arrays(spec, theta, x, y)
    alpha = cfg.alpha0
    k = 0
    losses, alphas = ([loss], [alpha]) if cfg.record_trace else (None, None)

    def attempt(i):
        nonlocal loss
        old = theta[i]
        delta = alpha * old if abs(old) > ZERO_COORD else alpha
        for cand in (old + delta, old - delta):
            if abs(cand) > bound:
                continue
            theta[i] = cand
            trial = loss_from_arrays(spec, theta, x, y)
            if trial < loss:
                loss = trial
                return True
        theta[i] = old
        return False

    def fail(exc):
        # partial traces ride along so stalled runs can still be inspected
        if losses is not None:
            exc.loss_trace, exc.alpha_trace = np.array(losses), np.array(alphas)
        return exc

    while loss > cfg.epsilon:
        if k >= cfg.max_iterations:
            raise fail(Exhausted(cfg.max_iterations, loss))
        if alpha < MIN_ALPHA:
            raise fail(StepUnderflow(f"step size {alpha:.3e} underflowed after {k} iterations"))
        if cfg.sweep == "single":
            moved = attempt(int(gen.integers(d)))
        else:
            moved = False
            for i in gen.permutation(d):
                if attempt(int(i)):
                    moved = True
                    break
        if not moved:
            alpha *= cfg.gamma_dec
        k += 1
        if losses is not None:
            losses.append(loss)
            alphas.append(alpha)

    traces = {}
    if losses is not None:
        traces = {"loss_trace": np.array(losses), "alpha_trace": np.array(alphas)}
    return _outcome(spec, theta, x, y, k, t0, rng, "pattern_search", **traces)


def adam_near_interpolator(spec: NetworkSpec, dataset, cfg: SamplerConfig, rng: SeededRng,
                           init: Optional[np.ndarray] = None) -> SamplerOutcome:
    """Full-batch Adam from a Xavier start until ``L_n <= epsilon``.

    Iterates are projected back onto the parameter box after each step.
    ``init`` overrides the Xavier starting point.
    """
    t0 = time.perf_counter()
    x, y = _arrays(dataset)
    gen = rng.generator()
    theta = xavier_uniform(spec, gen) if init is None else np.array(init, dtype=np.float64)
    b1, b2 = cfg.adam_betas
    m = np.zeros_like(theta)
    v = np.zeros_like(theta)
    bound = cfg.box_half_width
    losses = [] if cfg.record_trace else None
    k = 0
    while True:
        loss, grad = loss_and_gradient(spec, theta, x, y)
        if losses is not None:
            losses.append(loss)
        if loss > DIVERGENCE_LIMIT:
            raise NonFiniteLoss(f"Adam diverged: loss {loss:.3e} at step {k}")
        if loss <= cfg.epsilon:
            break
        if k >= cfg.max_iterations:
            raise Exhausted(cfg.max_iterations, loss)
        k += 1
        m = b1 * m + (1 - b1) * grad
        v = b2 * v + (1 - b2) * grad * grad
        mhat = m / (1 - b1**k)
        vhat = v / (1 - b2**k)
        theta = np.clip(theta - cfg.adam_lr * mhat / (np.sqrt(vhat) + cfg.adam_eps), -bound, bound)
    traces = {"loss_trace": np.array(losses)} if losses is not None else {}
    return _outcome(spec, theta, x, y, k, t0, rng, "adam", **traces)


_DISPATCH = {
    "guess_check": guess_and_check,
    "pattern_search": pattern_search,
    "adam": adam_near_interpolator,
}


def run_sampler(name: str, spec: NetworkSpec, dataset, cfg: SamplerConfig, rng: SeededRng) -> SamplerOutcome:
    name = SHORT_NAMES.get(name, name)
    if name not in _DISPATCH:
        raise InvalidConfig(f"unknown sampler {name!r}; choose from {SAMPLERS}")
    return _DISPATCH[name](spec, dataset, cfg, rng)
