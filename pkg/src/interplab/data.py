"""Teachers, noiseless datasets drawn from them, and train/test losses."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, NonFiniteLoss
from .linalg import SeededRng
from .models import NetworkSpec, ParamVector, forward, loss_from_arrays, xavier_uniform

DEFAULT_N_TEST = 2000


@dataclass(frozen=True)
class InputBox:
    """Inputs are drawn i.i.d. uniform on ``[low, high]^m0``."""

    low: float = -1.0
    high: float = 1.0

    def __post_init__(self):
        if not (np.isfinite(self.low) and np.isfinite(self.high) and self.low < self.high):
            raise ValueError("input box needs finite low < high")

    def sample(self, m: int, gen: np.random.Generator, size=None) -> np.ndarray:
        shape = (m,) if size is None else (size, m)
        return gen.uniform(self.low, self.high, size=shape)


@dataclass(frozen=True)
class Teacher:
    spec: NetworkSpec
    params: ParamVector

    def __post_init__(self):
        if self.params.spec != self.spec:
            raise DimensionMismatch("teacher params do not match the teacher spec")

    def __call__(self, x) -> np.ndarray:
        return forward(self.params, x)


@dataclass(frozen=True, eq=False)
class Dataset:
    inputs: np.ndarray = field(repr=False)
    outputs: np.ndarray = field(repr=False)
    gen_seed: int = 0

    def __post_init__(self):
        x = np.array(self.inputs, dtype=np.float64, ndmin=2)
        y = np.array(self.outputs, dtype=np.float64, ndmin=2)
        if x.shape[0] < 1 or x.shape[0] != y.shape[0]:
            raise DimensionMismatch(f"inputs {x.shape} and outputs {y.shape} disagree")
        x.flags.writeable = False
        y.flags.writeable = False
        object.__setattr__(self, "inputs", x)
        object.__setattr__(self, "outputs", y)

    @property
    def n(self) -> int:
        return self.inputs.shape[0]

    def to_csv(self) -> str:
        buf = io.StringIO()
        m0, ml = self.inputs.shape[1], self.outputs.shape[1]
        header = [f"x_{i}" for i in range(m0)] + [f"y_{j}" for j in range(ml)]
        buf.write(",".join(header) + "\n")
        for row in np.hstack([self.inputs, self.outputs]):
            buf.write(",".join(f"{v:.17g}" for v in row) + "\n")
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, gen_seed: int = 0) -> "Dataset":
        rows = list(csv.reader(io.StringIO(text)))
        header, body = rows[0], [r for r in rows[1:] if r]
        xcols = [i for i, h in enumerate(header) if h.startswith("x_")]
        ycols = [i for i, h in enumerate(header) if h.startswith("y_")]
        arr = np.array([[float(v) for v in r] for r in body])
        return cls(arr[:, xcols], arr[:, ycols], gen_seed)


def make_teacher(spec: NetworkSpec, rng: SeededRng) -> Teacher:
    """Xavier-uniform weights, zero biases."""
    return Teacher(spec, ParamVector(spec, xavier_uniform(spec, rng.generator())))


def sample_dataset(teacher: Teacher, n: int, input_box: InputBox, rng: SeededRng) -> Dataset:
    if n < 1:
        raise ValueError("n must be >= 1")
    x = input_box.sample(teacher.spec.widths[0], rng.generator(), size=n)
    return Dataset(x, teacher(x), gen_seed=rng.stream_id)


def _check(params: ParamVector, inputs: np.ndarray, outputs: np.ndarray):
    w = params.spec.widths
    if inputs.shape[1] != w[0] or outputs.shape[1] != w[-1]:
        raise DimensionMismatch(
            f"data dims ({inputs.shape[1]}, {outputs.shape[1]}) vs network ({w[0]}, {w[-1]})"
        )


def train_loss(params: ParamVector, dataset: Dataset) -> float:
    """``(1/n) sum_i 1/2 ||y_i - f(x_i; theta)||^2``."""
    _check(params, dataset.inputs, dataset.outputs)
    return loss_from_arrays(params.spec, params.data, dataset.inputs, dataset.outputs)


def test_loss(
    params: ParamVector,
    teacher: Teacher,
    n_test: int = DEFAULT_N_TEST,
    input_box: InputBox = InputBox(),
    rng: SeededRng = SeededRng(0),
) -> float:
    """Monte-Carlo generalization error on a fresh test set from ``rng``."""
    if n_test < 1:
        raise ValueError("n_test must be >= 1")
    x = input_box.sample(teacher.spec.widths[0], rng.generator(), size=n_test)
    y = teacher(x)
    _check(params, x, y)
    r = forward(params, x) - y
    val = 0.5 * float(np.sum(r * r)) / n_test
    if not np.isfinite(val):
        raise NonFiniteLoss("test loss is not finite")
    return val


test_loss.__test__ = False  # keep pytest from collecting it
