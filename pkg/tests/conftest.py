import numpy as np
import pytest
from hypothesis import settings

from interplab import InputBox, NetworkSpec, SeededRng, make_teacher, sample_dataset

settings.register_profile("default", deadline=None, max_examples=50)
settings.load_profile("default")


def random_spec(gen, max_depth=4, max_width=6, families=("dlnn", "fcdnn")):
    depth = int(gen.integers(1, max_depth + 1))
    widths = tuple(int(w) for w in gen.integers(1, max_width + 1, size=depth + 1))
    family = families[int(gen.integers(len(families)))]
    act = "identity" if family == "dlnn" else ("tanh", "sigmoid", "softplus")[int(gen.integers(3))]
    return NetworkSpec(widths, act, family)


@pytest.fixture
def gen():
    return np.random.default_rng(12345)


@pytest.fixture
def dlnn_teacher():
    return make_teacher(NetworkSpec((2, 5, 1)), SeededRng(0, 1))


@pytest.fixture
def linear_dataset():
    spec = NetworkSpec((2, 1))
    teacher = make_teacher(spec, SeededRng(7, 1))
    return teacher, sample_dataset(teacher, 20, InputBox(), SeededRng(7, 2))


# acceptance criteria report: one line per criterion in the terminal summary
CRITERIA = {}


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(CRITERIA, key=lambda k: (int(k.rstrip("ab")), k)):
        ok, detail = CRITERIA[key]
        terminalreporter.write_line(f"criterion {key:<3} {'PASS' if ok else 'FAIL'}  {detail}")
