"""Strong-sample-complexity bounds and teacher-equivalent embeddings.

The bounds are integer formulas:

* generic: ``k <= d_theta - d_tes + 1``
* deep linear students: ``k <= d_teacher + 1``
* fully connected students of equal depth:
  ``k <= sum_l m*_l (m_{l-1} + 1) + 1`` with *student* fan-in ``m_{l-1}``.

The embeddings build explicit student parameters that reproduce the teacher
function exactly, with a known number of freely chosen entries. Those free
entries witness the lower bound on the dimension of the teacher-equivalent
set used by the bounds.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import InputBox, Teacher
from .errors import BoxOverflow, DepthMismatch, SingularMatrix, WidthCondition
from .linalg import SeededRng, random_regular, solve_or_invert
from .models import DomainBox, NetworkSpec, ParamVector, forward, param_count

FREE_LOW, FREE_HIGH = -1.0, 1.0
MIN_SINGULAR = 0.1
N_EQUIV_PROBES = 100


@dataclass(frozen=True)
class BoundReport:
    d_theta: int
    d_tes_lower: int
    k_upper: int
    family: str
    preconditions: tuple = ()

    def __post_init__(self):
        if self.k_upper != self.d_theta - self.d_tes_lower + 1:
            raise ValueError("k_upper must equal d_theta - d_tes_lower + 1")
        if not 1 <= self.k_upper <= self.d_theta + 1:
            raise ValueError(f"k_upper={self.k_upper} outside [1, d_theta + 1]")

    def to_dict(self) -> dict:
        return {
            "family": self.family,
            "d_theta": self.d_theta,
            "d_tes_lower": self.d_tes_lower,
            "k_upper": self.k_upper,
            "preconditions": [{"name": n, "ok": ok} for n, ok in self.preconditions],
        }


def bound_generic(d_theta: int, d_tes: int) -> BoundReport:
    return BoundReport(d_theta, d_tes, d_theta - d_tes + 1, "generic")


def dlnn_preconditions(teacher: NetworkSpec, student: NetworkSpec) -> list[tuple[str, bool]]:
    ts, ss = teacher.widths, student.widths
    lt, ls = teacher.depth, student.depth
    checks = [
        ("teacher is dlnn", teacher.family == "dlnn"),
        ("student is dlnn", student.family == "dlnn"),
        ("L >= L*", ls >= lt),
        ("input widths equal", ss[0] == ts[0]),
        ("output widths equal", ss[-1] == ts[-1]),
    ]
    if ls >= lt:
        for l in range(1, lt):
            checks.append((f"m_{l} >= m*_{l}", ss[l] >= ts[l]))
        for l in range(lt, ls):
            checks.append((f"m_{l} >= m*_{lt - 1}", ss[l] >= ts[lt - 1]))
    return checks


def fcdnn_preconditions(teacher: NetworkSpec, student: NetworkSpec) -> list[tuple[str, bool]]:
    ts, ss = teacher.widths, student.widths
    checks = [
        ("same family", teacher.family == student.family),
        ("same activation", teacher.activation == student.activation),
        ("L == L*", student.depth == teacher.depth),
        ("input widths equal", ss[0] == ts[0]),
        ("output widths equal", ss[-1] == ts[-1]),
    ]
    if student.depth == teacher.depth:
        for l in range(1, student.depth):
            checks.append((f"m_{l} >= m*_{l}", ss[l] >= ts[l]))
    return checks


def _require(checks):
    failed = [name for name, ok in checks if not ok]
    if failed:
        raise WidthCondition(failed)


def bound_dlnn(teacher_spec: NetworkSpec, student_spec: NetworkSpec) -> BoundReport:
    checks = dlnn_preconditions(teacher_spec, student_spec)
    _require(checks)
    d_star = param_count(teacher_spec)
    d_theta = param_count(student_spec)
    return BoundReport(d_theta, d_theta - d_star, d_star + 1, "dlnn", tuple(checks))


def fcdnn_teacher_count(teacher_spec: NetworkSpec, student_spec: NetworkSpec) -> int:
    """``sum_l m*_l (m_{l-1} + 1)``: entries pinned by the teacher."""
    ts, ss = teacher_spec.widths, student_spec.widths
    return sum(ts[l] * (ss[l - 1] + 1) for l in range(1, len(ts)))


def bound_fcdnn(teacher_spec: NetworkSpec, student_spec: NetworkSpec) -> BoundReport:
    checks = fcdnn_preconditions(teacher_spec, student_spec)
    if student_spec.depth != teacher_spec.depth:
        raise DepthMismatch(f"student depth {student_spec.depth} != teacher depth {teacher_spec.depth}")
    _require(checks)
    pinned = fcdnn_teacher_count(teacher_spec, student_spec)
    d_theta = param_count(student_spec)
    return BoundReport(d_theta, d_theta - pinned, pinned + 1, "fcdnn", tuple(checks))


def bound_for(teacher_spec: NetworkSpec, student_spec: NetworkSpec) -> BoundReport:
    if student_spec.family == "dlnn":
        return bound_dlnn(teacher_spec, student_spec)
    return bound_fcdnn(teacher_spec, student_spec)


@dataclass(frozen=True, eq=False)
class EmbeddingWitness:
    student_params: ParamVector
    free_dimension: int
    regular_blocks: list = field(default_factory=list, repr=False)
    residual: float = float("nan")


def equivalence_residual(params: ParamVector, teacher: Teacher, rng: SeededRng,
                         n_inputs: int = N_EQUIV_PROBES, input_box: InputBox = InputBox()) -> float:
    """Max norm of student-minus-teacher output over random inputs."""
    x = input_box.sample(teacher.spec.widths[0], rng.generator(), size=n_inputs)
    diff = forward(params, x) - teacher(x)
    return float(np.max(np.linalg.norm(diff, axis=1)))


def _affine_coefficients(layers):
    """Linear part and offset of a composition of affine layers."""
    lin = np.eye(layers[0][0].shape[1])
    off = np.zeros(layers[0][0].shape[1])
    for w, b in layers:
        lin = w @ lin
        off = w @ off + b
    return lin, off


def _finish(spec, layers, box, free, regular, teacher, rng):
    params = ParamVector.from_layers(spec, layers)
    if not box.contains(params.data):
        worst = float(np.max(np.abs(params.data)))
        raise BoxOverflow(f"embedded parameter magnitude {worst:.3g} exceeds B={box.half_width}")
    res = equivalence_residual(params, teacher, rng.child("equivalence-check"))
    return EmbeddingWitness(params, free, regular, res)


def embed_dlnn(teacher: Teacher, student_spec: NetworkSpec, rng: SeededRng,
               box: DomainBox = DomainBox(), min_singular: float = MIN_SINGULAR) -> EmbeddingWitness:
    """Place a deep linear teacher inside a wider/deeper linear student.

    Layout per student layer ``l`` (teacher depth ``Lt``, ``k = m*_{Lt-1}``):

    * ``l < Lt``: teacher block top-left, free blocks elsewhere;
    * ``Lt <= l < L``: a random regular ``k x k`` block top-left, free
      blocks elsewhere including the whole bias;
    * ``l = L``: ``[A, M]`` and bias ``b`` where ``M`` is free and ``A``,
      ``b`` are fixed by requiring the student to equal the teacher.

    ``A`` starts from ``w*_Lt P^{-1}`` with ``P`` the product of the regular
    blocks. The free top-right blocks leak input-dependent terms into the
    teacher path; since every map is affine these are collected in closed
    form and cancelled: the linear part through a correction of ``A`` (needs
    the top hidden block to have full column rank), the constant part
    through ``b``.
    """
    tspec = teacher.spec
    _require(dlnn_preconditions(tspec, student_spec))
    gen = rng.child("free-blocks").generator()
    ts, ss = tspec.widths, student_spec.widths
    lt, ls = tspec.depth, student_spec.depth
    tlayers = teacher.params.layers()
    k = ts[lt - 1]
    top = [ss[0]] + [ts[l] if l < lt else k for l in range(1, ls)]

    layers, regular = [], []
    for l in range(1, ls):
        w = gen.uniform(FREE_LOW, FREE_HIGH, size=(ss[l], ss[l - 1]))
        b = gen.uniform(FREE_LOW, FREE_HIGH, size=ss[l])
        if l < lt:
            tw, tb = tlayers[l - 1]
            w[: top[l], : top[l - 1]] = tw
            b[: top[l]] = tb
        else:
            r = random_regular(k, rng.child("regular", l), min_singular)
            w[:k, :k] = r
            regular.append(r)
        layers.append((w, b))

    w_last_t, b_last_t = tlayers[-1]
    p = np.eye(k)
    for r in regular:
        p = r @ p
    a = w_last_t @ solve_or_invert(p)
    m_free = gen.uniform(FREE_LOW, FREE_HIGH, size=(ss[-1], ss[-2] - k))

    if layers:
        z_lin, z_off = _affine_coefficients(layers)
    else:
        z_lin, z_off = np.eye(ss[0]), np.zeros(ss[0])
    h_lin, h_off = (_affine_coefficients(tlayers[:-1]) if lt > 1
                    else (np.eye(ss[0]), np.zeros(ss[0])))
    top_lin, top_off = z_lin[:k], z_off[:k]
    red_lin, red_off = z_lin[k:], z_off[k:]

    leak = a @ top_lin + m_free @ red_lin - w_last_t @ h_lin
    if np.any(leak != 0.0):
        sv = np.linalg.svd(top_lin, compute_uv=False)
        if top_lin.shape[0] < top_lin.shape[1] or sv[-1] <= 1e-10 * max(sv[0], 1e-300):
            raise SingularMatrix(
                "teacher path loses input rank; the linear leak of the free blocks cannot be cancelled"
            )
        a = a - leak @ np.linalg.pinv(top_lin)
    b_last = b_last_t - (a @ top_off - w_last_t @ h_off + m_free @ red_off)
    layers.append((np.hstack([a, m_free]), b_last))

    free = param_count(student_spec) - param_count(tspec)
    return _finish(student_spec, layers, box, free, regular, teacher, rng)


def embed_fcdnn(teacher: Teacher, student_spec: NetworkSpec, rng: SeededRng,
                box: DomainBox = DomainBox()) -> EmbeddingWitness:
    """Block-triangular embedding of an equal-depth teacher.

    Teacher units keep their exact pre-activations because the blocks that
    would feed redundant units into them are zero; redundant units are free
    and the output layer ignores them.
    """
    tspec = teacher.spec
    if student_spec.depth != tspec.depth:
        raise DepthMismatch(f"student depth {student_spec.depth} != teacher depth {tspec.depth}")
    _require(fcdnn_preconditions(tspec, student_spec))
    gen = rng.child("free-blocks").generator()
    ts, ss = tspec.widths, student_spec.widths
    layers = []
    for l, (tw, tb) in enumerate(teacher.params.layers(), start=1):
        last = l == student_spec.depth
        w = np.zeros((ss[l], ss[l - 1]))
        b = np.zeros(ss[l])
        w[: ts[l], : ts[l - 1]] = tw
        b[: ts[l]] = tb
        if not last:
            w[ts[l]:, :] = gen.uniform(FREE_LOW, FREE_HIGH, size=(ss[l] - ts[l], ss[l - 1]))
            b[ts[l]:] = gen.uniform(FREE_LOW, FREE_HIGH, size=ss[l] - ts[l])
        layers.append((w, b))
    free = param_count(student_spec) - fcdnn_teacher_count(tspec, student_spec)
    return _finish(student_spec, layers, box, free, [], teacher, rng)


def embed(teacher: Teacher, student_spec: NetworkSpec, rng: SeededRng,
          box: DomainBox = DomainBox()) -> EmbeddingWitness:
    if student_spec.family == "dlnn":
        return embed_dlnn(teacher, student_spec, rng, box)
    return embed_fcdnn(teacher, student_spec, rng, box)


def sample_tes_point(teacher: Teacher, student_spec: NetworkSpec, rng: SeededRng,
                     box: DomainBox = DomainBox()) -> ParamVector:
    """One teacher-equivalent student parameter with fresh free blocks."""
    return embed(teacher, student_spec, rng, box).student_params
