import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import stats

from interplab.data import (
    DEFAULT_N_TEST,
    Dataset,
    InputBox,
    Teacher,
    make_teacher,
    sample_dataset,
    test_loss as mc_test_loss,
    train_loss,
)
from interplab.errors import DimensionMismatch
from interplab.linalg import SeededRng
from interplab.models import NetworkSpec, ParamVector, forward, param_count, xavier_uniform
from interplab.theory import embed_fcdnn


def closed_form_linear_loss(dw, db):
    # x ~ U[-1,1]^m: E[(dw.x + db)^2] / 2 = (sum dw^2 / 3 + db^2) / 2
    return 0.5 * (np.sum(dw * dw) / 3.0 + db * db)


class TestTeacher:
    def test_xavier_limits(self):
        t = make_teacher(NetworkSpec((2, 5, 1)), SeededRng(0))
        (w1, b1), (w2, b2) = t.params.layers()
        assert np.all(np.abs(w1) <= np.sqrt(6 / 7))
        assert np.all(np.abs(w2) <= np.sqrt(6 / 6))
        assert not b1.any() and not b2.any()

    def test_deterministic(self):
        spec = NetworkSpec((3, 4, 2), "tanh", "fcdnn")
        a, b = make_teacher(spec, SeededRng(11, 2)), make_teacher(spec, SeededRng(11, 2))
        assert a.params.data.tobytes() == b.params.data.tobytes()

    def test_xavier_uniform_ks(self):
        spec = NetworkSpec((2, 5, 1))
        draws = xavier_uniform(spec, SeededRng(3).generator(), size=10_000)
        w1 = draws[:, :10].reshape(-1)  # 10^5 layer-1 weights
        limit = np.sqrt(6 / 7)
        assert stats.kstest(w1, stats.uniform(-limit, 2 * limit).cdf).pvalue > 0.01

    def test_spec_mismatch(self):
        with pytest.raises(DimensionMismatch):
            Teacher(NetworkSpec((2, 1)), ParamVector(NetworkSpec((1, 1)), [0.0, 0.0]))


class TestDataset:
    def test_single_sample(self, dlnn_teacher):
        ds = sample_dataset(dlnn_teacher, 1, InputBox(), SeededRng(1))
        assert ds.n == 1
        assert ds.outputs.tobytes() == dlnn_teacher(ds.inputs).tobytes()

    def test_constant_teacher(self):
        spec = NetworkSpec((2, 3, 2), "tanh", "fcdnn")
        data = np.zeros(param_count(spec))
        data[-2:] = [1.25, -4.0]
        t = Teacher(spec, ParamVector(spec, data))
        ds = sample_dataset(t, 50, InputBox(), SeededRng(2))
        np.testing.assert_array_equal(ds.outputs, np.tile([1.25, -4.0], (50, 1)))

    def test_input_mean(self, dlnn_teacher):
        ds = sample_dataset(dlnn_teacher, 100_000, InputBox(), SeededRng(5))
        assert np.all(np.abs(ds.inputs.mean(axis=0)) <= 0.02)
        assert ds.inputs.min() >= -1 and ds.inputs.max() <= 1

    @given(st.integers(1, 40), st.integers(0, 2**32 - 1))
    def test_noiseless(self, n, seed):
        t = make_teacher(NetworkSpec((3, 4, 2), "sigmoid", "fcdnn"), SeededRng(seed, 0))
        ds = sample_dataset(t, n, InputBox(-2.0, 3.0), SeededRng(seed, 1))
        assert ds.outputs.tobytes() == t(ds.inputs).tobytes()

    def test_csv_round_trip(self, dlnn_teacher):
        ds = sample_dataset(dlnn_teacher, 7, InputBox(), SeededRng(8))
        text = ds.to_csv()
        assert text.splitlines()[0] == "x_0,x_1,y_0"
        back = Dataset.from_csv(text)
        assert back.inputs.tobytes() == ds.inputs.tobytes()
        assert back.outputs.tobytes() == ds.outputs.tobytes()

    def test_shape_checks(self):
        with pytest.raises(DimensionMismatch):
            Dataset(np.zeros((3, 2)), np.zeros((2, 1)))
        with pytest.raises(ValueError):
            sample_dataset(make_teacher(NetworkSpec((1, 1)), SeededRng(0)), 0, InputBox(), SeededRng(0))

    def test_bad_box(self):
        with pytest.raises(ValueError):
            InputBox(1.0, -1.0)


class TestLosses:
    def test_teacher_params_zero(self, dlnn_teacher):
        ds = sample_dataset(dlnn_teacher, 30, InputBox(), SeededRng(3))
        assert train_loss(dlnn_teacher.params, ds) == 0.0

    def test_hand_example(self):
        assert train_loss(ParamVector(NetworkSpec((1, 1)), [0.0, 0.0]), Dataset([[1.0]], [[2.0]])) == 2.0

    def test_naive_resummation(self, gen, dlnn_teacher):
        ds = sample_dataset(dlnn_teacher, 25, InputBox(), SeededRng(4))
        p = ParamVector(NetworkSpec((2, 10, 1)), gen.standard_normal(41))
        naive = 0.0
        for x, y in zip(ds.inputs, ds.outputs):
            r = y - forward(p, x)
            naive += 0.5 * float(r @ r)
        assert train_loss(p, ds) == pytest.approx(naive / ds.n, rel=1e-12)

    def test_zero_iff_interpolating(self, linear_dataset):
        teacher, ds = linear_dataset
        bumped = teacher.params.data.copy()
        bumped[0] += 1e-9
        assert train_loss(teacher.params, ds) == 0.0
        assert train_loss(teacher.params.with_data(bumped), ds) > 0.0

    def test_dims_checked(self, dlnn_teacher):
        ds = sample_dataset(dlnn_teacher, 3, InputBox(), SeededRng(3))
        with pytest.raises(DimensionMismatch):
            train_loss(ParamVector(NetworkSpec((3, 1)), np.zeros(4)), ds)

    def test_embedded_student_zero_test_loss(self):
        t = make_teacher(NetworkSpec((2, 3, 1), "tanh", "fcdnn"), SeededRng(1))
        w = embed_fcdnn(t, NetworkSpec((2, 10, 1), "tanh", "fcdnn"), SeededRng(2))
        assert mc_test_loss(w.student_params, t) <= 1e-16

    def test_default_size_and_determinism(self, dlnn_teacher):
        p = ParamVector(NetworkSpec((2, 5, 1)), np.zeros(21))
        assert DEFAULT_N_TEST == 2000
        a = mc_test_loss(p, dlnn_teacher, rng=SeededRng(1, 9))
        assert a == mc_test_loss(p, dlnn_teacher, rng=SeededRng(1, 9))
        assert a != mc_test_loss(p, dlnn_teacher, rng=SeededRng(1, 10))

    @pytest.mark.parametrize("seed", range(5))
    def test_linear_closed_form(self, seed):
        spec = NetworkSpec((3, 1))
        g = np.random.default_rng(seed)
        teacher = Teacher(spec, ParamVector(spec, g.uniform(-1, 1, 4)))
        student = ParamVector(spec, g.uniform(-1, 1, 4))
        rng = SeededRng(seed, 77)
        est = mc_test_loss(student, teacher, 2000, InputBox(), rng)
        x = InputBox().sample(3, rng.generator(), size=2000)
        per = 0.5 * (forward(student, x) - teacher(x))[:, 0] ** 2
        se = per.std(ddof=1) / np.sqrt(per.size)
        delta = student.data - teacher.params.data
        assert abs(est - closed_form_linear_loss(delta[:3], delta[3])) <= 3 * se

    def test_concentration(self):
        spec = NetworkSpec((2, 1))
        bad = 0
        for trial in range(100):
            g = np.random.default_rng(trial)
            teacher = Teacher(spec, ParamVector(spec, g.uniform(-1, 1, 3)))
            student = ParamVector(spec, g.uniform(-1, 1, 3))
            rng = SeededRng(trial, 1)
            x = InputBox().sample(2, rng.generator(), size=4000)
            per = 0.5 * (forward(student, x) - teacher(x))[:, 0] ** 2
            se = per[:2000].std(ddof=1) / np.sqrt(2000)
            a = mc_test_loss(student, teacher, 2000, InputBox(), rng)
            b = mc_test_loss(student, teacher, 4000, InputBox(), rng)
            bad += abs(a - b) > 5 * se
        assert bad == 0
