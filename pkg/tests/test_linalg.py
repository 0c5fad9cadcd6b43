import numpy as np
import pytest
from hypothesis import given, strategies as st

from interplab.errors import DimensionMismatch, SingularMatrix
from interplab.linalg import (
    SeededRng,
    as_matrix,
    lu_factor,
    matmul,
    random_orthogonal,
    random_regular,
    solve_or_invert,
    stable_hash,
)


def triple_loop(a, b):
    out = np.zeros((len(a), len(b[0])))
    for i in range(len(a)):
        for j in range(len(b[0])):
            s = 0.0
            for k in range(len(b)):
                s += a[i][k] * b[k][j]
            out[i, j] = s
    return out


class TestMatmul:
    def test_identity(self, gen):
        m = gen.standard_normal((2, 2))
        np.testing.assert_array_equal(matmul(np.eye(2), m), m)

    def test_hand_example(self):
        np.testing.assert_array_equal(matmul([[1, 2], [3, 4]], [[0], [1]]), [[2], [4]])

    def test_against_triple_loop(self, gen):
        a, b = gen.standard_normal((5, 7)), gen.standard_normal((7, 3))
        np.testing.assert_allclose(matmul(a, b), triple_loop(a.tolist(), b.tolist()), rtol=0, atol=1e-12)

    @pytest.mark.parametrize("sa,sb", [((2, 3), (2, 3)), ((1, 4), (3, 1)), ((3,), (3, 1))])
    def test_dimension_mismatch(self, sa, sb):
        with pytest.raises(DimensionMismatch):
            matmul(np.ones(sa), np.ones(sb))

    @given(st.integers(1, 5), st.integers(1, 5), st.integers(1, 5), st.integers(1, 5), st.integers(0, 2**32 - 1))
    def test_associative(self, p, q, r, s, seed):
        g = np.random.default_rng(seed)
        a, b, c = g.standard_normal((p, q)), g.standard_normal((q, r)), g.standard_normal((r, s))
        left, right = matmul(matmul(a, b), c), matmul(a, matmul(b, c))
        scale = matmul(matmul(np.abs(a), np.abs(b)), np.abs(c))
        assert np.all(np.abs(left - right) <= 1e-10 * scale + 1e-300)


class TestInverse:
    def test_identity(self):
        np.testing.assert_array_equal(solve_or_invert(np.eye(3)), np.eye(3))

    def test_diagonal(self):
        np.testing.assert_allclose(solve_or_invert([[2, 0], [0, 4]]), [[0.5, 0], [0, 0.25]], rtol=0, atol=1e-15)

    def test_multiply_back(self):
        r = random_regular(4, SeededRng(3))
        assert np.max(np.abs(r @ solve_or_invert(r) - np.eye(4))) <= 1e-9

    @given(st.integers(1, 8), st.floats(0.0, 6.0), st.integers(0, 2**32 - 1))
    def test_conditioned_up_to_1e6(self, n, log_cond, seed):
        g = np.random.default_rng(seed)
        u, v = random_orthogonal(n, g), random_orthogonal(n, g)
        s = np.logspace(0, -log_cond, n) if n > 1 else np.ones(1)
        m = (u * s) @ v.T
        assert np.max(np.abs(m @ solve_or_invert(m) - np.eye(n))) <= 1e-9

    def test_lu_reconstructs(self, gen):
        m = gen.standard_normal((6, 6))
        lu, perm = lu_factor(m)
        low = np.tril(lu, -1) + np.eye(6)
        np.testing.assert_allclose(low @ np.triu(lu), m[perm], atol=1e-13)

    @pytest.mark.parametrize("m", [[[1, 2], [2, 4]], [[0, 0], [0, 0]], [[1, 0, 0], [0, 1e-14, 0], [0, 0, 1]]])
    def test_singular(self, m):
        with pytest.raises(SingularMatrix):
            solve_or_invert(m)

    def test_not_square(self):
        with pytest.raises(DimensionMismatch):
            solve_or_invert(np.ones((2, 3)))

    def test_non_finite_rejected(self):
        with pytest.raises(ValueError):
            as_matrix([[1.0, np.nan]])


class TestRandomRegular:
    def test_scalar(self):
        r = random_regular(1, SeededRng(0), 0.3)
        assert r.shape == (1, 1) and abs(r[0, 0]) >= 0.3

    @pytest.mark.parametrize("seed", range(5))
    def test_singular_values(self, seed):
        r = random_regular(3, SeededRng(seed), 0.1)
        sv = np.linalg.svd(r, compute_uv=False)
        assert np.linalg.det(r) != 0
        assert sv.min() >= 0.1 - 1e-12 and sv.max() <= 1 + 1e-12

    def test_deterministic(self):
        a, b = random_regular(5, SeededRng(9, 4)), random_regular(5, SeededRng(9, 4))
        assert a.tobytes() == b.tobytes()

    @pytest.mark.parametrize("n,ms", [(0, 0.1), (2, 0.0), (2, 1.0)])
    def test_bad_arguments(self, n, ms):
        with pytest.raises(ValueError):
            random_regular(n, SeededRng(0), ms)


class TestSeededRng:
    def test_same_pair_same_stream(self):
        a = SeededRng(5, 7).generator().random(100)
        b = SeededRng(5, 7).generator().random(100)
        assert a.tobytes() == b.tobytes()

    def test_generator_restarts(self):
        rng = SeededRng(1, 2)
        assert rng.generator().random() == rng.generator().random()

    def test_streams_differ(self):
        a = SeededRng(5, 7).generator().random(1000)
        b = SeededRng(5, 8).generator().random(1000)
        assert not np.array_equal(a, b)
        assert abs(np.corrcoef(a, b)[0, 1]) < 0.15

    def test_streams_independent_ks(self):
        from scipy import stats

        a = SeededRng(0, 0).generator().random(5000)
        b = SeededRng(0, 1).generator().random(5000)
        assert stats.ks_2samp(a, b).pvalue > 0.01

    def test_child_is_stable(self):
        assert SeededRng(3, 4).child("x", 1) == SeededRng(3, 4).child("x", 1)
        assert SeededRng(3, 4).child("x", 1) != SeededRng(3, 4).child("x", 2)

    def test_stable_hash_pinned(self):
        # process-independent: must not change across interpreter runs
        assert stable_hash("teacher") == 15274914821884239411
        assert 0 <= stable_hash(1, "a") < 2**64

    @pytest.mark.parametrize("args", [(-1, 0), (0, 2**64)])
    def test_range_checked(self, args):
        with pytest.raises(ValueError):
            SeededRng(*args)
