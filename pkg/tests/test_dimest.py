import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from interplab.data import make_teacher
from interplab.dimest import PointCloud, estimate_tes_dimension, knn_indices, lpca_estimate
from interplab.errors import TooFewPoints
from interplab.linalg import SeededRng, random_orthogonal
from interplab.models import NetworkSpec
from interplab.samplers import SamplerConfig
from interplab.theory import embed_fcdnn, sample_tes_point


def subspace_cloud(d, ambient=10, n=1000, seed=0):
    g = np.random.default_rng(seed)
    basis = random_orthogonal(ambient, g)[:, :d]
    return g.uniform(-1, 1, (n, d)) @ basis.T + g.standard_normal(ambient)


class TestLpca:
    @pytest.mark.parametrize("d", [1, 2, 3, 5])
    def test_subspace_recovery(self, d):
        est = lpca_estimate(PointCloud(subspace_cloud(d)), 50, 0.05)
        assert est.global_estimate == d
        assert np.all(est.local_estimates == d)

    def test_identical_points(self):
        est = lpca_estimate(PointCloud(np.ones((20, 4))), 5)
        assert est.global_estimate == 0.0 and est.degenerate == 20

    def test_full_cube(self):
        pts = np.random.default_rng(1).uniform(-1, 1, (600, 4))
        est = lpca_estimate(PointCloud(pts), 200)
        assert np.all(est.local_estimates == 4)

    @given(st.integers(0, 2**32 - 1), st.floats(0.01, 100.0))
    def test_rigid_and_scale_invariance(self, seed, scale):
        g = np.random.default_rng(seed)
        pts = g.standard_normal((80, 3)) * [1.0, 0.3, 0.02]
        base = lpca_estimate(PointCloud(pts), 15)
        q = random_orthogonal(3, g)
        moved = lpca_estimate(PointCloud(scale * (pts @ q.T) + g.uniform(-5, 5, 3)), 15)
        np.testing.assert_array_equal(base.local_estimates, moved.local_estimates)

    def test_bounds(self):
        est = lpca_estimate(PointCloud(np.random.default_rng(2).standard_normal((50, 6))), 10)
        assert 0 <= est.global_estimate <= 6
        assert est.local_estimates.min() >= 0 and est.local_estimates.max() <= 6

    def test_default_k(self):
        assert lpca_estimate(PointCloud(subspace_cloud(2, n=60))).k_neighbors == 59
        assert lpca_estimate(PointCloud(subspace_cloud(2, n=300))).k_neighbors == 100

    def test_noise_floor(self):
        g = np.random.default_rng(3)
        pts = np.zeros((200, 3))
        pts[:, 0] = g.uniform(-1, 1, 200)
        pts[:, 1:] = 1e-3 * g.standard_normal((200, 2))
        plain = lpca_estimate(PointCloud(pts), 50, 1e-7)
        floored = lpca_estimate(PointCloud(pts), 50, 1e-7, noise_floor=1e-5)
        assert plain.global_estimate == 3 and floored.global_estimate == 1
        all_noise = lpca_estimate(PointCloud(pts[:, 1:]), 50, noise_floor=1e-5)
        assert all_noise.global_estimate == 0 and all_noise.degenerate == 200

    @pytest.mark.parametrize("kwargs", [dict(k_neighbors=1), dict(fo_alpha=0.0), dict(fo_alpha=1.0)])
    def test_bad_arguments(self, kwargs):
        with pytest.raises(ValueError):
            lpca_estimate(PointCloud(np.eye(5)), **{"k_neighbors": 3, **kwargs})

    def test_too_few_points(self):
        with pytest.raises(TooFewPoints):
            lpca_estimate(PointCloud(np.eye(5)), 5)
        with pytest.raises(TooFewPoints):
            PointCloud(np.ones((1, 3)))

    def test_json_report(self):
        est = lpca_estimate(PointCloud(subspace_cloud(2, n=100)), 20)
        rec = json.loads(est.to_json())
        assert rec["global_estimate"] == 2.0 and rec["k"] == 20 and rec["alpha"] == 0.05
        assert rec["histogram"] == {"2": 100}


class TestKnn:
    def test_brute_force(self):
        pts = np.random.default_rng(4).standard_normal((300, 5))
        got = knn_indices(pts, 7, block=64)
        d2 = ((pts[:, None] - pts[None]) ** 2).sum(-1)
        np.fill_diagonal(d2, np.inf)
        np.testing.assert_array_equal(got, np.argsort(d2, axis=1, kind="stable")[:, :7])

    def test_ties_by_index(self):
        pts = np.array([[0.0], [1.0], [-1.0], [2.0]])
        np.testing.assert_array_equal(knn_indices(pts, 2)[0], [1, 2])


class TestPointCloud:
    def test_csv_round_trip(self):
        cloud = PointCloud(np.random.default_rng(5).standard_normal((10, 4)), "x")
        back = PointCloud.from_csv(cloud.to_csv())
        assert back.points.tobytes() == cloud.points.tobytes()

    def test_non_finite(self):
        with pytest.raises(ValueError):
            PointCloud([[0.0, np.nan], [1.0, 1.0]])


class TestTesDimension:
    def test_constructed_chart(self):
        t = make_teacher(NetworkSpec((2, 2, 1), "tanh", "fcdnn"), SeededRng(0))
        student = NetworkSpec((2, 4, 1), "tanh", "fcdnn")
        free = embed_fcdnn(t, student, SeededRng(0)).free_dimension
        cloud = np.array([sample_tes_point(t, student, SeededRng(s, 3)).data for s in range(500)])
        est = lpca_estimate(PointCloud(cloud), 100)
        assert free - 1 <= est.global_estimate <= free + 1

    def test_too_few_repeats(self):
        t = make_teacher(NetworkSpec((2, 1)), SeededRng(0))
        with pytest.raises(TooFewPoints):
            estimate_tes_dimension(t, NetworkSpec((2, 1)), SamplerConfig(), 100, 10, SeededRng(0), k_neighbors=10)

    def test_linear_student_collapses(self):
        spec = NetworkSpec((2, 1))
        t = make_teacher(spec, SeededRng(0))
        est = estimate_tes_dimension(t, spec, SamplerConfig(epsilon=1e-2), 1000, 100, SeededRng(1),
                                     k_neighbors=50, floor_factor=6.0)
        assert est.global_estimate <= 0.5
        assert est.epsilon == 1e-2 and est.noise_floor == 6e-2
        assert json.loads(est.to_json())["epsilon"] == 1e-2
