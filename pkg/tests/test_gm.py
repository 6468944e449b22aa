import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from drifttrack.gm import (
    GaussianComponent,
    GaussianMixture,
    ReductionConfig,
    eval_gaussian,
    kalman_predict,
    kalman_update,
    reduce_mixture,
)


def random_spd(rng, d, scale=1.0):
    A = rng.standard_normal((d, d))
    return scale * (A @ A.T + d * np.eye(d))


class TestEvalGaussian:
    def test_scalar_at_mean(self):
        assert eval_gaussian([0.0], [0.0], [[1.0]]) == pytest.approx(1 / math.sqrt(2 * math.pi))

    def test_identity_2d(self):
        assert eval_gaussian([0.0, 0.0], [0.0, 0.0], np.eye(2)) == pytest.approx(1 / (2 * math.pi))

    def test_scalar_formula(self):
        # independent scalar formula exp(-1/8)/sqrt(8 pi)
        expected = math.exp(-1.0 / 8.0) / math.sqrt(8.0 * math.pi)
        assert eval_gaussian([1.0], [0.0], [[4.0]]) == pytest.approx(expected, rel=1e-12)

    def test_non_spd_raises(self):
        with pytest.raises(np.linalg.LinAlgError):
            eval_gaussian([0.0, 0.0], [0.0, 0.0], np.array([[1.0, 2.0], [2.0, 1.0]]))

    def test_quadrature_normalization(self):
        # 1-D predictive density integrates to one
        xs = np.linspace(-40, 40, 20001)
        vals = [eval_gaussian([x], [1.3], [[2.7]]) for x in xs]
        assert np.trapezoid(vals, xs) == pytest.approx(1.0, abs=1e-9)


class TestKalmanPredict:
    def test_identity(self):
        c = GaussianComponent(0.7, np.array([1.0, 2.0]), np.eye(2))
        out = kalman_predict(c, np.eye(2), np.zeros((2, 2)))
        assert np.allclose(out.mean, c.mean)
        assert np.allclose(out.cov, c.cov)
        assert out.weight == c.weight

    def test_ncv_mean(self):
        F = np.array([[1.0, 1.0], [0.0, 1.0]])
        c = GaussianComponent(1.0, np.array([0.0, 1.0]), np.eye(2))
        out = kalman_predict(c, F, np.zeros((2, 2)))
        assert np.allclose(out.mean, [1.0, 1.0])

    def test_random_against_elementwise(self):
        rng = np.random.default_rng(3)
        d = 4
        F = rng.standard_normal((d, d))
        Q = random_spd(rng, d, 0.5)
        c = GaussianComponent(2.0, rng.standard_normal(d), random_spd(rng, d))
        out = kalman_predict(c, F, Q)
        mean_ref = np.array([sum(F[i, k] * c.mean[k] for k in range(d)) for i in range(d)])
        cov_ref = np.zeros((d, d))
        for i in range(d):
            for j in range(d):
                cov_ref[i, j] = (
                    sum(F[i, a] * c.cov[a, b] * F[j, b] for a in range(d) for b in range(d))
                    + Q[i, j]
                )
        assert np.allclose(out.mean, mean_ref, rtol=1e-12)
        assert np.allclose(out.cov, 0.5 * (cov_ref + cov_ref.T), rtol=1e-12)


class TestKalmanUpdate:
    def test_uninformative_measurement(self):
        c = GaussianComponent(1.0, np.array([1.0, -1.0]), np.eye(2))
        out, q = kalman_update(c, np.array([50.0, 50.0]), np.eye(2), 1e12 * np.eye(2))
        assert np.allclose(out.mean, c.mean, atol=1e-5)
        assert np.allclose(out.cov, c.cov, atol=1e-5)
        assert q == pytest.approx(eval_gaussian([50.0, 50.0], [1.0, -1.0], 1e12 * np.eye(2) + np.eye(2)))

    def test_equal_precision_fusion(self):
        c = GaussianComponent(1.0, np.array([0.0, 0.0]), np.eye(2))
        z = np.array([2.0, 4.0])
        out, _ = kalman_update(c, z, np.eye(2), np.eye(2))
        assert np.allclose(out.mean, z / 2)

    def test_scalar_conjugate_update(self):
        # hand-computed 1-D Bayes product of two Gaussians
        prior_mean, prior_var = 1.0, 2.0
        z, r = 3.0, 0.5
        c = GaussianComponent(1.0, np.array([prior_mean]), np.array([[prior_var]]))
        out, q = kalman_update(c, np.array([z]), np.eye(1), np.array([[r]]))
        post_var = 1.0 / (1.0 / prior_var + 1.0 / r)
        post_mean = post_var * (prior_mean / prior_var + z / r)
        assert out.mean[0] == pytest.approx(post_mean, rel=1e-12)
        assert out.cov[0, 0] == pytest.approx(post_var, rel=1e-12)
        assert q == pytest.approx(eval_gaussian([z], [prior_mean], [[prior_var + r]]), rel=1e-12)

    def test_posterior_cov_spd(self):
        rng = np.random.default_rng(11)
        for _ in range(50):
            c = GaussianComponent(1.0, rng.standard_normal(4), random_spd(rng, 4))
            H = rng.standard_normal((2, 4))
            R = random_spd(rng, 2, 0.1)
            out, _ = kalman_update(c, rng.standard_normal(2), H, R)
            np.linalg.cholesky(out.cov)  # raises if not SPD


class TestReduceMixture:
    def test_everything_pruned(self):
        mix = GaussianMixture([1e-9, 2e-9], np.zeros((2, 1)), np.ones((2, 1, 1)))
        out = reduce_mixture(mix, ReductionConfig(prune_threshold=1e-5))
        assert out.size == 0
        assert out.mass() == 0.0

    def test_identical_components_merge(self):
        mean = np.array([1.0, 2.0])
        cov = np.diag([2.0, 3.0])
        mix = GaussianMixture([0.4, 0.6], np.stack([mean, mean]), np.stack([cov, cov]))
        out = reduce_mixture(mix, ReductionConfig())
        assert out.size == 1
        assert out.mass() == pytest.approx(1.0, abs=1e-14)
        assert np.allclose(out.means[0], mean)
        assert np.allclose(out.covs[0], cov)

    def test_mass_preserved_random(self):
        rng = np.random.default_rng(5)
        n = 50
        mix = GaussianMixture(
            rng.random(n) * 2,
            rng.standard_normal((n, 2)) * 10,
            np.stack([random_spd(rng, 2, 0.2) for _ in range(n)]),
        )
        out = reduce_mixture(mix, ReductionConfig(prune_threshold=1e-2, max_components=10))
        assert out.mass() == pytest.approx(mix.mass(), rel=1e-12)

    def test_merge_is_moment_preserving(self):
        # merging preserves mean and spread of the merged cluster
        mix = GaussianMixture(
            [0.5, 0.5],
            np.array([[0.0], [1.0]]),
            np.array([[[1.0]], [[1.0]]]),
        )
        out = reduce_mixture(mix, ReductionConfig(merge_distance=4.0))
        assert out.size == 1
        assert out.means[0, 0] == pytest.approx(0.5)
        assert out.covs[0, 0, 0] == pytest.approx(1.25)  # 1 + E[(m - mbar)^2]

    @given(st.integers(1, 30), st.integers(0, 10_000))
    @settings(max_examples=50, deadline=None)
    def test_mass_preservation_property(self, n, seed):
        rng = np.random.default_rng(seed)
        mix = GaussianMixture(
            rng.random(n),
            rng.standard_normal((n, 2)) * 5,
            np.stack([random_spd(rng, 2, 0.3) for _ in range(n)]),
        )
        cfg = ReductionConfig(prune_threshold=1e-4, max_components=8)
        out = reduce_mixture(mix, cfg)
        if out.size:
            assert out.mass() == pytest.approx(mix.mass(), rel=1e-12)
        for P in out.covs:
            np.linalg.cholesky(P)


class TestGaussianComponentInvariants:
    def test_negative_weight_rejected(self):
        with pytest.raises(ValueError):
            GaussianComponent(-0.1, np.zeros(1), np.eye(1))

    def test_non_spd_rejected(self):
        with pytest.raises(ValueError):
            GaussianComponent(1.0, np.zeros(2), np.array([[1.0, 0.0], [0.0, -1.0]]))

    def test_mixture_mass(self):
        mix = GaussianMixture([0.5, 1.5], np.zeros((2, 1)), np.ones((2, 1, 1)))
        assert mix.mass() == 2.0
        assert GaussianMixture.empty(4).mass() == 0.0


class TestPredictiveNormalization2D:
    def test_2d_quadrature(self):
        # 2-D predictive density integrates to one over a wide grid
        c = GaussianComponent(1.0, np.array([0.5, -0.3, 0.0, 0.0]), np.diag([1.2, 0.8, 0.1, 0.1]))
        H = np.zeros((2, 4))
        H[0, 0] = H[1, 1] = 1.0
        R = 0.4 * np.eye(2)
        xs = np.linspace(-12, 12, 241)
        grid = np.stack(np.meshgrid(xs, xs), axis=-1).reshape(-1, 2)
        vals = np.zeros(len(grid))
        S = H @ c.cov @ H.T + R
        for i, z in enumerate(grid):
            vals[i] = eval_gaussian(z, H @ c.mean, S)
        integral = vals.sum() * (xs[1] - xs[0]) ** 2
        assert integral == pytest.approx(1.0, abs=1e-6)
        # and the kalman_update predictive density matches the same Gaussian
        _, q = kalman_update(c, np.array([1.0, 1.0]), H, R)
        assert q == pytest.approx(eval_gaussian([1.0, 1.0], H @ c.mean, S), rel=1e-12)
