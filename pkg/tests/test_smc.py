import math

import numpy as np
import pytest

from drifttrack.cardinality import ClutterModel, PoissonCardinality, Window
from drifttrack.errors import DegenerateFilterError
from drifttrack.filters import PhdFilter
from drifttrack.gm import GaussianMixture
from drifttrack.models import BirthModel, MotionModel, ObservationModel
from drifttrack.smc import (
    ParticleSet,
    SingleClusterSmc,
    SmcConfig,
    ess,
    estimate,
    particle_rng,
    resample_roulette,
    smc_predict,
    smc_update,
)


def make_filter(p_d=0.95, clutter_rate=2.0):
    birth_mix = GaussianMixture(
        [1.0], np.zeros((1, 4)), np.diag([50.0, 50.0, 0.1, 0.1])[None]
    )
    return PhdFilter(
        motion=MotionModel.ncv(0.3, 0.95),
        birth=BirthModel(birth_mix, PoissonCardinality(1.0)),
        obs=ObservationModel.planar(0.3, p_d),
        clutter=ClutterModel(PoissonCardinality(clutter_rate), Window.centered(60.0, 60.0)),
    )


def uniform_set(n, daughter, spread=0.0, rng=None):
    ys = np.zeros((n, 4))
    if spread and rng is not None:
        ys[:, :2] = rng.uniform(-spread, spread, (n, 2))
    thetas = [daughter.initial_state() for _ in range(n)]
    return ParticleSet(ys, np.full(n, 1.0 / n), thetas)


class TestEss:
    def test_uniform(self):
        assert ess(np.full(10, 0.1)) == pytest.approx(10.0)

    def test_single(self):
        assert ess([1.0]) == pytest.approx(1.0)

    def test_arithmetic(self):
        assert ess([0.5, 0.25, 0.25]) == pytest.approx(8.0 / 3.0)

    def test_bounds(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            w = rng.random(20)
            w /= w.sum()
            assert 1.0 - 1e-12 <= ess(w) <= 20.0 + 1e-12


class TestPredict:
    def test_zero_noise_identity_transition(self):
        daughter = make_filter()
        cfg = SmcConfig(
            n_particles=5,
            sensor_noise=np.zeros((4, 4)),
            sensor_transition=np.eye(4),
        )
        ps = uniform_set(5, daughter)
        ps.ys[:, 0] = np.arange(5.0)
        out = smc_predict(ps, daughter, cfg, np.random.default_rng(0))
        assert np.allclose(out.ys, ps.ys)
        assert np.allclose(out.weights, ps.weights)

    def test_ensemble_mean_drift(self):
        daughter = make_filter()
        cfg = SmcConfig(n_particles=4000)
        ps = uniform_set(4000, daughter)
        ps.ys[:, 2] = 1.0  # unit x velocity
        out = smc_predict(ps, daughter, cfg, np.random.default_rng(1))
        # transition moves x by vx; Monte Carlo error ~ 3 sigma / sqrt(N)
        sigma = math.sqrt(cfg.sensor_noise[0, 0])
        assert out.ys[:, 0].mean() == pytest.approx(1.0, abs=3 * sigma / math.sqrt(4000))


class TestUpdate:
    def test_identical_particles_uniform_weights(self):
        daughter = make_filter()
        cfg = SmcConfig(n_particles=6)
        ps = uniform_set(6, daughter)
        ps = smc_predict(ps, daughter, cfg, np.random.default_rng(2))
        ps.ys[:] = 0.0  # force identical hypotheses
        Z = np.array([[1.0, 1.0]])
        out = smc_update(ps, Z, daughter, cfg)
        assert np.allclose(out.weights, 1.0 / 6.0)
        assert abs(out.weights.sum() - 1.0) <= 1e-12

    def test_matching_drift_wins(self):
        # particle whose drift hypothesis matches the measurement offset
        # receives the larger weight
        daughter = make_filter()
        cfg = SmcConfig(n_particles=2)
        ps = uniform_set(2, daughter)
        theta = daughter.predict(daughter.initial_state())
        ps.thetas = [theta, theta]
        ps.ys[0] = [5.0, 0.0, 0.0, 0.0]  # drift hypothesis +5 in x
        ps.ys[1] = [0.0, 0.0, 0.0, 0.0]
        # truth: one target at origin, sensor drift +5: measurement at +5
        Z = np.array([[5.0, 0.0]])
        out = smc_update(ps, Z, daughter, cfg)
        assert out.weights[0] > out.weights[1]

    def test_empty_frame_weight_ratio(self):
        # Z empty under the first-order filter: weight ratio is
        # exp(-p_d (mass_i - mass_j)); identical masses give equal weights
        daughter = make_filter()
        cfg = SmcConfig(n_particles=3)
        ps = uniform_set(3, daughter)
        ps = smc_predict(ps, daughter, cfg, np.random.default_rng(3))
        out = smc_update(ps, np.zeros((0, 2)), daughter, cfg)
        assert np.allclose(out.weights, 1.0 / 3.0, atol=1e-12)

    def test_degenerate_surfaced(self):
        daughter = make_filter(p_d=0.9, clutter_rate=0.0)
        cfg = SmcConfig(n_particles=3)
        ps = uniform_set(3, daughter)
        ps.thetas = [daughter.initial_state() for _ in range(3)]  # empty daughters
        # measurement with zero clutter and zero intensity: zero likelihood
        with pytest.raises(DegenerateFilterError):
            smc_update(ps, np.array([[0.0, 0.0]]), daughter, cfg)


class TestResampling:
    def test_single_heavy_particle(self):
        daughter = make_filter()
        ps = uniform_set(5, daughter)
        ps.weights = np.array([1.0, 0.0, 0.0, 0.0, 0.0])
        ps.ys[0] = [7.0, 0, 0, 0]
        out = resample_roulette(ps, np.random.default_rng(4))
        assert np.allclose(out.ys[:, 0], 7.0)
        assert np.allclose(out.weights, 0.2)

    def test_multiplicities_unbiased(self):
        daughter = make_filter()
        ps = uniform_set(4, daughter)
        ps.weights = np.array([0.4, 0.3, 0.2, 0.1])
        counts = np.zeros(4)
        trials = 3000
        for t in range(trials):
            out = resample_roulette(ps, np.random.default_rng(t))
            # recover picks by matching y values
            for i in range(4):
                counts[i] += np.sum(out.ys[:, 0] == ps.ys[i, 0])
        ps.ys[:, 0] = np.arange(4.0)
        # rerun with distinguishable states
        counts = np.zeros(4)
        for t in range(trials):
            out = resample_roulette(ps, np.random.default_rng(t))
            for i in range(4):
                counts[i] += np.sum(out.ys[:, 0] == float(i))
        freq = counts / (trials * 4)
        assert np.allclose(freq, ps.weights, atol=0.02)

    def test_daughter_states_copied(self):
        daughter = make_filter()
        ps = uniform_set(3, daughter)
        ps.weights = np.array([1.0, 0.0, 0.0])
        ps.thetas[0] = daughter.predict(ps.thetas[0])
        out = resample_roulette(ps, np.random.default_rng(5))
        assert out.thetas[0] is not out.thetas[1]
        assert out.thetas[0].mixture is not out.thetas[1].mixture
        out.thetas[0].mixture.weights[:] = -1.0
        assert out.thetas[1].mixture.weights[0] >= 0


class TestEstimate:
    def test_single_particle(self):
        daughter = make_filter()
        ps = uniform_set(1, daughter)
        ps.ys[0] = [1.0, 2.0, 3.0, 4.0]
        est = estimate(ps)
        assert np.allclose(est.sensor_state, [1.0, 2.0, 3.0, 4.0])

    def test_symmetric_midpoint(self):
        daughter = make_filter()
        ps = uniform_set(2, daughter)
        ps.ys[0] = [2.0, 0, 0, 0]
        ps.ys[1] = [-2.0, 0, 0, 0]
        est = estimate(ps)
        assert np.allclose(est.sensor_state, 0.0)

    def test_weighted_sum_reference(self):
        daughter = make_filter()
        rng = np.random.default_rng(6)
        ps = uniform_set(5, daughter)
        ps.ys[:] = rng.standard_normal((5, 4))
        w = rng.random(5)
        ps.weights = w / w.sum()
        est = estimate(ps)
        ref = sum(ps.weights[i] * ps.ys[i] for i in range(5))
        assert np.allclose(est.sensor_state, ref, rtol=1e-12)


class TestDeterminism:
    def test_identical_seeds_identical_run(self):
        daughter = make_filter()
        cfg = SmcConfig(n_particles=12, resample_fraction=0.9)
        frames = [
            np.array([[0.5, 0.5]]),
            np.array([[1.0, 0.2], [-3.0, 2.0]]),
            np.zeros((0, 2)),
            np.array([[1.5, 0.4]]),
        ]

        def run():
            smc = SingleClusterSmc(daughter, cfg, master_seed=99)
            ps = smc.init_particles()
            outs = []
            for k, Z in enumerate(frames):
                ps, est = smc.step(ps, Z, k)
                outs.append((est.sensor_state.copy(), est.expected_count))
            return outs

        a, b = run(), run()
        for (sa, ca), (sb, cb) in zip(a, b):
            assert np.array_equal(sa, sb)
            assert ca == cb

    def test_particle_rng_streams_differ(self):
        r1 = particle_rng(7, 0, 0).random(3)
        r2 = particle_rng(7, 0, 1).random(3)
        r3 = particle_rng(7, 1, 0).random(3)
        assert not np.allclose(r1, r2)
        assert not np.allclose(r1, r3)
