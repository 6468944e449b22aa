import math

import numpy as np
import pytest

from drifttrack.cardinality import ClutterModel, DiscreteCardinality, PoissonCardinality, Window
from drifttrack.errors import ModelMismatchError
from drifttrack.filters import (
    PhdState,
    association_term,
    missed_detection_term,
    phd_log_likelihood,
    phd_predict,
    phd_update,
)
from drifttrack.gm import GaussianMixture, ReductionConfig
from drifttrack.models import BirthModel, MotionModel, ObservationModel
from drifttrack.oracle import OracleInstance, oracle_likelihood, oracle_posterior_cardinality

from helpers import random_instance

ORIGIN4 = np.zeros(4)


def poisson_clutter(rate=10.0, extent=200.0):
    return ClutterModel(PoissonCardinality(rate), Window.centered(extent, extent))


def simple_mixture(mass=2.0, n=1):
    w = np.full(n, mass / n)
    means = np.zeros((n, 4))
    means[:, 0] = np.arange(n) * 3.0
    covs = np.tile(np.diag([1.0, 1.0, 0.1, 0.1]), (n, 1, 1))
    return GaussianMixture(w, means, covs)


class TestCorrectorPieces:
    def test_missed_detection_scaling(self):
        obs = ObservationModel.planar(0.1, 0.99)
        out = missed_detection_term(simple_mixture(4.0), obs)
        assert out.mass() == pytest.approx(0.04)
        out_all = missed_detection_term(simple_mixture(4.0), ObservationModel.planar(0.1, 1.0))
        assert out_all.mass() == 0.0
        out_none = missed_detection_term(simple_mixture(4.0), ObservationModel.planar(0.1, 0.0))
        assert out_none.mass() == pytest.approx(4.0)

    def test_association_at_predicted_measurement(self):
        # unit innovation covariance, z at the predicted measurement:
        # mass = w * p_d / (2 pi)
        mix = GaussianMixture([2.0], np.zeros((1, 4)), np.diag([0.5, 0.5, 0.1, 0.1])[None])
        obs = ObservationModel.planar(math.sqrt(0.5), 0.9)  # R = 0.5 I, S = I
        out = association_term(mix, np.zeros(2), obs, ORIGIN4)
        assert out.mass() == pytest.approx(2.0 * 0.9 / (2 * math.pi), rel=1e-12)

    def test_association_zero_detection(self):
        mix = simple_mixture()
        obs = ObservationModel.planar(0.3, 0.0)
        out = association_term(mix, np.zeros(2), obs, ORIGIN4)
        assert out.mass() == 0.0

    def test_association_matches_per_component_sum(self):
        rng = np.random.default_rng(8)
        mix = GaussianMixture(
            rng.random(3),
            rng.standard_normal((3, 4)),
            np.tile(np.diag([0.8, 0.6, 0.1, 0.1]), (3, 1, 1)),
        )
        obs = ObservationModel.planar(0.4, 0.7)
        z = np.array([0.3, -0.2])
        out = association_term(mix, z, obs, ORIGIN4)
        from drifttrack.gm import eval_gaussian

        expected = sum(
            w * 0.7 * eval_gaussian(z, m[:2], c[:2, :2] + obs.R)
            for w, m, c in zip(mix.weights, mix.means, mix.covs)
        )
        assert out.mass() == pytest.approx(expected, rel=1e-10)


class TestPredict:
    def test_mass_rule(self):
        birth = BirthModel(simple_mixture(2.0), PoissonCardinality(2.0))
        motion = MotionModel.ncv(0.3, 0.95)
        state = PhdState(simple_mixture(4.0))
        out = phd_predict(state, motion, birth)
        assert out.mixture.mass() == pytest.approx(2.0 + 0.95 * 4.0)

    def test_survival_extremes(self):
        birth = BirthModel(simple_mixture(2.0), PoissonCardinality(2.0))
        state = PhdState(simple_mixture(4.0))
        out0 = phd_predict(state, MotionModel.ncv(0.3, 0.0), birth)
        assert out0.mixture.mass() == pytest.approx(2.0)
        empty_birth = BirthModel(GaussianMixture.empty(4), PoissonCardinality(0.0))
        out1 = phd_predict(state, MotionModel.ncv(0.3, 1.0), empty_birth)
        assert out1.mixture.mass() == pytest.approx(4.0)


class TestUpdate:
    def test_empty_measurement_set(self):
        obs = ObservationModel.planar(0.1, 0.99)
        state = PhdState(simple_mixture(4.0))
        out = phd_update(state, np.zeros((0, 2)), obs, poisson_clutter(), ORIGIN4)
        assert out.mixture.mass() == pytest.approx(0.01 * 4.0, rel=1e-9)

    def test_zero_detection_probability(self):
        obs = ObservationModel.planar(0.1, 0.0)
        state = PhdState(simple_mixture(4.0))
        Z = np.array([[0.0, 0.0], [1.0, 1.0]])
        out = phd_update(state, Z, obs, poisson_clutter(), ORIGIN4)
        assert out.mixture.mass() == pytest.approx(4.0, rel=1e-9)

    def test_non_poisson_clutter_rejected(self):
        clutter = ClutterModel(DiscreteCardinality([0.5, 0.5]), Window.centered(10, 10))
        state = PhdState(simple_mixture())
        with pytest.raises(ModelMismatchError):
            phd_update(state, np.zeros((1, 2)), ObservationModel.planar(0.1, 0.9), clutter, ORIGIN4)

    def test_posterior_mass_bounds(self):
        rng = np.random.default_rng(3)
        obs = ObservationModel.planar(0.3, 0.9)
        clutter = poisson_clutter(2.0, 40.0)
        for _ in range(20):
            mix = GaussianMixture(
                rng.random(3) * 2,
                np.concatenate([rng.uniform(-5, 5, (3, 2)), rng.standard_normal((3, 2)) * 0.1], axis=1),
                np.tile(np.diag([1.0, 1.0, 0.1, 0.1]), (3, 1, 1)),
            )
            state = PhdState(mix)
            m = rng.integers(0, 4)
            Z = rng.uniform(-6, 6, (m, 2))
            out = phd_update(state, Z, obs, clutter, ORIGIN4)
            mass = out.mixture.mass()
            assert mass <= 0.9 * mix.mass() + m + 1e-9
            assert mass >= 0.1 * mix.mass() - 1e-9

    def test_posterior_mass_matches_oracle(self):
        rng = np.random.default_rng(17)
        checked = 0
        for _ in range(90):
            inst = random_instance(rng, prior_kind="poisson", clutter_kind="poisson", n_max=12)
            lam = inst.prior.mean()
            if lam > 1.0:  # keep prior truncation far below tolerance
                continue
            state = PhdState(inst.spatial.scaled(lam))
            out = phd_update(
                state, inst.Z, inst.obs, inst.clutter, inst.sensor_state,
                ReductionConfig(prune_threshold=0.0, max_components=10_000),
            )
            mean, _ = oracle_posterior_cardinality(inst)
            assert out.mixture.mass() == pytest.approx(mean, rel=1e-8, abs=1e-10)
            checked += 1
        assert checked >= 10


class TestLikelihood:
    def test_empty_measurements_value(self):
        obs = ObservationModel.planar(0.1, 0.99)
        state = PhdState(simple_mixture(2.0))
        ll = phd_log_likelihood(state, np.zeros((0, 2)), obs, poisson_clutter(10.0), ORIGIN4)
        assert ll == pytest.approx(-11.98, abs=1e-12)

    def test_clutter_only(self):
        obs = ObservationModel.planar(0.1, 0.99)
        clutter = poisson_clutter(10.0)
        state = PhdState(GaussianMixture.empty(4))
        z = np.array([[3.0, 4.0]])
        ll = phd_log_likelihood(state, z, obs, clutter, ORIGIN4)
        assert ll == pytest.approx(math.log(clutter.intensity()) - 10.0, rel=1e-12)

    def test_permutation_invariance(self):
        rng = np.random.default_rng(5)
        inst = random_instance(rng, prior_kind="poisson", n_meas=4)
        state = PhdState(inst.spatial.scaled(1.1))
        base = phd_log_likelihood(state, inst.Z, inst.obs, poisson_clutter(2.0, 40.0), inst.sensor_state)
        shuf = phd_log_likelihood(
            state, inst.Z[[3, 1, 0, 2]], inst.obs, poisson_clutter(2.0, 40.0), inst.sensor_state
        )
        assert shuf == pytest.approx(base, rel=1e-12)


class TestOracleEquality:
    def test_likelihood_matches_enumeration(self):
        # Poisson priors with negligible tail beyond the oracle support
        rng = np.random.default_rng(101)
        count = 0
        for _ in range(80):
            inst = random_instance(rng, prior_kind="poisson", clutter_kind="poisson", n_max=12)
            lam = inst.prior.mean()
            if lam > 1.0:  # keep truncation far below the comparison tolerance
                continue
            state = PhdState(inst.spatial.scaled(lam))
            ll = phd_log_likelihood(state, inst.Z, inst.obs, inst.clutter, inst.sensor_state)
            ref = oracle_likelihood(inst)
            assert ll == pytest.approx(math.log(ref), rel=1e-10, abs=1e-9)
            count += 1
        assert count >= 10
