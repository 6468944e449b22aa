"""Parent particle filter over the sensor state.

Each particle carries a sensor-state hypothesis, a weight, and a daughter
filter state conditioned on that hypothesis.  A step is: propagate every
hypothesis through the sensor transition plus proposal noise and run the
daughter prediction; update every daughter with the (hypothesis-shifted)
measurements and accumulate the multi-object log-likelihood into the
particle's log-weight (multiplicative Bayes weighting; weight assignment
and accumulation coincide right after a resample); resample with the
roulette method when the effective sample size drops below the configured
fraction.

Per-particle randomness is drawn from counter-based seed streams keyed by
(master seed, step, particle), so results are independent of execution
order.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .assoc import GatingConfig, extract_targets, l2_log_likelihood
from .errors import DegenerateFilterError
from .models import ncv_process_noise, ncv_transition


@dataclass
class ParentParticle:
    """Sensor-state hypothesis with its weight and daughter statistics."""

    y: np.ndarray
    w: float
    theta: object


@dataclass
class SmcConfig:
    """Parent-filter settings."""

    n_particles: int = 300
    resample_fraction: float = 0.5
    sensor_noise: np.ndarray = field(default_factory=lambda: ncv_process_noise(0.2))
    sensor_transition: np.ndarray = field(default_factory=ncv_transition)
    likelihood_kind: str = "l1"  # l1 = filter-specific closed form, l2 = association sum
    systematic_resampling: bool = False
    gating: GatingConfig = field(default_factory=GatingConfig)

    def __post_init__(self):
        if self.n_particles < 1:
            raise ValueError("particle count must be at least one")
        if not 0.0 <= self.resample_fraction <= 1.0:
            raise ValueError("resample fraction must lie in [0, 1]")
        if self.likelihood_kind not in ("l1", "l2"):
            raise ValueError("likelihood kind must be 'l1' or 'l2'")


@dataclass
class ParticleSet:
    """Weighted particle collection (weights kept normalized)."""

    ys: np.ndarray  # (N, 4)
    weights: np.ndarray  # (N,), sums to one
    thetas: list

    @property
    def n(self) -> int:
        return self.ys.shape[0]

    @property
    def particles(self) -> list[ParentParticle]:
        return [
            ParentParticle(self.ys[i].copy(), float(self.weights[i]), self.thetas[i])
            for i in range(self.n)
        ]


@dataclass
class Estimate:
    """Weighted-mean outputs of one step."""

    sensor_state: np.ndarray
    expected_count: float
    mean_components: float


def particle_rng(master_seed: int, *stream) -> np.random.Generator:
    """Deterministic per-stream generator (counter-based splitting)."""
    return np.random.default_rng(np.random.SeedSequence((master_seed, *stream)))


def ess(weights) -> float:
    """Effective sample size 1 / sum(w^2) of normalized weights."""
    w = np.asarray(weights, dtype=float)
    return float(1.0 / np.sum(w * w))


def smc_predict(particles: ParticleSet, daughter, cfg: SmcConfig, rng) -> ParticleSet:
    """Sensor transition plus proposal noise, and daughter prediction."""
    noise = rng.multivariate_normal(np.zeros(4), cfg.sensor_noise, size=particles.n)
    ys = particles.ys @ cfg.sensor_transition.T + noise
    thetas = [daughter.predict(theta) for theta in particles.thetas]
    return ParticleSet(ys, particles.weights.copy(), thetas)


def _log_likelihood(daughter, theta, Z, y, cfg: SmcConfig, first_frame: bool, terms):
    if cfg.likelihood_kind == "l1":
        return daughter.log_likelihood(theta, Z, y, terms)
    targets = extract_targets(theta.mixture)
    return l2_log_likelihood(
        targets, Z, daughter.obs, daughter.clutter, y, cfg.gating, first_frame
    )


def smc_update(
    particles: ParticleSet,
    Z,
    daughter,
    cfg: SmcConfig,
    first_frame: bool = False,
    timer: Callable[[str, float], None] | None = None,
) -> ParticleSet:
    """Daughter updates plus multi-object-likelihood weighting.

    The likelihood is evaluated on the predicted daughter state.  Raises
    DegenerateFilterError when every particle receives zero likelihood.
    `timer` (stage name, seconds) receives per-stage wall-clock when set.
    """
    import time

    log_lik = np.empty(particles.n)
    thetas = []
    t_update = 0.0
    t_lik = 0.0
    for i in range(particles.n):
        y = particles.ys[i]
        t0 = time.perf_counter()
        terms = daughter.update_terms(particles.thetas[i], Z, y)
        thetas.append(daughter.update(particles.thetas[i], Z, y, terms))
        t1 = time.perf_counter()
        log_lik[i] = _log_likelihood(
            daughter, particles.thetas[i], Z, y, cfg, first_frame, terms
        )
        t_update += t1 - t0
        t_lik += time.perf_counter() - t1
    if timer is not None:
        timer("update", t_update)
        timer("likelihood", t_lik)
    with np.errstate(divide="ignore"):
        logw = np.log(particles.weights) + log_lik
    shift = np.max(logw)
    if not np.isfinite(shift):
        raise DegenerateFilterError("all parent particles received zero likelihood")
    w = np.exp(logw - shift)
    w /= w.sum()
    return ParticleSet(particles.ys.copy(), w, thetas)


def resample_roulette(particles: ParticleSet, rng) -> ParticleSet:
    """Multinomial (roulette-wheel) resampling; weights reset to 1/N.

    Daughter states are copied by value so no two particles alias.
    """
    n = particles.n
    picks = _roulette_indices(particles.weights, rng, n)
    return _resample_from(particles, picks)


def resample_systematic(particles: ParticleSet, rng) -> ParticleSet:
    """Systematic resampling alternative (single uniform offset)."""
    n = particles.n
    positions = (rng.random() + np.arange(n)) / n
    picks = np.searchsorted(np.cumsum(particles.weights), positions)
    picks = np.minimum(picks, n - 1)
    return _resample_from(particles, picks)


def _roulette_indices(weights, rng, n):
    cdf = np.cumsum(weights)
    cdf[-1] = 1.0
    return np.searchsorted(cdf, rng.random(n))


def _copy_theta(theta):
    kwargs = {"mixture": theta.mixture.copy()}
    if hasattr(theta, "card"):
        card = theta.card
        kwargs["card"] = replace(card, rho=card.rho.copy())
    return replace(theta, **kwargs)


def _resample_from(particles: ParticleSet, picks) -> ParticleSet:
    n = len(picks)
    ys = particles.ys[picks].copy()
    thetas = [_copy_theta(particles.thetas[int(i)]) for i in picks]
    weights = np.full(n, 1.0 / n)
    return ParticleSet(ys, weights, thetas)


def estimate(particles: ParticleSet) -> Estimate:
    """Weighted means over particles: sensor state and expected count."""
    sensor = particles.weights @ particles.ys
    count = float(
        sum(w * t.expected_count() for w, t in zip(particles.weights, particles.thetas))
    )
    comps = float(
        sum(w * t.mixture.size for w, t in zip(particles.weights, particles.thetas))
    )
    return Estimate(sensor, count, comps)


class SingleClusterSmc:
    """Full per-step orchestration bound to a daughter filter."""

    def __init__(self, daughter, cfg: SmcConfig, master_seed: int = 0):
        self.daughter = daughter
        self.cfg = cfg
        self.master_seed = master_seed

    def init_particles(self, sensor_state=None) -> ParticleSet:
        y0 = np.zeros(4) if sensor_state is None else np.asarray(sensor_state, dtype=float)
        n = self.cfg.n_particles
        ys = np.tile(y0, (n, 1))
        thetas = [self.daughter.initial_state() for _ in range(n)]
        return ParticleSet(ys, np.full(n, 1.0 / n), thetas)

    def step(
        self,
        particles: ParticleSet,
        Z,
        step_index: int,
        timer: Callable[[str, float], None] | None = None,
    ) -> tuple[ParticleSet, Estimate]:
        import time

        rng_pred = particle_rng(self.master_seed, step_index, 0)
        t0 = time.perf_counter()
        particles = smc_predict(particles, self.daughter, self.cfg, rng_pred)
        if timer is not None:
            timer("predict", time.perf_counter() - t0)
        particles = smc_update(
            particles, Z, self.daughter, self.cfg, first_frame=(step_index == 0), timer=timer
        )
        est = estimate(particles)
        if ess(particles.weights) <= self.cfg.resample_fraction * particles.n:
            rng_res = particle_rng(self.master_seed, step_index, 1)
            if self.cfg.systematic_resampling:
                particles = resample_systematic(particles, rng_res)
            else:
                particles = resample_roulette(particles, rng_res)
        return particles, est
