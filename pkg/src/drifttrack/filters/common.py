"""Shared daughter-filter machinery.

Holds the per-filter sufficient-statistic containers, the measurement-term
computation (association and missed-detection pieces), and the posterior
mixture assembly that all three filters share.  Conditioning on a sensor
hypothesis is done once per call by shifting the measurement set by the
hypothesis' drift offset; afterwards everything is standard
linear-Gaussian machinery.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from ..backend import kernels
from ..cardinality import CardinalityDist
from ..gm import GaussianMixture, ReductionConfig, reduce_mixture
from ..models import BirthModel, MotionModel, ObservationModel


@dataclass
class PhdState:
    """First-order filter statistics: the intensity mixture."""

    mixture: GaussianMixture

    def expected_count(self) -> float:
        return self.mixture.mass()


@dataclass
class SoPhdState:
    """Second-order statistics: intensity plus the target-count variance.

    `clamp_count` counts variance-update results that had to be clamped at
    zero (floating-point cancellation diagnostics).
    """

    mixture: GaussianMixture
    variance: float
    clamp_count: int = 0

    def expected_count(self) -> float:
        return self.mixture.mass()


@dataclass
class CphdState:
    """Intensity plus the full cardinality distribution."""

    mixture: GaussianMixture
    card: CardinalityDist

    def expected_count(self) -> float:
        return self.card.mean()


def missed_detection_term(mixture: GaussianMixture, obs: ObservationModel) -> GaussianMixture:
    """Intensity restricted to undetected targets: weights scaled by 1 - p_d."""
    return GaussianMixture(
        mixture.weights * (1.0 - obs.p_d), mixture.means.copy(), mixture.covs.copy(),
        dim=mixture.dim,
    )


def association_term(
    mixture: GaussianMixture, z, obs: ObservationModel, sensor_state
) -> GaussianMixture:
    """Kalman-updated intensity weighted by p_d times the predictive density.

    The returned mixture's mass is the association mass
    integral p_d l(z|x, s) mu(dx).
    """
    z_shifted = obs.shift_measurements(np.atleast_2d(z), sensor_state)
    if mixture.size == 0:
        return GaussianMixture.empty(mixture.dim)
    logq, upd_means, upd_covs = kernels.kalman_terms(
        mixture.weights, mixture.means, mixture.covs, obs.H, obs.R, z_shifted
    )
    w = mixture.weights * obs.p_d * np.exp(logq[0])
    return GaussianMixture(w, upd_means[0], upd_covs)


def predict_mixture(
    mixture: GaussianMixture, motion: MotionModel, birth: BirthModel
) -> GaussianMixture:
    """Survival-thinned, transitioned intensity plus the birth intensity."""
    F, Q = motion.F, motion.Q
    surv_means = mixture.means @ F.T
    surv_covs = F @ mixture.covs @ F.T + Q
    b = birth.intensity
    return GaussianMixture(
        np.concatenate([b.weights, motion.p_s * mixture.weights]),
        np.concatenate([b.means.reshape(-1, F.shape[0]), surv_means]),
        np.concatenate([b.covs.reshape(-1, F.shape[0], F.shape[0]), surv_covs]),
        dim=F.shape[0],
    )


@dataclass
class MeasurementTerms:
    """Per-measurement corrector pieces shared by every filter's update.

    `log_assoc_mass[k]` is log of the association mass
    integral p_d l(z_k|x, s) mu(dx); `miss_mass` is the missed-detection
    mass (1 - p_d) mu(X); `logq`, `upd_means` and `upd_covs` carry the
    per-component Kalman terms used to assemble posterior mixtures.
    """

    Z_shifted: np.ndarray
    logq: np.ndarray
    upd_means: np.ndarray
    upd_covs: np.ndarray
    log_assoc_mass: np.ndarray
    prior_mass: float
    miss_mass: float


def measurement_terms(
    mixture: GaussianMixture, Z, obs: ObservationModel, sensor_state
) -> MeasurementTerms:
    Zs = obs.shift_measurements(np.asarray(Z, dtype=float), sensor_state)
    m = Zs.shape[0]
    n = mixture.size
    logq, upd_means, upd_covs = kernels.kalman_terms(
        mixture.weights, mixture.means, mixture.covs, obs.H, obs.R, Zs
    )
    if n == 0:
        log_assoc = np.full(m, -np.inf)
    else:
        with np.errstate(divide="ignore"):
            logw = np.log(mixture.weights)
        log_pd = math.log(obs.p_d) if obs.p_d > 0 else -math.inf
        log_assoc = log_pd + logsumexp(logw[None, :] + logq, axis=1) if m else np.empty(0)
    mass = mixture.mass()
    return MeasurementTerms(
        Z_shifted=Zs,
        logq=logq,
        upd_means=upd_means,
        upd_covs=upd_covs,
        log_assoc_mass=np.asarray(log_assoc, dtype=float).reshape(m),
        prior_mass=mass,
        miss_mass=(1.0 - obs.p_d) * mass,
    )


def assemble_posterior(
    mixture: GaussianMixture,
    terms: MeasurementTerms,
    obs: ObservationModel,
    miss_scale: float,
    log_z_scales: np.ndarray,
    reduction: ReductionConfig,
) -> GaussianMixture:
    """Posterior intensity: scaled missed-detection part plus one Kalman-
    updated copy of the mixture per measurement, then mixture reduction.

    Sub-threshold components (the vast majority of the m x n association
    grid) are dropped before materializing their moments; the reduction
    step rescales the survivors to the exact posterior mass.
    """
    m = terms.Z_shifted.shape[0]
    n = mixture.size
    d = mixture.dim
    miss_w = mixture.weights * ((1.0 - obs.p_d) * miss_scale)
    if n == 0 or m == 0:
        return reduce_mixture(GaussianMixture(miss_w, mixture.means, mixture.covs, dim=d), reduction)
    with np.errstate(divide="ignore"):
        logw = np.log(mixture.weights)
    log_pd = math.log(obs.p_d) if obs.p_d > 0 else -math.inf
    z_w = np.exp(logw[None, :] + log_pd + terms.logq + log_z_scales[:, None])
    total_mass = float(miss_w.sum() + z_w.sum())
    zi, ci = np.nonzero(z_w > reduction.prune_threshold)
    keep_miss = miss_w > reduction.prune_threshold
    posterior = GaussianMixture(
        np.concatenate([miss_w[keep_miss], z_w[zi, ci]]),
        np.concatenate([mixture.means[keep_miss], terms.upd_means[zi, ci]]),
        np.concatenate([mixture.covs[keep_miss], terms.upd_covs[ci]]),
        dim=d,
    )
    return reduce_mixture(posterior, reduction, target_mass=total_mass)
