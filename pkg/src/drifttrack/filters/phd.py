"""First-order intensity filter (Poisson prediction and clutter).

The update distributes each measurement's unit of evidence between clutter
and the association intensity; the conditional multi-object likelihood is
the product of those per-measurement normalizers over the Poisson
no-detection/no-clutter base term.
"""
from __future__ import annotations

import math

import numpy as np

from ..cardinality import ClutterModel, PoissonCardinality
from ..errors import ModelMismatchError
from ..gm import GaussianMixture, ReductionConfig
from ..models import BirthModel, MotionModel, ObservationModel
from .common import MeasurementTerms, PhdState, assemble_posterior, measurement_terms, predict_mixture


def _require_poisson(clutter: ClutterModel) -> None:
    if not isinstance(clutter.cardinality, PoissonCardinality):
        raise ModelMismatchError(
            "the first-order filter requires a Poisson clutter model; "
            f"got {type(clutter.cardinality).__name__}"
        )


def phd_predict(state: PhdState, motion: MotionModel, birth: BirthModel) -> PhdState:
    return PhdState(predict_mixture(state.mixture, motion, birth))


def phd_update_terms(
    state: PhdState, Z, obs: ObservationModel, clutter: ClutterModel, sensor_state
) -> MeasurementTerms:
    _require_poisson(clutter)
    return measurement_terms(state.mixture, Z, obs, sensor_state)


def phd_update(
    state: PhdState,
    Z,
    obs: ObservationModel,
    clutter: ClutterModel,
    sensor_state,
    reduction: ReductionConfig = ReductionConfig(),
    terms: MeasurementTerms | None = None,
) -> PhdState:
    if terms is None:
        terms = phd_update_terms(state, Z, obs, clutter, sensor_state)
    else:
        _require_poisson(clutter)
    mu_c = clutter.intensity()
    # per-measurement normalizer mu_c(z) + mu^z(X)
    with np.errstate(divide="ignore"):
        log_scales = -np.log(mu_c + np.exp(terms.log_assoc_mass))
    mixture = assemble_posterior(state.mixture, terms, obs, 1.0, log_scales, reduction)
    return PhdState(mixture)


def phd_log_likelihood(
    state: PhdState,
    Z,
    obs: ObservationModel,
    clutter: ClutterModel,
    sensor_state,
    terms: MeasurementTerms | None = None,
) -> float:
    """log of the conditional multi-object likelihood for the sensor state."""
    if terms is None:
        terms = phd_update_terms(state, Z, obs, clutter, sensor_state)
    else:
        _require_poisson(clutter)
    mu_c = clutter.intensity()
    with np.errstate(divide="ignore"):
        per_meas = np.log(mu_c + np.exp(terms.log_assoc_mass))
    return float(per_meas.sum() - clutter.rate - obs.p_d * terms.prior_mass)


class PhdFilter:
    """First-order filter bound to its models, for use under the parent SMC."""

    kind = "phd"

    def __init__(
        self,
        motion: MotionModel,
        birth: BirthModel,
        obs: ObservationModel,
        clutter: ClutterModel,
        reduction: ReductionConfig = ReductionConfig(),
    ):
        _require_poisson(clutter)
        self.motion = motion
        self.birth = birth
        self.obs = obs
        self.clutter = clutter
        self.reduction = reduction

    def initial_state(self, dim: int = 4) -> PhdState:
        return PhdState(GaussianMixture.empty(dim))

    def predict(self, state: PhdState) -> PhdState:
        return phd_predict(state, self.motion, self.birth)

    def update_terms(self, state: PhdState, Z, sensor_state) -> MeasurementTerms:
        return phd_update_terms(state, Z, self.obs, self.clutter, sensor_state)

    def update(self, state: PhdState, Z, sensor_state, terms=None) -> PhdState:
        return phd_update(state, Z, self.obs, self.clutter, sensor_state, self.reduction, terms)

    def log_likelihood(self, state: PhdState, Z, sensor_state, terms=None) -> float:
        return phd_log_likelihood(state, Z, self.obs, self.clutter, sensor_state, terms)
