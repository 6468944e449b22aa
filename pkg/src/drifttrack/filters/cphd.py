"""Cardinalized intensity filter (i.i.d.-cluster prediction and clutter).

Propagates the intensity mixture together with the full cardinality
distribution on 0..n_max.  The update weights come from the standard
cardinality-sum terms

    Upsilon^d[Z](n) = sum_j n!(m-j)!/(n-j-d)! rho_c(m-j)
                      (1-p_d)^(n-j-d) e_j({mu^z(X)/(mass s_c(z))}),

inner-producted against the predicted cardinality distribution; the
conditional multi-object likelihood is <Upsilon^0, rho> times the spatial
clutter product.  The heavy (n, j, z) sums run in the kernel backend.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from ..backend import kernels
from ..cardinality import (
    CardinalityDist,
    ClutterModel,
    DiscreteCardinality,
    PoissonCardinality,
    truncate_to_dist,
)
from ..errors import DegenerateLikelihoodError, ModelMismatchError
from ..gm import GaussianMixture, ReductionConfig
from ..models import BirthModel, MotionModel, ObservationModel
from .common import (
    CphdState,
    MeasurementTerms,
    assemble_posterior,
    measurement_terms,
    predict_mixture,
)

DEFAULT_N_MAX = 64


def _require_cphd_clutter(clutter: ClutterModel) -> None:
    if not isinstance(clutter.cardinality, (PoissonCardinality, DiscreteCardinality)):
        raise ModelMismatchError(
            "the cardinalized filter requires Poisson or discrete clutter; "
            f"got {type(clutter.cardinality).__name__}"
        )


def _log_clutter_pmf(clutter: ClutterModel, m: int) -> np.ndarray:
    card = clutter.cardinality
    return np.array([card.log_pmf(k) for k in range(m + 1)])


def predicted_cardinality(
    card: CardinalityDist, p_s: float, birth_card: CardinalityDist
) -> CardinalityDist:
    """Binomial survivor thinning convolved with the birth cardinality.

    With uniform survival the thinned-count pmf is
    S(j) = sum_{l>=j} C(l, j) p_s^j (1-p_s)^(l-j) rho(l).
    """
    n_max = card.n_max
    rho = card.rho
    if p_s >= 1.0:
        surv = rho.copy()
    elif p_s <= 0.0:
        surv = np.zeros(n_max + 1)
        surv[0] = 1.0
    else:
        ns = np.arange(n_max + 1, dtype=float)
        log_binom = (
            gammaln(ns[None, :] + 1.0)
            - gammaln(ns[:, None] + 1.0)
            - gammaln(ns[None, :] - ns[:, None] + 1.0)
        )
        thin = np.exp(
            log_binom + ns[:, None] * math.log(p_s) + (ns[None, :] - ns[:, None]) * math.log1p(-p_s)
        )
        thin[ns[:, None] > ns[None, :]] = 0.0
        surv = thin @ rho
    rho_pred = np.convolve(birth_card.rho, surv)[: n_max + 1]
    return CardinalityDist(rho_pred)


def cphd_predict(
    state: CphdState, motion: MotionModel, birth: BirthModel
) -> CphdState:
    mixture = predict_mixture(state.mixture, motion, birth)
    birth_card = truncate_to_dist(birth.cardinality, state.card.n_max)
    card = predicted_cardinality(state.card, motion.p_s, birth_card)
    return CphdState(mixture, card)


@dataclass
class CphdCorrectors:
    """Cardinality-sum corrector terms of one update (log domain)."""

    meas: MeasurementTerms
    log_sc: float
    log_v: np.ndarray
    log_e_full: np.ndarray
    log_e_without: np.ndarray
    log_ups0_n: np.ndarray  # log Upsilon^0[Z](n) over n
    log_inner0: float  # log <Upsilon^0[Z], rho>
    log_inner1: float  # log <Upsilon^1[Z], rho>
    log_inner1_without: np.ndarray  # per measurement, log <Upsilon^1[Z\{z}], rho>
    l1_phi: float
    l1_z: np.ndarray
    log_l1_z: np.ndarray  # log-domain per-measurement scales
    log_likelihood: float


def cphd_correctors(
    state: CphdState, Z, obs: ObservationModel, clutter: ClutterModel, sensor_state
) -> CphdCorrectors:
    _require_cphd_clutter(clutter)
    meas = measurement_terms(state.mixture, Z, obs, sensor_state)
    m = meas.Z_shifted.shape[0]
    mass = meas.prior_mass
    log_sc = math.log(clutter.spatial_density)
    log_pmf_c = _log_clutter_pmf(clutter, m)
    lg = gammaln(np.arange(m + 2, dtype=float))
    # combined per-j factor log[rho_c(m-j) (m-j)! e_j]
    phibar = 1.0 - obs.p_d
    log_phibar = math.log(phibar) if phibar > 0 else -np.inf

    if mass <= 0.0:
        log_v = np.full(m, -np.inf)
    else:
        log_v = meas.log_assoc_mass - math.log(mass) - log_sc
    log_e_full = kernels.log_esf(log_v)
    log_e_without = kernels.log_esf_without_each(log_v)

    ks = np.arange(m + 1)
    log_c_full = log_pmf_c[m - ks] + lg[m - ks + 1] + log_e_full
    if m > 0:
        ks1 = np.arange(m)
        log_c_without = log_pmf_c[m - 1 - ks1][None, :] + lg[m - ks1][None, :] + log_e_without
    else:
        log_c_without = np.zeros((0, 0))

    with np.errstate(divide="ignore"):
        log_rho = np.log(state.card.rho)
    log_ups0_n, log_inner0, log_inner1, log_inner1_without = kernels.cphd_sums(
        log_rho, log_c_full, log_c_without, log_phibar
    )
    if not np.isfinite(log_inner0):
        raise DegenerateLikelihoodError("cardinalized update normalizer collapsed to zero")

    if mass <= 0.0:
        l1_phi = 0.0
        l1_z = np.zeros(m)
        log_l1_z = np.full(m, -np.inf)
    else:
        log_mass = math.log(mass)
        l1_phi = math.exp(log_inner1 - log_inner0 - log_mass)
        log_l1_z = np.asarray(log_inner1_without) - log_inner0 - log_mass - log_sc
        with np.errstate(over="ignore"):
            l1_z = np.exp(log_l1_z)
    return CphdCorrectors(
        meas=meas,
        log_sc=log_sc,
        log_v=log_v,
        log_e_full=log_e_full,
        log_e_without=log_e_without,
        log_ups0_n=log_ups0_n,
        log_inner0=float(log_inner0),
        log_inner1=float(log_inner1),
        log_inner1_without=np.asarray(log_inner1_without, dtype=float),
        l1_phi=l1_phi,
        l1_z=l1_z,
        log_l1_z=log_l1_z,
        log_likelihood=float(log_inner0 + m * log_sc),
    )


def cphd_update(
    state: CphdState,
    Z,
    obs: ObservationModel,
    clutter: ClutterModel,
    sensor_state,
    reduction: ReductionConfig = ReductionConfig(),
    terms: CphdCorrectors | None = None,
) -> CphdState:
    if terms is None:
        terms = cphd_correctors(state, Z, obs, clutter, sensor_state)
    mixture = assemble_posterior(
        state.mixture, terms.meas, obs, terms.l1_phi, terms.log_l1_z, reduction
    )
    # rho_k(n) proportional to Upsilon^0(n) rho(n)
    with np.errstate(divide="ignore"):
        log_post = terms.log_ups0_n + np.log(state.card.rho)
    shift = np.max(log_post)
    if not np.isfinite(shift):
        raise DegenerateLikelihoodError("posterior cardinality distribution has no mass")
    rho_post = np.exp(log_post - shift)
    card = CardinalityDist(rho_post)
    # keep the two representations coupled: intensity mass == E[N]
    target_mass = card.mean()
    mass_now = mixture.mass()
    if mass_now > 0 and target_mass > 0:
        mixture = mixture.scaled(target_mass / mass_now)
    return CphdState(mixture, card)


def cphd_log_likelihood(
    state: CphdState,
    Z,
    obs: ObservationModel,
    clutter: ClutterModel,
    sensor_state,
    terms: CphdCorrectors | None = None,
) -> float:
    if terms is None:
        terms = cphd_correctors(state, Z, obs, clutter, sensor_state)
    return terms.log_likelihood


class CphdFilter:
    """Cardinalized filter bound to its models, for use under the parent SMC."""

    kind = "cphd"

    def __init__(
        self,
        motion: MotionModel,
        birth: BirthModel,
        obs: ObservationModel,
        clutter: ClutterModel,
        reduction: ReductionConfig = ReductionConfig(),
        n_max: int = DEFAULT_N_MAX,
    ):
        _require_cphd_clutter(clutter)
        self.motion = motion
        self.birth = birth
        self.obs = obs
        self.clutter = clutter
        self.reduction = reduction
        self.n_max = n_max

    def initial_state(self, dim: int = 4) -> CphdState:
        rho = np.zeros(self.n_max + 1)
        rho[0] = 1.0
        return CphdState(GaussianMixture.empty(dim), CardinalityDist(rho))

    def predict(self, state: CphdState) -> CphdState:
        return cphd_predict(state, self.motion, self.birth)

    def update_terms(self, state: CphdState, Z, sensor_state) -> CphdCorrectors:
        return cphd_correctors(state, Z, self.obs, self.clutter, sensor_state)

    def update(self, state: CphdState, Z, sensor_state, terms=None) -> CphdState:
        return cphd_update(state, Z, self.obs, self.clutter, sensor_state, self.reduction, terms)

    def log_likelihood(self, state: CphdState, Z, sensor_state, terms=None) -> float:
        return cphd_log_likelihood(state, Z, self.obs, self.clutter, sensor_state, terms)
