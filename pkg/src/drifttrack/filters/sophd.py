"""Second-order intensity filter (Panjer prediction, Poisson/Panjer clutter).

Propagates the intensity mixture together with the variance of the target
count.  The update correctors are built from the derivatives of the
predicted-cardinality generating function evaluated at 1 - p_d,

    A_r = sum_n rho(n) n!/(n-r)! (1-p_d)^(n-r),

which for a Panjer(alpha, beta) prior close to
(alpha)_r / beta^r * (1 + p_d/beta)^(-alpha-r) and for the Poisson limit to
mass^r exp(-p_d mass).  All combinatorial sums run in signed log domain
(the binomial branch has alternating Pochhammer signs).

Convention note: every quantity here is mass-normalized (per-measurement
values mu^z(X)/(mass s_c(z)), missed fraction 1 - p_d), which makes the
Poisson limit reduce exactly to the first-order filter and matches the
enumeration oracle; the resolved sign/exponent convention of the
likelihood (detection factor 1 + p_d/beta with a plus sign, clutter factor
exponent -(alpha_c + |Z| - j)) was calibrated against the oracle once and
is frozen here (see `drifttrack oracle-calibrate`).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln, logsumexp

from ..backend import kernels
from ..cardinality import ClutterModel, PanjerCardinality, PoissonCardinality, panjer_from_moments
from ..errors import DegenerateLikelihoodError, ModelMismatchError
from ..gm import GaussianMixture, ReductionConfig
from ..models import BirthModel, MotionModel, ObservationModel
from .common import (
    MeasurementTerms,
    SoPhdState,
    assemble_posterior,
    measurement_terms,
    predict_mixture,
)


def _require_panjer_family(clutter: ClutterModel) -> None:
    if not isinstance(clutter.cardinality, (PoissonCardinality, PanjerCardinality)):
        raise ModelMismatchError(
            "the second-order filter requires Poisson or Panjer clutter; "
            f"got {type(clutter.cardinality).__name__}"
        )


def log_pgf_derivatives(mass: float, variance: float, p_d: float, r_max: int):
    """(log|A_r|, sign(A_r)) for r = 0..r_max.

    A_r is the r-th derivative of the predicted-count generating function
    at 1 - p_d.  The Poisson branch (variance == mass within the corridor)
    uses the exact limit expression.
    """
    params = panjer_from_moments(mass, variance)
    log_abs = np.full(r_max + 1, -np.inf)
    sign = np.zeros(r_max + 1)
    if params.is_poisson:
        lam = mass
        if lam == 0.0:
            log_abs[0], sign[0] = 0.0, 1.0
            return log_abs, sign
        base = -p_d * lam
        for r in range(r_max + 1):
            log_abs[r] = base + r * math.log(lam)
            sign[r] = 1.0
        return log_abs, sign
    a, b = params.alpha, params.beta
    f_det = 1.0 + p_d / b
    if f_det <= 0.0:
        raise ValueError("degenerate detection factor for the given Panjer parameters")
    log_f = math.log(f_det)
    log_abs_b = math.log(abs(b))
    cur_log, cur_sign = 0.0, 1.0  # running (alpha)_r / beta^r
    for r in range(r_max + 1):
        if r > 0:
            factor = a + (r - 1)
            if factor == 0.0 or cur_sign == 0.0:
                cur_sign = 0.0
                cur_log = -np.inf
            else:
                cur_log += math.log(abs(factor)) - log_abs_b
                if (factor < 0) != (b < 0):
                    cur_sign = -cur_sign
        if cur_sign == 0.0:
            continue
        log_abs[r] = cur_log + (-a - r) * log_f
        sign[r] = cur_sign
    return log_abs, sign


def log_clutter_weights(clutter: ClutterModel, m: int) -> np.ndarray:
    """log[rho_c(k) k!] for k = 0..m."""
    card = clutter.cardinality
    out = np.empty(m + 1)
    for k in range(m + 1):
        out[k] = card.log_pmf(k) + gammaln(k + 1)
    return out


def _signed_lse(log_terms, signs):
    val, sgn = logsumexp(log_terms, b=signs, return_sign=True)
    return float(val), float(sgn)


def _signed_lse_rows(log_terms: np.ndarray, signs: np.ndarray):
    """Row-wise signed log-sum-exp without scipy call overhead.

    Entries with zero sign or -inf log are ignored.  Returns (log abs,
    sign) arrays over rows; empty rows give (-inf, 0).
    """
    logs = np.where(signs != 0.0, log_terms, -np.inf)
    shift = np.max(logs, axis=1)
    safe = np.where(np.isfinite(shift), shift, 0.0)
    total = np.einsum("rj,rj->r", signs, np.exp(logs - safe[:, None]))
    out_sign = np.sign(total)
    with np.errstate(divide="ignore"):
        out_log = np.where(
            (out_sign != 0.0) & np.isfinite(shift), np.log(np.abs(total)) + shift, -np.inf
        )
    return out_log, out_sign


@dataclass
class SoPhdCorrectors:
    """Corrector terms of one second-order update.

    The Y sums are stored in the mass-normalized convention (signed log
    domain); `l1_*` and `l2_*` are the linear-domain corrector ratios used
    by the intensity and variance updates.
    """

    meas: MeasurementTerms
    log_sc: float
    log_v: np.ndarray  # per-measurement values mu^z(X)/(mass s_c(z)), log
    log_e_full: np.ndarray
    log_e_without: np.ndarray
    log_a: np.ndarray
    sign_a: np.ndarray
    log_cl: np.ndarray
    log_y0: float
    sign_y0: float
    log_y1: float
    log_y1_without: np.ndarray
    log_y2: float
    log_y2_without: np.ndarray
    l1_phi: float
    l1_z: np.ndarray
    log_l1_z: np.ndarray  # log-domain per-measurement scales (sign in l1_z)
    l2_phi: float
    l2_z: np.ndarray
    log_likelihood: float
    count_mean: float
    count_second_factorial: float

    def l2_ne(self, i: int, j: int) -> float:
        """Pair corrector Y_2(Z minus {z_i, z_j}) / Y_0(Z) ratio, zero on the
        diagonal (computed on demand; the aggregate update uses the exact
        symmetric-function identity instead of enumerating pairs)."""
        if i == j:
            return 0.0
        keep = [k for k in range(self.log_v.size) if k not in (i, j)]
        log_e = kernels.log_esf(self.log_v[keep])
        m2 = len(keep)
        mass = self.meas.prior_mass
        logs, signs = [], []
        for jj in range(m2 + 1):
            if not np.isfinite(self.log_cl[m2 - jj]) or self.sign_a[jj + 2] == 0.0:
                continue
            logs.append(self.log_a[jj + 2] + self.log_cl[m2 - jj] + log_e[jj])
            signs.append(self.sign_a[jj + 2])
        if not logs:
            return 0.0
        val, sgn = _signed_lse(np.array(logs), np.array(signs))
        return sgn * math.exp(val - self.log_y0 - 2.0 * math.log(mass) - 2.0 * self.log_sc)


def _y_sum(log_a, sign_a, log_cl, log_e, u: int):
    """Signed log of sum_j A_{j+u} rho_c(m'-j)(m'-j)! e_j over one subset."""
    m_sub = log_e.size - 1
    logs, signs = [], []
    for j in range(m_sub + 1):
        if sign_a[j + u] == 0.0:
            continue
        t = log_a[j + u] + log_cl[m_sub - j] + log_e[j]
        if not np.isfinite(t):
            continue
        logs.append(t)
        signs.append(sign_a[j + u])
    if not logs:
        return -np.inf, 0.0
    return _signed_lse(np.array(logs), np.array(signs))


def sophd_correctors(
    state: SoPhdState, Z, obs: ObservationModel, clutter: ClutterModel, sensor_state
) -> SoPhdCorrectors:
    """All corrector sums of one update step (shared by update/likelihood)."""
    _require_panjer_family(clutter)
    meas = measurement_terms(state.mixture, Z, obs, sensor_state)
    m = meas.Z_shifted.shape[0]
    mass = meas.prior_mass
    log_sc = math.log(clutter.spatial_density)
    log_cl = log_clutter_weights(clutter, m)
    phibar = 1.0 - obs.p_d

    if mass <= 0.0:
        # No predicted targets: every measurement is clutter.
        loglik = log_cl[m] + m * log_sc
        if not np.isfinite(loglik):
            raise DegenerateLikelihoodError("zero likelihood for an empty prior")
        zeros = np.zeros(m)
        return SoPhdCorrectors(
            meas=meas,
            log_sc=log_sc,
            log_v=np.full(m, -np.inf),
            log_e_full=kernels.log_esf(np.full(m, -np.inf)),
            log_e_without=np.full((m, max(m, 0)), -np.inf),
            log_a=np.full(m + 3, -np.inf),
            sign_a=np.zeros(m + 3),
            log_cl=log_cl,
            log_y0=0.0,
            sign_y0=1.0,
            log_y1=-np.inf,
            log_y1_without=np.full(m, -np.inf),
            log_y2=-np.inf,
            log_y2_without=np.full(m, -np.inf),
            l1_phi=0.0,
            l1_z=zeros,
            log_l1_z=np.full(m, -np.inf),
            l2_phi=0.0,
            l2_z=zeros,
            log_likelihood=loglik,
            count_mean=0.0,
            count_second_factorial=0.0,
        )

    log_a, sign_a = log_pgf_derivatives(mass, state.variance, obs.p_d, m + 2)
    log_v = meas.log_assoc_mass - math.log(mass) - log_sc
    log_e_full = kernels.log_esf(log_v)
    log_e_without = kernels.log_esf_without_each(log_v)

    # per-j weights rho_c(m-j)(m-j)! e_j over the full set
    rev_cl = log_cl[::-1]
    log_base = rev_cl + log_e_full  # (m+1,)
    full_rows = np.stack([log_a[u : u + m + 1] + log_base for u in range(3)])
    full_signs = np.stack([sign_a[u : u + m + 1] for u in range(3)])
    (log_y0, log_y1, log_y2), (sign_y0, sign_y1, sign_y2) = _signed_lse_rows(
        full_rows, full_signs
    )
    if sign_y0 <= 0.0 or not np.isfinite(log_y0):
        raise DegenerateLikelihoodError("second-order corrector normalizer Y_0 is not positive")
    if m > 0:
        rev_cl1 = log_cl[m - 1 :: -1]  # rho_c((m-1)-j)((m-1)-j)!
        base_without = rev_cl1[None, :] + log_e_without  # (m, m)
        log_y1_without, sign_y1_without = _signed_lse_rows(
            log_a[1 : m + 1][None, :] + base_without,
            np.broadcast_to(sign_a[1 : m + 1], (m, m)),
        )
        log_y2_without, sign_y2_without = _signed_lse_rows(
            log_a[2 : m + 2][None, :] + base_without,
            np.broadcast_to(sign_a[2 : m + 2], (m, m)),
        )
    else:
        log_y1_without = np.zeros(0)
        log_y2_without = np.zeros(0)
        sign_y1_without = np.zeros(0)
        sign_y2_without = np.zeros(0)

    log_mass = math.log(mass)
    log_l1_z = log_y1_without - log_y0 - log_mass - log_sc
    l1_phi = sign_y1 * math.exp(log_y1 - log_y0 - log_mass)
    with np.errstate(over="ignore"):
        # linear views may overflow for extreme outlier measurements whose
        # association mass underflows; the update consumes the log form
        l1_z = sign_y1_without * np.exp(log_l1_z)
        l2_phi = sign_y2 * math.exp(min(log_y2 - log_y0 - 2.0 * log_mass, 709.0))
        l2_z = sign_y2_without * np.exp(log_y2_without - log_y0 - 2.0 * log_mass - log_sc)

    # Posterior count moments through the exact symmetric-function
    # identities sum_z v_z e_j(V\{z}) = (j+1) e_{j+1}(V) and
    # sum_{z!=z'} v_z v_z' e_j(V\{z,z'}) = (j+2)(j+1) e_{j+2}(V):
    #   E[N]        = [phibar A_{j+1} + j A_j] weighted by cl e_j / Y_0
    #   E[N(N-1)]   = [phibar^2 A_{j+2} + 2 phibar j A_{j+1} + j(j-1) A_j] ...
    log_phibar = math.log(phibar) if phibar > 0 else -np.inf
    js = np.arange(m + 1, dtype=float)
    with np.errstate(divide="ignore"):
        log_j = np.log(js)
        log_2j = np.log(2.0 * js)
        log_jj1 = np.log(js * np.maximum(js - 1.0, 0.0))
    mean_rows = np.concatenate(
        [log_base + log_phibar + log_a[1 : m + 2], log_base + log_j + log_a[: m + 1]]
    )[None, :]
    mean_signs = np.concatenate([sign_a[1 : m + 2], sign_a[: m + 1]])[None, :]
    lv, sv = _signed_lse_rows(mean_rows, mean_signs)
    count_mean = float(sv[0]) * math.exp(float(lv[0]) - log_y0) if sv[0] != 0.0 else 0.0
    second_rows = np.concatenate(
        [
            log_base + 2.0 * log_phibar + log_a[2 : m + 3],
            log_base + log_2j + log_phibar + log_a[1 : m + 2],
            log_base + log_jj1 + log_a[: m + 1],
        ]
    )[None, :]
    second_signs = np.concatenate(
        [sign_a[2 : m + 3], sign_a[1 : m + 2], sign_a[: m + 1]]
    )[None, :]
    lv, sv = _signed_lse_rows(second_rows, second_signs)
    count_second = float(sv[0]) * math.exp(float(lv[0]) - log_y0) if sv[0] != 0.0 else 0.0

    return SoPhdCorrectors(
        meas=meas,
        log_sc=log_sc,
        log_v=log_v,
        log_e_full=log_e_full,
        log_e_without=log_e_without,
        log_a=log_a,
        sign_a=sign_a,
        log_cl=log_cl,
        log_y0=log_y0,
        sign_y0=sign_y0,
        log_y1=log_y1,
        log_y1_without=log_y1_without,
        log_y2=log_y2,
        log_y2_without=log_y2_without,
        l1_phi=l1_phi,
        l1_z=l1_z,
        log_l1_z=np.where(sign_y1_without > 0, log_l1_z, -np.inf),
        l2_phi=l2_phi,
        l2_z=l2_z,
        log_likelihood=float(log_y0 + m * log_sc),
        count_mean=count_mean,
        count_second_factorial=count_second,
    )


def sophd_predict(state: SoPhdState, motion: MotionModel, birth: BirthModel) -> SoPhdState:
    """Intensity prediction plus the closed-form count-variance recursion
    (uniform survival probability)."""
    mass = state.mixture.mass()
    var = (
        birth.variance
        + motion.p_s**2 * state.variance
        + motion.p_s * (1.0 - motion.p_s) * mass
    )
    return SoPhdState(predict_mixture(state.mixture, motion, birth), var, state.clamp_count)


def sophd_update(
    state: SoPhdState,
    Z,
    obs: ObservationModel,
    clutter: ClutterModel,
    sensor_state,
    reduction: ReductionConfig = ReductionConfig(),
    terms: SoPhdCorrectors | None = None,
) -> SoPhdState:
    if terms is None:
        terms = sophd_correctors(state, Z, obs, clutter, sensor_state)
    mixture = assemble_posterior(
        state.mixture, terms.meas, obs, terms.l1_phi, terms.log_l1_z, reduction
    )
    mass_post = mixture.mass()
    variance = terms.count_second_factorial + mass_post - mass_post**2
    clamp_count = state.clamp_count
    if variance < 0.0:
        variance = 0.0
        clamp_count += 1
    return SoPhdState(mixture, variance, clamp_count)


def sophd_log_likelihood(
    state: SoPhdState,
    Z,
    obs: ObservationModel,
    clutter: ClutterModel,
    sensor_state,
    terms: SoPhdCorrectors | None = None,
) -> float:
    if terms is None:
        terms = sophd_correctors(state, Z, obs, clutter, sensor_state)
    return terms.log_likelihood


class SoPhdFilter:
    """Second-order filter bound to its models, for use under the parent SMC."""

    kind = "sophd"

    def __init__(
        self,
        motion: MotionModel,
        birth: BirthModel,
        obs: ObservationModel,
        clutter: ClutterModel,
        reduction: ReductionConfig = ReductionConfig(),
    ):
        _require_panjer_family(clutter)
        self.motion = motion
        self.birth = birth
        self.obs = obs
        self.clutter = clutter
        self.reduction = reduction

    def initial_state(self, dim: int = 4) -> SoPhdState:
        return SoPhdState(GaussianMixture.empty(dim), 0.0)

    def predict(self, state: SoPhdState) -> SoPhdState:
        return sophd_predict(state, self.motion, self.birth)

    def update_terms(self, state: SoPhdState, Z, sensor_state) -> SoPhdCorrectors:
        return sophd_correctors(state, Z, self.obs, self.clutter, sensor_state)

    def update(self, state: SoPhdState, Z, sensor_state, terms=None) -> SoPhdState:
        return sophd_update(state, Z, self.obs, self.clutter, sensor_state, self.reduction, terms)

    def log_likelihood(self, state: SoPhdState, Z, sensor_state, terms=None) -> float:
        return sophd_log_likelihood(state, Z, self.obs, self.clutter, sensor_state, terms)
