"""Gaussian-mixture numerical backbone.

Component algebra, linear-Gaussian predict/update, and mixture reduction
(prune / moment-preserving merge / cap).  Mixtures are stored as weight,
mean and covariance arrays; `GaussianComponent` offers a per-component
view for callers that want one.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

_LOG_2PI = math.log(2.0 * math.pi)
_SYM_TOL = 1e-12


def _symmetrize(cov: np.ndarray) -> np.ndarray:
    # Cheap drift control after every update.
    return 0.5 * (cov + cov.swapaxes(-1, -2))


def _check_spd(cov: np.ndarray, what: str) -> None:
    sym_err = np.max(np.abs(cov - cov.T))
    scale = max(np.max(np.abs(cov)), 1.0)
    if sym_err > _SYM_TOL * scale * 10:
        raise ValueError(f"{what} covariance is not symmetric")
    try:
        np.linalg.cholesky(cov)
    except np.linalg.LinAlgError as exc:
        raise ValueError(f"{what} covariance is not positive definite") from exc


@dataclass(frozen=True)
class GaussianComponent:
    """One weighted Gaussian: nonnegative mass, mean vector, SPD covariance."""

    weight: float
    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "mean", np.asarray(self.mean, dtype=float))
        object.__setattr__(self, "cov", _symmetrize(np.asarray(self.cov, dtype=float)))
        if self.weight < 0:
            raise ValueError("component weight must be nonnegative")
        if self.cov.shape != (self.mean.size, self.mean.size):
            raise ValueError("covariance shape does not match mean dimension")
        _check_spd(self.cov, "component")

    @property
    def dim(self) -> int:
        return self.mean.size


class GaussianMixture:
    """Weighted Gaussian components representing an intensity measure.

    The total weight is the measure's mass (the expected target count for
    PHD-style intensities); the empty mixture is the zero measure.
    """

    def __init__(self, weights, means, covs, dim: int | None = None):
        self.weights = np.atleast_1d(np.asarray(weights, dtype=float))
        self.means = np.asarray(means, dtype=float)
        self.covs = np.asarray(covs, dtype=float)
        if self.weights.size == 0:
            d = 0 if dim is None else dim
            self.means = self.means.reshape(0, d)
            self.covs = self.covs.reshape(0, d, d)
        else:
            self.means = self.means.reshape(self.weights.size, -1)
            d = self.means.shape[1]
            self.covs = self.covs.reshape(self.weights.size, d, d)
        if np.any(self.weights < 0):
            raise ValueError("mixture weights must be nonnegative")

    @classmethod
    def empty(cls, dim: int) -> "GaussianMixture":
        return cls(np.empty(0), np.empty((0, dim)), np.empty((0, dim, dim)), dim=dim)

    @classmethod
    def from_components(cls, components) -> "GaussianMixture":
        components = list(components)
        if not components:
            raise ValueError("use GaussianMixture.empty for a zero measure of known dimension")
        return cls(
            np.array([c.weight for c in components]),
            np.stack([c.mean for c in components]),
            np.stack([c.cov for c in components]),
        )

    @property
    def size(self) -> int:
        return self.weights.size

    @property
    def dim(self) -> int:
        return self.means.shape[1]

    @property
    def components(self) -> list[GaussianComponent]:
        return [
            GaussianComponent(float(w), m, P)
            for w, m, P in zip(self.weights, self.means, self.covs)
        ]

    def mass(self) -> float:
        return float(self.weights.sum())

    def scaled(self, factor: float) -> "GaussianMixture":
        return GaussianMixture(self.weights * factor, self.means.copy(), self.covs.copy())

    def copy(self) -> "GaussianMixture":
        return GaussianMixture(self.weights.copy(), self.means.copy(), self.covs.copy())


@dataclass(frozen=True)
class ReductionConfig:
    """Mixture housekeeping thresholds (typical GM-PHD settings)."""

    prune_threshold: float = 1e-5
    merge_distance: float = 4.0  # squared Mahalanobis
    max_components: int = 200

    def __post_init__(self):
        if self.prune_threshold < 0:
            raise ValueError("prune threshold must be nonnegative")
        if self.max_components < 1:
            raise ValueError("component cap must be at least one")


def log_eval_gaussian(x, mean, cov) -> float:
    """Log density of N(mean, cov) at x; raises on a non-SPD covariance."""
    x = np.asarray(x, dtype=float)
    mean = np.asarray(mean, dtype=float)
    cov = np.asarray(cov, dtype=float)
    if x.shape != mean.shape or cov.shape != (x.size, x.size):
        raise ValueError("dimension mismatch in Gaussian evaluation")
    chol = np.linalg.cholesky(cov)  # LinAlgError on non-SPD input
    y = np.linalg.solve(chol, x - mean)
    logdet = 2.0 * np.log(np.diag(chol)).sum()
    return float(-0.5 * (y @ y + logdet + x.size * _LOG_2PI))


def eval_gaussian(x, mean, cov) -> float:
    """Density of N(mean, cov) at x."""
    return math.exp(log_eval_gaussian(x, mean, cov))


def kalman_predict(c: GaussianComponent, F, Q) -> GaussianComponent:
    """Linear-Gaussian transition: mean -> F mean, cov -> F cov F' + Q."""
    F = np.asarray(F, dtype=float)
    Q = np.asarray(Q, dtype=float)
    d = c.dim
    if F.shape != (d, d) or Q.shape != (d, d):
        raise ValueError("transition matrices do not match state dimension")
    return GaussianComponent(c.weight, F @ c.mean, _symmetrize(F @ c.cov @ F.T + Q))


def kalman_update(c: GaussianComponent, z, H, R) -> tuple[GaussianComponent, float]:
    """Linear-Gaussian measurement update with Joseph-form covariance.

    Returns the posterior component and the predictive density
    N(z; H mean, H cov H' + R).
    """
    z = np.asarray(z, dtype=float)
    H = np.asarray(H, dtype=float)
    R = np.asarray(R, dtype=float)
    d = c.dim
    if H.shape != (z.size, d) or R.shape != (z.size, z.size):
        raise ValueError("measurement matrices do not match dimensions")
    S = _symmetrize(H @ c.cov @ H.T + R)
    try:
        chol = np.linalg.cholesky(S)
    except np.linalg.LinAlgError as exc:
        raise ValueError("singular innovation covariance") from exc
    innov = z - H @ c.mean
    y = np.linalg.solve(chol, innov)
    logdet = 2.0 * np.log(np.diag(chol)).sum()
    q = math.exp(-0.5 * (y @ y + logdet + z.size * _LOG_2PI))
    K = c.cov @ H.T @ np.linalg.inv(S)
    A = np.eye(d) - K @ H
    cov = _symmetrize(A @ c.cov @ A.T + K @ R @ K.T)
    return GaussianComponent(c.weight, c.mean + K @ innov, cov), q


def reduce_mixture(
    mixture: GaussianMixture, cfg: ReductionConfig, target_mass: float | None = None
) -> GaussianMixture:
    """Prune, merge and cap a mixture, preserving its total mass.

    Components below the prune threshold are dropped, components within the
    merge distance (squared Mahalanobis under the candidate's own
    covariance) are merged moment-preservingly, and at most max_components
    survive (largest weights).  The result is rescaled to the input mass
    (or to `target_mass` when the caller already pruned and knows the true
    total); if pruning removes everything the empty mixture (mass zero) is
    returned without rescaling.
    """
    from .backend import kernels

    mass_in = mixture.mass() if target_mass is None else target_mass
    keep = mixture.weights > cfg.prune_threshold
    w = mixture.weights[keep]
    if w.size == 0:
        return GaussianMixture.empty(mixture.dim)
    means = mixture.means[keep]
    covs = mixture.covs[keep]
    w, means, covs = kernels.merge_mixture(w, means, covs, cfg.merge_distance)
    if w.size > cfg.max_components:
        order = np.argsort(-w, kind="stable")[: cfg.max_components]
        order = np.sort(order)
        w, means, covs = w[order], means[order], covs[order]
    total = w.sum()
    if total > 0 and mass_in > 0:
        w = w * (mass_in / total)
    return GaussianMixture(w, means, covs)
