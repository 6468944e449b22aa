"""Pure-numpy implementations of the hot kernels.

Reference backend: every function here has a signature-identical compiled
twin in `_kernels_cy`.  The compiled module is preferred at import time;
this one is the fallback and the behavioural reference in tests.
"""
from __future__ import annotations

import math

import numpy as np
from scipy.special import gammaln

NAME = "python"

_LOG_2PI = math.log(2.0 * math.pi)


def kalman_terms(weights, means, covs, H, R, Z):
    """Per-measurement, per-component linear-Gaussian update terms.

    Returns (logq, upd_means, upd_covs) where logq[m, i] is the log
    predictive density N(z_m; H mean_i, H cov_i H' + R), upd_means[m, i]
    the posterior mean of component i given z_m, and upd_covs[i] the
    (measurement-independent) Joseph-form posterior covariance.
    """
    means = np.asarray(means, dtype=float)
    covs = np.asarray(covs, dtype=float)
    H = np.asarray(H, dtype=float)
    R = np.asarray(R, dtype=float)
    Z = np.asarray(Z, dtype=float)
    n, d = means.shape
    m, dz = Z.shape if Z.size else (0, H.shape[0])
    if n == 0 or m == 0:
        return (
            np.zeros((m, n)),
            np.zeros((m, n, d)),
            covs.copy().reshape(n, d, d),
        )
    S = H @ covs @ H.T + R  # (n, dz, dz)
    S = 0.5 * (S + S.swapaxes(1, 2))
    Sinv = np.linalg.inv(S)
    sign, logdet = np.linalg.slogdet(S)
    if np.any(sign <= 0):
        raise ValueError("singular innovation covariance")
    pred = means @ H.T  # (n, dz)
    diff = Z[:, None, :] - pred[None, :, :]  # (m, n, dz)
    quad = np.einsum("mni,nij,mnj->mn", diff, Sinv, diff)
    logq = -0.5 * (quad + logdet[None, :] + dz * _LOG_2PI)
    K = covs @ H.T @ Sinv  # (n, d, dz) via batched matmul
    upd_means = means[None, :, :] + np.einsum("nij,mnj->mni", K, diff)
    A = np.eye(d)[None, :, :] - K @ H
    upd_covs = A @ covs @ A.swapaxes(1, 2) + K @ R @ K.swapaxes(1, 2)
    upd_covs = 0.5 * (upd_covs + upd_covs.swapaxes(1, 2))
    return logq, upd_means, upd_covs


def log_esf(logv):
    """Log elementary symmetric functions of values given in log domain.

    Input entries may be -inf (zero values).  Output has length n+1 with
    out[0] = 0 (= log e_0); entries of empty symmetric sums are -inf.
    """
    logv = np.asarray(logv, dtype=float)
    n = logv.size
    out = np.full(n + 1, -np.inf)
    out[0] = 0.0
    if n == 0:
        return out
    shift = float(np.max(logv))
    if shift == -np.inf:
        return out
    v = np.exp(logv - shift)
    e = np.zeros(n + 1)
    e[0] = 1.0
    for x in v:
        e[1:] = e[1:] + x * e[:-1]
    with np.errstate(divide="ignore"):
        loge = np.log(e)
    return loge + shift * np.arange(n + 1)


def log_esf_without_each(logv):
    """log e_j over V minus each single element, via prefix/suffix merging.

    Returns an (n, n) array whose row i holds log e_0..e_{n-1} of the value
    set with element i removed.  Subtraction-free (prefix and suffix
    symmetric functions convolved), so it is stable for any value spread.
    """
    logv = np.asarray(logv, dtype=float)
    n = logv.size
    if n == 0:
        return np.zeros((0, 0))
    out = np.full((n, n), -np.inf)
    if n == 1:
        out[0, 0] = 0.0
        return out
    finite = logv[np.isfinite(logv)]
    shift = float(np.max(logv))
    if shift == -np.inf:
        out[:, 0] = 0.0
        return out
    v = np.exp(logv - shift)
    # prefix[i] = esf of v[:i], suffix[i] = esf of v[i:], each length n+1.
    prefix = np.zeros((n + 1, n + 1))
    suffix = np.zeros((n + 1, n + 1))
    prefix[0, 0] = 1.0
    suffix[n, 0] = 1.0
    for i in range(n):
        prefix[i + 1] = prefix[i]
        prefix[i + 1, 1:] = prefix[i + 1, 1:] + v[i] * prefix[i, :-1]
    for i in range(n - 1, -1, -1):
        suffix[i] = suffix[i + 1]
        suffix[i, 1:] = suffix[i, 1:] + v[i] * suffix[i + 1, :-1]
    scale = shift * np.arange(n)
    for i in range(n):
        e = np.convolve(prefix[i, :i + 1], suffix[i + 1, : n - i])
        with np.errstate(divide="ignore"):
            out[i] = np.log(e[:n]) + scale
    return out


def _upsilon_grid(log_rho, log_c, log_phibar, lg, d):
    """Log terms of Upsilon^d as an (N+1, J) grid plus the valid-entry mask.

    term(n, j) = lg[n+1] - lg[n-j-d+1] + (n-j-d) log phibar + log_c[j]
    for 0 <= j <= min(J-1, n-d).
    """
    N = log_rho.size - 1
    J = log_c.size
    n = np.arange(N + 1)[:, None]
    j = np.arange(J)[None, :]
    r = n - j - d  # missed-detection count
    valid = r >= 0
    rs = np.where(valid, r, 0)
    with np.errstate(invalid="ignore"):
        miss = np.where(rs > 0, rs * log_phibar, 0.0)
    terms = lg[n + 1 - 0] - lg[rs + 1] + miss + log_c[None, :]
    terms = np.where(valid, terms, -np.inf)
    return terms


def _logsumexp(a, axis=None):
    amax = np.max(a, axis=axis, keepdims=True)
    amax_safe = np.where(np.isfinite(amax), amax, 0.0)
    with np.errstate(invalid="ignore"):
        s = np.sum(np.exp(a - amax_safe), axis=axis)
    with np.errstate(divide="ignore"):
        out = np.log(s) + np.squeeze(amax_safe, axis=axis)
    squeezed_max = np.squeeze(amax, axis=axis)
    return np.where(np.isfinite(squeezed_max), out, squeezed_max)


def cphd_sums(log_rho, log_c_full, log_c_without, log_phibar):
    """Cardinality-weighted update sums for the i.i.d.-cluster filter.

    Inputs are log rho(n) on 0..N, the combined per-j factors
    log_c[j] = log[rho_c(m-j) (m-j)! e_j] for the full measurement set and
    for each single-removal set, and log(1 - p_d).  Returns
    (log Upsilon0(n) over n, log <Upsilon0, rho>, log <Upsilon1, rho>,
    log <Upsilon1[Z\\{z}], rho> per z).
    """
    log_rho = np.asarray(log_rho, dtype=float)
    log_c_full = np.asarray(log_c_full, dtype=float)
    log_c_without = np.asarray(log_c_without, dtype=float)
    N = log_rho.size - 1
    m = log_c_full.size - 1
    lg = gammaln(np.arange(N + 2).astype(float))
    t0 = _upsilon_grid(log_rho, log_c_full, log_phibar, lg, 0)
    log_ups0 = _logsumexp(t0, axis=1)
    log_inner0 = _logsumexp(log_ups0 + log_rho)
    t1 = _upsilon_grid(log_rho, log_c_full, log_phibar, lg, 1)
    log_inner1 = _logsumexp(_logsumexp(t1, axis=1) + log_rho)
    log_inner1_without = np.empty(m)
    for z in range(m):
        tz = _upsilon_grid(log_rho, log_c_without[z], log_phibar, lg, 1)
        log_inner1_without[z] = _logsumexp(_logsumexp(tz, axis=1) + log_rho)
    return log_ups0, float(log_inner0), float(log_inner1), log_inner1_without


def merge_mixture(weights, means, covs, merge_distance):
    """Greedy moment-preserving merge of mixture components.

    Repeatedly takes the heaviest remaining component and absorbs every
    remaining component within `merge_distance` (squared Mahalanobis under
    the candidate's own covariance).
    """
    w = np.asarray(weights, dtype=float)
    means = np.asarray(means, dtype=float)
    covs = np.asarray(covs, dtype=float)
    n = w.size
    if n <= 1:
        return w.copy(), means.copy(), covs.copy()
    inv = np.linalg.inv(covs)
    alive = np.ones(n, dtype=bool)
    out_w, out_m, out_P = [], [], []
    while alive.any():
        idx = np.flatnonzero(alive)
        pivot = idx[np.argmax(w[idx])]
        diff = means[idx] - means[pivot]
        d2 = np.einsum("ki,kij,kj->k", diff, inv[idx], diff)
        grab = idx[d2 <= merge_distance]
        wsum = w[grab].sum()
        mbar = (w[grab, None] * means[grab]).sum(axis=0) / wsum
        dd = means[grab] - mbar
        spread = np.einsum("k,kij->ij", w[grab], covs[grab]) + np.einsum(
            "k,ki,kj->ij", w[grab], dd, dd
        )
        out_w.append(wsum)
        out_m.append(mbar)
        out_P.append(spread / wsum)
        alive[grab] = False
    return np.array(out_w), np.stack(out_m), np.stack(out_P)
