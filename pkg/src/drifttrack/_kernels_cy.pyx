# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled implementations of the hot kernels.

Signature-identical twin of `_kernels_py`; selected automatically at
import when built.  The heavy loops are the per-measurement/component
linear-Gaussian terms, the elementary-symmetric-function recursions, the
cardinality-weighted update sums, and the greedy mixture merge.
"""
import numpy as np

cimport numpy as cnp
from libc.math cimport INFINITY, exp, lgamma, log, sqrt

cnp.import_array()

NAME = "cython"

_LOG_2PI = 1.8378770664093453


cdef int _cholesky(double[:, ::1] A, double[:, ::1] L, int n) nogil:
    """Lower Cholesky of A into L; returns 0 on success."""
    cdef int r, c, k
    cdef double s
    for c in range(n):
        for r in range(c, n):
            s = A[r, c]
            for k in range(c):
                s -= L[r, k] * L[c, k]
            if r == c:
                if s <= 0.0:
                    return 1
                L[c, c] = sqrt(s)
            else:
                L[r, c] = s / L[c, c]
    return 0


cdef void _forward_solve(double[:, ::1] L, double* b, double* y, int n) nogil:
    cdef int i, k
    cdef double s
    for i in range(n):
        s = b[i]
        for k in range(i):
            s -= L[i, k] * y[k]
        y[i] = s / L[i, i]


def kalman_terms(weights, means, covs, H, R, Z):
    """Per-measurement, per-component linear-Gaussian update terms.

    Same contract as the pure-python backend: (logq, upd_means, upd_covs).
    """
    w_arr = np.asarray(weights, dtype=np.float64)
    cdef int n = w_arr.shape[0]
    H_arr = np.ascontiguousarray(H, dtype=np.float64)
    R_arr = np.ascontiguousarray(R, dtype=np.float64)
    cdef int dz = H_arr.shape[0]
    cdef int d = H_arr.shape[1]
    if d > 16 or dz > 16:
        raise ValueError("state/measurement dimensions above 16 are unsupported")
    means_arr = (
        np.ascontiguousarray(means, dtype=np.float64).reshape(n, d)
        if n
        else np.zeros((0, d))
    )
    covs_arr = (
        np.ascontiguousarray(covs, dtype=np.float64).reshape(n, d, d)
        if n
        else np.zeros((0, d, d))
    )
    Z_arr = np.ascontiguousarray(Z, dtype=np.float64).reshape(-1, dz)
    cdef int m = Z_arr.shape[0]

    logq = np.zeros((m, n))
    upd_means = np.zeros((m, n, d))
    upd_covs = covs_arr.copy()
    if n == 0 or m == 0:
        return logq, upd_means, upd_covs
    cdef double[:, ::1] mv = means_arr

    cdef double[:, ::1] Pv
    cdef double[:, ::1] Hv = H_arr
    cdef double[:, ::1] Rv = R_arr
    cdef double[:, ::1] Zv = Z_arr.reshape(m, dz)
    cdef double[:, ::1] logq_v = logq
    cdef double[:, :, ::1] um_v = upd_means
    cdef double[:, :, ::1] covs_v = np.ascontiguousarray(covs_arr)
    cdef double[:, :, ::1] uc_v = upd_covs

    S = np.zeros((dz, dz))
    Lbuf = np.zeros((dz, dz))
    PHt = np.zeros((d, dz))
    K = np.zeros((d, dz))
    A = np.zeros((d, d))
    T = np.zeros((d, d))
    Sinv = np.zeros((dz, dz))
    pred = np.zeros(dz)
    cdef double[:, ::1] Sv = S
    cdef double[:, ::1] Lv = Lbuf
    cdef double[:, ::1] PHt_v = PHt
    cdef double[:, ::1] Kv = K
    cdef double[:, ::1] Av = A
    cdef double[:, ::1] Tv = T
    cdef double[:, ::1] Sinv_v = Sinv
    cdef double[::1] pred_v = pred
    cdef double diff[16]
    cdef double ybuf[16]
    cdef double colbuf[16]
    cdef double colsol[16]

    cdef int i, z, r, c, k, a, b
    cdef double s, logdet, quad
    for i in range(n):
        Pv = covs_v[i]
        # S = H P H' + R
        for r in range(d):
            for c in range(dz):
                s = 0.0
                for k in range(d):
                    s += Pv[r, k] * Hv[c, k]
                PHt_v[r, c] = s
        for r in range(dz):
            for c in range(dz):
                s = Rv[r, c]
                for k in range(d):
                    s += Hv[r, k] * PHt_v[k, c]
                Sv[r, c] = s
        for r in range(dz):
            for c in range(r + 1, dz):
                s = 0.5 * (Sv[r, c] + Sv[c, r])
                Sv[r, c] = s
                Sv[c, r] = s
        if _cholesky(Sv, Lv, dz):
            raise ValueError("singular innovation covariance")
        logdet = 0.0
        for r in range(dz):
            logdet += 2.0 * log(Lv[r, r])
        # Sinv via forward/backward solves on identity columns
        for c in range(dz):
            for r in range(dz):
                colbuf[r] = 1.0 if r == c else 0.0
            _forward_solve(Lv, colbuf, colsol, dz)
            # back substitution with L'
            for r in range(dz - 1, -1, -1):
                s = colsol[r]
                for k in range(r + 1, dz):
                    s -= Lv[k, r] * colbuf[k]
                colbuf[r] = s / Lv[r, r]
            for r in range(dz):
                Sinv_v[r, c] = colbuf[r]
        # K = P H' Sinv
        for r in range(d):
            for c in range(dz):
                s = 0.0
                for k in range(dz):
                    s += PHt_v[r, k] * Sinv_v[k, c]
                Kv[r, c] = s
        # Joseph covariance update: (I-KH) P (I-KH)' + K R K'
        for r in range(d):
            for c in range(d):
                s = 1.0 if r == c else 0.0
                for k in range(dz):
                    s -= Kv[r, k] * Hv[k, c]
                Av[r, c] = s
        for r in range(d):
            for c in range(d):
                s = 0.0
                for k in range(d):
                    s += Av[r, k] * Pv[k, c]
                Tv[r, c] = s
        for r in range(d):
            for c in range(d):
                s = 0.0
                for k in range(d):
                    s += Tv[r, k] * Av[c, k]
                for a in range(dz):
                    for b in range(dz):
                        s += Kv[r, a] * Rv[a, b] * Kv[c, b]
                uc_v[i, r, c] = s
        for r in range(d):
            for c in range(r + 1, d):
                s = 0.5 * (uc_v[i, r, c] + uc_v[i, c, r])
                uc_v[i, r, c] = s
                uc_v[i, c, r] = s
        # predicted measurement
        for r in range(dz):
            s = 0.0
            for k in range(d):
                s += Hv[r, k] * mv[i, k]
            pred_v[r] = s
        for z in range(m):
            for r in range(dz):
                diff[r] = Zv[z, r] - pred_v[r]
            _forward_solve(Lv, diff, ybuf, dz)
            quad = 0.0
            for r in range(dz):
                quad += ybuf[r] * ybuf[r]
            logq_v[z, i] = -0.5 * (quad + logdet + dz * _LOG_2PI)
            for r in range(d):
                s = mv[i, r]
                for k in range(dz):
                    s += Kv[r, k] * diff[k]
                um_v[z, i, r] = s
    return logq, upd_means, upd_covs


def log_esf(logv):
    """Log elementary symmetric functions (same contract as the python twin)."""
    logv_arr = np.ascontiguousarray(logv, dtype=np.float64)
    cdef int n = logv_arr.shape[0]
    out = np.full(n + 1, -INFINITY)
    out[0] = 0.0
    if n == 0:
        return out
    cdef double shift = np.max(logv_arr)
    if shift == -INFINITY:
        return out
    cdef double[::1] lv = logv_arr
    e = np.zeros(n + 1)
    cdef double[::1] ev = e
    cdef double[::1] ov = out
    cdef int i, j
    cdef double x
    ev[0] = 1.0
    for i in range(n):
        x = exp(lv[i] - shift)
        for j in range(i + 1, 0, -1):
            ev[j] += x * ev[j - 1]
    for j in range(n + 1):
        if ev[j] > 0.0:
            ov[j] = log(ev[j]) + j * shift
    return out


def log_esf_without_each(logv):
    """log e_j over V minus each element via prefix/suffix merging."""
    logv_arr = np.ascontiguousarray(logv, dtype=np.float64)
    cdef int n = logv_arr.shape[0]
    if n == 0:
        return np.zeros((0, 0))
    out = np.full((n, n), -INFINITY)
    if n == 1:
        out[0, 0] = 0.0
        return out
    cdef double shift = np.max(logv_arr)
    cdef double[:, ::1] ov = out
    cdef int i, j, a, b
    if shift == -INFINITY:
        for i in range(n):
            ov[i, 0] = 0.0
        return out
    cdef double[::1] lv = logv_arr
    v = np.exp(logv_arr - shift)
    cdef double[::1] vv = v
    prefix = np.zeros((n + 1, n + 1))
    suffix = np.zeros((n + 1, n + 1))
    cdef double[:, ::1] pv = prefix
    cdef double[:, ::1] sv = suffix
    pv[0, 0] = 1.0
    for i in range(n):
        for j in range(i + 2):
            pv[i + 1, j] = pv[i, j]
        for j in range(i + 1, 0, -1):
            pv[i + 1, j] += vv[i] * pv[i, j - 1]
    sv[n, 0] = 1.0
    for i in range(n - 1, -1, -1):
        for j in range(n - i + 1):
            sv[i, j] = sv[i + 1, j]
        for j in range(n - i, 0, -1):
            sv[i, j] += vv[i] * sv[i + 1, j - 1]
    cdef double s
    for i in range(n):
        for j in range(n):
            s = 0.0
            for a in range(j + 1):
                if a > i:
                    break
                b = j - a
                if b > n - 1 - i:
                    continue
                s += pv[i, a] * sv[i + 1, b]
            if s > 0.0:
                ov[i, j] = log(s) + j * shift
    return out


cdef double _upsilon_inner(
    double[::1] log_rho,
    double[::1] log_c,
    double log_phibar,
    double[::1] lg,
    int d,
) nogil:
    """log sum over (n, j) of rho(n) * Upsilon^d-style terms (two passes)."""
    cdef int N = log_rho.shape[0] - 1
    cdef int J = log_c.shape[0]
    cdef int n, j, r
    cdef double t, best = -INFINITY, acc = 0.0
    for n in range(N + 1):
        if log_rho[n] == -INFINITY:
            continue
        for j in range(J):
            r = n - j - d
            if r < 0:
                break
            if log_c[j] == -INFINITY:
                continue
            t = log_rho[n] + lg[n + 1] - lg[r + 1] + log_c[j]
            if r > 0:
                t += r * log_phibar
            if t > best:
                best = t
    if best == -INFINITY:
        return best
    for n in range(N + 1):
        if log_rho[n] == -INFINITY:
            continue
        for j in range(J):
            r = n - j - d
            if r < 0:
                break
            if log_c[j] == -INFINITY:
                continue
            t = log_rho[n] + lg[n + 1] - lg[r + 1] + log_c[j]
            if r > 0:
                t += r * log_phibar
            acc += exp(t - best)
    return best + log(acc)


def cphd_sums(log_rho, log_c_full, log_c_without, log_phibar):
    """Cardinality-weighted update sums (same contract as the python twin)."""
    lr = np.ascontiguousarray(log_rho, dtype=np.float64)
    lcf = np.ascontiguousarray(log_c_full, dtype=np.float64)
    lcw = np.ascontiguousarray(log_c_without, dtype=np.float64)
    cdef int N = lr.shape[0] - 1
    cdef int m = lcf.shape[0] - 1
    lg_arr = np.zeros(N + 2)
    cdef double[::1] lg = lg_arr
    cdef int i
    for i in range(N + 2):
        lg[i] = lgamma(<double> (i))
    lg[0] = INFINITY  # gammaln(0); never indexed by valid terms
    log_ups0 = np.full(N + 1, -INFINITY)
    cdef double[::1] lu = log_ups0
    cdef double[::1] lrv = lr
    cdef double[::1] lcfv = lcf
    cdef double[:, ::1] lcwv = lcw.reshape(m, m) if m else np.zeros((0, 0))
    cdef double lp = log_phibar
    cdef int n, j, r
    cdef double t, best, acc
    for n in range(N + 1):
        best = -INFINITY
        for j in range(min(m, n) + 1):
            if lcfv[j] == -INFINITY:
                continue
            r = n - j
            t = lg[n + 1] - lg[r + 1] + lcfv[j]
            if r > 0:
                t += r * lp
            if t > best:
                best = t
        if best == -INFINITY:
            continue
        acc = 0.0
        for j in range(min(m, n) + 1):
            if lcfv[j] == -INFINITY:
                continue
            r = n - j
            t = lg[n + 1] - lg[r + 1] + lcfv[j]
            if r > 0:
                t += r * lp
            acc += exp(t - best)
        lu[n] = best + log(acc)
    # <Upsilon^0, rho>
    best = -INFINITY
    for n in range(N + 1):
        if lrv[n] == -INFINITY or lu[n] == -INFINITY:
            continue
        t = lrv[n] + lu[n]
        if t > best:
            best = t
    if best == -INFINITY:
        log_inner0 = -INFINITY
    else:
        acc = 0.0
        for n in range(N + 1):
            if lrv[n] == -INFINITY or lu[n] == -INFINITY:
                continue
            acc += exp(lrv[n] + lu[n] - best)
        log_inner0 = best + log(acc)
    log_inner1 = _upsilon_inner(lrv, lcfv, lp, lg, 1)
    log_inner1_without = np.empty(m)
    cdef double[::1] liw = log_inner1_without
    for j in range(m):
        liw[j] = _upsilon_inner(lrv, lcwv[j], lp, lg, 1)
    return log_ups0, float(log_inner0), float(log_inner1), log_inner1_without


def merge_mixture(weights, means, covs, merge_distance):
    """Greedy moment-preserving merge (same contract as the python twin)."""
    w_arr = np.ascontiguousarray(weights, dtype=np.float64)
    cdef int n = w_arr.shape[0]
    means_arr = np.ascontiguousarray(means, dtype=np.float64).reshape(n, -1)
    cdef int d = means_arr.shape[1]
    covs_arr = np.ascontiguousarray(covs, dtype=np.float64).reshape(n, d, d)
    if n <= 1:
        return w_arr.copy(), means_arr.copy(), covs_arr.copy()
    inv = np.linalg.inv(covs_arr)
    alive = np.ones(n, dtype=np.uint8)
    out_w = np.empty(n)
    out_m = np.empty((n, d))
    out_P = np.empty((n, d, d))
    cdef double[::1] wv = w_arr
    cdef double[:, ::1] mv = means_arr
    cdef double[:, :, ::1] Pv = covs_arr
    cdef double[:, :, ::1] iv = inv
    cdef unsigned char[::1] av = alive
    cdef double[::1] ow = out_w
    cdef double[:, ::1] om = out_m
    cdef double[:, :, ::1] oP = out_P
    cdef double thr = merge_distance
    cdef int n_out = 0, remaining = n
    cdef int i, j, k, r, c, pivot
    cdef double best_w, d2, s, wsum
    cdef double diff[16]
    grab = np.empty(n, dtype=np.int64)
    cdef long long[::1] gv = grab
    cdef int n_grab
    while remaining > 0:
        pivot = -1
        best_w = -1.0
        for i in range(n):
            if av[i] and wv[i] > best_w:
                best_w = wv[i]
                pivot = i
        n_grab = 0
        for j in range(n):
            if not av[j]:
                continue
            for k in range(d):
                diff[k] = mv[j, k] - mv[pivot, k]
            d2 = 0.0
            for r in range(d):
                s = 0.0
                for c in range(d):
                    s += iv[j, r, c] * diff[c]
                d2 += diff[r] * s
            if d2 <= thr:
                gv[n_grab] = j
                n_grab += 1
        wsum = 0.0
        for i in range(n_grab):
            wsum += wv[gv[i]]
        for k in range(d):
            s = 0.0
            for i in range(n_grab):
                s += wv[gv[i]] * mv[gv[i], k]
            om[n_out, k] = s / wsum
        for r in range(d):
            for c in range(d):
                s = 0.0
                for i in range(n_grab):
                    j = <int> gv[i]
                    s += wv[j] * (
                        Pv[j, r, c]
                        + (mv[j, r] - om[n_out, r]) * (mv[j, c] - om[n_out, c])
                    )
                oP[n_out, r, c] = s / wsum
        ow[n_out] = wsum
        n_out += 1
        for i in range(n_grab):
            av[gv[i]] = 0
        remaining -= n_grab
    return out_w[:n_out].copy(), out_m[:n_out].copy(), out_P[:n_out].copy()
