"""Compiled and pure-python kernels must agree to float precision."""
import numpy as np
import pytest

from drifttrack.backend import available_backends, get_kernels

pytestmark = pytest.mark.skipif(
    "cython" not in available_backends(), reason="compiled backend not built"
)


def backends():
    return get_kernels("python"), get_kernels("cython")


def random_mixture(rng, n, d=4):
    w = rng.random(n) + 0.1
    means = rng.standard_normal((n, d)) * 5
    covs = np.zeros((n, d, d))
    for i in range(n):
        A = rng.standard_normal((d, d))
        covs[i] = A @ A.T + d * np.eye(d)
    return w, means, covs


class TestKalmanTerms:
    @pytest.mark.parametrize("n,m", [(1, 1), (5, 3), (20, 8), (3, 0), (0, 3)])
    def test_agreement(self, n, m):
        rng = np.random.default_rng(n * 100 + m)
        py, cy = backends()
        w, means, covs = random_mixture(rng, n)
        H = np.zeros((2, 4))
        H[0, 0] = H[1, 1] = 1.0
        R = 0.25 * np.eye(2)
        Z = rng.standard_normal((m, 2)) * 4
        out_py = py.kalman_terms(w, means, covs, H, R, Z)
        out_cy = cy.kalman_terms(w, means, covs, H, R, Z)
        for a, b in zip(out_py, out_cy):
            assert a.shape == b.shape
            assert np.allclose(a, b, rtol=1e-11, atol=1e-12)

    def test_general_h(self):
        rng = np.random.default_rng(77)
        py, cy = backends()
        w, means, covs = random_mixture(rng, 6)
        H = rng.standard_normal((3, 4))
        A = rng.standard_normal((3, 3))
        R = A @ A.T + 3 * np.eye(3)
        Z = rng.standard_normal((4, 3))
        out_py = py.kalman_terms(w, means, covs, H, R, Z)
        out_cy = cy.kalman_terms(w, means, covs, H, R, Z)
        for a, b in zip(out_py, out_cy):
            assert np.allclose(a, b, rtol=1e-10, atol=1e-12)


class TestLogEsf:
    @pytest.mark.parametrize("n", [0, 1, 2, 7, 40, 80])
    def test_agreement(self, n):
        rng = np.random.default_rng(n)
        py, cy = backends()
        logv = rng.uniform(-600, 600, n)
        if n > 3:
            logv[1] = -np.inf
        a = py.log_esf(logv)
        b = cy.log_esf(logv)
        assert np.allclose(a, b, rtol=1e-12, atol=1e-12, equal_nan=True)

    def test_all_minus_inf(self):
        py, cy = backends()
        logv = np.full(4, -np.inf)
        assert np.array_equal(py.log_esf(logv), cy.log_esf(logv))

    @pytest.mark.parametrize("n", [1, 2, 5, 30, 60])
    def test_deflations_agree(self, n):
        rng = np.random.default_rng(n + 1000)
        py, cy = backends()
        logv = rng.uniform(-50, 50, n)
        a = py.log_esf_without_each(logv)
        b = cy.log_esf_without_each(logv)
        assert a.shape == b.shape
        mask = np.isfinite(a) | np.isfinite(b)
        assert np.allclose(
            np.where(mask, a, 0.0), np.where(mask, b, 0.0), rtol=1e-11, atol=1e-11
        )

    def test_deflation_matches_direct_recompute(self):
        rng = np.random.default_rng(5)
        py, _ = backends()
        logv = rng.uniform(-30, 30, 12)
        out = py.log_esf_without_each(logv)
        for i in range(12):
            direct = py.log_esf(np.delete(logv, i))[:12]
            assert np.allclose(out[i], direct, rtol=1e-11, atol=1e-11, equal_nan=True)


class TestCphdSums:
    @pytest.mark.parametrize("n_max,m", [(8, 0), (8, 3), (32, 6), (64, 12)])
    def test_agreement(self, n_max, m):
        rng = np.random.default_rng(n_max + m)
        py, cy = backends()
        rho = rng.random(n_max + 1) + 1e-6
        rho /= rho.sum()
        log_rho = np.log(rho)
        log_c_full = rng.uniform(-20, 20, m + 1)
        log_c_without = rng.uniform(-20, 20, (m, m))
        log_phibar = np.log(0.05)
        out_py = py.cphd_sums(log_rho, log_c_full, log_c_without, log_phibar)
        out_cy = cy.cphd_sums(log_rho, log_c_full, log_c_without, log_phibar)
        assert np.allclose(out_py[0], out_cy[0], rtol=1e-11, atol=1e-11)
        assert out_py[1] == pytest.approx(out_cy[1], rel=1e-11)
        assert out_py[2] == pytest.approx(out_cy[2], rel=1e-11)
        assert np.allclose(out_py[3], out_cy[3], rtol=1e-11, atol=1e-11)

    def test_pd_one_branch(self):
        py, cy = backends()
        rho = np.full(9, 1 / 9)
        log_rho = np.log(rho)
        m = 3
        log_c_full = np.zeros(m + 1)
        log_c_without = np.zeros((m, m))
        out_py = py.cphd_sums(log_rho, log_c_full, log_c_without, -np.inf)
        out_cy = cy.cphd_sums(log_rho, log_c_full, log_c_without, -np.inf)
        assert np.allclose(
            np.nan_to_num(out_py[0], neginf=-1e300),
            np.nan_to_num(out_cy[0], neginf=-1e300),
            rtol=1e-12,
        )
        assert out_py[1] == pytest.approx(out_cy[1], rel=1e-12)


class TestMergeMixture:
    @pytest.mark.parametrize("n", [1, 2, 10, 60])
    def test_agreement(self, n):
        rng = np.random.default_rng(n + 7)
        py, cy = backends()
        w, means, covs = random_mixture(rng, n, d=4)
        means[:, :2] = rng.uniform(-4, 4, (n, 2))  # force some merges
        out_py = py.merge_mixture(w, means, covs, 4.0)
        out_cy = cy.merge_mixture(w, means, covs, 4.0)
        for a, b in zip(out_py, out_cy):
            assert a.shape == b.shape
            assert np.allclose(a, b, rtol=1e-11, atol=1e-12)

    def test_mass_preserved_both(self):
        rng = np.random.default_rng(4)
        py, cy = backends()
        w, means, covs = random_mixture(rng, 30)
        for kern in (py, cy):
            w2, _, _ = kern.merge_mixture(w, means, covs, 4.0)
            assert w2.sum() == pytest.approx(w.sum(), rel=1e-12)
