#!/usr/bin/env python3
"""Benchmark the compiled kernels against the pure-numpy fallback.

Runs each hot kernel on synthetic workloads shaped like the desk-scale
experiments (late experiment-1 frames: ~90 measurements, ~150 mixture
components, cardinality support 160) and prints per-call times plus the
speedup, then times one full filter update per backend.

Usage: python benchmarks/bench_backends.py [--repeats N]
"""
import argparse
import time

import numpy as np

from drifttrack.backend import available_backends, get_kernels


def _time(fn, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def kernel_cases(rng):
    n, d, m, dz, n_max = 150, 4, 90, 2, 160
    w = rng.random(n) + 0.1
    means = rng.standard_normal((n, d)) * 20
    covs = np.tile(np.diag([1.0, 1.0, 0.2, 0.2]), (n, 1, 1))
    H = np.zeros((dz, d))
    H[0, 0] = H[1, 1] = 1.0
    R = 0.01 * np.eye(dz)
    Z = rng.standard_normal((m, dz)) * 20
    logv = rng.uniform(-5, 15, m)
    rho = rng.random(n_max + 1) + 1e-9
    rho /= rho.sum()
    log_rho = np.log(rho)
    log_c_full = rng.uniform(-10, 10, m + 1)
    log_c_without = rng.uniform(-10, 10, (m, m))
    wm, mm, cm = w.copy(), means.copy(), covs.copy()
    mm[:, :2] = rng.uniform(-30, 30, (n, 2))
    return {
        "kalman_terms (150 comps x 90 meas)": lambda k: k.kalman_terms(w, means, covs, H, R, Z),
        "log_esf (90 values)": lambda k: k.log_esf(logv),
        "log_esf_without_each (90)": lambda k: k.log_esf_without_each(logv),
        "cphd_sums (N=160, m=90)": lambda k: k.cphd_sums(
            log_rho, log_c_full, log_c_without, np.log(0.01)
        ),
        "merge_mixture (150 comps)": lambda k: k.merge_mixture(wm, mm, cm, 4.0),
    }


def filter_update_case(backend_name):
    """One second-order filter update at late-experiment-1 scale."""
    import os

    os.environ["DRIFTTRACK_BACKEND"] = backend_name
    # fresh import path per backend: reload the kernel-bound modules
    import importlib

    import drifttrack.backend
    import drifttrack.filters.common
    import drifttrack.filters.sophd

    importlib.reload(drifttrack.backend)
    importlib.reload(drifttrack.filters.common)
    importlib.reload(drifttrack.filters.sophd)
    from drifttrack.cardinality import ClutterModel, PoissonCardinality, Window
    from drifttrack.filters.common import SoPhdState
    from drifttrack.filters.sophd import sophd_update
    from drifttrack.gm import GaussianMixture
    from drifttrack.models import ObservationModel

    rng = np.random.default_rng(0)
    n, m = 150, 90
    means = np.zeros((n, 4))
    means[:, :2] = rng.uniform(-80, 80, (n, 2))
    mix = GaussianMixture(
        rng.random(n) + 0.2, means, np.tile(np.diag([1.0, 1.0, 0.2, 0.2]), (n, 1, 1))
    )
    state = SoPhdState(mix, mix.mass() * 1.4)
    obs = ObservationModel.planar(0.1, 0.99)
    clutter = ClutterModel(PoissonCardinality(10.0), Window.centered(200.0, 200.0))
    Z = means[rng.integers(0, n, m), :2] + rng.standard_normal((m, 2)) * 0.1
    return lambda: sophd_update(state, Z, obs, clutter, np.zeros(4))


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()

    names = available_backends()
    if "cython" not in names:
        print("compiled backend not available; run pip install -e . first")
    rng = np.random.default_rng(42)
    cases = kernel_cases(rng)
    print(f"{'kernel':<38} " + " ".join(f"{n:>12}" for n in names) + f" {'speedup':>9}")
    for label, fn in cases.items():
        times = {}
        for name in names:
            kern = get_kernels(name)
            times[name] = _time(lambda: fn(kern), args.repeats)
        row = f"{label:<38} " + " ".join(f"{times[n] * 1e3:>10.3f}ms" for n in names)
        if len(names) == 2:
            row += f" {times[names[0]] / times[names[1]]:>8.1f}x"
        print(row)

    print()
    for name in names:
        fn = filter_update_case(name)
        fn()  # warm-up
        t = _time(fn, max(args.repeats // 2, 2))
        print(f"second-order update, {name:>7} backend: {t * 1e3:8.2f} ms")


if __name__ == "__main__":
    main()
