"""Experiment orchestration: (filter x likelihood) grids over MC seeds.

Builds the filter bank for a scenario with the benchmark's parameter
settings, runs the parent SMC over every Monte-Carlo measurement
realization, and aggregates sensor RMSE, cardinality statistics and
per-stage runtimes into CSV outputs.

Seed layout: the ground truth comes from (seed, 0) and is shared across
runs (each run re-draws only the measurement noise/clutter from
(seed, 1, run)); parent-filter streams derive from (seed, 2, run,
variant).  Identical configs therefore produce byte-identical rmse.csv
and card.csv.
"""
from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .cardinality import (
    ClutterModel,
    PanjerCardinality,
    PoissonCardinality,
    panjer_from_moments,
)
from .errors import DegenerateFilterError
from .filters import CphdFilter, PhdFilter, SoPhdFilter
from .gm import GaussianMixture, ReductionConfig
from .models import BirthModel, MotionModel, ObservationModel
from .scenario import (
    ScenarioConfig,
    generate_measurements,
    simulate_truth,
)
from .smc import SingleClusterSmc, SmcConfig

FILTER_KINDS = ("phd", "sophd", "cphd")
LIKELIHOOD_KINDS = ("l1", "l2")

# Experiment-2 filter-side birth/survival settings (the truth is scripted
# and intentionally mismatched).
E2_BIRTH_MEAN = 2.0
E2_BIRTH_VARIANCE = 20.0
E2_SURVIVAL = 0.99

# Cardinality support for the cardinalized filter: experiment 1 reaches a
# steady state near 80 targets (birth 4/step, survival 0.95), well past
# the default support of 64.
E1_N_MAX = 160
DEFAULT_N_MAX = 64


@dataclass
class RunConfig:
    """One experiment-grid invocation."""

    scenario: ScenarioConfig
    filters: tuple = ("phd",)
    likelihoods: tuple = ("l1",)
    mc_runs: int = 10
    particles: int = 100
    resample_fraction: float = 0.5
    seed: int = 1
    out_dir: str | None = None
    n_max: int | None = None
    share_truth: bool = True
    reduction: ReductionConfig = field(default_factory=ReductionConfig)

    def __post_init__(self):
        if self.mc_runs < 1:
            raise ValueError("mc_runs must be at least one")
        for f in self.filters:
            if f not in FILTER_KINDS:
                raise ValueError(f"unknown filter kind {f!r}")
        for l in self.likelihoods:
            if l not in LIKELIHOOD_KINDS:
                raise ValueError(f"unknown likelihood kind {l!r}")

    def cphd_support(self) -> int:
        if self.n_max is not None:
            return self.n_max
        return E1_N_MAX if self.scenario.experiment == "e1" else DEFAULT_N_MAX


def birth_intensity_grid(scenario: ScenarioConfig, mass: float, grid: int = 3) -> GaussianMixture:
    """Birth intensity spread over the window as a Gaussian grid.

    A coarse grid keeps newborn capture roughly uniform over the
    surveillance region (a single broad component would suppress births
    near the window corners by more than an order of magnitude).
    """
    lo = np.asarray(scenario.window.lo)
    hi = np.asarray(scenario.window.hi)
    extent = hi - lo
    centers = [
        lo + extent * ((i + 0.5) / grid, (j + 0.5) / grid)
        for i in range(grid)
        for j in range(grid)
    ]
    n = len(centers)
    sigma = extent / (2.0 * grid)
    means = np.zeros((n, 4))
    covs = np.zeros((n, 4, 4))
    for k, c in enumerate(centers):
        means[k, :2] = c
        covs[k] = np.diag(
            [sigma[0] ** 2, sigma[1] ** 2, scenario.init_vel_noise**2, scenario.init_vel_noise**2]
        )
    return GaussianMixture(np.full(n, mass / n), means, covs)


def build_filter(kind: str, cfg: RunConfig):
    """Daughter filter with the benchmark's model parameters."""
    scenario = cfg.scenario
    obs = ObservationModel.planar(scenario.meas_noise, scenario.p_d_true)
    clutter = ClutterModel(PoissonCardinality(scenario.clutter_rate), scenario.window)
    if scenario.experiment == "e1":
        p_s = scenario.p_s_true
        birth_mean = scenario.birth_mean
        birth_card = PoissonCardinality(birth_mean)
        so_birth_card = birth_card
    else:
        p_s = E2_SURVIVAL
        birth_mean = E2_BIRTH_MEAN
        birth_card = PoissonCardinality(birth_mean)
        so_birth_card = PanjerCardinality(
            panjer_from_moments(E2_BIRTH_MEAN, E2_BIRTH_VARIANCE)
        )
    motion = MotionModel.ncv(scenario.target_accel_noise, p_s, scenario.dt)
    intensity = birth_intensity_grid(scenario, birth_mean)
    if kind == "phd":
        return PhdFilter(motion, BirthModel(intensity, birth_card), obs, clutter, cfg.reduction)
    if kind == "sophd":
        return SoPhdFilter(
            motion, BirthModel(intensity, so_birth_card), obs, clutter, cfg.reduction
        )
    if kind == "cphd":
        return CphdFilter(
            motion,
            BirthModel(intensity, so_birth_card),
            obs,
            clutter,
            cfg.reduction,
            n_max=cfg.cphd_support(),
        )
    raise ValueError(f"unknown filter kind {kind!r}")


@dataclass
class MetricsTable:
    """Aggregated experiment outputs."""

    steps: int
    variants: list
    rmse: dict  # variant -> (steps,)
    card_truth: np.ndarray  # (steps,)
    card_mean: dict  # variant -> (steps,)
    runtimes: dict  # variant -> {stage: mean seconds per step}
    excluded: dict  # variant -> number of degenerate runs excluded
    sensor_estimates: dict  # variant -> (runs, steps, 4); excluded runs are NaN
    count_estimates: dict  # variant -> (runs, steps)
    sensor_truth: np.ndarray  # (steps, 4)


def compute_rmse(estimates: np.ndarray, sensor_truth: np.ndarray) -> np.ndarray:
    """Per-step RMS position error across runs.

    estimates has shape (runs, steps, >=2); NaN rows (excluded runs) are
    ignored step-wise.
    """
    estimates = np.asarray(estimates, dtype=float)
    truth = np.asarray(sensor_truth, dtype=float)
    if estimates.shape[1] != truth.shape[0]:
        raise ValueError("estimate/truth length mismatch")
    err2 = np.sum((estimates[:, :, :2] - truth[None, :, :2]) ** 2, axis=2)
    with np.errstate(invalid="ignore"):
        return np.sqrt(np.nanmean(err2, axis=0))


def _variant_name(filter_kind: str, lik_kind: str) -> str:
    return f"{filter_kind}_{lik_kind}"


class _StageTimer:
    def __init__(self):
        self.totals = {"predict": 0.0, "update": 0.0, "likelihood": 0.0}
        self.steps = 0

    def __call__(self, stage: str, seconds: float) -> None:
        self.totals[stage] += seconds

    def per_step(self) -> dict:
        n = max(self.steps, 1)
        return {
            "prediction": self.totals["predict"] / n,
            "update": self.totals["update"] / n,
            "likelihood": self.totals["likelihood"] / n,
        }


def run_experiment(cfg: RunConfig, progress=None) -> MetricsTable:
    """Execute the (filter x likelihood) grid and aggregate metrics.

    Degenerate runs (every particle at zero likelihood) are excluded from
    the aggregates and counted per variant.
    """
    scenario = cfg.scenario
    steps = scenario.steps
    variants = [
        _variant_name(f, l) for f in cfg.filters for l in cfg.likelihoods
    ]
    truth_shared = (
        simulate_truth(scenario, np.random.default_rng(np.random.SeedSequence((cfg.seed, 0))))
        if cfg.share_truth
        else None
    )
    sensor_est = {
        v: np.full((cfg.mc_runs, steps, 4), np.nan) for v in variants
    }
    count_est = {v: np.full((cfg.mc_runs, steps), np.nan) for v in variants}
    timers = {v: _StageTimer() for v in variants}
    excluded = {v: 0 for v in variants}

    variant_index = {v: i for i, v in enumerate(variants)}
    truth = truth_shared
    for run in range(cfg.mc_runs):
        if not cfg.share_truth:
            truth = simulate_truth(
                scenario, np.random.default_rng(np.random.SeedSequence((cfg.seed, 0, run)))
            )
        frames = generate_measurements(
            truth, scenario, np.random.default_rng(np.random.SeedSequence((cfg.seed, 1, run)))
        )
        for f_kind in cfg.filters:
            daughter = build_filter(f_kind, cfg)
            for l_kind in cfg.likelihoods:
                variant = _variant_name(f_kind, l_kind)
                smc_cfg = SmcConfig(
                    n_particles=cfg.particles,
                    resample_fraction=cfg.resample_fraction,
                    sensor_noise=np.asarray(
                        _sensor_noise(scenario), dtype=float
                    ),
                    likelihood_kind=l_kind,
                )
                seed_tuple = (cfg.seed, 2, run, variant_index[variant])
                smc = SingleClusterSmc(daughter, smc_cfg, master_seed=_fold_seed(seed_tuple))
                particles = smc.init_particles()
                timer = timers[variant]
                try:
                    for k, frame in enumerate(frames):
                        particles, est = smc.step(
                            particles, frame.measurements, k, timer=timer
                        )
                        sensor_est[variant][run, k] = est.sensor_state
                        count_est[variant][run, k] = est.expected_count
                    timer.steps += steps
                except DegenerateFilterError:
                    sensor_est[variant][run, :] = np.nan
                    count_est[variant][run, :] = np.nan
                    excluded[variant] += 1
                if progress is not None:
                    progress(run, variant)

    card_truth = np.array(
        [truth_shared.alive_count(k) if truth_shared else np.nan for k in range(steps)],
        dtype=float,
    )
    if not cfg.share_truth:
        card_truth = np.full(steps, np.nan)
    rmse = {
        v: compute_rmse(sensor_est[v], (truth_shared or truth).sensor_track) for v in variants
    }
    with np.errstate(invalid="ignore"):
        card_mean = {v: np.nanmean(count_est[v], axis=0) for v in variants}
    return MetricsTable(
        steps=steps,
        variants=variants,
        rmse=rmse,
        card_truth=card_truth,
        card_mean=card_mean,
        runtimes={v: timers[v].per_step() for v in variants},
        excluded=excluded,
        sensor_estimates=sensor_est,
        count_estimates=count_est,
        sensor_truth=(truth_shared or truth).sensor_track,
    )


def _sensor_noise(scenario: ScenarioConfig):
    from .models import ncv_process_noise

    return ncv_process_noise(scenario.sensor_accel_noise, scenario.dt)


def _fold_seed(parts) -> int:
    # SeedSequence-mixed tuple folded to one integer master seed
    return int(np.random.SeedSequence(tuple(parts)).generate_state(1)[0])


_FMT = "%.17g"


def emit_csv(table: MetricsTable, out_dir) -> dict:
    """Write rmse.csv, card.csv and runtime.csv; returns the paths."""
    os.makedirs(out_dir, exist_ok=True)
    paths = {
        "rmse": os.path.join(out_dir, "rmse.csv"),
        "card": os.path.join(out_dir, "card.csv"),
        "runtime": os.path.join(out_dir, "runtime.csv"),
    }
    with open(paths["rmse"], "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["step"] + table.variants)
        for k in range(table.steps):
            writer.writerow([k] + [_FMT % table.rmse[v][k] for v in table.variants])
    with open(paths["card"], "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["step", "truth"] + table.variants)
        for k in range(table.steps):
            writer.writerow(
                [k, _FMT % table.card_truth[k]]
                + [_FMT % table.card_mean[v][k] for v in table.variants]
            )
    with open(paths["runtime"], "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["variant", "stage", "seconds"])
        for v in table.variants:
            for stage in ("prediction", "update", "likelihood"):
                writer.writerow([v, stage, _FMT % table.runtimes[v][stage]])
    return paths


def parse_metrics_csv(out_dir) -> tuple[dict, dict]:
    """Parse rmse.csv and card.csv back (used by the round-trip tests)."""
    rmse = {}
    with open(os.path.join(out_dir, "rmse.csv"), newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        cols = {name: [] for name in header[1:]}
        for row in reader:
            for name, val in zip(header[1:], row[1:]):
                cols[name].append(float(val))
        rmse = {name: np.array(vals) for name, vals in cols.items()}
    with open(os.path.join(out_dir, "card.csv"), newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        cols = {name: [] for name in header[1:]}
        for row in reader:
            for name, val in zip(header[1:], row[1:]):
                cols[name].append(float(val))
        card = {name: np.array(vals) for name, vals in cols.items()}
    return rmse, card
