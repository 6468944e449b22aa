"""Ground-truth and measurement generation for the benchmark experiments.

Three scripted scenarios:

* e1 -- targets born Poisson(4) per step anywhere in the window, geometric
  lifetimes (survival 0.95), NCV motion with 0.3 m/s^2 acceleration noise.
* e2-death -- 15 targets at the initial step; 14 removed after step 15.
* e2-birth -- 15 targets at the initial step; 15 more added after step 15.

The sensor follows its own NCV track from the origin; its position drifts
every measurement additively.  Filters never see provenance tags (kept for
diagnostics only).
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .cardinality import Window
from .models import ncv_transition

EXPERIMENTS = ("e1", "e2-death", "e2-birth")


@dataclass
class ScenarioConfig:
    """All scenario parameters as named keys (defaults: experiment 1)."""

    experiment: str = "e1"
    steps: int = 100
    dt: float = 1.0
    target_accel_noise: float = 0.3  # m/s^2
    sensor_accel_noise: float = 0.2  # m/s^2
    p_s_true: float = 0.95
    p_d_true: float = 0.99
    birth_mean: float = 4.0  # Poisson births per step (e1)
    clutter_rate: float = 10.0
    meas_noise: float = 0.1  # m, per axis
    init_vel_noise: float = 0.1  # m/s, per axis
    window: Window = field(default_factory=lambda: Window.centered(200.0, 200.0))

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ValueError(f"unknown experiment {self.experiment!r}")
        if not 0 <= self.p_d_true <= 1 or not 0 <= self.p_s_true <= 1:
            raise ValueError("probabilities must lie in [0, 1]")
        if min(self.birth_mean, self.clutter_rate, self.steps) < 0:
            raise ValueError("rates and step counts must be nonnegative")


def experiment1(**overrides) -> ScenarioConfig:
    return ScenarioConfig(**{"experiment": "e1", **overrides})


def experiment2_death(**overrides) -> ScenarioConfig:
    defaults = dict(experiment="e2-death", target_accel_noise=0.1)
    defaults.update(overrides)
    return ScenarioConfig(**defaults)


def experiment2_birth(**overrides) -> ScenarioConfig:
    defaults = dict(experiment="e2-birth", target_accel_noise=0.1)
    defaults.update(overrides)
    return ScenarioConfig(**defaults)


# Step-15 discontinuity of the second experiment (0-based index of the
# first step with the changed population).
E2_SWITCH_STEP = 15
E2_INITIAL_TARGETS = 15


@dataclass
class TargetTrack:
    """One target: alive on steps birth_step .. death_step - 1."""

    target_id: int
    birth_step: int
    death_step: int
    states: np.ndarray  # (death_step - birth_step, 4)

    def state_at(self, step: int):
        if self.birth_step <= step < self.death_step:
            return self.states[step - self.birth_step]
        return None


@dataclass
class ScenarioTruth:
    sensor_track: np.ndarray  # (steps, 4)
    tracks: list[TargetTrack]
    steps: int

    def alive_count(self, step: int) -> int:
        return sum(1 for t in self.tracks if t.birth_step <= step < t.death_step)

    def alive_states(self, step: int) -> np.ndarray:
        states = [t.state_at(step) for t in self.tracks]
        states = [s for s in states if s is not None]
        return np.stack(states) if states else np.zeros((0, 4))


@dataclass
class MeasurementFrame:
    """Measurements of one step; provenance (target id, -1 for clutter)
    is diagnostic only and never read by the filters."""

    step: int
    measurements: np.ndarray  # (m, 2)
    provenance: np.ndarray  # (m,)


def _noise_gain(dt: float) -> np.ndarray:
    # white-noise-acceleration input matrix (the process covariance
    # G a^2 G' is rank-2, so sampling goes through G directly)
    return np.array(
        [
            [0.5 * dt * dt, 0.0],
            [0.0, 0.5 * dt * dt],
            [dt, 0.0],
            [0.0, dt],
        ]
    )


def _propagate(rng, state, F, accel_noise, dt, n_steps):
    out = np.zeros((n_steps, 4))
    G = _noise_gain(dt)
    x = state.copy()
    for k in range(n_steps):
        out[k] = x
        x = F @ x + G @ (accel_noise * rng.standard_normal(2))
    return out


def _new_target_state(cfg: ScenarioConfig, rng) -> np.ndarray:
    pos = cfg.window.sample(rng, 1)[0]
    vel = rng.standard_normal(2) * cfg.init_vel_noise
    return np.concatenate([pos, vel])


def simulate_truth(cfg: ScenarioConfig, rng: np.random.Generator) -> ScenarioTruth:
    """Ground-truth sensor and target trajectories for one scenario."""
    F = ncv_transition(cfg.dt)
    sensor = _propagate(rng, np.zeros(4), F, cfg.sensor_accel_noise, cfg.dt, cfg.steps)

    tracks: list[TargetTrack] = []
    next_id = 0
    if cfg.experiment == "e1":
        for step in range(cfg.steps):
            for _ in range(rng.poisson(cfg.birth_mean)):
                # geometric lifetime via per-step survival
                length = 1
                while step + length < cfg.steps and rng.random() < cfg.p_s_true:
                    length += 1
                states = _propagate(rng, _new_target_state(cfg, rng), F, cfg.target_accel_noise, cfg.dt, length)
                tracks.append(TargetTrack(next_id, step, step + length, states))
                next_id += 1
    else:
        keep_after = 1 if cfg.experiment == "e2-death" else E2_INITIAL_TARGETS
        for i in range(E2_INITIAL_TARGETS):
            death = cfg.steps if i < keep_after else min(E2_SWITCH_STEP, cfg.steps)
            states = _propagate(rng, _new_target_state(cfg, rng), F, cfg.target_accel_noise, cfg.dt, death)
            tracks.append(TargetTrack(next_id, 0, death, states))
            next_id += 1
        if cfg.experiment == "e2-birth" and cfg.steps > E2_SWITCH_STEP:
            for _ in range(E2_INITIAL_TARGETS):
                length = cfg.steps - E2_SWITCH_STEP
                states = _propagate(rng, _new_target_state(cfg, rng), F, cfg.target_accel_noise, cfg.dt, length)
                tracks.append(TargetTrack(next_id, E2_SWITCH_STEP, cfg.steps, states))
                next_id += 1
    return ScenarioTruth(sensor, tracks, cfg.steps)


def generate_measurements(
    truth: ScenarioTruth, cfg: ScenarioConfig, rng: np.random.Generator
) -> list[MeasurementFrame]:
    """Detections (shifted by the sensor drift, noised) plus uniform clutter."""
    frames = []
    for step in range(truth.steps):
        drift = truth.sensor_track[step, :2]
        zs = []
        tags = []
        for track in truth.tracks:
            state = track.state_at(step)
            if state is None or rng.random() >= cfg.p_d_true:
                continue
            z = state[:2] + drift + rng.standard_normal(2) * cfg.meas_noise
            zs.append(z)
            tags.append(track.target_id)
        n_clutter = rng.poisson(cfg.clutter_rate)
        for z in cfg.window.sample(rng, n_clutter):
            zs.append(z)
            tags.append(-1)
        Z = np.array(zs).reshape(-1, 2)
        tags = np.array(tags, dtype=int)
        order = rng.permutation(len(tags))
        frames.append(MeasurementFrame(step, Z[order], tags[order]))
    return frames


_FLOAT_FMT = "%.17g"


def export_truth(truth: ScenarioTruth, path) -> None:
    """CSV columns: step, id, x, y, vx, vy (sensor has id -1)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["step", "id", "x", "y", "vx", "vy"])
        for step in range(truth.steps):
            row = truth.sensor_track[step]
            writer.writerow([step, -1] + [_FLOAT_FMT % v for v in row])
            for track in truth.tracks:
                state = track.state_at(step)
                if state is not None:
                    writer.writerow([step, track.target_id] + [_FLOAT_FMT % v for v in state])


def import_truth(path) -> ScenarioTruth:
    sensor_rows = {}
    per_target: dict[int, dict[int, np.ndarray]] = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != ["step", "id", "x", "y", "vx", "vy"]:
            raise ValueError("unexpected truth CSV header")
        for row in reader:
            step, tid = int(row[0]), int(row[1])
            state = np.array([float(v) for v in row[2:6]])
            if tid == -1:
                sensor_rows[step] = state
            else:
                per_target.setdefault(tid, {})[step] = state
    steps = max(sensor_rows) + 1
    sensor = np.stack([sensor_rows[k] for k in range(steps)])
    tracks = []
    for tid in sorted(per_target):
        entries = per_target[tid]
        birth, death = min(entries), max(entries) + 1
        states = np.stack([entries[k] for k in range(birth, death)])
        tracks.append(TargetTrack(tid, birth, death, states))
    return ScenarioTruth(sensor, tracks, steps)


def export_frames(frames: list[MeasurementFrame], path) -> None:
    """CSV columns: step, x, y, provenance."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["step", "x", "y", "provenance"])
        for frame in frames:
            for z, tag in zip(frame.measurements, frame.provenance):
                writer.writerow([frame.step, _FLOAT_FMT % z[0], _FLOAT_FMT % z[1], int(tag)])


def import_frames(path, steps: int | None = None) -> list[MeasurementFrame]:
    rows: dict[int, list] = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != ["step", "x", "y", "provenance"]:
            raise ValueError("unexpected frames CSV header")
        for row in reader:
            rows.setdefault(int(row[0]), []).append(
                (float(row[1]), float(row[2]), int(row[3]))
            )
    n_steps = steps if steps is not None else (max(rows) + 1 if rows else 0)
    frames = []
    for step in range(n_steps):
        entries = rows.get(step, [])
        Z = np.array([(x, y) for x, y, _ in entries]).reshape(-1, 2)
        tags = np.array([tag for _, _, tag in entries], dtype=int)
        frames.append(MeasurementFrame(step, Z, tags))
    return frames
