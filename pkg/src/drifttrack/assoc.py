"""Association-based alternative multi-object likelihood.

Instead of marginalizing over the predicted intensity, this likelihood
extracts point estimates from it and sums over explicit injective
measurement-to-target associations.  Feasibility is restricted by a
single-object likelihood gate and a connected-component analysis with
capped group sizes; groups contribute independent factors.

Poisson clutter is required (the clutter set density has the
exp(-rate) * prod intensity form) and p_d must be below one (matched
terms divide by 1 - p_d).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .cardinality import ClutterModel, PoissonCardinality
from .errors import ModelMismatchError
from .gm import GaussianMixture
from .models import ObservationModel

_LOG_2PI = math.log(2.0 * math.pi)


@dataclass
class ExtractedTargets:
    """Point estimates taken from an intensity mixture (one per component
    whose weight exceeds the extraction threshold)."""

    states: np.ndarray  # (k, d)

    @property
    def count(self) -> int:
        return self.states.shape[0]


@dataclass(frozen=True)
class GatingConfig:
    """Feasibility restrictions for the association sum."""

    tau0: float = 1e-7  # single-object likelihood gate, first step
    tau: float = 1e-3  # gate for subsequent steps
    max_group_measurements: int = 3
    max_group_targets: int = 3

    def __post_init__(self):
        if self.tau0 <= 0 or self.tau <= 0:
            raise ValueError("gate thresholds must be positive")
        if self.max_group_measurements < 1 or self.max_group_targets < 1:
            raise ValueError("group caps must be at least one")

    def threshold(self, first_frame: bool) -> float:
        return self.tau0 if first_frame else self.tau


EXTRACTION_WEIGHT = 0.5


def extract_targets(mixture: GaussianMixture) -> ExtractedTargets:
    """Means of components heavier than the extraction threshold, one each."""
    if mixture.size == 0:
        return ExtractedTargets(np.zeros((0, mixture.dim)))
    keep = mixture.weights > EXTRACTION_WEIGHT
    return ExtractedTargets(mixture.means[keep].copy())


@dataclass(frozen=True)
class AssociationMap:
    """One injective partial association: measurement index -> target index
    (unassigned measurements fall to clutter)."""

    assignments: tuple  # ((z_idx, t_idx), ...)

    def target_of(self, z_idx: int):
        for z, t in self.assignments:
            if z == z_idx:
                return t
        return None


@dataclass
class AssociationGroup:
    """One feasibility group: target indices, measurement indices, and the
    gated (target, measurement) -> log single-object-likelihood edges."""

    target_idx: list
    meas_idx: list
    edges: dict = field(default_factory=dict)  # (t, z) -> log p_d * l(z|x_t)

    def associations(self):
        """All injective partial maps along gated edges (incl. the empty one)."""

        def recurse(i, used, acc):
            if i == len(self.meas_idx):
                yield AssociationMap(tuple(acc))
                return
            z = self.meas_idx[i]
            yield from recurse(i + 1, used, acc)  # clutter
            for t in self.target_idx:
                if t not in used and (t, z) in self.edges:
                    yield from recurse(i + 1, used | {t}, acc + [(z, t)])

        yield from recurse(0, frozenset(), [])


def _single_object_log_liks(targets: ExtractedTargets, Z, obs: ObservationModel, sensor_state):
    """log N(z - drift; H x, R) for every target/measurement pair."""
    Zs = obs.shift_measurements(np.asarray(Z, dtype=float), sensor_state)
    if targets.count == 0 or Zs.shape[0] == 0:
        return np.zeros((targets.count, Zs.shape[0]))
    pred = targets.states @ obs.H.T
    diff = Zs[None, :, :] - pred[:, None, :]
    Rinv = np.linalg.inv(obs.R)
    _, logdet = np.linalg.slogdet(obs.R)
    quad = np.einsum("tmi,ij,tmj->tm", diff, Rinv, diff)
    return -0.5 * (quad + logdet + Zs.shape[1] * _LOG_2PI)


class _UnionFind:
    def __init__(self, n):
        self.parent = list(range(n))

    def find(self, a):
        while self.parent[a] != a:
            self.parent[a] = self.parent[self.parent[a]]
            a = self.parent[a]
        return a

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[max(ra, rb)] = min(ra, rb)


def gate_and_cluster(
    targets: ExtractedTargets,
    Z,
    obs: ObservationModel,
    sensor_state,
    cfg: GatingConfig = GatingConfig(),
    first_frame: bool = False,
) -> list[AssociationGroup]:
    """Gated edges grouped by connected components, trimmed to the caps.

    Oversized components keep their highest-likelihood edges (greedy,
    respecting both caps); vertices losing every edge drop out of the
    association sum and fall back to clutter / missed-detection handling.
    """
    Z = np.asarray(Z, dtype=float).reshape(-1, obs.H.shape[0])
    m = Z.shape[0]
    log_l = _single_object_log_liks(targets, Z, obs, sensor_state)
    log_pd = math.log(obs.p_d) if obs.p_d > 0 else -math.inf
    log_gate = math.log(cfg.threshold(first_frame))
    edges = []
    for t in range(targets.count):
        for z in range(m):
            lw = log_pd + log_l[t, z]
            if lw > log_gate:
                edges.append((lw, t, z))
    if not edges:
        return []
    uf = _UnionFind(targets.count + m)
    for _, t, z in edges:
        uf.union(t, targets.count + z)
    comp_edges: dict[int, list] = {}
    for e in edges:
        key = uf.find(e[1])
        comp_edges.setdefault(key, []).append(e)
    groups = []
    for key in sorted(comp_edges):
        comp = comp_edges[key]
        comp.sort(key=lambda e: (-e[0], e[1], e[2]))
        kept_t: list = []
        kept_z: list = []
        kept = {}
        for lw, t, z in comp:
            t_ok = t in kept_t or len(kept_t) < cfg.max_group_targets
            z_ok = z in kept_z or len(kept_z) < cfg.max_group_measurements
            if t_ok and z_ok:
                if t not in kept_t:
                    kept_t.append(t)
                if z not in kept_z:
                    kept_z.append(z)
                kept[(t, z)] = lw
        groups.append(AssociationGroup(sorted(kept_t), sorted(kept_z), kept))
    return groups


def _group_log_sum(group: AssociationGroup, log_match: dict) -> float:
    """log of the sum over injective partial associations within a group.

    Every measurement either maps to an unused gated target (contributing
    its log-ratio weight) or to clutter (factor one).
    """
    meas = group.meas_idx
    used: set = set()

    def recurse(i: int) -> float:
        if i == len(meas):
            return 1.0
        z = meas[i]
        total = recurse(i + 1)  # clutter assignment
        for t in group.target_idx:
            if t in used or (t, z) not in log_match:
                continue
            used.add(t)
            total += math.exp(log_match[(t, z)]) * recurse(i + 1)
            used.discard(t)
        return total

    return math.log(recurse(0))


def l2_log_likelihood(
    targets: ExtractedTargets,
    Z,
    obs: ObservationModel,
    clutter: ClutterModel,
    sensor_state,
    cfg: GatingConfig = GatingConfig(),
    first_frame: bool = False,
) -> float:
    """Association-sum likelihood over extracted targets (log domain)."""
    if not isinstance(clutter.cardinality, PoissonCardinality):
        raise ModelMismatchError("the association likelihood requires Poisson clutter")
    if obs.p_d >= 1.0:
        raise ModelMismatchError("the association likelihood requires p_d < 1")
    Z = np.asarray(Z, dtype=float).reshape(-1, obs.H.shape[0])
    m = Z.shape[0]
    lam = clutter.rate
    log_mu_c = math.log(lam) + math.log(clutter.spatial_density) if lam > 0 else -math.inf
    # clutter set density p_c(Z) and per-target missed factors
    out = -lam + m * log_mu_c + targets.count * math.log1p(-obs.p_d)
    groups = gate_and_cluster(targets, Z, obs, sensor_state, cfg, first_frame)
    if not groups:
        return out
    log_l = _single_object_log_liks(targets, Z, obs, sensor_state)
    log_pd = math.log(obs.p_d)
    denom = math.log1p(-obs.p_d) + log_mu_c
    for group in groups:
        log_match = {
            (t, z): log_pd + log_l[t, z] - denom for (t, z) in group.edges
        }
        out += _group_log_sum(group, log_match)
    return out
