"""Cardinality laws and combinatorial kernels shared by all filters.

Covers the Pochhammer symbol, the two-parameter Panjer family (binomial /
Poisson-limit / negative binomial) with its moment parameterization, finite
discrete cardinality distributions, elementary symmetric functions, and the
uniform-window clutter model.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln

# Relative width of the Poisson corridor |var - mean| <= EPS * max(mean, 1):
# the moment formulas for (alpha, beta) divide by (var - mean) and explode
# near equality.
POISSON_EPS = 1e-9

# Above this magnitude the direct Pochhammer product risks overflow and the
# log-gamma route is used instead.
_POCHHAMMER_DIRECT_N = 30


def pochhammer(zeta: float, n: int) -> float:
    """Rising factorial zeta (zeta+1) ... (zeta+n-1), with (zeta)_0 = 1."""
    if n < 0:
        raise ValueError("pochhammer order must be nonnegative")
    if n == 0:
        return 1.0
    if zeta > 0 and n > _POCHHAMMER_DIRECT_N:
        log_value = gammaln(zeta + n) - gammaln(zeta)
        return math.exp(log_value) if log_value < 709.0 else math.inf
    out = 1.0
    for i in range(n):
        out *= zeta + i
    return out


def log_pochhammer(zeta: float, n: int) -> tuple[float, float]:
    """Log-domain rising factorial.

    Returns (log abs, sign) with sign in {-1.0, 0.0, 1.0}; the log of an
    exactly-zero product is -inf.  Needed for large arguments (e.g. Panjer
    terms with many measurements) where the direct product overflows, and
    for negative zeta where factors change sign.
    """
    if n < 0:
        raise ValueError("pochhammer order must be nonnegative")
    if n == 0:
        return 0.0, 1.0
    if zeta > 0:
        return gammaln(zeta + n) - gammaln(zeta), 1.0
    log_abs = 0.0
    sign = 1.0
    for i in range(n):
        f = zeta + i
        if f == 0.0:
            return -math.inf, 0.0
        log_abs += math.log(abs(f))
        if f < 0:
            sign = -sign
    return log_abs, sign


@dataclass(frozen=True)
class PanjerParams:
    """Panjer cardinality parameters with their generating moments.

    The finite branch satisfies alpha = mean^2/(var-mean) and
    beta = mean/(var-mean); alpha and beta are +inf on the Poisson branch
    (var == mean within the POISSON_EPS corridor) and negative on the
    binomial branch (var < mean).
    """

    alpha: float
    beta: float
    mean: float
    variance: float

    @property
    def is_poisson(self) -> bool:
        return math.isinf(self.alpha)


def panjer_from_moments(mean: float, variance: float) -> PanjerParams:
    """Parameters of the Panjer law matching a given mean and variance."""
    if mean < 0 or variance < 0:
        raise ValueError("mean and variance must be nonnegative")
    if mean == 0 and variance > 0:
        raise ValueError("degenerate Panjer parameters: zero mean with positive variance")
    spread = variance - mean
    if abs(spread) <= POISSON_EPS * max(mean, 1.0):
        return PanjerParams(math.inf, math.inf, mean, mean)
    if variance == 0:
        # Binomial boundary p = 1 (deterministic count); not representable.
        raise ValueError("degenerate Panjer parameters: zero variance with positive mean")
    alpha = mean * mean / spread
    beta = mean / spread
    if alpha < 0:
        # Snap float-noise-level departures from an integer trial count: the
        # analytic pmf continuation amplifies them by |beta+1|^-n, seeding
        # spurious tail mass.  Genuine non-integer counts are kept as-is.
        snapped = round(alpha)
        if snapped < 0 and abs(alpha - snapped) <= 1e-9 * max(1.0, abs(alpha)):
            alpha = float(snapped)
            beta = alpha / mean
    return PanjerParams(alpha, beta, mean, variance)


def esf(values) -> np.ndarray:
    """Elementary symmetric functions e_0..e_n of nonnegative values.

    Computed by the stable Vieta-style convolution, not subset enumeration.
    A single global scale factor is extracted when the inputs exceed 1e100
    so intermediate sums stay in range; callers needing full log-domain
    safety use the kernel-backed log_esf instead.
    """
    v = np.asarray(values, dtype=float)
    if v.ndim != 1:
        raise ValueError("esf expects a flat value list")
    n = v.size
    e = np.zeros(n + 1)
    e[0] = 1.0
    if n == 0:
        return e
    scale = 1.0
    vmax = float(np.max(np.abs(v))) if n else 0.0
    if vmax > 1e100:
        scale = vmax
        v = v / scale
    for x in v:
        e[1:] = e[1:] + x * e[:-1]
    if scale != 1.0:
        e *= scale ** np.arange(n + 1)
    return e


class PoissonCardinality:
    """Poisson(rate) cardinality law."""

    def __init__(self, rate: float):
        if rate < 0:
            raise ValueError("Poisson rate must be nonnegative")
        self.rate = float(rate)

    def mean(self) -> float:
        return self.rate

    def variance(self) -> float:
        return self.rate

    def log_pmf(self, n: int) -> float:
        if n < 0:
            return -math.inf
        if self.rate == 0.0:
            return 0.0 if n == 0 else -math.inf
        return n * math.log(self.rate) - self.rate - gammaln(n + 1)

    def pmf(self, n: int) -> float:
        return math.exp(self.log_pmf(n))

    def sample(self, rng: np.random.Generator) -> int:
        return int(rng.poisson(self.rate))


class PanjerCardinality:
    """Panjer(alpha, beta) cardinality law (negative binomial / binomial).

    On the Poisson branch (infinite parameters) it delegates to the Poisson
    pmf at the stored mean.  The binomial branch accepts a non-integer
    implied trial count; the pmf is then defined by the same analytic
    formula (alpha)_n/n! (beta+1)^-n (beta/(beta+1))^alpha and may leave the
    probability simplex beyond n ~ |alpha|.
    """

    def __init__(self, params: PanjerParams):
        self.params = params

    @classmethod
    def from_moments(cls, mean: float, variance: float) -> "PanjerCardinality":
        return cls(panjer_from_moments(mean, variance))

    def mean(self) -> float:
        return self.params.mean

    def variance(self) -> float:
        return self.params.variance

    def pmf(self, n: int) -> float:
        if n < 0:
            return 0.0
        p = self.params
        if p.is_poisson:
            return PoissonCardinality(p.mean).pmf(n)
        a, b = p.alpha, p.beta
        lp, sign = log_pochhammer(a, n)
        if sign == 0.0:
            return 0.0
        # (beta+1)^-n and (beta/(beta+1))^alpha, sign-tracked for the
        # binomial branch where beta + 1 < 0.
        b1 = b + 1.0
        lp -= gammaln(n + 1)
        lp -= n * math.log(abs(b1))
        if b1 < 0 and n % 2 == 1:
            sign = -sign
        lp += a * math.log(b / b1)
        return sign * math.exp(lp)

    def log_pmf(self, n: int) -> float:
        val = self.pmf(n)
        return math.log(val) if val > 0 else -math.inf

    def sample(self, rng: np.random.Generator) -> int:
        p = self.params
        if p.is_poisson:
            return int(rng.poisson(p.mean))
        if p.alpha > 0:
            # Negative binomial: numpy's (n, p) with p = beta/(beta+1).
            return int(rng.negative_binomial(p.alpha, p.beta / (p.beta + 1.0)))
        # Binomial branch: inverse-cdf on the analytic pmf table.
        n_cap = int(math.ceil(-p.alpha)) + 1
        table = np.array([max(self.pmf(k), 0.0) for k in range(n_cap + 1)])
        table /= table.sum()
        return int(rng.choice(n_cap + 1, p=table))


class DiscreteCardinality:
    """Cardinality law given by an explicit probability table on 0..n_max."""

    def __init__(self, rho):
        rho = np.asarray(rho, dtype=float)
        if rho.ndim != 1 or rho.size == 0:
            raise ValueError("discrete cardinality needs a 1-d probability table")
        if np.any(rho < 0):
            raise ValueError("discrete cardinality probabilities must be nonnegative")
        total = rho.sum()
        if total <= 0:
            raise ValueError("discrete cardinality table sums to zero")
        self.rho = rho / total

    def mean(self) -> float:
        return float(np.arange(self.rho.size) @ self.rho)

    def variance(self) -> float:
        n = np.arange(self.rho.size)
        m = self.mean()
        return float((n - m) ** 2 @ self.rho)

    def pmf(self, n: int) -> float:
        if 0 <= n < self.rho.size:
            return float(self.rho[n])
        return 0.0

    def log_pmf(self, n: int) -> float:
        val = self.pmf(n)
        return math.log(val) if val > 0 else -math.inf

    def sample(self, rng: np.random.Generator) -> int:
        return int(rng.choice(self.rho.size, p=self.rho))


CardinalityModel = PoissonCardinality | PanjerCardinality | DiscreteCardinality


def cardinality_pmf(model: CardinalityModel, n: int) -> float:
    return model.pmf(n)


def sample_cardinality(model: CardinalityModel, rng: np.random.Generator) -> int:
    return model.sample(rng)


# Truncations losing more probability mass than this are flagged.
TRUNCATION_WARN_MASS = 1e-6


@dataclass
class CardinalityDist:
    """Finite cardinality distribution on 0..n_max (rho sums to one)."""

    rho: np.ndarray
    lost_mass: float = 0.0
    truncation_warning: bool = field(default=False)

    def __post_init__(self):
        self.rho = np.asarray(self.rho, dtype=float)
        total = self.rho.sum()
        if total <= 0:
            raise ValueError("cardinality distribution has no mass")
        self.rho = self.rho / total

    @property
    def n_max(self) -> int:
        return self.rho.size - 1

    def mean(self) -> float:
        return float(np.arange(self.rho.size) @ self.rho)

    def variance(self) -> float:
        n = np.arange(self.rho.size)
        m = self.mean()
        return float((n - m) ** 2 @ self.rho)


def truncate_to_dist(model: CardinalityModel, n_max: int) -> CardinalityDist:
    """Restrict a cardinality law to 0..n_max and renormalize.

    The discarded tail mass is reported on the result; losing more than
    TRUNCATION_WARN_MASS raises the warning flag.  Analytic pmf values that
    fall below zero (non-integer binomial branch) are clipped and counted
    as lost mass.
    """
    if n_max < 1:
        raise ValueError("n_max must be positive")
    if isinstance(model, DiscreteCardinality) and model.rho.size <= n_max + 1:
        rho = np.zeros(n_max + 1)
        rho[: model.rho.size] = model.rho
        return CardinalityDist(rho, lost_mass=0.0, truncation_warning=False)
    raw = np.array([model.pmf(n) for n in range(n_max + 1)])
    clipped = np.clip(raw, 0.0, None)
    lost = 1.0 - clipped.sum()
    return CardinalityDist(
        clipped,
        lost_mass=lost,
        truncation_warning=bool(lost > TRUNCATION_WARN_MASS),
    )


@dataclass(frozen=True)
class Window:
    """Axis-aligned rectangle in measurement space (meters)."""

    lo: tuple[float, float]
    hi: tuple[float, float]

    def __post_init__(self):
        if self.hi[0] <= self.lo[0] or self.hi[1] <= self.lo[1]:
            raise ValueError("window must have positive extent")

    @property
    def area(self) -> float:
        return (self.hi[0] - self.lo[0]) * (self.hi[1] - self.lo[1])

    @classmethod
    def centered(cls, width: float, height: float) -> "Window":
        return cls((-width / 2.0, -height / 2.0), (width / 2.0, height / 2.0))

    def sample(self, rng: np.random.Generator, count: int) -> np.ndarray:
        lo = np.asarray(self.lo)
        hi = np.asarray(self.hi)
        return lo + rng.random((count, 2)) * (hi - lo)


class ClutterModel:
    """False-alarm model: a cardinality law plus a uniform spatial density.

    Clutter positions are sampled uniformly over the window; the density
    value 1/area is, however, evaluated as a constant over the whole
    measurement space so that drifted target-originated measurements
    outside the window keep finite likelihoods.
    """

    def __init__(self, cardinality: CardinalityModel, window: Window):
        self.cardinality = cardinality
        self.window = window
        self.spatial_density = 1.0 / window.area
        self.log_spatial_density = -math.log(window.area)

    @property
    def rate(self) -> float:
        return self.cardinality.mean()

    def intensity(self, z=None) -> float:
        """Clutter intensity mu_c(z) = rate * s_c(z)."""
        return self.rate * self.spatial_density

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        count = self.cardinality.sample(rng)
        return self.window.sample(rng, count)
