"""Univariate laws and heavy-tail diagnostics.

Every law exposes ``sample``, ``tail`` (survival function), ``cdf``, ``ppf``,
``isf`` (inverse survival, accurate deep in the tail), ``moment(p) = E[Z^p]`` and ``laplace(z) = E[exp(-z Z)]``.  Divergent moments and
transforms are reported as ``inf``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence, Tuple, Union

import numpy as np
from scipy import integrate, special

DEFAULT_LADDER = (0.05, 0.01, 0.001)
DIVERGENCE_SENTINEL = 50.0


def _uniform_open(rng: np.random.Generator, n: int) -> np.ndarray:
    # (0, 1]: safe for inverse transforms with poles at 0
    return 1.0 - rng.random(n)


def _quad_laplace(law, z: float) -> float:
    if z == 0:
        return 1.0
    val, _ = integrate.quad(lambda u: math.exp(-z * float(law.ppf(u))), 0.0, 1.0, limit=200)
    return val


def _numeric_laplace(law, z: float) -> float:
    # right tail heavier than any exponential: diverges for z < 0
    return math.inf if z < 0 else _quad_laplace(law, z)


@dataclass(frozen=True)
class Pareto:
    """Pareto law on ``[scale, inf)`` with tail ``(x/scale)^-alpha``."""

    alpha: float
    scale: float = 1.0

    def __post_init__(self):
        if not (self.alpha > 0 and self.scale > 0):
            raise ValueError("Pareto requires alpha > 0 and scale > 0")

    def sample(self, rng, n):
        return self.scale * _uniform_open(rng, n) ** (-1.0 / self.alpha)

    def tail(self, x):
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore"):
            return np.where(x < self.scale, 1.0, (np.maximum(x, self.scale) / self.scale) ** -self.alpha)

    def cdf(self, x):
        return 1.0 - self.tail(x)

    def ppf(self, u):
        return self.scale * (1.0 - np.asarray(u, dtype=float)) ** (-1.0 / self.alpha)

    def isf(self, q):
        return self.scale * np.asarray(q, dtype=float) ** (-1.0 / self.alpha)

    def moment(self, p):
        if p >= self.alpha:
            return math.inf
        return self.alpha * self.scale**p / (self.alpha - p)

    def laplace(self, z):
        return _numeric_laplace(self, z)

    @property
    def support_min(self) -> float:
        return self.scale


@dataclass(frozen=True)
class LogNormal:
    """``exp(N(location, scale^2))``."""

    location: float = 0.0
    scale: float = 1.0

    def __post_init__(self):
        if not self.scale > 0:
            raise ValueError("LogNormal requires scale > 0")

    def sample(self, rng, n):
        return np.exp(self.location + self.scale * rng.standard_normal(n))

    def tail(self, x):
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore"):
            z = (np.log(np.maximum(x, 0.0)) - self.location) / self.scale
        return special.ndtr(-z)

    def cdf(self, x):
        return 1.0 - self.tail(x)

    def ppf(self, u):
        return np.exp(self.location + self.scale * special.ndtri(np.asarray(u, dtype=float)))

    def isf(self, q):
        return np.exp(self.location - self.scale * special.ndtri(np.asarray(q, dtype=float)))

    def moment(self, p):
        return math.exp(p * self.location + 0.5 * p * p * self.scale**2)

    def laplace(self, z):
        return _numeric_laplace(self, z)

    support_min = 0.0


@dataclass(frozen=True)
class Exponential:
    rate: float = 1.0

    def __post_init__(self):
        if not self.rate > 0:
            raise ValueError("Exponential requires rate > 0")

    def sample(self, rng, n):
        return rng.standard_exponential(n) / self.rate

    def tail(self, x):
        x = np.asarray(x, dtype=float)
        return np.exp(-self.rate * np.maximum(x, 0.0))

    def cdf(self, x):
        return 1.0 - self.tail(x)

    def ppf(self, u):
        return -np.log1p(-np.asarray(u, dtype=float)) / self.rate

    def isf(self, q):
        return -np.log(np.asarray(q, dtype=float)) / self.rate

    def moment(self, p):
        return math.gamma(p + 1.0) / self.rate**p

    def laplace(self, z):
        return self.rate / (self.rate + z) if z > -self.rate else math.inf

    support_min = 0.0


@dataclass(frozen=True)
class Gamma:
    shape: float
    rate: float = 1.0

    def __post_init__(self):
        if not (self.shape > 0 and self.rate > 0):
            raise ValueError("Gamma requires shape > 0 and rate > 0")

    def sample(self, rng, n):
        return rng.standard_gamma(self.shape, n) / self.rate

    def tail(self, x):
        x = np.asarray(x, dtype=float)
        return special.gammaincc(self.shape, self.rate * np.maximum(x, 0.0))

    def cdf(self, x):
        return 1.0 - self.tail(x)

    def ppf(self, u):
        return special.gammaincinv(self.shape, np.asarray(u, dtype=float)) / self.rate

    def isf(self, q):
        return special.gammainccinv(self.shape, np.asarray(q, dtype=float)) / self.rate

    def moment(self, p):
        return math.exp(special.gammaln(self.shape + p) - special.gammaln(self.shape)) / self.rate**p

    def laplace(self, z):
        return (self.rate / (self.rate + z)) ** self.shape if z > -self.rate else math.inf

    support_min = 0.0


@dataclass(frozen=True)
class Weibull:
    """Tail ``exp(-(x/scale)^shape)``; heavy but not dominatedly varying for shape < 1."""

    shape: float
    scale: float = 1.0

    def __post_init__(self):
        if not (self.shape > 0 and self.scale > 0):
            raise ValueError("Weibull requires shape > 0 and scale > 0")

    def sample(self, rng, n):
        return self.scale * rng.standard_exponential(n) ** (1.0 / self.shape)

    def tail(self, x):
        x = np.asarray(x, dtype=float)
        return np.exp(-((np.maximum(x, 0.0) / self.scale) ** self.shape))

    def cdf(self, x):
        return 1.0 - self.tail(x)

    def ppf(self, u):
        return self.scale * (-np.log1p(-np.asarray(u, dtype=float))) ** (1.0 / self.shape)

    def isf(self, q):
        return self.scale * (-np.log(np.asarray(q, dtype=float))) ** (1.0 / self.shape)

    def moment(self, p):
        return self.scale**p * math.gamma(1.0 + p / self.shape)

    def laplace(self, z):
        finite = z >= 0 or self.shape > 1 or (self.shape == 1 and z > -1.0 / self.scale)
        return _quad_laplace(self, z) if finite else math.inf

    support_min = 0.0


@dataclass(frozen=True)
class Degenerate:
    """Point mass at ``value``."""

    value: float

    def sample(self, rng, n):
        return np.full(n, float(self.value))

    def tail(self, x):
        return np.where(np.asarray(x, dtype=float) < self.value, 1.0, 0.0)

    def cdf(self, x):
        return 1.0 - self.tail(x)

    def ppf(self, u):
        return np.full(np.shape(u), float(self.value))

    def isf(self, q):
        return np.full(np.shape(q), float(self.value))

    def moment(self, p):
        if self.value == 0 and p <= 0:
            return math.inf
        return float(self.value) ** p

    def laplace(self, z):
        return math.exp(-z * self.value)

    @property
    def support_min(self) -> float:
        return float(self.value)


@dataclass(frozen=True)
class Uniform:
    low: float
    high: float

    def __post_init__(self):
        if not self.high > self.low:
            raise ValueError("Uniform requires high > low")

    def sample(self, rng, n):
        return rng.uniform(self.low, self.high, n)

    def tail(self, x):
        x = np.asarray(x, dtype=float)
        return np.clip((self.high - x) / (self.high - self.low), 0.0, 1.0)

    def cdf(self, x):
        return 1.0 - self.tail(x)

    def ppf(self, u):
        return self.low + (self.high - self.low) * np.asarray(u, dtype=float)

    def isf(self, q):
        return self.high - (self.high - self.low) * np.asarray(q, dtype=float)

    def moment(self, p):
        a, b = self.low, self.high
        if a < 0:
            raise ValueError("moments are only provided for nonnegative support")
        if p == -1:
            return math.inf if a == 0 else (math.log(b) - math.log(a)) / (b - a)
        if a == 0 and p <= -1:
            return math.inf
        return (b ** (p + 1) - a ** (p + 1)) / ((p + 1) * (b - a))

    def laplace(self, z):
        if z == 0:
            return 1.0
        a, b = self.low, self.high
        return (math.exp(-z * a) - math.exp(-z * b)) / (z * (b - a))

    @property
    def support_min(self) -> float:
        return float(self.low)


@dataclass(frozen=True)
class Normal:
    """Gaussian law; only used as a jump-size law for return processes."""

    mean: float = 0.0
    sd: float = 1.0

    def __post_init__(self):
        if not self.sd >= 0:
            raise ValueError("Normal requires sd >= 0")

    def sample(self, rng, n):
        return self.mean + self.sd * rng.standard_normal(n)

    def tail(self, x):
        if self.sd == 0:
            return np.where(np.asarray(x, dtype=float) < self.mean, 1.0, 0.0)
        return special.ndtr((self.mean - np.asarray(x, dtype=float)) / self.sd)

    def cdf(self, x):
        return 1.0 - self.tail(x)

    def ppf(self, u):
        return self.mean + self.sd * special.ndtri(np.asarray(u, dtype=float))

    def isf(self, q):
        return self.mean - self.sd * special.ndtri(np.asarray(q, dtype=float))

    def moment(self, p):
        raise ValueError("power moments are not defined for a signed law")

    def laplace(self, z):
        return math.exp(-z * self.mean + 0.5 * z * z * self.sd**2)

    support_min = -math.inf


UnivariateLaw = Union[Pareto, LogNormal, Exponential, Gamma, Weibull, Degenerate, Uniform, Normal]


def mean(law: UnivariateLaw) -> float:
    if isinstance(law, Normal):
        return law.mean
    return law.moment(1.0)


def has_moment_beyond(law: UnivariateLaw, alpha: float) -> bool:
    """True when ``E[Z^p] < inf`` for some ``p > alpha`` (known analytically)."""
    if isinstance(law, Pareto):
        return law.alpha > alpha
    if isinstance(law, Normal):
        return False
    if isinstance(law, Uniform) and law.low < 0:
        return False
    return True


# --------------------------------------------------------------------------
# diagnostics


class InsufficientTailError(ValueError):
    """Too few exceedances above the diagnostic threshold."""


@dataclass(frozen=True)
class TailDiagnostics:
    matuszewska_upper: float
    hill_index: float
    sample_size: int
    hill_band: Tuple[float, float]
    ratio_by_v: Tuple[float, ...] = ()

    @property
    def dominated(self) -> bool:
        return math.isfinite(self.matuszewska_upper)


def hill_estimator(samples, fraction: float = 0.01) -> Tuple[float, Tuple[float, float]]:
    """Hill estimate of the tail index from the top ``fraction`` order statistics.

    Returns the estimate and an asymptotic 95% band ``alpha * (1 +- 1.96/sqrt(k))``.
    """
    x = np.sort(np.asarray(samples, dtype=float))
    k = int(len(x) * fraction)
    if k < 10:
        raise InsufficientTailError(f"only {k} order statistics in the tail")
    top = x[-k:]
    ref = x[-k - 1]
    if ref <= 0:
        raise InsufficientTailError("tail threshold must be positive")
    est = 1.0 / np.mean(np.log(top / ref))
    half = 1.96 / math.sqrt(k)
    return float(est), (float(est * (1 - half)), float(est * (1 + half)))


def _exceedance_ratio(sorted_x: np.ndarray, thresholds: np.ndarray, factor: float) -> np.ndarray:
    n = len(sorted_x)
    base = n - np.searchsorted(sorted_x, thresholds, side="right")
    moved = n - np.searchsorted(sorted_x, factor * thresholds, side="right")
    return moved / base


def _ladder_thresholds(sorted_x: np.ndarray, ladder: Sequence[float]) -> np.ndarray:
    n = len(sorted_x)
    thresholds = np.array([sorted_x[int(n * (1 - q))] for q in ladder])
    count = n - np.searchsorted(sorted_x, thresholds.max(), side="right")
    if count < 100:
        raise InsufficientTailError(f"only {count} exceedances at the highest threshold")
    return thresholds


def estimate_matuszewska(samples, v_grid: Sequence[float] = (2.0, 4.0, 8.0),
                         ladder: Sequence[float] = DEFAULT_LADDER,
                         hill_fraction: float = 0.01) -> TailDiagnostics:
    """Empirical upper Matuszewska index.

    For each ``v`` the lower limit of ``Vbar(v x)/Vbar(x)`` is approximated by
    the minimum of the empirical ratio over the threshold ladder (upper
    quantile levels).  The index estimate is ``-min_v ln(ratio_v)/ln v``;
    estimates above ``DIVERGENCE_SENTINEL`` (light tails) are reported as
    ``inf``.
    """
    x = np.sort(np.asarray(samples, dtype=float))
    if len(x) < 10_000:
        raise InsufficientTailError("at least 1e4 samples are required")
    v_grid = np.asarray(v_grid, dtype=float)
    if np.any(v_grid <= 1):
        raise ValueError("v-grid must lie in (1, inf)")
    thresholds = _ladder_thresholds(x, ladder)
    lower = np.array([_exceedance_ratio(x, thresholds, v).min() for v in v_grid])
    with np.errstate(divide="ignore"):
        indices = np.log(lower) / np.log(v_grid)
    est = float(-np.min(indices))
    if not est <= DIVERGENCE_SENTINEL:
        est = math.inf
    hill, band = hill_estimator(x, hill_fraction)
    return TailDiagnostics(est, hill, len(x), band, tuple(float(r) for r in lower))


@dataclass(frozen=True)
class DominatedVariationCheck:
    b: float
    thresholds: Tuple[float, ...]
    ratios: Tuple[float, ...]

    @property
    def estimate(self) -> float:
        """limsup proxy: largest ratio over the ladder."""
        return max(self.ratios)

    @property
    def growing(self) -> bool:
        """Ratio increases strictly along the ladder: evidence against class D."""
        return all(b > a for a, b in zip(self.ratios, self.ratios[1:]))


def check_dominated_variation(samples, b: float,
                              ladder: Sequence[float] = DEFAULT_LADDER) -> DominatedVariationCheck:
    """Empirical ``Vbar(b x)/Vbar(x)`` over a ladder of high thresholds."""
    if not 0 < b < 1:
        raise ValueError("b must lie in (0, 1)")
    x = np.sort(np.asarray(samples, dtype=float))
    if len(x) < 10_000:
        raise InsufficientTailError("at least 1e4 samples are required")
    thresholds = _ladder_thresholds(x, ladder)
    ratios = _exceedance_ratio(x, thresholds, b)
    return DominatedVariationCheck(b, tuple(map(float, thresholds)), tuple(map(float, ratios)))
