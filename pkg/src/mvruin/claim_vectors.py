"""Claim-vector laws, inter-claim coupling and exact rare-set tail probabilities."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import cached_property
from typing import List, Sequence, Tuple, Union

import numpy as np
from scipy import optimize, signal, special

from .distributions import Pareto, UnivariateLaw
from .rare_sets import RareSet, support, y_a
from .stats import EstimateReport

_NORM_TOL = 1e-12


class PreAsymptoticError(ValueError):
    """The exact tail formula is requested below its validity threshold."""


class PreAsymptoticWarning(UserWarning):
    pass


# --------------------------------------------------------------------------
# intra-vector structure


@dataclass(frozen=True)
class SpectralMeasure:
    """Discrete angular law: atoms in the nonnegative orthant with weights.

    Atoms must have unit norm, ``norm`` selecting the Euclidean or the max
    norm.  Zero components are allowed, the all-zero atom is not.
    """

    atoms: Tuple[Tuple[float, ...], ...]
    weights: Tuple[float, ...]
    norm: str = "euclidean"

    def __post_init__(self):
        atoms = np.asarray(self.atoms, dtype=float)
        w = np.asarray(self.weights, dtype=float)
        if atoms.ndim != 2 or atoms.shape[0] == 0:
            raise ValueError("atoms must be a non-empty list of vectors")
        if w.shape != (atoms.shape[0],):
            raise ValueError("one weight per atom is required")
        if np.any(atoms < 0):
            raise ValueError("atoms must lie in the nonnegative orthant")
        if np.any(atoms.max(axis=1) <= 0):
            raise ValueError("atoms need at least one positive component")
        if self.norm == "euclidean":
            norms = np.linalg.norm(atoms, axis=1)
        elif self.norm == "max":
            norms = atoms.max(axis=1)
        else:
            raise ValueError(f"unknown norm {self.norm!r}")
        if np.any(np.abs(norms - 1.0) > _NORM_TOL):
            raise ValueError(f"atoms must have unit {self.norm} norm")
        if np.any(w <= 0):
            raise ValueError("spectral weights must be positive")
        if abs(w.sum() - 1.0) > _NORM_TOL:
            raise ValueError("spectral weights must sum to 1")
        object.__setattr__(self, "atoms", tuple(tuple(map(float, a)) for a in atoms))
        object.__setattr__(self, "weights", tuple(map(float, w)))

    @property
    def dimension(self) -> int:
        return len(self.atoms[0])

    @cached_property
    def atom_array(self) -> np.ndarray:
        return np.asarray(self.atoms)

    @cached_property
    def weight_array(self) -> np.ndarray:
        return np.asarray(self.weights)


@dataclass(frozen=True)
class IndependentCopula:
    pass


@dataclass(frozen=True)
class GaussianCopula:
    correlation: Tuple[Tuple[float, ...], ...]

    def __post_init__(self):
        c = np.asarray(self.correlation, dtype=float)
        if c.ndim != 2 or c.shape[0] != c.shape[1]:
            raise ValueError("correlation matrix must be square")
        if not np.allclose(c, c.T, atol=1e-12):
            raise ValueError("correlation matrix must be symmetric")
        if not np.allclose(np.diag(c), 1.0, atol=1e-12):
            raise ValueError("correlation matrix must have unit diagonal")
        off = c[~np.eye(len(c), dtype=bool)]
        if np.any(np.abs(off) >= 1):
            raise ValueError("correlation off-diagonal entries must lie in (-1, 1)")
        if np.linalg.eigvalsh(c).min() <= 0:
            raise ValueError("correlation matrix must be positive definite")
        object.__setattr__(self, "correlation", tuple(tuple(map(float, r)) for r in c))

    @cached_property
    def cholesky(self) -> np.ndarray:
        return np.linalg.cholesky(np.asarray(self.correlation))


@dataclass(frozen=True)
class ComonotoneCopula:
    pass


Copula = Union[IndependentCopula, GaussianCopula, ComonotoneCopula]


@dataclass(frozen=True)
class SpectralClaims:
    """Standard MRV claims ``X = R * Theta`` with ``R`` independent of ``Theta``."""

    radial: UnivariateLaw
    spectral: SpectralMeasure

    @property
    def dimension(self) -> int:
        return self.spectral.dimension

    @property
    def tail_index(self) -> float:
        if not isinstance(self.radial, Pareto):
            raise ValueError("a regular-variation index needs a Pareto radial law")
        return self.radial.alpha


@dataclass(frozen=True)
class MarginCopulaClaims:
    """Claims with arbitrary margins glued by a copula; no closed-form tails."""

    margins: Tuple[UnivariateLaw, ...]
    copula: Copula = IndependentCopula()

    def __post_init__(self):
        if not self.margins:
            raise ValueError("at least one margin is required")
        object.__setattr__(self, "margins", tuple(self.margins))
        if isinstance(self.copula, GaussianCopula) and len(self.copula.correlation) != len(self.margins):
            raise ValueError("copula dimension differs from the number of margins")

    @property
    def dimension(self) -> int:
        return len(self.margins)


ClaimModel = Union[SpectralClaims, MarginCopulaClaims]


# --------------------------------------------------------------------------
# inter-claim coupling


@dataclass(frozen=True)
class IID:
    pass


@dataclass(frozen=True)
class GaussianRadialCoupling:
    """Gaussian AR(1) on the latent drivers of consecutive claims.

    Lag-1 latent correlation is ``rho``; every pair of claims is then linked by
    a Gaussian copula with correlation strictly inside (-1, 1), which is tail
    independent.
    """

    rho: float

    def __post_init__(self):
        if not -1 < self.rho < 1:
            raise ValueError("rho must lie strictly inside (-1, 1)")


@dataclass(frozen=True)
class ComonotoneCoupling:
    """All claims in a sequence share one latent driver.  Negative control only."""


InterClaimCoupling = Union[IID, GaussianRadialCoupling, ComonotoneCoupling]


def is_tail_independent(coupling: InterClaimCoupling) -> bool:
    return not isinstance(coupling, ComonotoneCoupling)


# --------------------------------------------------------------------------
# sampling


def _latent(coupling: InterClaimCoupling, rng: np.random.Generator,
            counts: np.ndarray, width: int) -> np.ndarray:
    """Standard normal drivers, shape ``(sum(counts), width)``, path-major order."""
    total = int(counts.sum())
    if isinstance(coupling, IID) or total == 0:
        return rng.standard_normal((total, width))
    n_groups, depth = len(counts), int(counts.max())
    mask = np.arange(depth)[None, :] < counts[:, None]
    if isinstance(coupling, ComonotoneCoupling):
        base = rng.standard_normal((n_groups, 1, width))
        return np.broadcast_to(base, (n_groups, depth, width))[mask]
    rho = coupling.rho
    s = math.sqrt(1.0 - rho * rho)
    eps = rng.standard_normal((n_groups, depth, width))
    eps[:, 0, :] /= s
    z = signal.lfilter([s], [1.0, -rho], eps, axis=1)
    return z[mask]


def _sample_flat(model: ClaimModel, coupling: InterClaimCoupling,
                 rng: np.random.Generator, counts: np.ndarray) -> np.ndarray:
    total = int(counts.sum())
    if isinstance(model, SpectralClaims):
        if isinstance(coupling, IID):
            radius = model.radial.sample(rng, total)
        else:
            z = _latent(coupling, rng, counts, 1)[:, 0]
            radius = model.radial.isf(special.ndtr(-z))
        k = rng.choice(len(model.spectral.weights), size=total, p=model.spectral.weight_array)
        return radius[:, None] * model.spectral.atom_array[k]
    d = model.dimension
    cop = model.copula
    if isinstance(cop, ComonotoneCopula):
        z = np.repeat(_latent(coupling, rng, counts, 1), d, axis=1)
    else:
        z = _latent(coupling, rng, counts, d)
        if isinstance(cop, GaussianCopula):
            z = z @ cop.cholesky.T
    q = special.ndtr(-z)
    out = np.empty((total, d))
    for j, law in enumerate(model.margins):
        out[:, j] = law.isf(q[:, j])
    return out


def sample_claims(model: ClaimModel, coupling: InterClaimCoupling,
                  rng: np.random.Generator, n: int) -> np.ndarray:
    """One sequence of ``n`` consecutive claim vectors, shape ``(n, d)``."""
    if n < 1:
        raise ValueError("n must be at least 1")
    return _sample_flat(model, coupling, rng, np.array([n]))


def sample_claim_sequences(model: ClaimModel, coupling: InterClaimCoupling,
                           rng: np.random.Generator, counts: Sequence[int]) -> np.ndarray:
    """Independent claim sequences of the given lengths, concatenated in order."""
    return _sample_flat(model, coupling, rng, np.asarray(counts, dtype=np.int64))


# --------------------------------------------------------------------------
# tail probabilities


def atom_projections(model: SpectralClaims, rare_set: RareSet) -> np.ndarray:
    return np.maximum(support(rare_set, model.spectral.atom_array), 0.0)


def validity_threshold(model: SpectralClaims, rare_set: RareSet) -> float:
    """Smallest ``x`` where every Pareto term of the tail is in its power-law range."""
    if isinstance(model.radial, Pareto):
        return model.radial.scale * float(atom_projections(model, rare_set).max())
    return 0.0


def projection_tail(model: SpectralClaims, rare_set: RareSet, x) -> np.ndarray:
    """``P[Y_A > x] = sum_k w_k Vbar(x / y_a(atom_k))`` with no range check."""
    proj = atom_projections(model, rare_set)
    x = np.asarray(x, dtype=float)
    total = np.zeros_like(x)
    for w, c in zip(model.spectral.weights, proj):
        if c > 0:
            total = total + w * model.radial.tail(x / c)
    return total


def tail_prob(model: ClaimModel, rare_set: RareSet, x: float, rng=None, n: int = 10**6):
    """``P[X in x*A]``.

    Spectral claims give the exact mixture tail as a float and raise
    :class:`PreAsymptoticError` below :func:`validity_threshold`.  Margin-copula
    claims need ``rng`` and return an :class:`EstimateReport` from ``n`` draws.
    """
    if not x > 0:
        raise ValueError("x must be positive")
    if isinstance(model, SpectralClaims):
        x_min = validity_threshold(model, rare_set)
        if x < x_min:
            raise PreAsymptoticError(f"pre-asymptotic regime: x={x} below x_min={x_min}")
        return float(projection_tail(model, rare_set, x))
    if rng is None:
        raise ValueError("margin-copula claims have no closed form; pass an rng for Monte Carlo")
    hits = 0
    for size in _chunks(n):
        hits += int(np.count_nonzero(support(rare_set, sample_claims(model, IID(), rng, size)) > x))
    return EstimateReport.from_counts(hits, n)


def projection_quantile(model: SpectralClaims, rare_set: RareSet, level: float) -> float:
    """``x`` with ``P[Y_A > x] = level``."""
    f = lambda lx: float(projection_tail(model, rare_set, math.exp(lx))) - level
    lo, hi = -50.0, 50.0
    return math.exp(optimize.brentq(f, lo, hi, xtol=1e-14, rtol=1e-14))


def _chunks(n: int, size: int = 1_000_000):
    while n > 0:
        yield min(n, size)
        n -= size


# --------------------------------------------------------------------------
# TAI diagnostic


@dataclass(frozen=True)
class TaiCurve:
    thresholds: Tuple[float, ...]
    conditional: Tuple[float, ...]
    conditional_se: Tuple[float, ...]
    marginal: Tuple[float, ...]
    joint_counts: Tuple[int, ...]
    given_counts: Tuple[int, ...]
    n_pairs: int

    @property
    def strictly_decreasing(self) -> bool:
        c = self.conditional
        return all(b < a for a, b in zip(c, c[1:]))

    @property
    def violation(self) -> bool:
        """Curve stays high: no visible decay towards 0 over the grid."""
        return not self.strictly_decreasing or self.conditional[-1] > 0.9 * self.conditional[0]

    def independence_se(self, i: int) -> float:
        """Standard error of the conditional frequency if the pair were independent."""
        m = self.marginal[i]
        return math.sqrt(m * (1 - m) / self.given_counts[i])


def _level_thresholds(model: ClaimModel, rare_set: RareSet, levels, rng) -> List[float]:
    if isinstance(model, SpectralClaims):
        return [projection_quantile(model, rare_set, q) for q in levels]
    pooled = np.sort(y_a(rare_set, sample_claims(model, IID(), rng, 10**6)))
    return [float(pooled[int(len(pooled) * (1 - q))]) for q in levels]


def check_tai(model: ClaimModel, coupling: InterClaimCoupling, rare_set: RareSet,
              rng: np.random.Generator, thresholds: Sequence[float] | None = None,
              levels: Sequence[float] | None = None, n_pairs: int = 10**6) -> TaiCurve:
    """Empirical ``P[Y_A^(1) > x | Y_A^(2) > x]`` for consecutive claims.

    Give either absolute ``thresholds`` or upper tail ``levels`` of ``Y_A``
    (exact quantiles for spectral claims, empirical ones otherwise).
    """
    if n_pairs < 10**6:
        raise ValueError("the diagnostic needs at least 1e6 claim pairs")
    if (thresholds is None) == (levels is None):
        raise ValueError("pass exactly one of thresholds or levels")
    if levels is not None:
        thresholds = _level_thresholds(model, rare_set, levels, rng)
    x = np.array(sorted(float(t) for t in thresholds))
    given = np.zeros(x.size, dtype=np.int64)
    joint = np.zeros(x.size, dtype=np.int64)
    first_hits = np.zeros(x.size, dtype=np.int64)
    for size in _chunks(n_pairs):
        y = y_a(rare_set, sample_claim_sequences(model, coupling, rng, np.full(size, 2))).reshape(size, 2)
        big1 = y[:, 0, None] > x
        big2 = y[:, 1, None] > x
        given += big2.sum(axis=0)
        joint += (big1 & big2).sum(axis=0)
        first_hits += big1.sum(axis=0)
    if joint[0] < 50:
        raise ValueError(f"only {joint[0]} joint exceedances at the smallest threshold")
    with np.errstate(invalid="ignore", divide="ignore"):
        cond = joint / given
        se = np.sqrt(cond * (1 - cond) / given)
    return TaiCurve(tuple(map(float, x)), tuple(map(float, cond)), tuple(map(float, se)),
                    tuple(map(float, first_hits / n_pairs)), tuple(map(int, joint)),
                    tuple(map(int, given)), n_pairs)


def warn_pre_asymptotic(message: str) -> None:
    warnings.warn(message, PreAsymptoticWarning, stacklevel=3)
