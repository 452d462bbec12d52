"""Monte Carlo estimators and the asymptotic formulas they are checked against."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy import integrate, special, stats as sps

from .claim_vectors import (IID, ClaimModel, PreAsymptoticError, SpectralClaims,
                            projection_tail, sample_claim_sequences, sample_claims, tail_prob,
                            validity_threshold, warn_pre_asymptotic)
from .distributions import Degenerate, Normal, UnivariateLaw, has_moment_beyond
from .parallel import run_chunks
from .processes import (BrownianDrift, Deterministic, JumpDiffusion, RenewalModel,
                        check_assumption_4_1, laplace_exponent, renewal_function, renewal_grid)
from .rare_sets import CapitalAllocation, RareSet, RuinSet, ruin_to_rare, support
from .risk_model import RiskModelSpec, RiskStreams, path_statistics
from .stats import EstimateReport

GL_NODES = 64
GL_WIDTH = 10.0
TRUNCATION_TOL = 1e-4
PRE_ASYMPTOTIC_LEVEL = 0.1
MC_CHUNK_BUDGET = 2_000_000


class AssumptionViolation(ValueError):
    """A model assumption required by an asymptotic formula fails."""


# --------------------------------------------------------------------------
# Monte Carlo over paths


@dataclass
class HitCounts:
    """Path counts with ``statistic > x`` on an ``(x, t)`` grid."""

    x_grid: np.ndarray
    t_grid: np.ndarray
    entrance: np.ndarray
    ruin: Optional[np.ndarray]
    n: int
    seed: int
    wall_time: float

    def report(self, i: int, k: int, kind: str = "entrance") -> EstimateReport:
        hits = int((self.entrance if kind == "entrance" else self.ruin)[i, k])
        rep = EstimateReport.from_counts(hits, self.n, self.seed, self.wall_time)
        if rep.estimate > PRE_ASYMPTOTIC_LEVEL:
            rep = EstimateReport.from_counts(hits, self.n, self.seed, self.wall_time, ("pre-asymptotic",))
        return rep


def default_chunk(spec: RiskModelSpec, horizon: float, ruin: bool = False) -> int:
    """Paths per chunk so that one chunk holds about two million arrivals."""
    per_path = 1.0 + renewal_function(spec.renewal, horizon, n_steps=256)
    if ruin and not isinstance(spec.returns, Deterministic):
        per_path += 1024
    return int(np.clip(MC_CHUNK_BUDGET / per_path, 100, 200_000))


def _hits_worker(task, size: int, streams: RiskStreams):
    spec, rare_set, x_grid, t_grid, ruin_rare = task
    st = path_statistics(spec, rare_set, t_grid, size, streams, ruin_rare)
    x = np.asarray(x_grid)[None, :, None]
    ent = np.count_nonzero(st.entrance[:, None, :] > x, axis=0)
    ruin = None if st.ruin is None else np.count_nonzero(st.ruin[:, None, :] > x, axis=0)
    return ent, ruin


def _check_times(spec: RiskModelSpec, t_grid: np.ndarray) -> None:
    for t in t_grid:
        if not (t > 0 and spec.renewal.in_lambda(t)):
            raise ValueError(f"t={t} is not in Lambda (renewal function vanishes there)")


def simulate_hits(spec: RiskModelSpec, rare_set: RareSet, x_grid: Sequence[float],
                  t_grid: Sequence[float], n: int, seed: int,
                  ruin_set: Optional[RuinSet] = None, alloc: Optional[CapitalAllocation] = None,
                  threads: int | None = 1, chunk: int | None = None) -> HitCounts:
    """Entrance (and optionally ruin) hit counts from one shared set of ``n`` paths."""
    if n < 1000:
        raise ValueError("n must be at least 1e3")
    x_grid = np.asarray(x_grid, dtype=float)
    t_grid = np.asarray(t_grid, dtype=float)
    _check_times(spec, t_grid)
    ruin_rare = None if ruin_set is None else ruin_to_rare(ruin_set, alloc or spec.allocation)
    chunk = chunk or default_chunk(spec, float(t_grid.max()), ruin_set is not None)
    start = time.perf_counter()
    parts = run_chunks(_hits_worker, (spec, rare_set, x_grid, t_grid, ruin_rare), n, chunk, seed, threads)
    ent = sum(p[0] for p in parts)
    ruin = None if ruin_set is None else sum(p[1] for p in parts)
    return HitCounts(x_grid, t_grid, ent, ruin, n, seed, time.perf_counter() - start)


def mc_entrance_prob(spec: RiskModelSpec, rare_set: RareSet, x: float, t: float, n: int,
                     seed: int, threads: int | None = 1) -> EstimateReport:
    """Frequency of ``D(t) in x*A`` over ``n`` simulated paths."""
    return simulate_hits(spec, rare_set, [x], [t], n, seed, threads=threads).report(0, 0)


def mc_ruin_prob(spec: RiskModelSpec, ruin_set: RuinSet, x: float, t: float, n: int, seed: int,
                 alloc: Optional[CapitalAllocation] = None, threads: int | None = 1) -> EstimateReport:
    """Frequency of ruin in ``L`` up to ``t`` with total capital ``x``."""
    a = ruin_to_rare(ruin_set, alloc or spec.allocation)
    return simulate_hits(spec, a, [x], [t], n, seed, ruin_set, alloc, threads).report(0, 0, "ruin")


# --------------------------------------------------------------------------
# asymptotic formulas


def _gauss_legendre_normal(f, mean: float, sd: float) -> float:
    nodes, weights = special.roots_legendre(GL_NODES)
    z = mean + GL_WIDTH * sd * nodes
    dens = np.exp(-0.5 * (GL_WIDTH * nodes) ** 2) / math.sqrt(2 * math.pi)
    return float(GL_WIDTH * np.sum(weights * dens * f(z)))


def _jump_normal_params(jump: UnivariateLaw) -> Tuple[float, float]:
    if isinstance(jump, Degenerate):
        return float(jump.value), 0.0
    if isinstance(jump, Normal):
        return jump.mean, jump.sd
    raise NotImplementedError("asymptotics with jumps need Normal or Degenerate jump sizes")


def discounted_tail(spec: RiskModelSpec, rare_set: RareSet, x: float, s: float) -> float:
    """``P[Y_A exp(-xi(s)) > x]`` for spectral claims independent of ``xi``."""
    claims = spec.claims
    if not isinstance(claims, SpectralClaims):
        raise ValueError("asymptotic formulas need spectral (MRV) claims")
    proc = spec.returns
    tail = lambda z: projection_tail(claims, rare_set, x * np.exp(z))
    if isinstance(proc, Deterministic):
        return float(tail(proc.rate * s))
    if proc.volatility == 0 and not isinstance(proc, JumpDiffusion):
        return float(tail(proc.drift * s))
    if isinstance(proc, BrownianDrift):
        return _gauss_legendre_normal(tail, proc.drift * s, proc.volatility * math.sqrt(s))
    m_j, s_j = _jump_normal_params(proc.jump)
    rate = proc.intensity * s
    k_max = int(sps.poisson.isf(1e-14, rate)) + 1 if rate > 0 else 0
    total = 0.0
    for k in range(k_max + 1):
        w = sps.poisson.pmf(k, rate)
        mean = proc.drift * s + k * m_j
        sd = math.sqrt(proc.volatility**2 * s + k * s_j**2)
        total += w * (_gauss_legendre_normal(tail, mean, sd) if sd > 0 else float(tail(mean)))
    return total


def _warn_if_pre_asymptotic(spec: RiskModelSpec, rare_set: RareSet, x: float, t: float) -> None:
    x_min = validity_threshold(spec.claims, rare_set)
    proc = spec.returns
    lowest = x * min(1.0, math.exp(proc.rate * t)) if isinstance(proc, Deterministic) else x
    if lowest < x_min:
        warn_pre_asymptotic(f"pre-asymptotic regime: x={x} reaches below x_min={x_min}")


def renewal_stieltjes(renewal: RenewalModel, g, t: float, n_steps: int = 2048) -> float:
    """``int_0^t g(s) lambda(ds)``.

    Poisson: adaptive quadrature against ``rate ds``.  Deterministic gaps:
    exact sum over the atoms.  Otherwise midpoint Riemann-Stieltjes sum on
    the numerical renewal function.
    """
    law = renewal.interarrival
    if renewal.is_poisson:
        val, _ = integrate.quad(g, 0.0, t, limit=500, epsabs=0.0, epsrel=1e-13)
        return law.rate * val
    if isinstance(law, Degenerate):
        k = int(math.floor(t / law.value + 1e-12))
        return float(sum(g(i * law.value) for i in range(1, k + 1)))
    grid, lam = renewal_grid(renewal, t, n_steps)
    mids = 0.5 * (grid[1:] + grid[:-1])
    return float(np.sum(np.array([g(s) for s in mids]) * np.diff(lam)))


def asymptotic_entrance_finite(spec: RiskModelSpec, rare_set: RareSet, x: float, t: float) -> float:
    """``int_0^t P[X exp(-xi(s)) in x*A] lambda(ds)``."""
    if not (t > 0 and spec.renewal.in_lambda(t)):
        raise ValueError(f"t={t} is not in Lambda")
    _warn_if_pre_asymptotic(spec, rare_set, x, t)
    return renewal_stieltjes(spec.renewal, lambda s: discounted_tail(spec, rare_set, x, s), t)


def _renewal_discount_integral(renewal: RenewalModel, phi: float, t: float) -> float:
    """``int_0^t exp(s phi) lambda(ds)``, ``t`` possibly infinite."""
    law = renewal.interarrival
    if renewal.is_poisson:
        if math.isinf(t):
            return law.rate / -phi
        if phi == 0:
            return law.rate * t
        return law.rate * -math.expm1(phi * t) / -phi
    if isinstance(law, Degenerate) and math.isinf(t):
        q = math.exp(phi * law.value)
        return q / (1.0 - q)
    g = lambda s: math.exp(phi * s)
    if not math.isinf(t):
        return renewal_stieltjes(renewal, g, t)
    horizon = truncation_horizon(renewal, phi)
    return renewal_stieltjes(renewal, g, horizon)


def truncation_horizon(renewal: RenewalModel, phi: float, tol: float = TRUNCATION_TOL) -> float:
    """Smallest ``T0`` (on a doubling ladder) with tail beyond ``T0`` at most ``tol`` times the head.

    Poisson arrivals give ``T0`` in closed form.  Otherwise the tail is bounded by
    ``exp(phi T0) (1 + lambda(1)) / (1 - exp(phi))`` using subadditivity of the
    renewal function over unit steps.
    """
    if not phi < 0:
        raise AssumptionViolation("phi(alpha) >= 0: the infinite-horizon integral diverges")
    if renewal.is_poisson:
        return math.log(tol / (1.0 + tol)) / phi
    lam1 = renewal_function(renewal, 1.0)
    horizon = max(1.0, 1.0 / -phi)
    while True:
        head = renewal_stieltjes(renewal, lambda s: math.exp(phi * s), horizon)
        bound = math.exp(phi * horizon) * (1.0 + lam1) / -math.expm1(phi)
        if head > 0 and bound <= tol * head:
            return horizon
        horizon *= 2.0


def asymptotic_entrance_global(spec: RiskModelSpec, rare_set: RareSet, x: float, t: float,
                               exponents: Optional[Tuple[float, float]] = None) -> float:
    """``P[X in x*A] int_0^t E[exp(-alpha xi(s))] lambda(ds)``; ``t`` may be ``inf``."""
    claims = spec.claims
    if not isinstance(claims, SpectralClaims):
        raise ValueError("the global formula needs spectral (MRV) claims")
    alpha = claims.tail_index
    check = check_assumption_4_1(spec.returns, spec.renewal, alpha, exponents)
    if not check.verdict:
        raise AssumptionViolation(f"moment assumption fails: {check.certificate}")
    if not math.isinf(t) and not (t > 0 and spec.renewal.in_lambda(t)):
        raise ValueError(f"t={t} is not in Lambda")
    phi = laplace_exponent(spec.returns, alpha)
    if math.isinf(t) and not phi < 0:
        raise AssumptionViolation("phi(alpha) >= 0: the infinite-horizon integral diverges")
    try:
        tail = tail_prob(claims, rare_set, x)
    except PreAsymptoticError as exc:
        warn_pre_asymptotic(str(exc))
        tail = float(projection_tail(claims, rare_set, x))
    return tail * _renewal_discount_integral(spec.renewal, phi, t)


def mc_horizon_for_global(spec: RiskModelSpec) -> float:
    """Finite horizon standing in for ``t = inf`` in simulations."""
    phi = laplace_exponent(spec.returns, spec.claims.tail_index)
    return truncation_horizon(spec.renewal, phi)


# --------------------------------------------------------------------------
# Breiman and single big jump


@dataclass(frozen=True)
class RatioCurve:
    """MC/analytic ratios over an x-grid."""

    x_grid: Tuple[float, ...]
    ratio: Tuple[float, ...]
    std_error: Tuple[float, ...]
    hits: Tuple[int, ...]
    n: int
    target: float = 1.0

    def within(self, i: int, n_se: float = 3.0) -> bool:
        return abs(self.ratio[i] - self.target) <= n_se * self.std_error[i]


def _chunks(n: int, size: int = 1_000_000):
    while n > 0:
        yield min(n, size)
        n -= size


def breiman_check(claims: ClaimModel, theta: UnivariateLaw, rare_set: RareSet,
                  x_grid: Sequence[float], n: int, rng: np.random.Generator) -> RatioCurve:
    """``P[Theta X in x*A] / (E[Theta^alpha] P[X in x*A])`` with independent ``Theta``."""
    alpha = claims.tail_index
    if not has_moment_beyond(theta, alpha):
        raise ValueError("moment condition E[Theta^p] < inf for some p > alpha is unverifiable")
    moment = theta.moment(alpha)
    x_grid = np.asarray(x_grid, dtype=float)
    hits = np.zeros(x_grid.size, dtype=np.int64)
    for size in _chunks(n):
        y = support(rare_set, sample_claims(claims, IID(), rng, size)) * theta.sample(rng, size)
        hits += np.count_nonzero(y[:, None] > x_grid[None, :], axis=0)
    denom = moment * projection_tail(claims, rare_set, x_grid)
    p = hits / n
    return RatioCurve(tuple(x_grid), tuple(p / denom), tuple(np.sqrt(p * (1 - p) / n) / denom),
                      tuple(int(h) for h in hits), n)


def single_big_jump_check(claims: ClaimModel, rare_set: RareSet, m: int, x_grid: Sequence[float],
                          n: int, rng: np.random.Generator, comonotone: bool = False) -> RatioCurve:
    """``P[Y_1 + ... + Y_m > x] / (m P[Y > x])`` for projected claims.

    Terms are i.i.d. unless ``comonotone``, the negative control in which every
    term equals the first, so the ratio tends to ``m^(alpha - 1)``.  With
    ``m = 1`` the sum is the single term and the ratio is exactly 1.
    """
    if m < 1:
        raise ValueError("m must be at least 1")
    x_grid = np.asarray(x_grid, dtype=float)
    if m == 1:
        return RatioCurve(tuple(x_grid), (1.0,) * x_grid.size, (0.0,) * x_grid.size, (0,) * x_grid.size, n)
    hits = np.zeros(x_grid.size, dtype=np.int64)
    for size in _chunks(n, max(1, 2_000_000 // m)):
        if comonotone:
            total = m * support(rare_set, sample_claims(claims, IID(), rng, size))
        else:
            y = support(rare_set, sample_claim_sequences(claims, IID(), rng, np.full(size, m)))
            total = y.reshape(size, m).sum(axis=1)
        hits += np.count_nonzero(total[:, None] > x_grid[None, :], axis=0)
    denom = m * projection_tail(claims, rare_set, x_grid)
    p = hits / n
    target = m ** (claims.tail_index - 1.0) if comonotone else 1.0
    return RatioCurve(tuple(x_grid), tuple(p / denom), tuple(np.sqrt(p * (1 - p) / n) / denom),
                      tuple(int(h) for h in hits), n, target)


# --------------------------------------------------------------------------
# uniformity in t


@dataclass(frozen=True)
class RatioCell:
    x: float
    t: float
    mc: EstimateReport
    asymptotic: float

    @property
    def ratio(self) -> float:
        return self.mc.estimate / self.asymptotic

    @property
    def ratio_se(self) -> float:
        return self.mc.std_error / self.asymptotic

    @property
    def flagged(self) -> bool:
        return self.mc.hits == 0


@dataclass(frozen=True)
class RatioTable:
    cells: Tuple[RatioCell, ...]
    x_grid: Tuple[float, ...]
    t_grid: Tuple[float, ...]

    def column(self, x: float) -> List[RatioCell]:
        return [c for c in self.cells if c.x == x]

    def sup_deviation(self, x: float) -> Tuple[float, float]:
        """``sup_t |ratio - 1|`` over unflagged cells and the s.e. of the maximizing cell."""
        cells = [c for c in self.column(x) if not c.flagged]
        if not cells:
            return math.nan, math.nan
        best = max(cells, key=lambda c: abs(c.ratio - 1.0))
        return abs(best.ratio - 1.0), best.ratio_se

    def sup_nonincreasing(self, slack: float = 2.0) -> bool:
        """Sup deviations do not increase with ``x`` beyond ``slack`` pooled s.e."""
        sups = [self.sup_deviation(x) for x in sorted(self.x_grid)]
        return all(b[0] <= a[0] + slack * math.hypot(a[1], b[1]) for a, b in zip(sups, sups[1:]))

    def heterogeneity_pvalue(self, x: float) -> float:
        """Chi-square test that the column's ratios share one value."""
        cells = [c for c in self.column(x) if not c.flagged and c.ratio_se > 0]
        if len(cells) < 2:
            return 1.0
        r = np.array([c.ratio for c in cells])
        w = 1.0 / np.array([c.ratio_se for c in cells]) ** 2
        pooled = np.sum(w * r) / np.sum(w)
        q = float(np.sum(w * (r - pooled) ** 2))
        return float(sps.chi2.sf(q, len(cells) - 1))

    @property
    def notes(self) -> List[str]:
        return [f"cell x={c.x}, t={c.t}: zero hits, excluded from sup" for c in self.cells if c.flagged]


def uniformity_diagnostic(spec: RiskModelSpec, rare_set: RareSet, x_grid: Sequence[float],
                          t_grid: Sequence[float], n: int, seed: int, threads: int | None = 1,
                          global_mode: bool = False, hits: Optional[HitCounts] = None) -> RatioTable:
    """MC against asymptotics on every ``(x, t)`` cell, all cells from shared paths."""
    if not len(x_grid) or not len(t_grid):
        raise ValueError("grids must be nonempty")
    hits = hits or simulate_hits(spec, rare_set, x_grid, t_grid, n, seed, threads=threads)
    asym = asymptotic_entrance_global if global_mode else asymptotic_entrance_finite
    cells = []
    for i, x in enumerate(hits.x_grid):
        for k, t in enumerate(hits.t_grid):
            cells.append(RatioCell(float(x), float(t), hits.report(i, k), asym(spec, rare_set, float(x), float(t))))
    return RatioTable(tuple(cells), tuple(map(float, hits.x_grid)), tuple(map(float, hits.t_grid)))
