"""The discounted surplus process: single paths and vectorized path batches.

Surplus of line ``j``::

    U_j(t) = x l_j + int_0^t exp(-xi(s)) c_j(s) ds - sum_{i <= N(t)} X_j^(i) exp(-xi(T_i))
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np

from .claim_vectors import (ClaimModel, InterClaimCoupling, IID, sample_claim_sequences,
                            sample_claims)
from .processes import (Deterministic, RenewalModel, ReturnProcess,
                        sample_return_batch, simulate_arrival_batch, simulate_arrivals,
                        simulate_return_path)
from .rare_sets import CapitalAllocation, RareSet, RuinSet, contains, support

PREMIUM_GRID = 1024
_GRID_RTOL = 1e-12

STREAM_NAMES = ("claims", "arrivals", "returns", "premiums")


@dataclass(frozen=True)
class PremiumSchedule:
    """Piecewise-constant density: ``values[k]`` on ``[breaks[k], breaks[k+1])``."""

    breaks: Tuple[float, ...]
    values: Tuple[float, ...]

    def __post_init__(self):
        b = tuple(map(float, self.breaks))
        v = tuple(map(float, self.values))
        if len(b) != len(v) or not b or b[0] != 0.0:
            raise ValueError("schedule needs one value per break, starting at 0")
        if any(y <= x for x, y in zip(b, b[1:])):
            raise ValueError("schedule breaks must increase")
        if min(v) < 0:
            raise ValueError("premium densities must be nonnegative")
        object.__setattr__(self, "breaks", b)
        object.__setattr__(self, "values", v)

    def rate(self, t) -> np.ndarray:
        idx = np.searchsorted(self.breaks, np.asarray(t, dtype=float), side="right") - 1
        return np.asarray(self.values)[np.maximum(idx, 0)]


@dataclass(frozen=True)
class PremiumPlan:
    """Bounded premium densities ``0 <= c_j(t) <= M_j``; constant ``M_j`` by default."""

    bounds: Tuple[float, ...]
    schedules: Optional[Tuple[PremiumSchedule, ...]] = None

    def __post_init__(self):
        m = tuple(map(float, self.bounds))
        if min(m) < 0:
            raise ValueError("premium bounds must be nonnegative")
        object.__setattr__(self, "bounds", m)
        if self.schedules is not None:
            if len(self.schedules) != len(m):
                raise ValueError("one schedule per line is required")
            for j, s in enumerate(self.schedules):
                if max(s.values) > m[j]:
                    raise ValueError(f"premium schedule of line {j} exceeds its bound")

    @property
    def dimension(self) -> int:
        return len(self.bounds)

    def schedule(self, j: int) -> PremiumSchedule:
        if self.schedules is None:
            return PremiumSchedule((0.0,), (self.bounds[j],))
        return self.schedules[j]

    def discounted_deterministic(self, rate: float, t) -> np.ndarray:
        """``int_0^t exp(-rate y) c_j(y) dy`` per line, exact; shape ``t.shape + (d,)``."""
        t = np.asarray(t, dtype=float)
        out = np.zeros(t.shape + (self.dimension,))
        for j in range(self.dimension):
            sch = self.schedule(j)
            ends = list(sch.breaks[1:]) + [math.inf]
            for a, b, c in zip(sch.breaks, ends, sch.values):
                if c == 0.0:
                    continue
                lo, hi = a, np.clip(t, a, b)
                if rate == 0.0:
                    out[..., j] += c * (hi - lo)
                else:
                    out[..., j] += c * (np.exp(-rate * lo) - np.exp(-rate * hi)) / rate
        return out


@dataclass(frozen=True)
class RiskModelSpec:
    claims: ClaimModel
    renewal: RenewalModel
    returns: ReturnProcess
    premiums: PremiumPlan
    allocation: CapitalAllocation
    coupling: InterClaimCoupling = IID()

    def __post_init__(self):
        d = self.claims.dimension
        if self.premiums.dimension != d or self.allocation.dimension != d:
            raise ValueError(
                f"dimension mismatch: claims d={d}, premiums d={self.premiums.dimension}, "
                f"allocation d={self.allocation.dimension}"
            )

    @property
    def dimension(self) -> int:
        return self.claims.dimension


@dataclass
class RiskStreams:
    """Mutually independent generators for claims, arrivals, returns and premiums."""

    claims: np.random.Generator
    arrivals: np.random.Generator
    returns: np.random.Generator
    premiums: np.random.Generator

    @classmethod
    def from_seed(cls, seed: int, chunk: int | None = None) -> "RiskStreams":
        key = () if chunk is None else (chunk,)
        children = np.random.SeedSequence(seed, spawn_key=key).spawn(len(STREAM_NAMES))
        return cls(*(np.random.default_rng(c) for c in children))

    @classmethod
    def from_seeds(cls, claims: int, arrivals: int, returns: int, premiums: int = 0) -> "RiskStreams":
        return cls(*(np.random.default_rng(s) for s in (claims, arrivals, returns, premiums)))


@dataclass
class PathRealization:
    arrival_times: np.ndarray
    claims: np.ndarray
    discount: np.ndarray
    t_grid: np.ndarray
    D: np.ndarray
    premiums: np.ndarray
    U: np.ndarray
    D_at_arrivals: np.ndarray
    premiums_at_arrivals: np.ndarray
    capital: np.ndarray = field(repr=False, default=None)

    def grid_index(self, t: float) -> int:
        hits = np.flatnonzero(np.isclose(self.t_grid, t, rtol=_GRID_RTOL, atol=0.0))
        if hits.size == 0:
            raise ValueError(f"t={t} is not on the path grid")
        return int(hits[0])


def _fsum_columns(values: np.ndarray) -> np.ndarray:
    return np.array([math.fsum(values[:, j]) for j in range(values.shape[1])])


def _stochastic_premiums(plan: PremiumPlan, times: np.ndarray, xi: np.ndarray) -> np.ndarray:
    """Cumulative trapezoid of ``exp(-xi) c`` on sorted ``times`` (which start after 0)."""
    t = np.concatenate(([0.0], times))
    f_xi = np.exp(-np.concatenate(([0.0], xi)))
    out = np.zeros((times.size, plan.dimension))
    for j in range(plan.dimension):
        f = f_xi * plan.schedule(j).rate(t)
        out[:, j] = np.cumsum(0.5 * (f[1:] + f[:-1]) * np.diff(t))
    return out


def simulate_path(spec: RiskModelSpec, t_grid: Sequence[float], streams: RiskStreams) -> PathRealization:
    """One joint realization of the model, by direct summation along the path."""
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.size == 0 or np.any(np.diff(t_grid) < 0) or t_grid[0] <= 0:
        raise ValueError("t-grid must be sorted inside (0, horizon]")
    horizon = float(t_grid[-1])
    arrivals = simulate_arrivals(spec.renewal, horizon, streams.arrivals)
    n = arrivals.size
    d = spec.dimension
    claims = sample_claims(spec.claims, spec.coupling, streams.claims, n) if n else np.zeros((0, d))
    proc = spec.returns
    if isinstance(proc, Deterministic):
        xi_arr = proc.rate * arrivals
        prem_grid = spec.premiums.discounted_deterministic(proc.rate, t_grid)
        prem_arr = spec.premiums.discounted_deterministic(proc.rate, arrivals)
    else:
        fine = np.linspace(0.0, horizon, PREMIUM_GRID + 1)[1:]
        merged = np.unique(np.concatenate((fine, t_grid, arrivals)))
        xi = simulate_return_path(proc, merged, streams.returns)
        cum = _stochastic_premiums(spec.premiums, merged, xi)
        pos_arr = np.searchsorted(merged, arrivals)
        xi_arr = xi[pos_arr]
        prem_grid = cum[np.searchsorted(merged, t_grid)]
        prem_arr = cum[pos_arr]
    discount = np.exp(-xi_arr)
    weighted = claims * discount[:, None]
    D = np.array([_fsum_columns(weighted[arrivals <= t]) if n else np.zeros(d) for t in t_grid])
    D_arr = np.array([_fsum_columns(weighted[: i + 1]) for i in range(n)]).reshape(n, d)
    capital = spec.allocation.initial_surplus()
    U = capital + prem_grid - D
    return PathRealization(arrivals, claims, discount, t_grid, D, prem_grid, U, D_arr, prem_arr, capital)


def entrance_indicator(path: PathRealization, rare_set: RareSet, x: float, t: float) -> bool:
    """``D(t) in x*A``."""
    return bool(contains(rare_set, x, path.D[path.grid_index(t)]))


def ruin_indicator(path: PathRealization, ruin_set: RuinSet, alloc: CapitalAllocation, t: float) -> bool:
    """Surplus enters ``L`` at some arrival instant or grid point ``s <= t``.

    Between arrivals the surplus only grows, so a decreasing ruin set can only
    be entered at an arrival; grid points are checked as well for safety.
    """
    k = path.grid_index(t)
    capital = alloc.initial_surplus()
    u_grid = capital + path.premiums[: k + 1] - path.D[: k + 1]
    if np.any(ruin_set.contains(u_grid)):
        return True
    before = path.arrival_times <= path.t_grid[k]
    u_arr = capital + path.premiums_at_arrivals[before] - path.D_at_arrivals[before]
    return bool(np.any(ruin_set.contains(u_arr)))


# --------------------------------------------------------------------------
# vectorized batches


def _segment_cumsum(values: np.ndarray, counts: np.ndarray) -> np.ndarray:
    """Running sums restarted at every path, each path summed on its own."""
    n = counts.size
    if values.shape[0] == 0:
        return values.copy()
    path = np.repeat(np.arange(n), counts)
    pos = np.arange(values.shape[0]) - np.repeat(np.cumsum(counts) - counts, counts)
    buf = np.zeros((n, int(counts.max())) + values.shape[1:])
    buf[path, pos] = values
    np.cumsum(buf, axis=1, out=buf)
    return buf[path, pos]


def _batch_premiums_stochastic(spec: RiskModelSpec, counts: np.ndarray, times: np.ndarray,
                               horizon: float, rng: np.random.Generator):
    """``xi`` and discounted premiums at the arrivals, on a merged per-path grid."""
    n = counts.size
    fine = np.linspace(0.0, horizon, PREMIUM_GRID + 1)[1:]
    path = np.repeat(np.arange(n), counts)
    all_path = np.concatenate((np.repeat(np.arange(n), fine.size), path))
    all_t = np.concatenate((np.tile(fine, n), times))
    is_arrival = np.concatenate((np.zeros(n * fine.size, bool), np.ones(times.size, bool)))
    order = np.lexsort((~is_arrival, all_t, all_path))
    m_t, m_arr = all_t[order], is_arrival[order]
    m_counts = counts + fine.size
    xi = sample_return_batch(spec.returns, m_counts, m_t, rng)
    f_xi = np.exp(-xi)
    prev_t = np.diff(m_t, prepend=0.0)
    starts = np.cumsum(m_counts) - m_counts
    prev_t[starts] = m_t[starts]
    prev_f = np.concatenate(([1.0], f_xi[:-1]))
    prev_f[starts] = 1.0
    d = spec.dimension
    prem = np.empty((m_t.size, d))
    for j in range(d):
        sch = spec.premiums.schedule(j)
        c_now = sch.rate(m_t)
        c_prev = sch.rate(m_t - prev_t)
        prem[:, j] = 0.5 * (f_xi * c_now + prev_f * c_prev) * prev_t
    prem = _segment_cumsum(prem, m_counts)
    return xi[m_arr], prem[m_arr]


@dataclass
class BatchStatistics:
    """Per-path scalar statistics; ``entrance > x`` and ``ruin > x`` are the events."""

    entrance: np.ndarray
    ruin: Optional[np.ndarray]
    arrivals: int


def path_statistics(spec: RiskModelSpec, rare_set: RareSet, t_grid: Sequence[float],
                    n_paths: int, streams: RiskStreams,
                    ruin_set: Optional[RareSet] = None) -> BatchStatistics:
    """Simulate ``n_paths`` paths and reduce each to scalar statistics.

    ``entrance[p, k] = sup_A(D(t_k))`` so ``D(t_k) in x*A`` iff it exceeds ``x``.
    With ``ruin_set`` (the rare set ``l - L``), ``ruin[p, k]`` is the running
    maximum of ``sup_A(D(T_i) - P(T_i))`` over arrivals ``T_i <= t_k``; ruin
    with capital ``x`` happens iff it exceeds ``x``.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    horizon = float(t_grid.max())
    proc = spec.returns
    ordered = ruin_set is not None or not isinstance(spec.coupling, IID) or not isinstance(proc, Deterministic)
    counts, times = simulate_arrival_batch(spec.renewal, horizon, streams.arrivals, n_paths, ordered=ordered)
    claims = sample_claim_sequences(spec.claims, spec.coupling, streams.claims, counts)
    prem = None
    if isinstance(proc, Deterministic):
        xi = proc.rate * times
        if ruin_set is not None:
            prem = spec.premiums.discounted_deterministic(proc.rate, times)
    elif ruin_set is not None:
        xi, prem = _batch_premiums_stochastic(spec, counts, times, horizon, streams.returns)
    else:
        xi = sample_return_batch(proc, counts, times, streams.returns)
    weighted = claims * np.exp(-xi)[:, None]
    path = np.repeat(np.arange(n_paths), counts)
    d = spec.dimension
    entrance = np.empty((n_paths, t_grid.size))
    for k, t in enumerate(t_grid):
        mask = times <= t
        D = np.column_stack([np.bincount(path[mask], weights=weighted[mask, j], minlength=n_paths)
                             for j in range(d)])
        entrance[:, k] = support(rare_set, D)
    ruin = None
    if ruin_set is not None:
        ruin = np.full((n_paths, t_grid.size), -np.inf)
        if times.size:
            stat = support(ruin_set, _segment_cumsum(weighted, counts) - prem)
            starts = (np.cumsum(counts) - counts)[counts > 0]
            for k, t in enumerate(t_grid):
                masked = np.where(times <= t, stat, -np.inf)
                ruin[counts > 0, k] = np.maximum.reduceat(masked, starts)
    return BatchStatistics(entrance, ruin, int(times.size))
