"""Renewal arrivals and return processes."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Tuple, Union

import numpy as np

from .distributions import Degenerate, Exponential, UnivariateLaw, mean as law_mean

DEFAULT_RENEWAL_STEPS = 2048


# --------------------------------------------------------------------------
# renewal arrivals


@dataclass(frozen=True)
class RenewalModel:
    """Renewal counting process with i.i.d. positive interarrival times."""

    interarrival: UnivariateLaw

    def __post_init__(self):
        if self.interarrival.support_min < 0:
            raise ValueError("interarrival law must have nonnegative support")
        if isinstance(self.interarrival, Degenerate) and self.interarrival.value <= 0:
            raise ValueError("interarrival law must not be a point mass at 0")

    @property
    def is_poisson(self) -> bool:
        return isinstance(self.interarrival, Exponential)

    @property
    def start(self) -> float:
        """``inf{t : lambda(t) > 0}``."""
        return float(self.interarrival.support_min)

    @property
    def start_is_atom(self) -> bool:
        return isinstance(self.interarrival, Degenerate)

    def in_lambda(self, t: float) -> bool:
        """``t`` lies in the set where the renewal function is positive."""
        if self.start_is_atom:
            return t >= self.start
        return t > self.start

    def mean_interarrival(self) -> float:
        return law_mean(self.interarrival)


def simulate_arrivals(model: RenewalModel, horizon: float, rng: np.random.Generator) -> np.ndarray:
    """Arrival times ``T_1 < ... < T_N(horizon)`` of one path."""
    if not horizon > 0:
        raise ValueError("horizon must be positive")
    counts, times = simulate_arrival_batch(model, horizon, rng, 1, ordered=True)
    return times


def simulate_arrival_batch(model: RenewalModel, horizon: float, rng: np.random.Generator,
                           n_paths: int, ordered: bool = True) -> Tuple[np.ndarray, np.ndarray]:
    """Arrivals of ``n_paths`` independent paths on ``(0, horizon]``.

    Returns per-path counts and the arrival times concatenated path by path.
    Poisson arrivals are drawn as a Poisson count plus uniform times; with
    ``ordered=False`` those times are left unsorted within a path.
    """
    if model.is_poisson:
        counts = rng.poisson(model.interarrival.rate * horizon, n_paths)
        total = int(counts.sum())
        u = rng.random(total)
        if ordered and total:
            path = np.repeat(np.arange(n_paths), counts)
            u = np.sort(path + u) - path
        return counts, horizon * u
    mu = model.mean_interarrival()
    expected = horizon / mu if math.isfinite(mu) and mu > 0 else 0.0
    block = int(max(8, math.ceil(1.1 * expected + 4.0 * math.sqrt(expected))))
    last = np.zeros(n_paths)
    active = np.arange(n_paths)
    ids, vals = [], []
    while active.size:
        gaps = model.interarrival.sample(rng, active.size * block).reshape(active.size, block)
        cs = last[active, None] + np.cumsum(gaps, axis=1)
        keep = cs <= horizon
        ids.append(np.broadcast_to(active[:, None], cs.shape)[keep])
        vals.append(cs[keep])
        last[active] = cs[:, -1]
        active = active[cs[:, -1] <= horizon]
    path = np.concatenate(ids)
    times = np.concatenate(vals)
    order = np.argsort(path, kind="stable")
    counts = np.bincount(path, minlength=n_paths)
    return counts, times[order]


def renewal_grid(model: RenewalModel, horizon: float, n_steps: int = DEFAULT_RENEWAL_STEPS):
    """Renewal function on ``n_steps + 1`` equispaced points of ``[0, horizon]``.

    Exact for Poisson and deterministic interarrivals; otherwise the renewal
    equation ``lambda = F + lambda * dF`` is solved by a trapezoidal
    Riemann-Stieltjes convolution.  Returns ``(grid, values)``; values are
    ``inf`` when the scheme cannot converge (mass of the interarrival law
    at 0).
    """
    grid = np.linspace(0.0, horizon, n_steps + 1)
    law = model.interarrival
    if model.is_poisson:
        return grid, law.rate * grid
    if isinstance(law, Degenerate):
        if law.value <= 0:
            return grid, np.full_like(grid, math.inf)
        return grid, np.floor(grid / law.value + 1e-12)
    F = law.cdf(grid)
    if F[0] > 0:
        return grid, np.full_like(grid, math.inf)
    dF = np.diff(F, prepend=0.0)
    denom = 1.0 - 0.5 * dF[1]
    lam = np.zeros(n_steps + 1)
    mids = np.zeros(n_steps + 1)
    for k in range(1, n_steps + 1):
        acc = F[k] + 0.5 * dF[1] * lam[k - 1]
        if k >= 2:
            acc += np.dot(dF[2:k + 1], mids[k - 2::-1])
        lam[k] = acc / denom
        mids[k - 1] = 0.5 * (lam[k - 1] + lam[k])
    return grid, lam


def renewal_function(model: RenewalModel, t: float, n_steps: int = DEFAULT_RENEWAL_STEPS) -> float:
    """``lambda(t) = E[N(t)]``."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    if t == 0:
        return 0.0
    _, lam = renewal_grid(model, t, n_steps)
    return float(lam[-1])


# --------------------------------------------------------------------------
# return processes


@dataclass(frozen=True)
class Deterministic:
    """``xi(t) = rate * t``."""

    rate: float


@dataclass(frozen=True)
class BrownianDrift:
    drift: float
    volatility: float

    def __post_init__(self):
        if self.volatility < 0:
            raise ValueError("volatility must be nonnegative")


@dataclass(frozen=True)
class JumpDiffusion:
    """Brownian motion with drift plus compound Poisson jumps."""

    drift: float
    volatility: float
    intensity: float
    jump: UnivariateLaw

    def __post_init__(self):
        if self.volatility < 0 or self.intensity < 0:
            raise ValueError("volatility and intensity must be nonnegative")


ReturnProcess = Union[Deterministic, BrownianDrift, JumpDiffusion]


def is_levy(proc: ReturnProcess) -> bool:
    return isinstance(proc, (Deterministic, BrownianDrift, JumpDiffusion))


def laplace_exponent(proc: ReturnProcess, z: float) -> float:
    """``phi(z) = ln E[exp(-z xi(1))]``, ``inf`` when the transform diverges."""
    if isinstance(proc, Deterministic):
        return -z * proc.rate
    phi = -z * proc.drift + 0.5 * z * z * proc.volatility**2
    if isinstance(proc, JumpDiffusion) and proc.intensity > 0:
        transform = proc.jump.laplace(z)
        if not math.isfinite(transform):
            return math.inf
        phi += proc.intensity * (transform - 1.0)
    return phi


def sample_return_batch(proc: ReturnProcess, counts: np.ndarray, times: np.ndarray,
                        rng: np.random.Generator) -> np.ndarray:
    """``xi`` at the given times for many paths.

    ``times`` is concatenated path by path (``counts`` per path) and sorted
    within each path.  Values are exact draws from the process law at those
    times; no discretization is involved.
    """
    times = np.asarray(times, dtype=float)
    if isinstance(proc, Deterministic):
        return proc.rate * times
    counts = np.asarray(counts, dtype=np.int64)
    starts = np.cumsum(counts) - counts
    dt = np.diff(times, prepend=0.0)
    nonempty = counts > 0
    dt[starts[nonempty]] = times[starts[nonempty]]
    if np.any(dt < 0):
        raise ValueError("times must be sorted and nonnegative within each path")
    inc = proc.drift * dt + proc.volatility * np.sqrt(dt) * rng.standard_normal(dt.size)
    if isinstance(proc, JumpDiffusion) and proc.intensity > 0:
        k = rng.poisson(proc.intensity * dt)
        sizes = proc.jump.sample(rng, int(k.sum()))
        owner = np.repeat(np.arange(dt.size), k)
        inc = inc + np.bincount(owner, weights=sizes, minlength=dt.size)
    total = np.cumsum(inc)
    before = np.where(starts > 0, total[np.maximum(starts - 1, 0)], 0.0)
    return total - np.repeat(before, counts)


def simulate_return_path(proc: ReturnProcess, times, rng: np.random.Generator) -> np.ndarray:
    """``xi`` at sorted nonnegative ``times`` along one path."""
    times = np.asarray(times, dtype=float)
    if np.any(np.diff(times) < 0) or np.any(times < 0):
        raise ValueError("times must be sorted and nonnegative")
    return sample_return_batch(proc, np.array([times.size]), times, rng)


# --------------------------------------------------------------------------
# assumption checks


@dataclass(frozen=True)
class PathBounds:
    """Constants with ``-C1 <= xi(t) <= C2`` on ``[0, T]``."""

    c1: float
    c2: float
    exact: bool
    note: str = ""


def check_assumption_3_1(proc: ReturnProcess, horizon: float, n_paths: int = 100_000,
                         rng: np.random.Generator | None = None, level: float = 1e-4,
                         n_steps: int = 1024) -> PathBounds:
    """Bounds on the path of ``xi`` over ``[0, horizon]``.

    Deterministic returns are bounded exactly.  Stochastic variants get the
    empirical ``level`` and ``1 - level`` quantiles of path infima and suprema
    on an ``n_steps`` grid; these are operational bounds, not almost-sure ones.
    ``C2`` is raised to ``C1`` when needed so that ``C2 >= C1``.
    """
    if not horizon > 0:
        raise ValueError("horizon must be positive")
    if isinstance(proc, Deterministic):
        c1 = max(0.0, -proc.rate * horizon)
        c2 = max(0.0, proc.rate * horizon)
        return PathBounds(c1, max(c1, c2), True)
    if rng is None:
        raise ValueError("stochastic return processes need an rng")
    grid = np.linspace(0.0, horizon, n_steps + 1)[1:]
    lows, highs = [], []
    per_chunk = max(1, 2_000_000 // n_steps)
    done = 0
    while done < n_paths:
        m = min(per_chunk, n_paths - done)
        xi = sample_return_batch(proc, np.full(m, n_steps), np.tile(grid, m), rng).reshape(m, n_steps)
        lows.append(np.minimum(xi.min(axis=1), 0.0))
        highs.append(np.maximum(xi.max(axis=1), 0.0))
        done += m
    c1 = max(0.0, -float(np.quantile(np.concatenate(lows), level)))
    c2 = max(0.0, float(np.quantile(np.concatenate(highs), 1.0 - level)))
    return PathBounds(c1, max(c1, c2), False, "empirical, not almost-sure")


@dataclass(frozen=True)
class MomentCheck:
    alpha: float
    exponents: Tuple[float, float]
    phi: Tuple[float, float]
    ratios: Tuple[float, float]
    verdict: bool
    partial_sums: Tuple[float, ...]
    bound: float

    @property
    def certificate(self) -> str:
        if not self.verdict:
            return "phi(k) >= 0 or E[exp(phi(k) T1)] >= 1: geometric series diverges"
        return f"geometric ratios {self.ratios[0]:.6g}, {self.ratios[1]:.6g} < 1; series <= {self.bound:.6g}"


def default_exponents(alpha: float) -> Tuple[float, float]:
    """A pair bracketing ``alpha`` as tightly as the assumption allows."""
    if alpha >= 1:
        return alpha / 2.0, alpha + 0.01
    return alpha / 2.0, alpha + min(0.01, (1.0 - alpha) / 2.0)


def check_assumption_4_1(proc: ReturnProcess, renewal: RenewalModel, alpha: float,
                         exponents: Tuple[float, float] | None = None,
                         n_terms: int = 200) -> MomentCheck:
    """Summability of ``E[exp(-k xi(T_i))]`` via the geometric certificate.

    For a Levy return process ``E[exp(-k xi(T_i))] = q^i`` with
    ``q = E[exp(phi(k) T_1)]``.  The verdict is true when ``phi(k) < 0`` and
    ``q < 1`` for both exponents.  For ``alpha >= 1`` the summand carries the
    power ``1/k``, so the ratio becomes ``q^(1/k)``.
    """
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    k1, k2 = exponents if exponents is not None else default_exponents(alpha)
    if alpha >= 1:
        if not 0 < k1 < alpha < k2:
            raise ValueError(f"need 0 < k1 < alpha < k2, got ({k1}, {k2}) for alpha={alpha}")
    elif not 0 < k1 < alpha < k2 < 1:
        raise ValueError(f"need 0 < k1 < alpha < k2 < 1, got ({k1}, {k2}) for alpha={alpha}")
    if not is_levy(proc):
        raise ValueError("the geometric certificate needs a Levy return process")
    phis = (laplace_exponent(proc, k1), laplace_exponent(proc, k2))
    qs = tuple(renewal.interarrival.laplace(-p) if math.isfinite(p) else math.inf for p in phis)
    if alpha >= 1:
        ratios = tuple(q ** (1.0 / k) for q, k in zip(qs, (k1, k2)))
    else:
        ratios = qs
    verdict = all(p < 0 for p in phis) and all(r < 1 for r in ratios)
    i = np.arange(1, n_terms + 1)
    with np.errstate(over="ignore", invalid="ignore"):
        terms = np.maximum(np.float64(ratios[0]) ** i, np.float64(ratios[1]) ** i)
    partial = tuple(float(v) for v in np.cumsum(terms))
    bound = sum(r / (1 - r) for r in ratios) if verdict else math.inf
    return MomentCheck(alpha, (k1, k2), phis, ratios, verdict, partial, bound)
