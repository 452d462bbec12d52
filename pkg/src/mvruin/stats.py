"""Proportion estimates with Wilson intervals."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Tuple

Z95 = 1.959963984540054


def wilson_interval(hits: int, n: int, z: float = Z95) -> Tuple[float, float]:
    if n <= 0:
        raise ValueError("n must be positive")
    p = hits / n
    denom = 1.0 + z * z / n
    centre = (p + z * z / (2 * n)) / denom
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom
    lo, hi = max(0.0, centre - half), min(1.0, centre + half)
    # keep the point estimate inside despite rounding at p in {0, 1}
    return min(lo, p), max(hi, p)


@dataclass(frozen=True)
class EstimateReport:
    """Monte Carlo frequency with its 95% Wilson interval."""

    estimate: float
    ci_low: float
    ci_high: float
    n: int
    hits: int
    seed: int | None = None
    wall_time: float = 0.0
    flags: Tuple[str, ...] = field(default=())

    @classmethod
    def from_counts(cls, hits: int, n: int, seed=None, wall_time: float = 0.0, flags=()) -> "EstimateReport":
        lo, hi = wilson_interval(hits, n)
        flags = tuple(flags)
        if hits == 0 and "zero-hits" not in flags:
            flags = flags + ("zero-hits",)
        return cls(hits / n, lo, hi, n, hits, seed, wall_time, flags)

    @property
    def std_error(self) -> float:
        """Binomial standard error of the frequency."""
        p = self.estimate
        return math.sqrt(p * (1 - p) / self.n)

    def covers(self, value: float) -> bool:
        return self.ci_low <= value <= self.ci_high
