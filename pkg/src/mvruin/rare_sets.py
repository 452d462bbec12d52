"""Rare sets, ruin sets and the scalar projection ``Y_A``.

Every rare set is stored as a finite list of normalized directions ``p`` so
that ``A = {y : p . y > 1 for some p}``.  The projection of a point is then the
support function ``y_a(point) = max_p p . point`` and ``point in x*A`` holds
iff ``y_a(point) > x``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence, Tuple, Union

import numpy as np

_SUM_TOL = 1e-12


def _as_tuple(values: Sequence[float], name: str) -> Tuple[float, ...]:
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 1 or arr.size == 0:
        raise ValueError(f"{name} must be a non-empty vector")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite")
    return tuple(float(v) for v in arr)


@dataclass(frozen=True)
class OrSet:
    """``{x : x_i > b_i for some i}``: some line exceeds its threshold."""

    thresholds: Tuple[float, ...]

    def __post_init__(self):
        b = _as_tuple(self.thresholds, "thresholds")
        if min(b) <= 0:
            raise ValueError("thresholds must be positive")
        object.__setattr__(self, "thresholds", b)

    @property
    def dimension(self) -> int:
        return len(self.thresholds)

    @cached_property
    def directions(self) -> np.ndarray:
        return np.diag(1.0 / np.asarray(self.thresholds))


@dataclass(frozen=True)
class Halfspace:
    """``{x : sum_i l_i x_i > u}`` with ``l`` on the simplex."""

    weights: Tuple[float, ...]
    level: float

    def __post_init__(self):
        w = _as_tuple(self.weights, "weights")
        if min(w) < 0:
            raise ValueError("weights must be nonnegative")
        if abs(sum(w) - 1.0) > _SUM_TOL:
            raise ValueError(f"weights must sum to 1 (got {sum(w)!r})")
        if not max(w) > 0:
            raise ValueError("at least one weight must be positive")
        if not (np.isfinite(self.level) and self.level > 0):
            raise ValueError("level must be positive")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "level", float(self.level))

    @property
    def dimension(self) -> int:
        return len(self.weights)

    @cached_property
    def directions(self) -> np.ndarray:
        return (np.asarray(self.weights) / self.level)[None, :]


@dataclass(frozen=True)
class SupportSet:
    """Union of halfspaces ``{y : p_k . y > c_k}`` given by direction/level pairs.

    Directions are rescaled to level 1 on construction.  Negative direction
    components are rejected since the set would no longer be increasing.
    """

    directions_in: Tuple[Tuple[float, ...], ...]
    levels: Tuple[float, ...] = field(default=())

    def __post_init__(self):
        rows = [_as_tuple(p, "direction") for p in self.directions_in]
        if not rows:
            raise ValueError("at least one direction is required")
        if len({len(r) for r in rows}) != 1:
            raise ValueError("directions must share one dimension")
        levels = self.levels or tuple(1.0 for _ in rows)
        levels = _as_tuple(levels, "levels")
        if len(levels) != len(rows):
            raise ValueError("one level per direction is required")
        if min(levels) <= 0:
            raise ValueError("levels must be positive")
        for p in rows:
            if min(p) < 0:
                raise ValueError("direction components must be nonnegative (set must be increasing)")
            if max(p) <= 0:
                raise ValueError("every direction needs a positive component")
        normalized = tuple(tuple(v / c for v in p) for p, c in zip(rows, levels))
        object.__setattr__(self, "directions_in", normalized)
        object.__setattr__(self, "levels", tuple(1.0 for _ in rows))

    @property
    def dimension(self) -> int:
        return len(self.directions_in[0])

    @cached_property
    def directions(self) -> np.ndarray:
        return np.asarray(self.directions_in, dtype=float)


RareSet = Union[OrSet, Halfspace, SupportSet]


@dataclass(frozen=True)
class AnyLineNegative:
    """Ruin when at least one line's surplus is negative."""

    dimension: int

    def contains(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        return np.any(pts < 0, axis=-1)


@dataclass(frozen=True)
class TotalNegative:
    """Ruin when the total surplus over all lines is negative."""

    dimension: int

    def contains(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        return pts.sum(axis=-1) < 0


RuinSet = Union[AnyLineNegative, TotalNegative]


@dataclass(frozen=True)
class CapitalAllocation:
    """Initial capital ``x`` split over the lines by positive weights ``l``."""

    x: float
    weights: Tuple[float, ...]

    def __post_init__(self):
        w = _as_tuple(self.weights, "weights")
        if min(w) <= 0:
            raise ValueError("allocation weights must be positive")
        if abs(sum(w) - 1.0) > _SUM_TOL:
            raise ValueError(f"allocation weights must sum to 1 (got {sum(w)!r})")
        if not (np.isfinite(self.x) and self.x > 0):
            raise ValueError("capital x must be positive")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "x", float(self.x))

    @property
    def dimension(self) -> int:
        return len(self.weights)

    def initial_surplus(self) -> np.ndarray:
        return self.x * np.asarray(self.weights)


def _check_points(rare_set: RareSet, points) -> np.ndarray:
    pts = np.asarray(points, dtype=float)
    if pts.shape[-1:] != (rare_set.dimension,):
        raise ValueError(
            f"dimension mismatch: set has d={rare_set.dimension}, point has shape {pts.shape}"
        )
    return pts


def support(rare_set: RareSet, points) -> np.ndarray:
    """Support function ``max_p p . point``; defined for any real point."""
    pts = _check_points(rare_set, points)
    return np.max(pts @ rare_set.directions.T, axis=-1)


def y_a(rare_set: RareSet, points):
    """``sup{u > 0 : point in u*A}`` for points in the nonnegative orthant.

    Accepts a single ``d``-vector or an ``(n, d)`` array and returns a float or
    an ``(n,)`` array.  Returns 0 when no positive multiple of ``A`` contains
    the point.
    """
    val = np.maximum(support(rare_set, points), 0.0)
    return float(val) if np.ndim(val) == 0 else val


def contains(rare_set: RareSet, x: float, points):
    """Membership ``point in x*A``.  Sets are open: strict inequality."""
    if not x > 0:
        raise ValueError("scale x must be positive")
    res = support(rare_set, points) > x
    return bool(res) if np.ndim(res) == 0 else res


def inclusion_margin(rare_set: RareSet, x: float, u: float, point) -> Tuple[bool, bool, bool]:
    """Membership of ``point`` in ``(x+u)A``, ``xA`` and ``(x-u)A``.

    Because ``(x+u)A`` is a subset of ``xA`` which is a subset of ``(x-u)A``
    the triple is monotone.
    """
    if not (x > u > 0):
        raise ValueError("require x > u > 0")
    s = float(support(rare_set, point))
    return (s > x + u, s > x, s > x - u)


def ruin_to_rare(ruin_set: RuinSet, alloc: CapitalAllocation) -> RareSet:
    """Rare set ``A = l - L`` whose entrance by ``D - premiums`` means ruin.

    ``AnyLineNegative`` maps to ``OrSet(b=l)``; ``TotalNegative`` maps to
    ``{y : sum y_i > 1}``, stored as a halfspace with uniform weights ``1/d``
    and level ``1/d``.
    """
    d = alloc.dimension
    if ruin_set.dimension != d:
        raise ValueError(f"dimension mismatch: ruin set d={ruin_set.dimension}, allocation d={d}")
    if isinstance(ruin_set, AnyLineNegative):
        return OrSet(alloc.weights)
    if isinstance(ruin_set, TotalNegative):
        return Halfspace(tuple(1.0 / d for _ in range(d)), sum(alloc.weights) / d)
    raise TypeError(f"unsupported ruin set {ruin_set!r}")
