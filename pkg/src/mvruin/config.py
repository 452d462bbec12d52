"""YAML experiment configuration, validated field by field.

Every node builds its domain object during validation, so an invalid value
is reported with its field path (``model.allocation: ...``) rather than as a
failure deep inside a simulation.
"""

from __future__ import annotations

import math
from pathlib import Path
from typing import Any, List, Literal, Optional

import yaml
from pydantic import BaseModel, ConfigDict, Field, PrivateAttr, ValidationError, field_validator, model_validator

from . import claim_vectors as cv
from . import distributions as dist
from . import processes as pr
from . import rare_sets as rs
from .risk_model import PremiumPlan, PremiumSchedule, RiskModelSpec

LAWS = {
    "pareto": dist.Pareto,
    "lognormal": dist.LogNormal,
    "exponential": dist.Exponential,
    "gamma": dist.Gamma,
    "weibull": dist.Weibull,
    "degenerate": dist.Degenerate,
    "uniform": dist.Uniform,
    "normal": dist.Normal,
}

EXPERIMENT_KINDS = ("entrance", "global", "ruin", "breiman", "big-jump", "uniformity", "assumption-check")


class ConfigError(ValueError):
    """Configuration failed to load or validate; ``violations`` lists every problem."""

    def __init__(self, violations: List[str]):
        super().__init__("\n".join(violations))
        self.violations = violations


class _Node(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)
    _built: Any = PrivateAttr(default=None)

    def _build(self):
        raise NotImplementedError

    @model_validator(mode="after")
    def _check(self):
        try:
            self._built = self._build()
        except (TypeError, ValueError) as exc:
            raise ValueError(str(exc)) from None
        return self

    def build(self):
        return self._built if self._built is not None else self._build()


class LawConfig(BaseModel):
    """``{law: pareto, alpha: 2, scale: 1}``; remaining keys are the law's parameters."""

    model_config = ConfigDict(extra="allow", frozen=True)
    law: Literal[tuple(LAWS)]  # type: ignore[valid-type]

    @model_validator(mode="after")
    def _check(self):
        try:
            self.build()
        except TypeError as exc:
            raise ValueError(f"bad parameters for {self.law}: {exc}") from None
        return self

    def build(self) -> dist.UnivariateLaw:
        return LAWS[self.law](**(self.model_extra or {}))


class SpectralConfig(_Node):
    atoms: List[List[float]]
    weights: List[float]
    norm: Literal["euclidean", "max"] = "euclidean"

    def _build(self):
        return cv.SpectralMeasure(tuple(map(tuple, self.atoms)), tuple(self.weights), self.norm)


class CopulaConfig(_Node):
    kind: Literal["independent", "gaussian", "comonotone"]
    correlation: Optional[List[List[float]]] = None

    def _build(self):
        if self.kind == "gaussian":
            if self.correlation is None:
                raise ValueError("gaussian copula needs a correlation matrix")
            return cv.GaussianCopula(tuple(map(tuple, self.correlation)))
        return cv.IndependentCopula() if self.kind == "independent" else cv.ComonotoneCopula()


class ClaimsConfig(_Node):
    kind: Literal["spectral", "margins"] = "spectral"
    radial: Optional[LawConfig] = None
    spectral: Optional[SpectralConfig] = None
    margins: Optional[List[LawConfig]] = None
    copula: Optional[CopulaConfig] = None

    def _build(self):
        if self.kind == "spectral":
            if self.radial is None or self.spectral is None:
                raise ValueError("spectral claims need 'radial' and 'spectral'")
            return cv.SpectralClaims(self.radial.build(), self.spectral.build())
        if self.margins is None:
            raise ValueError("margin claims need 'margins'")
        copula = self.copula.build() if self.copula else cv.IndependentCopula()
        return cv.MarginCopulaClaims(tuple(m.build() for m in self.margins), copula)


class CouplingConfig(_Node):
    kind: Literal["iid", "gaussian-radial", "comonotone"] = "iid"
    rho: Optional[float] = None

    def _build(self):
        if self.kind == "gaussian-radial":
            if self.rho is None:
                raise ValueError("gaussian-radial coupling needs 'rho'")
            return cv.GaussianRadialCoupling(self.rho)
        return cv.IID() if self.kind == "iid" else cv.ComonotoneCoupling()


class ReturnsConfig(_Node):
    kind: Literal["deterministic", "brownian", "jump-diffusion"]
    rate: Optional[float] = None
    drift: float = 0.0
    volatility: float = 0.0
    intensity: float = 0.0
    jump: Optional[LawConfig] = None

    def _build(self):
        if self.kind == "deterministic":
            if self.rate is None:
                raise ValueError("deterministic returns need 'rate'")
            return pr.Deterministic(self.rate)
        if self.kind == "brownian":
            return pr.BrownianDrift(self.drift, self.volatility)
        if self.jump is None:
            raise ValueError("jump-diffusion needs a 'jump' law")
        return pr.JumpDiffusion(self.drift, self.volatility, self.intensity, self.jump.build())


class ScheduleConfig(_Node):
    breaks: List[float]
    values: List[float]

    def _build(self):
        return PremiumSchedule(tuple(self.breaks), tuple(self.values))


class PremiumsConfig(_Node):
    bounds: List[float]
    schedules: Optional[List[ScheduleConfig]] = None

    def _build(self):
        sch = None if self.schedules is None else tuple(s.build() for s in self.schedules)
        return PremiumPlan(tuple(self.bounds), sch)


class AllocationConfig(_Node):
    weights: List[float]
    capital: float = 1.0

    def _build(self):
        return rs.CapitalAllocation(self.capital, tuple(self.weights))


class SetConfig(_Node):
    kind: Literal["or", "halfspace", "support"]
    thresholds: Optional[List[float]] = None
    weights: Optional[List[float]] = None
    level: float = 1.0
    directions: Optional[List[List[float]]] = None
    levels: Optional[List[float]] = None

    def _build(self):
        if self.kind == "or":
            if self.thresholds is None:
                raise ValueError("or-set needs 'thresholds'")
            return rs.OrSet(tuple(self.thresholds))
        if self.kind == "halfspace":
            if self.weights is None:
                raise ValueError("halfspace needs 'weights'")
            return rs.Halfspace(tuple(self.weights), self.level)
        if self.directions is None:
            raise ValueError("support set needs 'directions'")
        return rs.SupportSet(tuple(map(tuple, self.directions)), tuple(self.levels or ()))


class ModelConfig(_Node):
    claims: ClaimsConfig
    arrivals: LawConfig
    returns: ReturnsConfig
    premiums: PremiumsConfig
    allocation: AllocationConfig
    coupling: CouplingConfig = CouplingConfig()

    def _build(self):
        return RiskModelSpec(self.claims.build(), pr.RenewalModel(self.arrivals.build()),
                             self.returns.build(), self.premiums.build(), self.allocation.build(),
                             self.coupling.build())


def _positive_finite(values: List[float], name: str, allow_inf: bool = False) -> List[float]:
    if not values:
        raise ValueError(f"{name} must be nonempty")
    for v in values:
        if not v > 0 or (math.isinf(v) and not allow_inf) or math.isnan(v):
            raise ValueError(f"{name} entries must be positive{'' if allow_inf else ' and finite'}")
    return values


class ExperimentConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    id: str = Field(pattern=r"^[A-Za-z0-9_.-]+$")
    kind: Literal[EXPERIMENT_KINDS]  # type: ignore[valid-type]
    x_grid: List[float] = [1.0]
    t_grid: List[float] = [1.0]
    n: int = 10_000
    set: Optional[SetConfig] = None
    ruin_set: Literal["any-line-negative", "total-negative"] = "any-line-negative"
    theta: Optional[LawConfig] = None
    m: int = 2
    comonotone: bool = False
    chunk: Optional[int] = Field(default=None, ge=1)

    @field_validator("x_grid")
    @classmethod
    def _x(cls, v):
        return _positive_finite(v, "x_grid")

    @field_validator("t_grid")
    @classmethod
    def _t(cls, v):
        return _positive_finite(v, "t_grid", allow_inf=True)

    @field_validator("n")
    @classmethod
    def _n(cls, v):
        if v < 1000:
            raise ValueError("n must be at least 1000")
        return v

    @model_validator(mode="after")
    def _kind_fields(self):
        if self.kind in ("entrance", "global", "breiman", "big-jump", "uniformity") and self.set is None:
            raise ValueError(f"experiment kind '{self.kind}' needs a 'set'")
        if self.kind == "breiman" and self.theta is None:
            raise ValueError("breiman experiment needs a 'theta' law")
        if self.kind == "big-jump" and self.m < 1:
            raise ValueError("m must be at least 1")
        if self.kind != "global" and any(math.isinf(t) for t in self.t_grid):
            raise ValueError("t_grid may contain inf only for the global experiment")
        return self

    def ruin(self, dimension: int) -> rs.RuinSet:
        cls = rs.AnyLineNegative if self.ruin_set == "any-line-negative" else rs.TotalNegative
        return cls(dimension)


class RunConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    seed: int = Field(ge=0, lt=2**64)
    output: str = "results"
    model: ModelConfig
    experiments: List[ExperimentConfig] = Field(min_length=1)

    @model_validator(mode="after")
    def _dimensions(self):
        d = self.model.build().dimension
        ids = [e.id for e in self.experiments]
        if len(set(ids)) != len(ids):
            raise ValueError("experiment ids must be unique")
        spectral = isinstance(self.model.claims.build(), cv.SpectralClaims)
        for e in self.experiments:
            if e.kind != "assumption-check" and not spectral:
                raise ValueError(f"experiment '{e.id}': asymptotic comparisons need spectral claims")
            if e.set is not None and e.set.build().dimension != d:
                raise ValueError(f"experiment '{e.id}': set dimension {e.set.build().dimension} != model dimension {d}")
        return self

    @property
    def spec(self) -> RiskModelSpec:
        return self.model.build()


def _format_error(err: dict) -> str:
    path = ".".join(str(p) for p in err["loc"]) or "<root>"
    msg = err["msg"]
    for prefix in ("Value error, ", "Assertion failed, "):
        if msg.startswith(prefix):
            msg = msg[len(prefix):]
    return f"{path}: {msg}"


def parse_config(data: Any) -> RunConfig:
    """Validate a loaded key tree; raises ``ConfigError`` listing every violation."""
    if not isinstance(data, dict):
        raise ConfigError(["<root>: config must be a mapping"])
    try:
        return RunConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError([_format_error(e) for e in exc.errors()]) from None


def load_config(path: str | Path) -> RunConfig:
    """Read and validate a YAML config file."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError([f"<file>: cannot read {path}: {exc.strerror}"]) from None
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError([f"<file>: not valid YAML: {exc}"]) from None
    return parse_config(data)
