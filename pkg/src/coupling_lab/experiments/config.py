"""Experiment configuration: YAML in, validated ``ExperimentSpec`` out."""
from __future__ import annotations

import enum
import math
from pathlib import Path
from typing import List, Optional, Tuple, Union

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from ..model_spaces import Base, Fiber, GeometryError, SpaceSpec, space_from_name
from ..sde_sim import PathConfig, Scheme


class Kind(str, enum.Enum):
    VERTICAL_TAIL = "VerticalTail"
    TWO_STAGE_TAIL = "TwoStageTail"
    DENSITY_HISTOGRAM = "DensityHistogram"
    TV_WITNESS = "TvWitness"
    REFLECTION_PRINCIPLE = "ReflectionPrinciple"
    CLT_CHECK = "CltCheck"
    EXP_FIT = "ExpFit"
    GRADIENT_BOUND = "GradientBound"
    GEOMETRY_UNIT = "GeometryUnit"


class ConfigValidationError(ValueError):
    """Invalid configuration.  ``errors`` holds (location, message) pairs."""

    def __init__(self, errors: List[Tuple[str, str]], source: str = "<config>"):
        self.errors = list(errors)
        self.source = source
        lines = [f"{source}: {loc}: {msg}" if loc else f"{source}: {msg}" for loc, msg in self.errors]
        super().__init__("\n".join(lines))


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class SpaceConfig(_Strict):
    name: Optional[str] = None
    base: Optional[Base] = None
    fiber: Optional[Fiber] = None
    weights: Optional[List[float]] = None

    @model_validator(mode="after")
    def _resolve(self):
        if (self.name is None) == (self.base is None and self.fiber is None):
            raise ValueError("give either a space name or a base/fiber pair")
        if self.name is None and (self.base is None or self.fiber is None):
            raise ValueError("base and fiber must both be given")
        try:
            self.to_spec()
        except GeometryError as exc:
            raise ValueError(str(exc)) from None
        return self

    def to_spec(self) -> SpaceSpec:
        w = tuple(self.weights) if self.weights is not None else None
        if self.name is not None:
            return space_from_name(self.name, w)
        return SpaceSpec(self.base, self.fiber, w)


class StartPoint(_Strict):
    """Polar start point (r, theta, z); for weighted products use x, y lists."""
    r: float = 0.0
    theta: float = 0.0
    z: float = 0.0
    x: Optional[List[float]] = None
    y: Optional[List[float]] = None

    @field_validator("r")
    @classmethod
    def _r_nonneg(cls, v):
        if not (v >= 0.0 and math.isfinite(v)):
            raise ValueError("r must be finite and non-negative")
        return v


class OutputConfig(_Strict):
    dir: str = "results"
    stem: Optional[str] = None


class ExperimentSpec(_Strict):
    name: str = Field(min_length=1)
    kind: Kind
    space: SpaceConfig
    a: Optional[float] = None
    start1: Optional[StartPoint] = None
    start2: Optional[StartPoint] = None
    t_grid: List[float]
    n_paths: int = Field(ge=100)
    dt: float = Field(default=0.01, gt=0.0)
    horizon: Optional[float] = None
    scheme: Scheme = Scheme.EMBEDDED_GEODESIC
    bridge_correction: bool = True
    seed: int = Field(default=0, ge=0, lt=2 ** 64)
    fit_window: Optional[Tuple[float, float]] = None
    functions: Optional[List[str]] = None
    bins: int = Field(default=80, ge=5)
    anchor: Optional[str] = None
    output: OutputConfig = OutputConfig()

    @field_validator("t_grid")
    @classmethod
    def _grid(cls, v):
        if not v:
            raise ValueError("t_grid must not be empty")
        if any(not (t > 0.0 and math.isfinite(t)) for t in v):
            raise ValueError("t_grid entries must be positive and finite")
        if any(v[i] >= v[i + 1] for i in range(len(v) - 1)):
            raise ValueError("t_grid must be strictly increasing")
        return v

    @model_validator(mode="after")
    def _consistent(self):
        spec = self.space.to_spec()
        k = self.kind
        if self.horizon is not None and self.horizon < self.t_grid[-1]:
            raise ValueError("horizon must cover the last t_grid point")
        if self.dt > self.t_grid[0] and k is not Kind.GEOMETRY_UNIT:
            raise ValueError("dt must not exceed the first t_grid point")
        needs_a = k in (Kind.VERTICAL_TAIL, Kind.REFLECTION_PRINCIPLE, Kind.EXP_FIT,
                        Kind.GRADIENT_BOUND) or (k is Kind.TV_WITNESS and self.start1 is None)
        if needs_a:
            if self.a is None or not (self.a > 0.0):
                raise ValueError(f"{k.value} needs a positive level a")
            if spec.circle and 2 * self.a > 2 * math.pi + 1e-12:
                raise ValueError("on a circle fiber 2a must not exceed 2pi")
        if k is Kind.TWO_STAGE_TAIL and (self.start1 is None or self.start2 is None):
            raise ValueError("TwoStageTail needs start1 and start2")
        if (self.start1 is None) != (self.start2 is None):
            raise ValueError("start1 and start2 go together")
        weighted = spec.weights is not None and len(spec.weights) > 1
        for p in (self.start1, self.start2):
            if p is None:
                continue
            if weighted != (p.x is not None):
                raise ValueError("x/y start coordinates are for weighted spaces only, and required there")
            if weighted and (len(p.x) != len(spec.weights) or p.y is None or len(p.y) != len(p.x)):
                raise ValueError("start x and y need one entry per weight")
        if k is Kind.TV_WITNESS and self.start1 is not None and weighted:
            raise ValueError("the horizontal witness is implemented for planar bases")
        if k in (Kind.REFLECTION_PRINCIPLE, Kind.TV_WITNESS) and weighted and self.start1 is None:
            raise ValueError(f"{k.value} is implemented for single-factor spaces")
        if k is Kind.EXP_FIT and self.fit_window is None:
            raise ValueError("ExpFit needs fit_window")
        if self.fit_window is not None and not (0 <= self.fit_window[0] < self.fit_window[1]):
            raise ValueError("fit_window must be an increasing pair")
        if k is Kind.CLT_CHECK and (spec.kappa != -1 or spec.circle):
            raise ValueError("CltCheck applies to the SL(2) universal cover (space sl2-cover)")
        if k is Kind.GEOMETRY_UNIT and spec.kappa != 1:
            raise ValueError("GeometryUnit checks the SU(2) model; use space su2")
        if self.functions is not None:
            from ..analytics import TEST_FUNCTIONS
            bad = [f for f in self.functions if f not in TEST_FUNCTIONS]
            if bad:
                raise ValueError(f"unknown test functions {bad}; choose from {sorted(TEST_FUNCTIONS)}")
        return self

    @property
    def space_spec(self) -> SpaceSpec:
        return self.space.to_spec()

    @property
    def path_config(self) -> PathConfig:
        return PathConfig(dt=self.dt, horizon=self.horizon or self.t_grid[-1], seed=self.seed,
                          scheme=self.scheme, bridge_correction=self.bridge_correction)

    @property
    def stem(self) -> str:
        return self.output.stem or self.name


def _loc(parts) -> str:
    out = ""
    for p in parts:
        out += f"[{p}]" if isinstance(p, int) else (f".{p}" if out else str(p))
    return out


def validate_config(data, source: str = "<config>") -> ExperimentSpec:
    if not isinstance(data, dict):
        raise ConfigValidationError([("", "top level must be a mapping")], source)
    try:
        return ExperimentSpec.model_validate(data)
    except ValidationError as exc:
        errs = []
        for e in exc.errors():
            msg = e["msg"].removeprefix("Value error, ")
            errs.append((_loc(e["loc"]), msg))
        raise ConfigValidationError(errs, source) from None


def load_config(path: Union[str, Path]) -> ExperimentSpec:
    path = Path(path)
    try:
        data = yaml.safe_load(path.read_text(encoding="utf-8"))
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        loc = f"line {mark.line + 1}, column {mark.column + 1}" if mark else ""
        raise ConfigValidationError([(loc, f"YAML syntax error: {getattr(exc, 'problem', exc)}")],
                                    str(path)) from None
    except OSError as exc:
        raise ConfigValidationError([("", f"cannot read config: {exc.strerror}")], str(path)) from None
    return validate_config(data, str(path))
