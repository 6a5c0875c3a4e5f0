"""Experiment configuration: a YAML file validated against a strict schema.

Unknown keys are rejected and every physics-relevant field must be given
explicitly.  Validation errors carry the YAML line of the offending field.
"""
from __future__ import annotations

import hashlib
import json
import math
from enum import Enum
from pathlib import Path
from typing import Annotated, Literal, Union

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from ..bounds import Theorem
from ..geometry import Box, Mu2Kind, SpaceConfig, StretchSchedule
from ..models import (
    ClusterBounded,
    ConditionCertificate,
    DensitySpec,
    FiniteRangeBeta,
    GeometricBeta,
    HomogeneousPoisson,
    InhomogeneousPoisson,
    MarkovModulated,
    MixingKind,
    PowerAlpha,
    PowerBeta,
    ProcessModel,
    certificate_for,
)

__all__ = [
    "ConfigError",
    "ExperimentKind",
    "ExperimentConfig",
    "load_config",
    "parse_config",
    "dump_config",
    "config_hash",
]


class ConfigError(ValueError):
    """Schema violation; the message lists every problem with its location."""


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class ExperimentKind(str, Enum):
    BOUND_SWEEP = "bound_sweep"
    DOMINATION_COUNTS = "domination_counts"
    DOMINATION_D2_SLOPE = "domination_d2_slope"
    DENSITY_EXPERIMENT = "density_experiment"
    LRD_SIZE_POWER = "lrd_size_power"
    VALIDATE_MODEL = "validate_model"


class SpaceSection(_Strict):
    d1_dims: int = Field(ge=1)
    d2_dims: int = Field(ge=1)
    mu2_kind: Mu2Kind

    def build(self) -> SpaceConfig:
        return SpaceConfig(self.d1_dims, self.d2_dims, self.mu2_kind)


class ScheduleSection(_Strict):
    k: float = Field(gt=0)
    delta: float = Field(gt=0, le=1)

    def build(self) -> StretchSchedule:
        return StretchSchedule(self.k, self.delta)


class GeometricGrid(_Strict):
    start: float = Field(ge=1)
    ratio: float = Field(gt=1)
    count: int = Field(ge=1)

    def values(self) -> list[float]:
        return [self.start * self.ratio ** i for i in range(self.count)]


class Log2Grid(_Strict):
    log2_min: float
    log2_max: float
    step: float = Field(gt=0)

    def values(self) -> list[float]:
        n = int(math.floor((self.log2_max - self.log2_min) / self.step + 1e-9)) + 1
        return [2.0 ** (self.log2_min + i * self.step) for i in range(n)]


# --- models ----------------------------------------------------------------


class HomogeneousSection(_Strict):
    kind: Literal["homogeneous_poisson"]
    ell: float = Field(ge=0)


class DensitySection(_Strict):
    form: Literal["constant", "separable_quadratic"]
    ell: float | None = None
    a: float | None = None
    b: float | None = None

    @model_validator(mode="after")
    def _fields_for_form(self):
        if self.form == "constant" and self.ell is None:
            raise ValueError("constant density needs 'ell'")
        if self.form == "separable_quadratic" and (self.a is None or self.b is None):
            raise ValueError("separable_quadratic density needs 'a' and 'b'")
        return self

    def build(self) -> DensitySpec:
        if self.form == "constant":
            return DensitySpec.constant(self.ell)
        return DensitySpec.quadratic(self.a, self.b)


class InhomogeneousSection(_Strict):
    kind: Literal["inhomogeneous_poisson"]
    density: DensitySection


class ClusterSection(_Strict):
    kind: Literal["cluster_bounded"]
    parent_rate: float = Field(ge=0)
    size_pmf: list[float]
    radius: float = Field(gt=0)


class MarkovSection(_Strict):
    kind: Literal["markov_modulated"]
    transition: list[list[float]]
    rates: list[float]


class AlphaSection(_Strict):
    c: float = Field(ge=0)
    r: float = Field(gt=0)


class BetaSection(_Strict):
    family: Literal["power", "finite_range", "geometric"]
    c: float = Field(ge=0)
    p: float | None = None
    u0: float | None = None
    gamma: float | None = None

    @model_validator(mode="after")
    def _fields_for_family(self):
        need = {"power": "p", "finite_range": "u0", "geometric": "gamma"}[self.family]
        if getattr(self, need) is None:
            raise ValueError(f"{self.family} beta needs '{need}'")
        return self

    def build(self):
        if self.family == "power":
            return PowerBeta(self.c, self.p)
        if self.family == "finite_range":
            return FiniteRangeBeta(self.c, self.u0)
        return GeometricBeta(self.c, self.gamma)


class CertificateSection(_Strict):
    """A bare certificate, for bound sweeps that need no simulator."""

    kind: Literal["certificate"]
    kappa: float = Field(ge=0)
    iota: float = Field(ge=0)
    mixing_kind: MixingKind
    alpha: AlphaSection
    beta: BetaSection

    def build(self) -> ConditionCertificate:
        return ConditionCertificate(
            self.kappa, self.iota, PowerAlpha(self.alpha.c, self.alpha.r), self.beta.build(), self.mixing_kind,
            derivation="supplied in the configuration",
        )


ModelSection = Annotated[
    Union[HomogeneousSection, InhomogeneousSection, ClusterSection, MarkovSection, CertificateSection],
    Field(discriminator="kind"),
]


# --- experiment specific sections -----------------------------------------


class ParameterSection(_Strict):
    m: Union[Literal["auto"], list[int], Log2Grid]
    h: Union[Literal["auto"], list[float], Log2Grid]


class MCSection(_Strict):
    replicates: int | None = Field(default=None, ge=1)
    samples: int | None = Field(default=None, ge=1)
    calibration: int | None = Field(default=None, ge=1)
    evaluation: int | None = Field(default=None, ge=1)
    bootstrap: int = Field(default=200, ge=10)


class DensityExpSection(_Strict):
    kernel: Literal["uniform", "triangular"]
    M: int | None = Field(default=None, ge=1)


class LRDSection(_Strict):
    alpha: float = Field(gt=0, lt=1)
    smooth_slope: float = Field(gt=0)
    epsilon: float = Field(ge=0)
    null_ell: float = Field(gt=0)
    lipschitz_LD: float | None = Field(default=None, gt=0)


class RectangleSection(_Strict):
    lower: list[float]
    upper: list[float]


class ValidateSection(_Strict):
    rectangles: list[RectangleSection] = Field(min_length=1)
    mc_n: int = Field(ge=1000)


class ExperimentConfig(_Strict):
    experiment: ExperimentKind
    space: SpaceSection
    schedule: ScheduleSection
    model: ModelSection
    T_grid: Union[list[float], GeometricGrid]
    seed: int = Field(ge=0, lt=2 ** 64)
    theorem: Theorem | None = None
    rough: bool = False
    regularity: list[float] | None = None
    parameters: ParameterSection | None = None
    mc: MCSection | None = None
    density: DensityExpSection | None = None
    lrd: LRDSection | None = None
    validate_: ValidateSection | None = Field(default=None, alias="validate")
    output_dir: str = "results"

    model_config = ConfigDict(extra="forbid", frozen=True, populate_by_name=True)

    @field_validator("T_grid")
    @classmethod
    def _grid_nonempty(cls, v):
        vals = v.values() if isinstance(v, GeometricGrid) else list(v)
        if not vals:
            raise ValueError("T grid must not be empty")
        if any(not (b > a) for a, b in zip(vals, vals[1:])):
            raise ValueError("T grid must be strictly increasing")
        if vals[0] < 1:
            raise ValueError("T values must be >= 1")
        return v

    @model_validator(mode="after")
    def _cross_checks(self):
        space = self.space.build()
        for T in self.T_values:
            space.check_T(T)
        self.schedule.build().check_on(self.T_values)
        kind = self.experiment
        need = {
            ExperimentKind.BOUND_SWEEP: ("theorem", "parameters"),
            ExperimentKind.DOMINATION_COUNTS: ("parameters", "mc"),
            ExperimentKind.DOMINATION_D2_SLOPE: ("theorem", "parameters", "mc"),
            ExperimentKind.DENSITY_EXPERIMENT: ("density", "mc"),
            ExperimentKind.LRD_SIZE_POWER: ("lrd", "mc"),
            ExperimentKind.VALIDATE_MODEL: ("validate_",),
        }[kind]
        for name in need:
            if getattr(self, name) is None:
                raise ValueError(f"experiment {kind.value!r} needs the '{name.rstrip('_')}' section")
        if kind is not ExperimentKind.BOUND_SWEEP and self.model.kind == "certificate":
            raise ValueError(f"experiment {kind.value!r} needs a simulator model, not a bare certificate")
        if self.regularity is not None and len(self.regularity) != 2:
            raise ValueError("regularity must be [L, z]")
        if self.validate_ is not None:
            for r in self.validate_.rectangles:
                if len(r.lower) != space.dim or len(r.upper) != space.dim:
                    raise ValueError(f"rectangles need {space.dim} coordinates")
        self.process_model()  # surfaces model level errors at load time
        return self

    # -- builders ---------------------------------------------------------

    @property
    def T_values(self) -> list[float]:
        g = self.T_grid
        return [float(x) for x in (g.values() if isinstance(g, GeometricGrid) else g)]

    def process_model(self) -> ProcessModel | None:
        m = self.model
        space = self.space.build()
        if m.kind == "certificate":
            return None
        if m.kind == "homogeneous_poisson":
            var = HomogeneousPoisson(m.ell)
        elif m.kind == "inhomogeneous_poisson":
            var = InhomogeneousPoisson(m.density.build())
        elif m.kind == "cluster_bounded":
            var = ClusterBounded(m.parent_rate, tuple(m.size_pmf), m.radius)
        else:
            var = MarkovModulated(np.asarray(m.transition, dtype=float), tuple(m.rates))
        return ProcessModel(var, space)

    def certificate(self) -> ConditionCertificate:
        if self.model.kind == "certificate":
            return self.model.build()
        return certificate_for(self.process_model())

    def rectangles(self) -> list[Box]:
        return [Box(tuple(r.lower), tuple(r.upper)) for r in self.validate_.rectangles]


# --- loading ---------------------------------------------------------------


def _line_of(node, loc) -> int | None:
    """1-based YAML line of the node addressed by a pydantic error location."""
    line = node.start_mark.line + 1 if node is not None else None
    for key in loc:
        if isinstance(node, yaml.MappingNode):
            nxt = None
            for k, v in node.value:
                if k.value == key:
                    nxt = v
                    line = k.start_mark.line + 1
                    break
            if nxt is None:
                # tagged-union branches and model-level checks add synthetic loc entries
                continue
            node = nxt
        elif isinstance(node, yaml.SequenceNode) and isinstance(key, int) and key < len(node.value):
            node = node.value[key]
            line = node.start_mark.line + 1
    return line


def _format_errors(err: ValidationError, root, source: str) -> str:
    lines = []
    for e in err.errors():
        loc = tuple(e["loc"])
        where = ".".join(str(x) for x in loc) or "<root>"
        line = _line_of(root, loc) if root is not None else None
        prefix = f"{source}:{line}" if line else source
        if e["type"] == "extra_forbidden":
            lines.append(f"{prefix}: unknown key '{loc[-1]}' at {where}")
        else:
            lines.append(f"{prefix}: {where}: {e['msg']}")
    return "\n".join(lines)


def parse_config(text: str, source: str = "<string>") -> ExperimentConfig:
    try:
        data = yaml.safe_load(text)
        root = yaml.compose(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{source}: invalid YAML: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{source}: the configuration must be a mapping")
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(_format_errors(exc, root, source)) from None


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    return parse_config(text, str(path))


def _canonical(config: ExperimentConfig) -> dict:
    return config.model_dump(mode="json", by_alias=True, exclude_none=True)


def dump_config(config: ExperimentConfig, path=None) -> str:
    text = yaml.safe_dump(_canonical(config), sort_keys=True)
    if path is not None:
        Path(path).write_text(text)
    return text


def config_hash(config: ExperimentConfig) -> str:
    """SHA-256 of the canonical JSON form (sorted keys, no whitespace).

    ``output_dir`` is left out: where results are written does not change
    them, so the same experiment keeps its identity across output locations.
    """
    data = _canonical(config)
    data.pop("output_dir", None)
    blob = json.dumps(data, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()
