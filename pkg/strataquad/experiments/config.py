"""Experiment configs: TOML files validated by pydantic.

A config names a model, a design family, an N schedule, the fit to run and
optionally a simulation cross-check. Unknown keys are rejected and every
validation failure is reported as ``<dotted.field.path>: <message>``.

Example:

    name = "ex4_uniform"

    [model]
    kind = "amplitude_modulated"
    base = { kind = "exp", alpha = 1.0, dim = 1 }
    amplitude = { profile = "inverse_shift", scale = 1.0, shift = 0.1 }

    [design]
    densities = ["uniform"]
    allocation = "uniform"

    [run]
    N = [32, 64, 128, 256]

    [fit]
    kind = "single"
"""

import math
import tomllib
from pathlib import Path
from typing import Annotated, List, Literal, Optional, Union

import tomli_w
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from strataquad.errors import ConfigError
from strataquad.fields import (
    Decomposition,
    FieldModel,
    HolderData,
    SmoothnessSpec,
    inverse_shift,
    make_amplitude_modulated,
    make_exp_field,
    make_fbf,
    make_warped_fbm,
    radial_power,
)
from strataquad.models import FitKind


class StrictModel(BaseModel):
    model_config = ConfigDict(extra="forbid", populate_by_name=True)


class FbfBlock(StrictModel):
    kind: Literal["fbf"] = "fbf"
    l: List[int]
    alpha: List[float]

    def build(self) -> FieldModel:
        dec = Decomposition(l=tuple(self.l))
        return make_fbf(dec, SmoothnessSpec.for_decomposition(self.alpha, dec))


class ExpBlock(StrictModel):
    kind: Literal["exp"] = "exp"
    alpha: float = Field(gt=0, lt=2)
    dim: int = Field(default=1, ge=1)

    def build(self) -> FieldModel:
        return make_exp_field(self.alpha, self.dim)


class AmplitudeBlock(StrictModel):
    profile: Literal["inverse_shift", "radial_power"]
    scale: float = Field(default=1.0, gt=0)
    shift: float = Field(default=0.1, gt=0)
    power: float = Field(default=0.5, gt=0)

    def build(self):
        if self.profile == "inverse_shift":
            return inverse_shift(self.scale, self.shift)
        return radial_power(self.scale, self.power)


class HolderBlock(StrictModel):
    beta: float = Field(gt=0, lt=2)
    constant: float = Field(gt=0)


BaseBlock = Annotated[Union[FbfBlock, ExpBlock], Field(discriminator="kind")]


class ModulatedBlock(StrictModel):
    kind: Literal["amplitude_modulated"] = "amplitude_modulated"
    base: BaseBlock
    amplitude: AmplitudeBlock
    singular_at_origin: Optional[bool] = None
    holder: Optional[HolderBlock] = None

    def build(self) -> FieldModel:
        holder = None if self.holder is None else HolderData(**self.holder.model_dump())
        base = self.base.build()
        return make_amplitude_modulated(
            base,
            self.amplitude.build(),
            singular_at_origin=self.singular_at_origin,
            holder=holder,
            name=f"{self.amplitude.profile}*{base.name}",
        )


class WarpedBlock(StrictModel):
    kind: Literal["warped_fbm"] = "warped_fbm"
    lam: float = Field(alias="lambda", gt=0, le=1)
    beta: float = Field(gt=0, lt=2)
    amplitude: float = Field(default=1.0, gt=0)

    def build(self) -> FieldModel:
        return make_warped_fbm(self.lam, self.beta, self.amplitude)


ModelBlock = Annotated[
    Union[FbfBlock, ExpBlock, ModulatedBlock, WarpedBlock], Field(discriminator="kind")
]


class DesignBlock(StrictModel):
    densities: List[str] = Field(default_factory=lambda: ["uniform"])
    allocation: Literal["uniform", "optimal", "explicit"] = "uniform"
    counts: Optional[List[List[int]]] = None


class RunBlock(StrictModel):
    N: Optional[List[int]] = None
    order: Optional[int] = Field(default=None, ge=3)
    seed: int = Field(default=0, ge=0)
    out: str = "out"
    concurrent_entries: bool = False


class FitBlock(StrictModel):
    kind: FitKind = FitKind.SINGLE
    exponents: Optional[List[float]] = None
    p: Optional[float] = None
    n_min: Optional[int] = None

    @model_validator(mode="after")
    def check_parameters(self) -> "FitBlock":
        if self.kind == FitKind.TWO_POWER and (self.exponents is None or len(self.exponents) != 2):
            raise ValueError("two_power fits need exactly two exponents")
        if self.kind == FitKind.SCALED and self.p is None:
            raise ValueError("scaled fits need p")
        return self


class AnalysisBlock(StrictModel):
    enabled: bool = True
    allow_singular: bool = False
    optimize_densities: bool = False


class SimulateBlock(StrictModel):
    N: List[int]
    eta_samples: int = Field(default=1, ge=1)
    replications: int = Field(default=10_000, ge=2)
    refinement: int = Field(default=8, ge=1)


class ExperimentConfig(StrictModel):
    """A validated experiment config."""

    name: str
    description: str = ""
    model: ModelBlock
    design: DesignBlock = Field(default_factory=DesignBlock)
    run: RunBlock = Field(default_factory=RunBlock)
    fit: FitBlock = Field(default_factory=FitBlock)
    analysis: AnalysisBlock = Field(default_factory=AnalysisBlock)
    simulate: Optional[SimulateBlock] = None

    @model_validator(mode="after")
    def check_schedule(self) -> "ExperimentConfig":
        if self.design.allocation == "explicit":
            if not self.design.counts:
                raise ValueError("explicit allocation needs design.counts")
            if self.run.N is None:
                self.run.N = [int(math.prod(c)) for c in self.design.counts]
        elif self.run.N is None:
            raise ValueError("run.N is required unless the allocation is explicit")
        return self

    def build_model(self) -> FieldModel:
        return self.model.build()


def _format_validation_error(error: ValidationError) -> str:
    lines = []
    for item in error.errors():
        path = ".".join(str(part) for part in item["loc"]) or "<root>"
        lines.append(f"{path}: {item['msg']}")
    return "\n".join(lines)


def parse_config(text: str, source: str = "<string>") -> ExperimentConfig:
    """Parse and validate TOML text.

    Raises:
        ConfigError: On TOML syntax errors or schema violations.
    """
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"{source}: {e}") from e
    try:
        return ExperimentConfig.model_validate(raw)
    except ValidationError as e:
        raise ConfigError(f"{source}:\n{_format_validation_error(e)}") from e
    except ValueError as e:
        raise ConfigError(f"{source}: {e}") from e


def load_config(path: Path) -> ExperimentConfig:
    """Read and validate a config file.

    Raises:
        ConfigError: If the file is missing or invalid.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from e
    return parse_config(text, source=str(path))


def dump_config(config: ExperimentConfig) -> str:
    """Serialize a config back to TOML."""
    return tomli_w.dumps(config.model_dump(mode="json", by_alias=True, exclude_none=True))
