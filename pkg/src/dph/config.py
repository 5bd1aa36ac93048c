"""JSON run configuration (one run per file)."""
from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Annotated, Literal, Optional

import numpy as np
from pydantic import (
    BaseModel,
    BeforeValidator,
    ConfigDict,
    Field,
    PlainSerializer,
    ValidationError,
    model_validator,
)

from .model import BathMode, OhmicSpectrum, SystemParams, discretize_ohmic

COMMANDS = ("pure-phase", "mixed-phase", "decoherence", "validate", "sweep")


class ConfigError(Exception):
    """Configuration could not be read or validated; message names the line or field."""


def _parse_amplitude(value):
    if isinstance(value, complex):
        return value
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return complex(value)
    if isinstance(value, (list, tuple)) and len(value) == 2:
        return complex(float(value[0]), float(value[1]))
    if isinstance(value, dict) and set(value) <= {"re", "im"}:
        return complex(float(value.get("re", 0.0)), float(value.get("im", 0.0)))
    raise ValueError("amplitude must be a number, [re, im] or {'re': .., 'im': ..}")


Amplitude = Annotated[
    complex,
    BeforeValidator(_parse_amplitude),
    PlainSerializer(lambda c: [c.real, c.imag], return_type=list),
]


class _Block(BaseModel):
    model_config = ConfigDict(extra="forbid")


class SystemBlock(_Block):
    omega: float = Field(1.0, gt=0, allow_inf_nan=False)
    g: float = Field(1.0, ge=0, allow_inf_nan=False)
    n: int = Field(0, ge=0)


class ModeBlock(_Block):
    omega: float = Field(gt=0, allow_inf_nan=False)
    coupling: float = Field(allow_inf_nan=False)


class OhmicBlock(_Block):
    epsilon: float = Field(ge=0, allow_inf_nan=False)
    omega_c: float = Field(gt=0, allow_inf_nan=False)
    num_modes: int = Field(1000, ge=1)


class BathBlock(_Block):
    discrete: Optional[list[ModeBlock]] = None
    ohmic: Optional[OhmicBlock] = None

    @model_validator(mode="after")
    def _exactly_one(self):
        if (self.discrete is None) == (self.ohmic is None):
            raise ValueError("bath must contain exactly one of 'discrete' or 'ohmic'")
        return self


class RangeBlock(_Block):
    start: float = Field(allow_inf_nan=False)
    stop: float = Field(allow_inf_nan=False)
    num: int = Field(ge=1)

    @model_validator(mode="after")
    def _ordered(self):
        if self.num > 1 and not self.stop > self.start:
            raise ValueError("range needs stop > start when num > 1")
        return self

    def values(self) -> np.ndarray:
        return np.linspace(self.start, self.stop, self.num)


SweepParameter = Literal["T", "g", "omega", "n", "epsilon", "omega_c", "coupling_scale"]


class SweepBlock(_Block):
    parameter: SweepParameter
    quantity: Literal["pure-phase", "mixed-phase"] = "pure-phase"
    values: Optional[list[float]] = None
    range: Optional[RangeBlock] = None

    @model_validator(mode="after")
    def _grid(self):
        if (self.values is None) == (self.range is None):
            raise ValueError("sweep needs exactly one of 'values' or 'range'")
        grid = self.grid()
        if np.any(np.diff(grid) <= 0):
            raise ValueError("sweep values must be strictly increasing")
        return self

    def grid(self) -> np.ndarray:
        return np.asarray(self.values, dtype=float) if self.values is not None else self.range.values()


class TaskBlock(_Block):
    command: Optional[Literal[COMMANDS]] = None
    branch: Literal["plus", "minus"] = "plus"
    weak: bool = False
    T: Optional[float] = Field(None, allow_inf_nan=False)
    T_range: Optional[RangeBlock] = None
    times: Optional[list[float]] = None
    t_range: Optional[RangeBlock] = None
    c_plus: Amplitude = complex(1 / math.sqrt(2))
    c_minus: Amplitude = complex(1 / math.sqrt(2))
    steps: int = Field(2048, ge=2)
    tol: Optional[float] = Field(1e-5, gt=0)
    check_tol: Optional[float] = Field(None, gt=0)
    checks: list[Literal["A1", "A2", "A3", "A4", "A5", "A6", "A7", "A8"]] = ["A1", "A2", "A3", "A4", "A5", "A6"]
    coupling_scale: float = Field(1.0, ge=0, allow_inf_nan=False)
    fock_levels: Optional[int] = Field(None, ge=2)
    sweep: Optional[SweepBlock] = None

    @model_validator(mode="after")
    def _consistent(self):
        if self.T is not None and self.T_range is not None:
            raise ValueError("give at most one of 'T' or 'T_range'")
        if self.times is not None and self.t_range is not None:
            raise ValueError("give at most one of 'times' or 't_range'")
        norm = abs(self.c_plus) ** 2 + abs(self.c_minus) ** 2
        if abs(norm - 1.0) > 1e-12:
            raise ValueError(f"|c_plus|^2 + |c_minus|^2 = {norm!r}, expected 1")
        return self

    def durations(self) -> np.ndarray | None:
        if self.T is not None:
            return np.array([self.T])
        if self.T_range is not None:
            return self.T_range.values()
        return None

    def time_grid(self) -> np.ndarray | None:
        if self.times is not None:
            return np.asarray(self.times, dtype=float)
        if self.t_range is not None:
            return self.t_range.values()
        return None


class OutputBlock(_Block):
    path: Optional[str] = None
    precision: int = Field(15, ge=1, le=17)


class RunConfig(_Block):
    system: SystemBlock = SystemBlock()
    bath: BathBlock = BathBlock(discrete=[])
    task: TaskBlock = TaskBlock()
    output: OutputBlock = OutputBlock()

    def system_params(self) -> SystemParams:
        return SystemParams(self.system.omega, self.system.g, self.system.n)

    def ohmic_spectrum(self) -> OhmicSpectrum | None:
        if self.bath.ohmic is None:
            return None
        return OhmicSpectrum(self.bath.ohmic.epsilon, self.bath.ohmic.omega_c)

    def bath_modes(self) -> list[BathMode]:
        """Discrete modes; an Ohmic block is discretised on ``num_modes`` cells."""
        if self.bath.discrete is not None:
            return [BathMode(m.omega, m.coupling) for m in self.bath.discrete]
        return discretize_ohmic(self.ohmic_spectrum(), self.bath.ohmic.num_modes)

    def dump(self) -> str:
        return json.dumps(self.model_dump(mode="json"), indent=2, sort_keys=True) + "\n"


def _describe(err: ValidationError) -> str:
    lines = []
    for e in err.errors():
        loc = ".".join(str(p) for p in e["loc"]) or "<root>"
        lines.append(f"field '{loc}': {e['msg']}")
    return "; ".join(lines)


def parse_config(text: str, source: str = "<config>") -> RunConfig:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{source}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{source}: top level must be a JSON object")
    try:
        return RunConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(f"{source}: {_describe(exc)}") from None


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text, str(path))
