"""Experiment configuration: strict parsing, presets and a stable hash."""

from __future__ import annotations

import hashlib
import json
import math
from importlib import resources
from typing import Literal, Union

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, Field, NonNegativeFloat, PositiveFloat, PositiveInt, ValidationError, model_validator

from .errors import ConfigError

ENGINES = ("markov", "tcl2", "redfield", "secular", "mps")
PRODUCT_STATES = ("gg", "ge", "eg", "ee")
DEFAULT_TIME = {"markov": (10.0, 0.01), "tcl2": (150.0, 0.05), "redfield": (150.0, 0.05),
                "secular": (150.0, 0.05), "mps": (40.0, 0.1)}

Drive = Union[float, tuple[float, float]]  # real amplitude or (re, im)


class Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class TimeGrid(Strict):
    t_max: PositiveFloat
    dt: PositiveFloat

    @model_validator(mode="after")
    def _steps(self):
        if self.dt > self.t_max:
            raise ValueError("dt must not exceed t_max")
        return self


class DriveSection(Strict):
    omega_1: Drive = 0.0
    omega_2: Drive = 0.0

    def complex_pair(self) -> tuple[complex, complex]:
        return as_complex(self.omega_1), as_complex(self.omega_2)


class MarkovSection(Strict):
    gamma_L: NonNegativeFloat = 0.0
    gamma_R: NonNegativeFloat = 1.0
    phi: float = 0.0
    detuning: float = 0.0
    gamma_loss: tuple[NonNegativeFloat, NonNegativeFloat] = (0.0, 0.0)
    guided_weights: tuple[NonNegativeFloat, NonNegativeFloat] = (1.0, 1.0)


class BathSection(Strict):
    hopping: PositiveFloat = 1.0
    detuning: float = 0.0
    g_1: NonNegativeFloat = 0.14
    g_2: NonNegativeFloat = 0.30
    phi_1: float = math.pi / 4
    phi_2: float = math.pi / 4
    separation: PositiveInt = 1


class TclSection(Strict):
    drive_prefactor: PositiveFloat = 1.0
    loss: tuple[NonNegativeFloat, NonNegativeFloat] = (0.0, 0.0)


class MpsSection(Strict):
    n_sites: PositiveInt = 16
    emitters: tuple[PositiveInt, PositiveInt] = (3, 13)
    d_max: PositiveInt = 18
    edge_loss: NonNegativeFloat | None = None
    krylov_dim: PositiveInt = 30
    krylov_tol: PositiveFloat = 1e-10
    record_every: PositiveInt = 1
    bath_observables: bool = True
    windows: list[list[int]] = Field(default_factory=list)
    checkpoint: bool = False

    @model_validator(mode="after")
    def _windows(self):
        for w in self.windows:
            if not 1 <= len(w) <= 2:
                raise ValueError("each correlation window holds one or two bath sites")
        return self


class Span(Strict):
    """Either ``values`` or an inclusive ``start``/``stop`` grid of ``num`` points."""

    values: list[float] | None = None
    start: float | None = None
    stop: float | None = None
    num: PositiveInt | None = None

    @model_validator(mode="after")
    def _one_form(self):
        grid = (self.start, self.stop, self.num)
        if (self.values is None) == all(v is None for v in grid):
            raise ValueError("give either values or start/stop/num")
        if self.values is None and any(v is None for v in grid):
            raise ValueError("start, stop and num are all required")
        return self

    def array(self) -> np.ndarray:
        if self.values is not None:
            return np.asarray(self.values, dtype=float)
        return np.linspace(self.start, self.stop, self.num)


class SweepSection(Strict):
    """``drives``: Markov drive grid. ``separations``: TCL drive/separation grid.
    ``cases``: list of partial configs, each run in full and reported side by side."""

    omega_1: Span | None = None
    omega_2: Span | None = None
    separations: list[PositiveInt] | None = None
    cases: list[dict] | None = None

    @model_validator(mode="after")
    def _kind(self):
        if self.cases is not None and (self.omega_1 or self.omega_2 or self.separations):
            raise ValueError("cases cannot be combined with grid axes")
        if self.separations is not None and self.omega_1 is None:
            raise ValueError("a separation sweep needs an omega_1 span")
        if self.kind == "drives" and (self.omega_1 is None or self.omega_2 is None):
            raise ValueError("a drive sweep needs omega_1 and omega_2 spans")
        return self

    @property
    def kind(self) -> str:
        if self.cases is not None:
            return "cases"
        return "separations" if self.separations is not None else "drives"


class DisorderItem(Strict):
    target: Literal["position", "detuning_1", "detuning_2", "detuning_both"]
    kind: Literal["quasi_static", "dynamic_ou"] = "quasi_static"
    sigma: NonNegativeFloat
    tau: PositiveFloat = 5.0
    realizations: PositiveInt = 100


class BetaScanSection(Strict):
    a_values: list[float] = Field(default_factory=lambda: [1.0, 0.95, 0.9, 0.8])
    patterns: list[Literal["both", "upstream_only", "downstream_only"]] = Field(
        default_factory=lambda: ["both", "upstream_only", "downstream_only"]
    )

    @model_validator(mode="after")
    def _range(self):
        if any(not 0 < a <= 1 for a in self.a_values):
            raise ValueError("a_values must lie in (0, 1]")
        return self


class OptimizeSection(Strict):
    bounds: dict[Literal["omega_1", "omega_2", "g_1", "g_2"], tuple[float, float]]
    points_per_axis: PositiveInt = 5
    refine_steps: int = Field(12, ge=0)


class KernelsSection(Strict):
    t_max: PositiveFloat = 150.0
    dt: PositiveFloat = 0.05
    frequencies: list[float] | None = None  # default: the Bohr frequencies of the drive


class BlpSection(Strict):
    pair: tuple[Literal["gg", "ge", "eg", "ee"], Literal["gg", "ge", "eg", "ee"]] = ("gg", "eg")
    window: tuple[float, float] = (5.0, 20.0)


class ExperimentConfig(Strict):
    engine: Literal["markov", "tcl2", "redfield", "secular", "mps"]
    initial: Union[Literal["gg", "ge", "eg", "ee", "bell"], list[tuple[float, float]]] = "gg"
    time: TimeGrid | None = None
    seed: int = Field(0, ge=0, lt=2**64)
    outputs: list[str] = Field(default_factory=list)
    drive: DriveSection = DriveSection()
    markov: MarkovSection = MarkovSection()
    bath: BathSection = BathSection()
    tcl: TclSection = TclSection()
    mps: MpsSection = MpsSection()
    sweep: SweepSection | None = None
    disorder: list[DisorderItem] | None = None
    beta_scan: BetaScanSection | None = None
    optimize: OptimizeSection | None = None
    kernels: KernelsSection | None = None
    blp: BlpSection | None = None
    description: str = ""

    @model_validator(mode="after")
    def _consistency(self):
        problems = []
        if isinstance(self.initial, list):
            if len(self.initial) != 4:
                problems.append("custom initial amplitudes need four (re, im) pairs")
            elif not math.isclose(sum(a * a + b * b for a, b in self.initial), 1.0, abs_tol=1e-9):
                problems.append("custom initial amplitudes must be normalized")
        if self.engine == "mps" and self.initial not in PRODUCT_STATES:
            problems.append("the mps engine starts from a product state: gg, ge, eg or ee")
        if self.engine == "mps":
            n1, n2 = self.mps.emitters
            if not (1 <= n1 and n1 + 2 <= n2 <= self.mps.n_sites - 2):
                problems.append("mps.emitters must satisfy 1 <= n1, n1 + 2 <= n2 <= n_sites - 2")
        if problems:
            raise ValueError("; ".join(problems))
        return self

    def time_grid(self) -> tuple[float, float]:
        if self.time is not None:
            return self.time.t_max, self.time.dt
        return DEFAULT_TIME[self.engine]


def as_complex(value: Drive) -> complex:
    if isinstance(value, (tuple, list)):
        return complex(value[0], value[1])
    return complex(value)


def _violations(exc: ValidationError) -> list[dict]:
    out = []
    for err in exc.errors():
        path = ".".join(str(p) for p in err["loc"]) or "<root>"
        out.append({"path": path, "message": err["msg"], "type": err["type"]})
    return out


def config_from_dict(data) -> ExperimentConfig:
    """Validate a mapping; every violation is collected into one ConfigError."""
    if not isinstance(data, dict):
        raise ConfigError("configuration must be a mapping", violations=[{"path": "<root>", "message": "not a mapping"}])
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as exc:
        violations = _violations(exc)
        lines = "\n".join(f"  {v['path']}: {v['message']}" for v in violations)
        raise ConfigError(f"invalid configuration:\n{lines}", violations=violations) from None


def parse_config(text: str) -> ExperimentConfig:
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"not valid YAML: {exc}", violations=[{"path": "<root>", "message": str(exc)}]) from None
    return config_from_dict(data)


def config_to_dict(config: ExperimentConfig) -> dict:
    return config.model_dump(mode="json")


def serialize_config(config: ExperimentConfig) -> str:
    return yaml.safe_dump(config_to_dict(config), sort_keys=True)


def config_hash(config: ExperimentConfig) -> str:
    """SHA-256 of the canonical JSON form; independent of key order and whitespace."""
    canonical = json.dumps(config_to_dict(config), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def merge(base: dict, override: dict) -> dict:
    """Recursive dict update; non-dict values in ``override`` replace."""
    out = dict(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = merge(out[key], value)
        else:
            out[key] = value
    return out


def preset_names() -> list[str]:
    files = resources.files("chiralnet") / "presets"
    return sorted(p.name[:-5] for p in files.iterdir() if p.name.endswith(".yaml"))


def preset_text(name: str) -> str:
    path = resources.files("chiralnet") / "presets" / f"{name}.yaml"
    if not path.is_file():
        raise ConfigError(f"unknown preset {name!r}", violations=[{"path": "preset", "message": f"choose from {preset_names()}"}])
    return path.read_text(encoding="utf-8")


def load_preset(name: str) -> dict:
    return yaml.safe_load(preset_text(name))
