"""Run configuration: validated schema, canonical hashing, presets."""
from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any

from .models import MODEL_BUILDERS, BulkModel, build_model

COMMANDS = ("verify-bic", "bulk-conductance", "drift", "torque", "chern",
            "spectrum", "convergence")


class ConfigError(ValueError):
    """Raised when a run configuration violates the schema."""


@dataclass(frozen=True)
class ModelConfig:
    """A bulk model preset name plus parameter overrides."""

    name: str = "spinful-haldane"
    params: dict = field(default_factory=dict)

    def build(self) -> BulkModel:
        if self.name not in MODEL_BUILDERS:
            raise ConfigError(f"unknown model {self.name!r}; "
                              f"known: {sorted(MODEL_BUILDERS)}")
        try:
            return build_model(self.name, dict(self.params))
        except TypeError as exc:
            raise ConfigError(f"bad parameters for model {self.name!r}: {exc}")


@dataclass(frozen=True)
class JunctionSettings:
    """Interface coupling and defect settings for glued samples."""

    coupling_seed: int | None = None  # defaults to the run seed
    amplitude: float = 0.5
    nu: float = 1.0
    delta_range: float = 8.0
    spin_mixing: bool = True
    defect_radius: float = 0.0
    defect_seed: int = 0
    defect_count: int = 0

    def kwargs(self, seed: int) -> dict:
        out = asdict(self)
        if out["coupling_seed"] is None:
            out["coupling_seed"] = seed
        return out


@dataclass(frozen=True)
class CalculusSettings:
    """Functional-calculus engine and quadrature knobs."""

    engine: str = "spectral"
    taylor_order: int = 6
    z_min: float = 1e-3
    gl_order: int = 9
    y_scale: float = 0.5
    dd_cluster_eps: float = 1e-7

    def __post_init__(self):
        if self.engine not in ("spectral", "quadrature"):
            raise ConfigError(f"unknown engine {self.engine!r}")


@dataclass(frozen=True)
class SwitchSettings:
    """Shape of one switch multiplier."""

    kind: str = "heaviside"
    ramp_width: float = 2.0
    smooth_order: int = 14

    def __post_init__(self):
        if self.kind not in ("heaviside", "smooth-ramp"):
            raise ConfigError(f"unknown switch kind {self.kind!r}")


@dataclass(frozen=True)
class DensitySettings:
    """Placement of the density function inside the common gap."""

    margin: float = 0.1
    smooth_order: int = 14
    nk: int = 32


@dataclass(frozen=True)
class Tolerances:
    """Declared pass/fail thresholds for the CLI exit code."""

    residual: float = 1e-1
    torque_conserving: float = 1e-10
    interior_torque: float = 1e-4
    cauchy: float = 5e-3
    imag_defect: float = 1e-4
    quantization: float = 1e-6
    noise_factor: float = 1.2
    min_gap: float = 0.0


@dataclass(frozen=True)
class RunConfig:
    """Full description of one deterministic run."""

    command: str = "verify-bic"
    model: ModelConfig = field(default_factory=ModelConfig)
    left_model: ModelConfig = field(
        default_factory=lambda: ModelConfig(name="atomic-insulator"))
    right_model: ModelConfig = field(default_factory=ModelConfig)
    extent: int | list = 15
    extents: list = field(default_factory=lambda: [10, 15, 20])
    junction: JunctionSettings = field(default_factory=JunctionSettings)
    calculus: CalculusSettings = field(default_factory=CalculusSettings)
    switch1: SwitchSettings = field(default_factory=SwitchSettings)
    switch2: SwitchSettings = field(default_factory=SwitchSettings)
    density: DensitySettings = field(default_factory=DensitySettings)
    tolerances: Tolerances = field(default_factory=Tolerances)
    margin: float = 0.25
    step_multiple: int = 1
    nk_path: int = 64
    nk_chern: int = 24
    torque_target: str = "junction"
    seed: int = 0
    out: str | None = None

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise ConfigError(f"unknown command {self.command!r}; "
                              f"known: {COMMANDS}")
        if self.torque_target not in ("junction", "bulk"):
            raise ConfigError(
                f"torque_target must be junction or bulk, "
                f"got {self.torque_target!r}")


_NESTED = {
    "model": ModelConfig, "left_model": ModelConfig,
    "right_model": ModelConfig, "junction": JunctionSettings,
    "calculus": CalculusSettings, "switch1": SwitchSettings,
    "switch2": SwitchSettings, "density": DensitySettings,
    "tolerances": Tolerances,
}


def _build_dataclass(cls, data: dict, path: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{path or 'config'}: expected an object")
    names = {f.name for f in fields(cls)}
    unknown = set(data) - names
    if unknown:
        raise ConfigError(f"{path or 'config'}: unknown keys {sorted(unknown)}")
    kwargs: dict[str, Any] = {}
    for key, value in data.items():
        sub = _NESTED.get(key) if cls is RunConfig else None
        kwargs[key] = (_build_dataclass(sub, value, f"{path}{key}.")
                       if sub is not None else value)
    try:
        return cls(**kwargs)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path or 'config'}: {exc}")


def config_from_dict(data: dict) -> RunConfig:
    """Validate a plain dict against the schema (unknown keys rejected)."""
    return _build_dataclass(RunConfig, data, "")


def load_config(path: str | Path) -> RunConfig:
    """Read and validate a JSON run configuration file."""
    try:
        data = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}")
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}")
    return config_from_dict(data)


def canonical_json(config: RunConfig) -> str:
    """Canonical serialization: sorted keys, no whitespace.

    The output directory is excluded: it routes files and never enters
    the computation, so it must not change the run identity.
    """
    data = asdict(config)
    data.pop("out")
    return json.dumps(data, sort_keys=True, separators=(",", ":"))


def config_hash(config: RunConfig) -> str:
    """sha256 of the canonical serialization (hex)."""
    return hashlib.sha256(canonical_json(config).encode()).hexdigest()


def merged_config(config: RunConfig, **overrides) -> RunConfig:
    """A copy of config with the given non-None field overrides applied."""
    data = asdict(config)
    for key, value in overrides.items():
        if value is None:
            continue
        if key not in data:
            raise ConfigError(f"unknown override {key!r}")
        if isinstance(data[key], dict) and isinstance(value, dict):
            data[key].update(value)
        else:
            data[key] = value
    return config_from_dict(data)


# Model presets used by the quantization and parity checks: two
# time-reversal-invariant topological phases and their trivial partners.
MODEL_PRESETS: dict[str, dict] = {
    "kane-mele-topological": {"name": "kane-mele",
                              "params": {"lambda_so": 0.3}},
    "kane-mele-trivial": {"name": "kane-mele",
                          "params": {"lambda_so": 0.1, "m": 1.0}},
    "bhz-topological": {"name": "bhz", "params": {"m_mass": -1.0}},
    "bhz-trivial": {"name": "bhz", "params": {"m_mass": 1.0}},
}
