"""
Configuration models and the key=value override format.

Defaults come from the packaged defaults.yaml; a user file of dotted
``key=value`` lines overrides them, and CLI flags override both.
"""

import math
from pathlib import Path
from typing import Any, Dict, Mapping, Optional

import yaml
from pydantic import BaseModel, Field, ValidationError, field_validator, model_validator

from .errors import ConfigError

DEFAULTS_PATH = Path(__file__).parent / "defaults.yaml"

# Output of a fully open gate: tanh of a saturated sigmoid
OPEN_GATE_OUTPUT = math.tanh(1.0)
# Extension drive delivered per unit of a neighbour's activation
DRIVE_PER_ACTIVATION = 0.29


class MechanismGains(BaseModel):
    """Gains of the plan-extension mechanisms."""

    seed_gain: float = Field(1.0, description="Activation of a freshly seeded square")
    lpe_gain: float = Field(1.1, description="Linear plan extension gain")
    tpe_gain: float = Field(0.45, description="Turn plan extension gain")
    stop_gain: float = Field(-1.5, description="Gate drive at squares where a push is impossible")
    wta_inhibit: float = Field(0.6, description="Gate drive per competing direction that out-drives this one")
    decay: float = Field(0.92, description="Per-square attenuation of extension")
    threshold: float = Field(0.3, description="Activation at which a channel counts as active")
    backtrack_gain: float = Field(1.2, description="Gain on negative activation propagating along a chain")
    dead_end_gain: float = Field(10.0, description="Gain from arriving support to the negative dead-end value")
    a_max: float = Field(2.0, description="Saturation bound on activations")
    agent_decay: float = Field(0.97, description="Attenuation per square of the agent approach wavefront")
    long_decay: float = Field(0.9, description="Per-tick decay of long-term channels")

    @field_validator("stop_gain")
    @classmethod
    def validate_stop_gain(cls, v):
        if v >= 0:
            raise ValueError("stop_gain must be negative")
        return v

    @field_validator("threshold", "a_max", "dead_end_gain", "seed_gain")
    @classmethod
    def validate_positive(cls, v):
        if v <= 0:
            raise ValueError("must be positive")
        return v

    @field_validator("wta_inhibit", "lpe_gain", "tpe_gain")
    @classmethod
    def validate_non_negative(cls, v):
        if v < 0:
            raise ValueError("must not be negative")
        return v

    @field_validator("decay", "agent_decay", "long_decay")
    @classmethod
    def validate_decay(cls, v):
        if not 0 < v <= 1:
            raise ValueError("must be in (0, 1]")
        return v

    @field_validator("backtrack_gain")
    @classmethod
    def validate_backtrack_gain(cls, v):
        if v <= 1:
            raise ValueError("backtrack_gain must exceed 1")
        return v

    @model_validator(mode="after")
    def validate_extension_order(self):
        if self.lpe_gain <= self.tpe_gain:
            raise ValueError("lpe_gain must exceed tpe_gain")
        if self.seed_gain >= self.a_max * OPEN_GATE_OUTPUT:
            raise ValueError(f"seed_gain must stay below a_max·tanh(1) = {self.a_max * OPEN_GATE_OUTPUT:.4f}")
        return self

    @property
    def seed_drive(self) -> float:
        """Drive that brings a seeded square with no neighbours to exactly seed_gain."""
        return float(math.atanh(self.seed_gain / (self.a_max * OPEN_GATE_OUTPUT)))

    @property
    def linear_weight(self) -> float:
        """Drive per unit of neighbour output through each of the two linear taps."""
        return DRIVE_PER_ACTIVATION * self.a_max * self.lpe_gain * self.decay

    @property
    def turn_weight(self) -> float:
        # a corner has one same-direction tap where a straight run has two
        return 2.0 * DRIVE_PER_ACTIVATION * self.a_max * self.tpe_gain * self.decay


class DrcConfig(BaseModel):
    """Shape of a DRC(D, N) network."""

    layers: int = Field(3, ge=1, description="D, stacked ConvLSTM layers")
    ticks: int = Field(3, ge=1, description="N, ticks per environment step")
    channels: int = Field(32, ge=1, description="C, hidden channels per layer")
    height: int = Field(10, ge=1)
    width: int = Field(10, ge=1)
    mlp_hidden: int = Field(256, ge=1, description="Hidden units of the policy/value head")
    n_actions: int = Field(4, ge=1)


class LabConfig(BaseModel):
    """Top-level configuration."""

    gains: MechanismGains = Field(default_factory=MechanismGains)
    drc: DrcConfig = Field(default_factory=DrcConfig)
    seed: int = Field(0, ge=0, description="Seed for every random draw")
    ticks_per_step: int = Field(3, ge=1)
    thinking_steps: int = Field(0, ge=0)
    max_steps: int = Field(120, ge=1)
    node_budget: int = Field(5_000_000, ge=1)
    workers: int = Field(4, ge=1)
    require_connected: bool = Field(False, description="Only act once a box plan reaches a target")


def load_defaults() -> LabConfig:
    with open(DEFAULTS_PATH, encoding="utf-8") as f:
        data = yaml.safe_load(f) or {}
    return _validate(data)


def parse_key_values(text: str, source: str = "<config>") -> Dict[str, str]:
    """
    Parse ``key=value`` lines. Blank lines and lines starting with # are skipped.
    """
    pairs: Dict[str, str] = {}
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{number}: expected key=value, got '{line}'")
        key, value = line.split("=", 1)
        pairs[key.strip()] = value.strip()
    return pairs


def apply_overrides(config: LabConfig, overrides: Mapping[str, Any]) -> LabConfig:
    """Return a new config with dotted-key overrides applied and re-validated."""
    data = config.model_dump()
    for key, value in overrides.items():
        _set_dotted(data, key, value)
    return _validate(data)


def load_config(path: Optional[Path] = None, overrides: Optional[Mapping[str, Any]] = None) -> LabConfig:
    """
    Build the effective configuration.

    Args:
        path: Optional key=value config file
        overrides: Dotted-key values taking precedence over the file

    Returns:
        Validated LabConfig
    """
    config = load_defaults()
    if path is not None:
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"Cannot read config file {path}: {exc}") from exc
        config = apply_overrides(config, parse_key_values(text, source=str(path)))
    if overrides:
        config = apply_overrides(config, overrides)
    return config


def _set_dotted(data: Dict[str, Any], key: str, value: Any) -> None:
    parts = key.split(".")
    node = data
    for part in parts[:-1]:
        child = node.get(part)
        if not isinstance(child, dict):
            raise ConfigError(f"Unknown config key '{key}'")
        node = child
    if parts[-1] not in node:
        raise ConfigError(f"Unknown config key '{key}'")
    node[parts[-1]] = value


def _validate(data: Dict[str, Any]) -> LabConfig:
    try:
        return LabConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(f"Invalid configuration: {exc}") from exc
