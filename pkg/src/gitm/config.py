"""Scenario configuration: a flat ``key = value`` text file over documented defaults."""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, fields
from pathlib import Path

from .autoencoder import AutoencoderConfig
from .fuzzy import IT2FuzzySet, Level, Trapezoid

__all__ = ["ScenarioConfig", "ConfigError", "load_config", "parse_config", "CONFIG_KEYS"]


class ConfigError(ValueError):
    pass


@dataclass
class ScenarioConfig:
    # network population
    device_count: int = 100
    role_super: float = 30.0
    role_advanced: float = 50.0
    role_generic: float = 20.0
    malicious_pct: float = 30.0
    cap_higher: float = 30.0
    cap_medium: float = 40.0
    cap_lower: float = 30.0
    seed: int = 42
    rounds: int = 1500
    bootstrap_rounds: int = 50
    # geometry and radio
    field_size: float = 200.0
    base_x: float = 100.0
    base_y: float = 250.0
    radio_range: float = 60.0
    initial_energy: float = 1.3
    packet_bits: int = 4000
    e_elec: float = 50e-9
    eps_fs: float = 10e-12
    eps_mp: float = 0.0013e-12
    overhear_cost: bool = True
    head_probability: float = 0.1
    # behaviour
    p_attack_higher: float = 0.6
    p_attack_medium: float = 0.4
    p_attack_lower: float = 0.2
    fault_rate: float = 0.02
    # fuzzy trust evaluation
    window: int = 20
    weight_drop: float = 0.35
    weight_delay: float = 0.25
    weight_tamper: float = 0.40
    mf_low_upper: tuple = (0.0, 0.0, 0.20, 0.45)
    mf_low_lower: tuple = (0.0, 0.0, 0.15, 0.35)
    mf_medium_upper: tuple = (0.20, 0.45, 0.55, 0.80)
    mf_medium_lower: tuple = (0.30, 0.48, 0.52, 0.70)
    mf_high_upper: tuple = (0.55, 0.80, 1.0, 1.0)
    mf_high_lower: tuple = (0.65, 0.85, 1.0, 1.0)
    # dataset preparation
    vector_len: int = 10
    variance_target: float = 0.90
    max_components: int = 5
    min_training_vectors: int = 300
    # autoencoder
    latent_dim: int = 4
    lr: float = 2e-4
    beta1: float = 0.5
    beta2: float = 0.999
    recon_weight: float = 10.0
    recon_updates_encoder: bool = True
    class_balance: bool = True
    train_epochs: int = 200
    retrain_epochs: int = 50
    batch_size: int = 32
    batches_per_epoch: int = 8
    retrain_batches_per_epoch: int = 3
    retrain_batches: int = 5
    dataset_cap: int = 2000
    # decisions
    min_recommenders: int = 2
    temp_trust_rounds: int = 5
    threshold_trim: float = 0.25
    threshold_gap: float = 0.15
    generic_default_threshold: float = 0.5

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        def check(cond, msg):
            if not cond:
                raise ConfigError(msg)

        check(self.device_count >= 1, "device_count must be >= 1")
        check(self.rounds >= 1, "round budget must be >= 1")
        check(self.bootstrap_rounds >= 0, "bootstrap_rounds must be >= 0")
        for name in (
            "role_super", "role_advanced", "role_generic", "malicious_pct",
            "cap_higher", "cap_medium", "cap_lower",
        ):
            value = getattr(self, name)
            check(0.0 <= value <= 100.0, f"{name}={value} outside [0, 100]")
        roles = self.role_super + self.role_advanced + self.role_generic
        check(math.isclose(roles, 100.0), f"role percentages sum to {roles}, not 100")
        caps = self.cap_higher + self.cap_medium + self.cap_lower
        check(math.isclose(caps, 100.0), f"capability percentages sum to {caps}, not 100")
        for name in ("p_attack_higher", "p_attack_medium", "p_attack_lower", "fault_rate",
                     "variance_target", "threshold_trim", "generic_default_threshold",
                     "head_probability"):
            value = getattr(self, name)
            check(0.0 <= value <= 1.0, f"{name}={value} outside [0, 1]")
        check(self.head_probability > 0, "head_probability must be positive")
        check(self.variance_target > 0, "variance_target must be positive")
        weights = (self.weight_drop, self.weight_delay, self.weight_tamper)
        check(all(w >= 0 for w in weights) and math.isclose(sum(weights), 1.0),
              "rule weights must be non-negative and sum to 1")
        for name in ("field_size", "radio_range", "initial_energy", "e_elec"):
            check(getattr(self, name) > 0, f"{name} must be positive")
        check(self.eps_fs > 0 and self.eps_mp > 0, "amplifier constants must be positive")
        check(self.packet_bits > 0, "packet_bits must be positive")
        check(self.window >= 1, "window must be >= 1")
        check(1 <= self.latent_dim < self.vector_len, "latent_dim must lie in [1, vector_len)")
        check(self.batch_size >= 2, "batch_size must be >= 2")
        check(self.min_training_vectors >= 2 * self.batch_size,
              "min_training_vectors must cover two batches")
        for name in ("train_epochs", "retrain_epochs", "batches_per_epoch",
                     "retrain_batches_per_epoch", "retrain_batches"):
            check(getattr(self, name) >= 0, f"{name} must be >= 0")
        check(self.min_recommenders >= 1 and self.temp_trust_rounds >= 1,
              "synergetic parameters must be >= 1")
        for name in ("mf_low_upper", "mf_low_lower", "mf_medium_upper",
                     "mf_medium_lower", "mf_high_upper", "mf_high_lower"):
            pts = getattr(self, name)
            check(len(pts) == 4 and all(0 <= p <= 1 for p in pts) and list(pts) == sorted(pts),
                  f"{name} needs 4 non-decreasing breakpoints in [0, 1]")

    # derived objects ---------------------------------------------------
    def fuzzy_sets(self) -> dict[Level, IT2FuzzySet]:
        return {
            Level.LOW: IT2FuzzySet(Level.LOW, Trapezoid(*self.mf_low_upper), Trapezoid(*self.mf_low_lower)),
            Level.MEDIUM: IT2FuzzySet(
                Level.MEDIUM, Trapezoid(*self.mf_medium_upper), Trapezoid(*self.mf_medium_lower)
            ),
            Level.HIGH: IT2FuzzySet(Level.HIGH, Trapezoid(*self.mf_high_upper), Trapezoid(*self.mf_high_lower)),
        }

    def autoencoder_config(self) -> AutoencoderConfig:
        return AutoencoderConfig(
            vector_len=self.vector_len,
            latent_dim=self.latent_dim,
            lr=self.lr,
            beta1=self.beta1,
            beta2=self.beta2,
            recon_weight=self.recon_weight,
            recon_updates_encoder=self.recon_updates_encoder,
            class_balance=self.class_balance,
            epochs=self.train_epochs,
            retrain_epochs=self.retrain_epochs,
            batch_size=self.batch_size,
            batches_per_epoch=self.batches_per_epoch or None,
            retrain_batches=self.retrain_batches,
            dataset_cap=self.dataset_cap,
        )

    def replace(self, **changes) -> "ScenarioConfig":
        return dataclasses.replace(self, **changes)

    def to_text(self) -> str:
        lines = []
        for f in fields(self):
            value = getattr(self, f.name)
            if isinstance(value, tuple):
                value = ", ".join(repr(float(v)) for v in value)
            elif isinstance(value, bool):
                value = "true" if value else "false"
            lines.append(f"{f.name} = {value}")
        return "\n".join(lines) + "\n"


CONFIG_KEYS = tuple(f.name for f in fields(ScenarioConfig))
_DEFAULTS = {f.name: f.default for f in fields(ScenarioConfig)}


def _coerce(key: str, raw: str):
    default = _DEFAULTS[key]
    try:
        if isinstance(default, bool):
            low = raw.lower()
            if low not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(raw)
            return low in ("true", "1", "yes")
        if isinstance(default, int):
            as_float = float(raw)
            if not as_float.is_integer():
                raise ValueError(raw)
            return int(as_float)
        if isinstance(default, float):
            return float(raw)
        if isinstance(default, tuple):
            return tuple(float(p) for p in raw.split(","))
    except ValueError:
        raise ConfigError(f"bad value for {key}: {raw!r}") from None
    raise ConfigError(f"unsupported key type for {key}")


def parse_config(text: str, **overrides) -> ScenarioConfig:
    """Parse ``key = value`` lines; ``#`` starts a comment, blank lines are skipped."""
    values: dict = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, raw = (part.strip() for part in stripped.split("=", 1))
        if key not in _DEFAULTS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        if not raw:
            raise ConfigError(f"line {lineno}: missing value for {key!r}")
        values[key] = _coerce(key, raw)
    values.update({k: v for k, v in overrides.items() if v is not None})
    return ScenarioConfig(**values)


def load_config(path, **overrides) -> ScenarioConfig:
    return parse_config(Path(path).read_text(), **overrides)
