"""Training configuration."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

from ..errors import ConfigurationError

DECAY_MODES = ("weight_decay", "lr_decay")


@dataclass
class TrainConfig:
    epochs: int = 100
    batch_size: int = 16
    learning_rate: float = 1e-3
    # The 1e-4 decay is decoupled weight decay by default; "lr_decay" instead
    # applies inverse-time decay lr_t = lr / (1 + decay * t) and no weight decay.
    weight_decay: float = 1e-4
    decay_mode: str = "weight_decay"
    validation_fraction: float = 0.1
    seed: int = 0
    max_steps: int | None = None

    def __post_init__(self):
        if self.epochs < 0 or self.batch_size < 1:
            raise ConfigurationError("epochs must be >= 0 and batch_size >= 1")
        if self.learning_rate <= 0 or self.weight_decay < 0:
            raise ConfigurationError("learning_rate must be > 0 and weight_decay >= 0")
        if self.decay_mode not in DECAY_MODES:
            raise ConfigurationError(f"decay_mode must be one of {DECAY_MODES}")
        if not 0.0 <= self.validation_fraction < 1.0:
            raise ConfigurationError("validation_fraction must be in [0, 1)")
        if self.max_steps is not None and self.max_steps < 0:
            raise ConfigurationError("max_steps must be >= 0")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "TrainConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigurationError(f"unknown key(s) {sorted(unknown)} in train config")
        return cls(**data)
