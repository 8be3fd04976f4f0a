"""Network hyperparameters as plain dataclasses with strict JSON round trip.

Defaults reproduce the full-scale setup (window 8, 1024 points, 1024-wide
global feature from a 512-unit bi-GRU, 8 attention heads, 1 x 1 x 3 m crop
box).  ``from_dict`` rejects unknown keys so stale config files fail loudly.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field

from ..errors import ConfigurationError


def _strict_kwargs(cls, data: dict, where: str) -> dict:
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = set(data) - known
    if unknown:
        raise ConfigurationError(f"unknown key(s) {sorted(unknown)} in {where}")
    return data


@dataclass
class StageConfig:
    """One set-abstraction stage of the point backbone."""
    n_centers: int
    radius: float
    max_per_group: int
    mlp_widths: tuple[int, ...]

    @classmethod
    def from_dict(cls, data: dict) -> "StageConfig":
        data = dict(_strict_kwargs(cls, data, "stage config"))
        data["mlp_widths"] = tuple(data["mlp_widths"])
        return cls(**data)


@dataclass
class TemplateConfig:
    n_joints: int = 24
    n_vertices: int = 400
    n_shape: int = 10
    seed: int = 0

    @classmethod
    def from_dict(cls, data: dict) -> "TemplateConfig":
        return cls(**_strict_kwargs(cls, data, "template config"))


@dataclass
class LossScales:
    """Per-term multipliers applied before summing into l_smpl / l_total."""
    pred: float = 1.0
    joint: float = 1.0
    theta: float = 1.0
    beta: float = 1.0
    gamma: float = 1.0
    J: float = 1.0
    M: float = 1.0

    @classmethod
    def from_dict(cls, data: dict) -> "LossScales":
        return cls(**_strict_kwargs(cls, data, "loss scales"))


@dataclass
class AttentionConfig:
    n_heads: int
    model_dim: int

    def __post_init__(self):
        if self.model_dim % self.n_heads != 0:
            raise ConfigurationError(
                f"n_heads={self.n_heads} must divide model width {self.model_dim}")

    @property
    def head_dim(self) -> int:
        return self.model_dim // self.n_heads


@dataclass
class NetworkConfig:
    window: int = 8                # frames per window (T)
    points: int = 1024             # points per frame after cropping (N)
    channels: int = 5              # per-point channels (C)
    template: TemplateConfig = field(default_factory=TemplateConfig)
    stages: tuple[StageConfig, ...] | None = None  # None -> derived from `points`
    feature_dim: int = 512         # spatial feature width out of the backbone
    gru_hidden: int = 512          # per direction; global feature width = 2x
    n_heads: int = 8
    dropout: float = 0.2
    box_extent: tuple[float, float, float] = (1.0, 1.0, 3.0)
    translation_mlp: tuple[int, ...] = (512, 128)
    skeleton_mlp: tuple[int, ...] = (512,)
    loss_scales: LossScales = field(default_factory=LossScales)

    def __post_init__(self):
        if self.stages is None:
            self.stages = (
                StageConfig(max(1, self.points // 4), 0.2, 16, (64, 128)),
                StageConfig(max(1, self.points // 16), 0.4, 16, (128, 256)),
            )
        else:
            self.stages = tuple(self.stages)
        if self.window < 1 or self.points < 1:
            raise ConfigurationError("window and points must be >= 1")
        if self.channels < 4:
            raise ConfigurationError("channels must be >= 4 (xyz + doppler)")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigurationError(f"dropout must be in [0, 1), got {self.dropout}")
        self.attention  # validates divisibility

    @property
    def global_width(self) -> int:
        return 2 * self.gru_hidden

    @property
    def attention(self) -> AttentionConfig:
        return AttentionConfig(self.n_heads, self.global_width)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "NetworkConfig":
        data = dict(_strict_kwargs(cls, data, "network config"))
        if "template" in data:
            data["template"] = TemplateConfig.from_dict(data["template"])
        if data.get("stages") is not None:
            data["stages"] = tuple(StageConfig.from_dict(s) for s in data["stages"])
        if "loss_scales" in data:
            data["loss_scales"] = LossScales.from_dict(data["loss_scales"])
        for key in ("box_extent", "translation_mlp", "skeleton_mlp"):
            if key in data:
                data[key] = tuple(data[key])
        return cls(**data)

    def fingerprint(self) -> str:
        return hashlib.sha256(
            json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()[:16]
