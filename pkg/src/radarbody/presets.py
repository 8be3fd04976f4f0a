"""Reference desk-scale configurations.

``micro`` is the CPU-friendly end-to-end setup used by the regression
experiment and the example scripts: reduced widths, 128 points per frame,
short walking clips at moderate noise.  It trains in minutes on one core.
"""

from __future__ import annotations

from .harness import TrainConfig
from .net import LossScales, NetworkConfig, StageConfig, TemplateConfig
from .sim import NoiseConfig


def micro_network_config() -> NetworkConfig:
    return NetworkConfig(
        window=8,
        points=128,
        channels=5,
        template=TemplateConfig(n_joints=24, n_vertices=120, n_shape=4, seed=0),
        stages=(StageConfig(32, 0.3, 8, (24, 48)), StageConfig(8, 0.6, 8, (48, 96))),
        feature_dim=96,
        gru_hidden=96,
        n_heads=4,
        dropout=0.2,
        translation_mlp=(96, 48),
        skeleton_mlp=(96,),
        loss_scales=LossScales(),
    )


def micro_train_config(seed: int = 0, max_steps: int | None = 500) -> TrainConfig:
    return TrainConfig(
        epochs=10_000 if max_steps is not None else 100,  # step budget rules
        batch_size=16,
        learning_rate=1e-2,
        weight_decay=1e-4,
        validation_fraction=0.1,
        seed=seed,
        max_steps=max_steps,
    )


def micro_noise_config() -> NoiseConfig:
    return NoiseConfig(
        clutter_points_per_frame=25.0,
        clutter_region=((-3.0, 0.5, -0.1), (3.0, 5.0, 2.5)),
        ghost_probability=0.05,
        ghost_mirror_plane=((1.0, 0.0, 0.0), 3.2),
        position_jitter_sigma=0.01,
        doppler_noise_sigma=0.02,
        body_points_per_frame=110.0,
        intensity_noise_sigma=0.2,
    )


def micro_motion_kwargs(sequence_index: int) -> dict:
    starts = [(-1.6, 2.2, 0.93), (-1.2, 2.6, 0.93), (-1.8, 2.0, 0.93), (-1.4, 2.4, 0.93)]
    return {"speed": 0.5, "start": starts[sequence_index % len(starts)]}
