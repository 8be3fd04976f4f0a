"""Synthetic mmWave data source."""

from __future__ import annotations

import numpy as np

from .. import autodiff as ad
from ..body import reconstruct
from ..body.template import BodyTemplate
from .io import GroundTruth, RawSequence, read_dataset, write_dataset
from .motion import MOTION_KINDS, REST_ROOT_HEIGHT, generate_motion
from .render import (CHANNELS, NoiseConfig, PointFrame, radial_velocity, render_frame,
                     render_surface_sequence)

__all__ = [
    "CHANNELS", "MOTION_KINDS", "REST_ROOT_HEIGHT", "GroundTruth", "NoiseConfig",
    "PointFrame", "RawSequence", "generate_motion", "radial_velocity", "read_dataset",
    "render_frame", "render_surface_sequence", "simulate_sequence", "write_dataset",
]


def simulate_sequence(template: BodyTemplate, kind: str, duration: float, frame_rate: float,
                      noise: NoiseConfig, seed: int, radar_origin=(0.0, 0.0, 0.0),
                      **motion_kwargs) -> RawSequence:
    """Motion clip -> rendered frames + exact ground truth in one call.

    The initial bounding-box center is the ground-truth root translation of
    frame 0, mimicking a capture protocol where the subject's start position
    is known.
    """
    params = generate_motion(template, kind, duration, frame_rate, seed, **motion_kwargs)
    frames = render_surface_sequence(template, params, frame_rate, radar_origin, noise, seed)
    with ad.no_grad():
        joints = reconstruct(template, params).joints.data
    gt = GroundTruth(theta=params.theta.data.copy(), beta=params.beta.data.copy(),
                     gamma=params.gamma.data.copy(), joints=joints)
    return RawSequence(frames, frame_rate, gt, gt.gamma[0].copy())
