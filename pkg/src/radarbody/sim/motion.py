"""Procedural motion clips: smooth sinusoidal joint trajectories plus a root
path, emitted as per-frame body parameters in the template's own
parameterization (so ground truth is exact by construction)."""

from __future__ import annotations

import numpy as np

from ..body import BodyParams, axis_angle_matrix, identity_rot6d, matrix_to_rot6d
from ..body.template import BodyTemplate
from ..errors import ConfigurationError
from ..seeding import seeded_rng

MOTION_KINDS = ("walk_line", "walk_circle", "arm_swing", "squat")

# Swing axes and peak amplitudes (radians) per joint name, for the gait cycle.
# Amplitudes are capped so the whole capsule surface stays inside the
# 1 x 1 x 3 m crop box around the root for every built-in motion kind.
_WALK_SWING = {
    "l_hip": ("x", 0.25), "r_hip": ("x", 0.25),
    "l_knee": ("x", 0.30), "r_knee": ("x", 0.30),
    "l_shoulder": ("x", 0.28), "r_shoulder": ("x", 0.28),
    "l_elbow": ("x", 0.20), "r_elbow": ("x", 0.20),
}
# Rest attitude: T-pose arms rotated down to the sides about the depth axis.
_ARM_DROP = {"l_shoulder": 1.40, "r_shoulder": -1.40}
_AXES = {"x": np.array([1.0, 0.0, 0.0]), "y": np.array([0.0, 1.0, 0.0]),
         "z": np.array([0.0, 0.0, 1.0])}
REST_ROOT_HEIGHT = 0.93  # puts the feet of the default templates near the floor


def _is_left(name: str) -> bool:
    return name.startswith("l_")


def generate_motion(template: BodyTemplate, kind: str, duration: float, frame_rate: float,
                    seed: int, speed: float = 0.8,
                    start: tuple[float, float, float] = (-1.6, 2.4, REST_ROOT_HEIGHT),
                    ) -> BodyParams:
    """Per-frame BodyParams for ``round(duration * frame_rate)`` frames.

    Walking kinds advance gamma at exactly ``speed`` m/s (straight line along
    +x, or around a circle at constant tangential speed).  Joint angles are
    sinusoids with small seeded phase/amplitude jitter; shape coefficients
    are drawn once per clip and held constant.
    """
    if kind not in MOTION_KINDS:
        raise ConfigurationError(f"unknown motion kind {kind!r}; options: {MOTION_KINDS}")
    n_frames = int(round(duration * frame_rate))
    if n_frames < 1:
        raise ConfigurationError(
            f"duration * frame_rate must be >= 1, got {duration} * {frame_rate}")

    rng = seeded_rng("motion", kind, seed)
    nj = template.n_joints
    t = np.arange(n_frames) / frame_rate
    base_freq = 0.9 + 0.2 * rng.random()  # Hz
    phase_jit = rng.normal(scale=0.15, size=nj)
    amp_jit = 1.0 + np.clip(rng.normal(scale=0.05, size=nj), -0.1, 0.1)

    theta = identity_rot6d(n_frames, nj)
    bend = 0.5 - 0.5 * np.cos(2 * np.pi * base_freq * t)  # 0 -> 1 -> 0 cycle
    for j, name in enumerate(template.joint_names):
        drop = axis_angle_matrix(_AXES["y"], _ARM_DROP[name]) if name in _ARM_DROP else None
        if kind == "squat":
            if "knee" in name:
                axis, angle = _AXES["x"], 0.55 * bend
            elif "hip" in name:
                axis, angle = _AXES["x"], -0.32 * bend
            elif drop is not None:
                theta[:, j, :] = matrix_to_rot6d(drop)
                continue
            else:
                continue
        else:
            spec = _WALK_SWING.get(name)
            animated = spec is not None and not (
                kind == "arm_swing" and not ("shoulder" in name or "elbow" in name))
            if not animated:
                if drop is not None:
                    theta[:, j, :] = matrix_to_rot6d(drop)
                continue
            axis_key, amp = spec
            axis = _AXES[axis_key]
            side = 0.0 if _is_left(name) else np.pi  # contralateral gait
            angle = amp * amp_jit[j] * np.sin(2 * np.pi * base_freq * t + side + phase_jit[j])
        mats = axis_angle_matrix(axis, angle)
        if drop is not None:
            mats = mats @ drop  # swing composes on top of the lowered-arm attitude
        theta[:, j, :] = matrix_to_rot6d(mats)

    gamma = np.tile(np.asarray(start, dtype=np.float64), (n_frames, 1))
    if kind == "walk_line":
        gamma[:, 0] += speed * t
    elif kind == "walk_circle":
        radius = 1.2
        omega = speed / radius
        center = np.asarray(start, dtype=np.float64) - np.array([radius, 0.0, 0.0])
        gamma[:, 0] = center[0] + radius * np.cos(omega * t)
        gamma[:, 1] = center[1] + radius * np.sin(omega * t)
    elif kind == "squat":
        gamma[:, 2] += -0.18 * (0.5 - 0.5 * np.cos(2 * np.pi * base_freq * t))
    # arm_swing: root stays put

    beta = np.tile(np.clip(rng.normal(scale=0.3, size=template.n_shape), -0.8, 0.8),
                   (n_frames, 1))
    return BodyParams.from_arrays(theta.reshape(n_frames, -1), beta, gamma)
