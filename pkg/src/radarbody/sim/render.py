"""Point cloud rendering: body reflections, clutter, multipath ghosts.

Radar sits at ``radar_origin`` (default the coordinate origin); receding
targets have positive radial velocity.  Every sampled quantity is a pure
function of (inputs, seed); rendering the same frame twice is bitwise
identical.  The per-point channel layout is (x, y, z, radial_velocity,
intensity), C = 5.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import autodiff as ad
from ..body import BodyParams, reconstruct
from ..body.template import BodyTemplate
from ..errors import ConfigurationError, ContractError
from ..seeding import derive_key, seeded_rng

CHANNELS = 5


@dataclass
class PointFrame:
    points: np.ndarray   # (count, C) -- x, y, z, doppler, intensity
    timestamp: float

    @property
    def count(self) -> int:
        return self.points.shape[0]


@dataclass
class NoiseConfig:
    clutter_points_per_frame: float = 40.0
    clutter_region: tuple[tuple[float, float, float], tuple[float, float, float]] = (
        (-3.0, 0.5, -0.1), (3.0, 6.0, 2.5))  # (lo, hi) corners, meters
    ghost_probability: float = 0.05
    ghost_mirror_plane: tuple[tuple[float, float, float], float] = ((1.0, 0.0, 0.0), 3.2)
    position_jitter_sigma: float = 0.02
    doppler_noise_sigma: float = 0.05
    body_points_per_frame: float = 150.0
    intensity_noise_sigma: float = 0.3

    def __post_init__(self):
        for label, value in (("clutter_points_per_frame", self.clutter_points_per_frame),
                             ("position_jitter_sigma", self.position_jitter_sigma),
                             ("doppler_noise_sigma", self.doppler_noise_sigma),
                             ("body_points_per_frame", self.body_points_per_frame),
                             ("intensity_noise_sigma", self.intensity_noise_sigma)):
            if value < 0:
                raise ConfigurationError(f"{label} must be >= 0, got {value}")
        if not 0.0 <= self.ghost_probability <= 1.0:
            raise ConfigurationError("ghost_probability must be in [0, 1]")
        lo, hi = np.asarray(self.clutter_region[0]), np.asarray(self.clutter_region[1])
        if not np.all(lo <= hi):
            raise ConfigurationError("clutter_region lo corner must be <= hi corner")

    @classmethod
    def silent(cls, body_points_per_frame: float = 150.0) -> "NoiseConfig":
        """All noise mechanisms off; only clean body reflections remain."""
        return cls(clutter_points_per_frame=0.0, ghost_probability=0.0,
                   position_jitter_sigma=0.0, doppler_noise_sigma=0.0,
                   body_points_per_frame=body_points_per_frame, intensity_noise_sigma=0.0)


def radial_velocity(p, v, radar_origin) -> np.ndarray:
    """Line-of-sight velocity component: <v, p - o> / |p - o|, receding positive.

    Accepts single 3-vectors or (..., 3) stacks.
    """
    p = np.asarray(p, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    los = p - np.asarray(radar_origin, dtype=np.float64)
    rng_dist = np.linalg.norm(los, axis=-1)
    if np.any(rng_dist == 0.0):
        raise ContractError("radial_velocity undefined at zero range from the radar")
    return np.sum(v * los, axis=-1) / rng_dist


def _intensity(points: np.ndarray, radar_origin, sigma: float,
               rng: np.random.Generator) -> np.ndarray:
    ranges = np.linalg.norm(points - radar_origin, axis=-1)
    base = 1.0 / np.maximum(ranges, 1e-6) ** 2
    if sigma == 0.0:
        return base
    return base * np.exp(rng.normal(scale=sigma, size=base.shape))


def _mirror(points: np.ndarray, plane: tuple[tuple[float, float, float], float]
            ) -> np.ndarray:
    normal = np.asarray(plane[0], dtype=np.float64)
    normal = normal / np.linalg.norm(normal)
    dist = points @ normal - plane[1]
    return points - 2.0 * dist[:, None] * normal


def _surface(template: BodyTemplate, params: BodyParams) -> np.ndarray:
    with ad.no_grad():
        return reconstruct(template, params).vertices.data


def _sample_frame(verts_now: np.ndarray, velocity: np.ndarray, radar_origin: np.ndarray,
                  noise: NoiseConfig, seed: int, timestamp: float) -> PointFrame:
    """Draw one frame's points from a precomputed surface; order is body,
    ghosts, clutter.  The rng call sequence is fixed, do not reorder."""
    rng = seeded_rng("render", seed)
    rows = []
    n_body = rng.poisson(noise.body_points_per_frame)
    ghost_draws = rng.random(n_body)
    if n_body:
        pick = rng.integers(0, verts_now.shape[0], size=n_body)
        pos = verts_now[pick]
        if noise.position_jitter_sigma > 0:
            pos = pos + rng.normal(scale=noise.position_jitter_sigma, size=pos.shape)
        vel = velocity[pick]
        doppler = radial_velocity(pos, vel, radar_origin)
        if noise.doppler_noise_sigma > 0:
            doppler = doppler + rng.normal(scale=noise.doppler_noise_sigma, size=n_body)
        intensity = _intensity(pos, radar_origin, noise.intensity_noise_sigma, rng)
        rows.append(np.column_stack([pos, doppler, intensity]))

        ghost_mask = ghost_draws < noise.ghost_probability
        if np.any(ghost_mask):
            g_pos = _mirror(pos[ghost_mask], noise.ghost_mirror_plane)
            # velocity picks up only the reflection's linear part
            g_vel = _mirror(pos[ghost_mask] + vel[ghost_mask], noise.ghost_mirror_plane) - g_pos
            g_dop = radial_velocity(g_pos, g_vel, radar_origin)
            if noise.doppler_noise_sigma > 0:
                g_dop = g_dop + rng.normal(scale=noise.doppler_noise_sigma, size=g_dop.shape)
            g_int = _intensity(g_pos, radar_origin, noise.intensity_noise_sigma, rng)
            rows.append(np.column_stack([g_pos, g_dop, g_int]))

    n_clutter = rng.poisson(noise.clutter_points_per_frame)
    if n_clutter:
        lo = np.asarray(noise.clutter_region[0], dtype=np.float64)
        hi = np.asarray(noise.clutter_region[1], dtype=np.float64)
        c_pos = lo + rng.random((n_clutter, 3)) * (hi - lo)
        c_dop = (rng.normal(scale=noise.doppler_noise_sigma, size=n_clutter)
                 if noise.doppler_noise_sigma > 0 else np.zeros(n_clutter))
        c_int = _intensity(c_pos, radar_origin, noise.intensity_noise_sigma, rng)
        rows.append(np.column_stack([c_pos, c_dop, c_int]))

    points = np.concatenate(rows) if rows else np.zeros((0, CHANNELS))
    return PointFrame(points, timestamp)


def _check_renderable(template: BodyTemplate, dt: float) -> None:
    if dt <= 0:
        raise ContractError(f"dt must be positive, got {dt}")
    if template.n_vertices == 0:
        raise ContractError("cannot render from a template without surface vertices")


def render_frame(template: BodyTemplate, params_now: BodyParams, params_prev: BodyParams,
                 dt: float, radar_origin, noise: NoiseConfig, seed: int,
                 timestamp: float = 0.0) -> PointFrame:
    """One radar frame.  ``params_now``/``params_prev`` hold a single frame;
    surface velocity is their finite difference over ``dt``."""
    _check_renderable(template, dt)
    if params_now.n_frames != 1 or params_prev.n_frames != 1:
        raise ContractError("render_frame takes single-frame params")
    verts_now = _surface(template, params_now)[0]
    velocity = (verts_now - _surface(template, params_prev)[0]) / dt
    return _sample_frame(verts_now, velocity, np.asarray(radar_origin, dtype=np.float64),
                         noise, seed, timestamp)


def render_surface_sequence(template: BodyTemplate, params: BodyParams, frame_rate: float,
                            radar_origin, noise: NoiseConfig, seed: int) -> list[PointFrame]:
    """Render every frame of a motion clip, sharing one batched skinning pass.

    Frame 0 reuses its own pose as "previous", so its surface velocity is
    zero.  Frame i's sampling stream is keyed by (seed, i).
    """
    _check_renderable(template, 1.0 / frame_rate)
    verts = _surface(template, params)  # (F, N_V, 3)
    prev = np.concatenate([verts[:1], verts[:-1]])
    velocity = (verts - prev) * frame_rate
    origin = np.asarray(radar_origin, dtype=np.float64)
    return [_sample_frame(verts[i], velocity[i], origin, noise,
                          derive_key("seq-frame", seed, i), timestamp=i / frame_rate)
            for i in range(verts.shape[0])]
