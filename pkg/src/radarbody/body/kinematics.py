"""Forward kinematics and linear blend skinning, differentiable end to end.

All functions are batched over a leading frame axis F (any number of frames;
a training batch flattens its B x T windows into F = B*T).  Parameters:

    theta  (F, 6 * N_J)  per-joint relative rotations, 6D representation
    beta   (F, N_beta)   shape coefficients
    gamma  (F, 3)        root translation, meters

World transforms chain parent to child; gamma is added last, so the root
joint ends up at gamma + the shape-adjusted rest root.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import autodiff as ad
from ..errors import DimensionError
from .rotation import rot6d_to_matrix
from .template import BodyTemplate


@dataclass
class BodyParams:
    theta: ad.Tensor   # (F, 6 N_J)
    beta: ad.Tensor    # (F, N_beta)
    gamma: ad.Tensor   # (F, 3)

    @classmethod
    def from_arrays(cls, theta, beta, gamma) -> "BodyParams":
        return cls(ad.as_tensor(theta), ad.as_tensor(beta), ad.as_tensor(gamma))

    @property
    def n_frames(self) -> int:
        return self.theta.shape[0]


@dataclass
class WorldTransforms:
    """Per-joint world rotations/origins before the gamma offset."""

    rotations: ad.Tensor      # (F, N_J, 3, 3)
    origins: ad.Tensor        # (F, N_J, 3)
    shaped_joints: ad.Tensor  # (F, N_J, 3) shape-adjusted rest joints


@dataclass
class BodyOutput:
    joints: ad.Tensor    # (F, N_J, 3)
    vertices: ad.Tensor  # (F, N_V, 3)


def _check_params(template: BodyTemplate, params: BodyParams) -> int:
    nj, nb = template.n_joints, template.n_shape
    f = params.theta.shape[0]
    if params.theta.shape != (f, 6 * nj):
        raise DimensionError(f"theta shape {params.theta.shape} != ({f}, {6 * nj})")
    if params.beta.shape != (f, nb):
        raise DimensionError(f"beta shape {params.beta.shape} != ({f}, {nb})")
    if params.gamma.shape != (f, 3):
        raise DimensionError(f"gamma shape {params.gamma.shape} != ({f}, 3)")
    return f


def _shape_adjusted(rest: np.ndarray, dirs: np.ndarray, beta: ad.Tensor) -> ad.Tensor:
    """rest (N, 3) + sum_k beta_k * dirs[k]  ->  (F, N, 3)."""
    f = beta.shape[0]
    n = rest.shape[0]
    base = ad.broadcast_to(ad.as_tensor(rest[None]), (f, n, 3))
    if dirs.shape[0] == 0 or n == 0:
        return base
    offsets = ad.reshape(ad.matmul(beta, ad.as_tensor(dirs.reshape(dirs.shape[0], -1))), (f, n, 3))
    return ad.add(base, offsets)


def forward_kinematics(template: BodyTemplate, params: BodyParams
                       ) -> tuple[ad.Tensor, WorldTransforms]:
    """Returns (joints (F, N_J, 3), transforms for skinning)."""
    f = _check_params(template, params)
    nj = template.n_joints
    shaped = _shape_adjusted(template.rest_joints, template.shape_dirs_joints, params.beta)
    local_rot = rot6d_to_matrix(ad.reshape(params.theta, (f, nj, 6)))  # (F, N_J, 3, 3)

    world_rot: list[ad.Tensor] = [None] * nj    # each (F, 3, 3)
    world_org: list[ad.Tensor] = [None] * nj    # each (F, 3)
    world_rot[0] = ad.reshape(ad.narrow(local_rot, 1, 0, 1), (f, 3, 3))
    world_org[0] = ad.reshape(ad.narrow(shaped, 1, 0, 1), (f, 3))
    for j in range(1, nj):
        p = int(template.parent[j])
        rot_j = ad.reshape(ad.narrow(local_rot, 1, j, 1), (f, 3, 3))
        offset = ad.sub(ad.reshape(ad.narrow(shaped, 1, j, 1), (f, 3)), world_shaped(shaped, p, f))
        world_rot[j] = ad.matmul(world_rot[p], rot_j)
        moved = ad.reshape(ad.matmul(world_rot[p], ad.reshape(offset, (f, 3, 1))), (f, 3))
        world_org[j] = ad.add(world_org[p], moved)

    rotations = ad.stack(world_rot, axis=1)
    origins = ad.stack(world_org, axis=1)
    joints = ad.add(origins, ad.reshape(params.gamma, (f, 1, 3)))
    return joints, WorldTransforms(rotations, origins, shaped)


def world_shaped(shaped: ad.Tensor, j: int, f: int) -> ad.Tensor:
    return ad.reshape(ad.narrow(shaped, 1, j, 1), (f, 3))


def skin_vertices(template: BodyTemplate, transforms: WorldTransforms,
                  params: BodyParams) -> ad.Tensor:
    """Linear blend skinning -> vertices (F, N_V, 3).

    Each vertex is the skin-weighted sum over its (<= 4) bones of
    R_j (v_shaped - j_shaped) + origin_j, plus gamma.
    """
    f = _check_params(template, params)
    nv = template.n_vertices
    if nv == 0:
        return ad.as_tensor(np.zeros((f, 0, 3)))
    v_shaped = _shape_adjusted(template.rest_vertices, template.shape_dirs_vertices, params.beta)
    idx, w4 = template.skin_idx, template.skin_w

    rot_g = ad.take(transforms.rotations, idx, axis=1)        # (F, N_V, 4, 3, 3)
    org_g = ad.take(transforms.origins, idx, axis=1)          # (F, N_V, 4, 3)
    joint_g = ad.take(transforms.shaped_joints, idx, axis=1)  # (F, N_V, 4, 3)
    local = ad.sub(ad.reshape(v_shaped, (f, nv, 1, 3)), joint_g)
    rotated = ad.reshape(ad.matmul(rot_g, ad.reshape(local, (f, nv, 4, 3, 1))), (f, nv, 4, 3))
    world = ad.add(rotated, org_g)
    blended = ad.reduce_sum(ad.mul(ad.as_tensor(w4[None, :, :, None]), world), axis=2)
    return ad.add(blended, ad.reshape(params.gamma, (f, 1, 3)))


def reconstruct(template: BodyTemplate, params: BodyParams) -> BodyOutput:
    """joints and vertices in one call (the usual consumer path)."""
    joints, transforms = forward_kinematics(template, params)
    return BodyOutput(joints, skin_vertices(template, transforms, params))
