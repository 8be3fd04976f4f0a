"""Rotation utilities: 6D representation and geodesic distance.

Both functions are differentiable and accept arbitrary leading batch axes:
6D inputs are (..., 6), matrices (..., 3, 3).  The 6D convention stores the
first two columns of the rotation matrix; Gram-Schmidt recovers the third.
"""

from __future__ import annotations

import numpy as np

from .. import autodiff as ad
from ..errors import DegenerateRotationError

DEGENERACY_EPS = 1e-8
# Keeps arccos' gradient finite when the two rotations (anti-)coincide.
CLAMP_MARGIN = 1e-7


def _norm_last(v: ad.Tensor) -> ad.Tensor:
    return ad.sqrt(ad.reduce_sum(ad.mul(v, v), axis=-1, keepdims=True))


def _cross_last(a: ad.Tensor, b: ad.Tensor) -> ad.Tensor:
    ax, ay, az = (ad.narrow(a, -1, i, 1) for i in range(3))
    bx, by, bz = (ad.narrow(b, -1, i, 1) for i in range(3))
    return ad.concat_last_axis([
        ad.sub(ad.mul(ay, bz), ad.mul(az, by)),
        ad.sub(ad.mul(az, bx), ad.mul(ax, bz)),
        ad.sub(ad.mul(ax, by), ad.mul(ay, bx)),
    ])


def rot6d_to_matrix(r6) -> ad.Tensor:
    """Gram-Schmidt a (..., 6) input into orthonormal (..., 3, 3) matrices.

    Column 1 is the normalized first triple, column 2 the second triple with
    its column-1 component removed and normalized, column 3 their cross
    product.  Scale-invariant by construction.
    """
    r6 = ad.as_tensor(r6)
    if r6.shape[-1] != 6:
        raise DegenerateRotationError(f"rot6d input must have last extent 6, got {r6.shape}")
    a1 = ad.narrow(r6, -1, 0, 3)
    a2 = ad.narrow(r6, -1, 3, 3)
    n1 = _norm_last(a1)
    if np.any(n1.data < DEGENERACY_EPS):
        raise DegenerateRotationError("first 6D triple has near-zero norm")
    col1 = ad.div(a1, n1)
    proj = ad.reduce_sum(ad.mul(col1, a2), axis=-1, keepdims=True)
    u2 = ad.sub(a2, ad.mul(proj, col1))
    n2 = _norm_last(u2)
    if np.any(n2.data < DEGENERACY_EPS):
        raise DegenerateRotationError("second 6D triple is parallel to the first")
    col2 = ad.div(u2, n2)
    col3 = _cross_last(col1, col2)
    return ad.stack([col1, col2, col3], axis=-1)


def geodesic_distance(r1, r2) -> ad.Tensor:
    """Angle in radians between rotation matrices, per batch entry.

    Uses arccos((trace(r1 r2^T) - 1) / 2); the cosine is clamped a margin
    inside [-1, 1] so the result stays differentiable at coincidence.
    trace(r1 r2^T) is just the elementwise product sum.
    """
    r1, r2 = ad.as_tensor(r1), ad.as_tensor(r2)
    if r1.shape != r2.shape or r1.shape[-2:] != (3, 3):
        raise DegenerateRotationError(
            f"geodesic_distance needs matching (..., 3, 3) inputs, got {r1.shape} and {r2.shape}")
    flat1 = ad.reshape(r1, r1.shape[:-2] + (9,))
    flat2 = ad.reshape(r2, r2.shape[:-2] + (9,))
    trace = ad.reduce_sum(ad.mul(flat1, flat2), axis=-1)
    cosine = ad.mul(ad.sub(trace, 1.0), 0.5)
    return ad.arccos(ad.clip(cosine, -1.0 + CLAMP_MARGIN, 1.0 - CLAMP_MARGIN))


def matrix_to_rot6d(matrices: np.ndarray) -> np.ndarray:
    """First two columns flattened, (..., 3, 3) -> (..., 6).  numpy-only."""
    m = np.asarray(matrices, dtype=np.float64)
    return np.concatenate([m[..., :, 0], m[..., :, 1]], axis=-1)


def identity_rot6d(*lead: int) -> np.ndarray:
    out = np.zeros(lead + (6,))
    out[..., 0] = 1.0
    out[..., 4] = 1.0
    return out


def axis_angle_matrix(axis, angle) -> np.ndarray:
    """Rodrigues formula, numpy-only; ``angle`` may be an array broadcast over leading dims."""
    axis = np.asarray(axis, dtype=np.float64)
    axis = axis / np.linalg.norm(axis)
    angle = np.asarray(angle, dtype=np.float64)
    k = np.zeros((3, 3))
    k[0, 1], k[0, 2] = -axis[2], axis[1]
    k[1, 0], k[1, 2] = axis[2], -axis[0]
    k[2, 0], k[2, 1] = -axis[1], axis[0]
    s = np.sin(angle)[..., None, None]
    c = np.cos(angle)[..., None, None]
    return np.eye(3) + s * k + (1.0 - c) * (k @ k)
