"""Loss terms and their composition.

All distance terms are mean-reduced L1: the 1-norm over the last (vector)
axis, averaged over every frame/joint/vertex entity.  The pose term is the
mean geodesic angle between predicted and ground-truth per-joint rotation
matrices.  Each term is multiplied by its scale factor before entering the
sums, and the report stores the scaled values, so

    l_smpl  = l_theta + l_beta + l_gamma + l_J + l_M
    l_total = l_joint + l_smpl + l_pred

hold exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import autodiff as ad
from ..body import geodesic_distance, reconstruct, rot6d_to_matrix
from ..body.template import BodyTemplate
from ..errors import ContractError
from .config import LossScales
from .model import NetOutputs


@dataclass
class WindowTruth:
    """Ground truth for a batch of windows, all (B, T, ...) numpy arrays.

    ``gamma_next`` is the root translation of the *following* window, the
    target of the translation predictor.
    """

    theta: np.ndarray        # (B, T, 6 N_J)
    beta: np.ndarray         # (B, T, N_shape)
    gamma: np.ndarray        # (B, T, 3)
    joints: np.ndarray       # (B, T, N_J, 3)
    vertices: np.ndarray     # (B, T, N_V, 3)
    gamma_next: np.ndarray   # (B, T, 3)


@dataclass
class LossReport:
    l_pred: float
    l_joint: float
    l_theta: float
    l_beta: float
    l_gamma: float
    l_J: float
    l_M: float
    l_smpl: float
    l_total: float

    CSV_FIELDS = ("l_pred", "l_joint", "l_theta", "l_beta", "l_gamma", "l_J", "l_M", "l_total")


def l1_mean(pred: ad.Tensor, target: np.ndarray) -> ad.Tensor:
    """Mean over entities of the last-axis 1-norm of (pred - target)."""
    diff = ad.absolute(ad.sub(pred, ad.as_tensor(target)))
    return ad.reduce_mean(ad.reshape(ad.reduce_sum(diff, axis=-1), (-1,)))


def compute_losses(outputs: NetOutputs, truth: WindowTruth, template: BodyTemplate,
                   scales: LossScales) -> tuple[ad.Tensor, LossReport]:
    """Returns (total loss tensor for backward, report of scaled terms)."""
    for term in ("theta", "beta", "gamma", "joints", "vertices", "gamma_next"):
        if getattr(truth, term, None) is None:
            raise ContractError(f"ground truth is missing the {term!r} term")

    b, t_len = outputs.theta.shape[:2]
    n_j = template.n_joints

    l_pred = ad.mul(l1_mean(outputs.gamma_pred, truth.gamma_next), scales.pred)
    l_joint = ad.mul(l1_mean(outputs.coarse_joints, truth.joints), scales.joint)

    pred_rots = rot6d_to_matrix(ad.reshape(outputs.theta, (b, t_len, n_j, 6)))
    with ad.no_grad():
        true_rots = rot6d_to_matrix(ad.Tensor(truth.theta.reshape(b, t_len, n_j, 6))).data
    l_theta = ad.mul(ad.reduce_mean(
        ad.reshape(geodesic_distance(pred_rots, ad.Tensor(true_rots)), (-1,))), scales.theta)

    l_beta = ad.mul(l1_mean(outputs.beta, truth.beta), scales.beta)
    l_gamma = ad.mul(l1_mean(outputs.gamma, truth.gamma), scales.gamma)

    body = reconstruct(template, outputs.body_params_flat())
    l_J = ad.mul(l1_mean(body.joints, truth.joints.reshape(b * t_len, n_j, 3)), scales.J)
    l_M = ad.mul(l1_mean(body.vertices,
                         truth.vertices.reshape(b * t_len, template.n_vertices, 3)), scales.M)

    l_smpl = ad.add(ad.add(ad.add(ad.add(l_theta, l_beta), l_gamma), l_J), l_M)
    l_total = ad.add(ad.add(l_joint, l_smpl), l_pred)
    report = LossReport(l_pred.item(), l_joint.item(), l_theta.item(), l_beta.item(),
                        l_gamma.item(), l_J.item(), l_M.item(), l_smpl.item(), l_total.item())
    return l_total, report
