"""Sequential-window inference and the five evaluation metrics.

Inference protocol: window 0 of each sequence is cropped around the provided
initial box center; each later window is cropped around the translations the
previous window predicted for it.  ``oracle_crop=True`` swaps the predicted
centers for ground-truth ones (the "known bounding box" condition) without
touching anything else.

Metrics: rotation error in degrees, every distance in centimeters.  All
joints participate in MPJRE.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass

import numpy as np

from .. import autodiff as ad
from ..body import BodyParams, reconstruct, rot6d_to_matrix
from ..body.rotation import CLAMP_MARGIN
from ..errors import ContractError, DimensionError
from ..net import crop_window
from ..seeding import derive_key
from ..sim.io import RawSequence
from .checkpoint import Checkpoint
from .train import build_template

log = logging.getLogger(__name__)


def _check_same_shape(pred, truth, op):
    if pred.shape != truth.shape:
        raise DimensionError(f"{op}: shapes {pred.shape} and {truth.shape} differ")


def metric_mpjre(pred_rot: np.ndarray, true_rot: np.ndarray) -> float:
    """Mean per-joint geodesic angle in degrees; inputs (..., 3, 3)."""
    pred_rot, true_rot = np.asarray(pred_rot), np.asarray(true_rot)
    _check_same_shape(pred_rot, true_rot, "mpjre")
    trace = np.einsum("...ij,...ij->...", pred_rot, true_rot)
    cos = np.clip((trace - 1.0) / 2.0, -1.0 + CLAMP_MARGIN, 1.0 - CLAMP_MARGIN)
    return float(np.degrees(np.arccos(cos)).mean())


def _mean_distance_cm(pred, truth, op) -> float:
    pred, truth = np.asarray(pred), np.asarray(truth)
    _check_same_shape(pred, truth, op)
    return float(np.linalg.norm(pred - truth, axis=-1).mean() * 100.0)


def metric_mpjpe(pred_joints, true_joints) -> float:
    return _mean_distance_cm(pred_joints, true_joints, "mpjpe")


def metric_mpvpe(pred_vertices, true_vertices) -> float:
    return _mean_distance_cm(pred_vertices, true_vertices, "mpvpe")


def metric_mte(pred_root, true_root) -> float:
    return _mean_distance_cm(pred_root, true_root, "mte")


def metric_mpte(pred_translation, true_translation) -> float:
    return _mean_distance_cm(pred_translation, true_translation, "mpte")


@dataclass
class MetricsReport:
    mpjre_deg: float
    mpjpe_cm: float
    mpvpe_cm: float | None
    mte_cm: float
    mpte_cm: float | None
    per_sequence: list[dict]
    config_fingerprint: str
    frames_evaluated: int
    oracle_crop: bool

    def to_json(self) -> str:
        doc = {"mpjre_deg": self.mpjre_deg, "mpjpe_cm": self.mpjpe_cm,
               "mpvpe_cm": self.mpvpe_cm, "mte_cm": self.mte_cm, "mpte_cm": self.mpte_cm,
               "per_sequence": self.per_sequence, "config_fingerprint": self.config_fingerprint,
               "frames_evaluated": self.frames_evaluated, "oracle_crop": self.oracle_crop,
               "joints_used": "all"}
        return json.dumps(doc, sort_keys=True, indent=2)


@dataclass
class _Accumulator:
    pred_rot: list
    true_rot: list
    pred_joints: list
    true_joints: list
    pred_vertices: list
    true_vertices: list
    pred_gamma_next: list
    true_gamma_next: list

    @classmethod
    def empty(cls):
        return cls([], [], [], [], [], [], [], [])

    def merge(self, other: "_Accumulator"):
        for name in vars(self):
            getattr(self, name).extend(getattr(other, name))

    def report_terms(self, compute_vertices: bool) -> dict:
        out = {
            "mpjre_deg": metric_mpjre(np.concatenate(self.pred_rot),
                                      np.concatenate(self.true_rot)),
            "mpjpe_cm": metric_mpjpe(np.concatenate(self.pred_joints),
                                     np.concatenate(self.true_joints)),
            "mte_cm": metric_mte(np.concatenate(self.pred_joints)[:, 0],
                                 np.concatenate(self.true_joints)[:, 0]),
            "mpvpe_cm": (metric_mpvpe(np.concatenate(self.pred_vertices),
                                      np.concatenate(self.true_vertices))
                         if compute_vertices else None),
        }
        # None when no window had a predecessor to predict it (single-window sequence)
        out["mpte_cm"] = (metric_mpte(np.concatenate(self.pred_gamma_next),
                                      np.concatenate(self.true_gamma_next))
                          if self.pred_gamma_next else None)
        return out


def evaluate(checkpoint: Checkpoint, dataset: list[RawSequence], oracle_crop: bool = False,
             compute_vertices: bool = True, oracle_passthrough: bool = False,
             collect_frames: bool = False,
             ) -> tuple[MetricsReport, list[dict]]:
    """Run inference over every sequence and pool the metrics.

    ``oracle_passthrough`` replaces the network's outputs with ground truth
    (a plumbing diagnostic: every metric must then be ~0).  When
    ``collect_frames`` is set, the second return value holds one dict per
    frame with predicted joints/vertices/translations for external rendering.
    """
    model = checkpoint.build_model()
    template = build_template(checkpoint.network_config)
    config = checkpoint.network_config
    window = config.window
    total = _Accumulator.empty()
    per_sequence = []
    frame_dumps: list[dict] = []
    frames_evaluated = 0

    for s_idx, seq in enumerate(dataset):
        if seq.ground_truth is None:
            raise ContractError(f"sequence {s_idx} carries no ground truth")
        if seq.initial_box_center is None:
            raise ContractError(f"sequence {s_idx} has no initial_box_center")
        n_windows = len(seq.frames) // window
        if n_windows == 0:
            log.warning("sequence %d shorter than one window; skipped", s_idx)
            continue
        gt = seq.ground_truth
        acc = _Accumulator.empty()
        centers = np.tile(np.asarray(seq.initial_box_center, dtype=np.float64), (window, 1))
        source = "initial_box"
        pending_prediction: np.ndarray | None = None

        for k in range(n_windows):
            lo = k * window
            sl = slice(lo, lo + window)
            if oracle_crop and k > 0:
                centers, source = gt.gamma[sl], "ground_truth"
            crop = crop_window(seq, lo, centers, config.points,
                               derive_key("eval-crop", checkpoint.train_config.seed, s_idx, lo),
                               box_extent=config.box_extent, source=source)
            with ad.no_grad():
                outputs = model.forward_window(crop.P[None], centers[None], training=False)
                if oracle_passthrough:
                    theta = gt.theta[sl]
                    beta, gamma = gt.beta[sl], gt.gamma[sl]
                    gamma_next_pred = None
                else:
                    theta = outputs.theta.data[0]
                    beta, gamma = outputs.beta.data[0], outputs.gamma.data[0]
                    gamma_next_pred = outputs.gamma_pred.data[0]
                params = BodyParams.from_arrays(theta, beta, gamma)
                out = reconstruct(template, params)
                pred_rot = rot6d_to_matrix(
                    ad.Tensor(theta.reshape(window, template.n_joints, 6))).data
                true_rot = rot6d_to_matrix(
                    ad.Tensor(gt.theta[sl].reshape(window, template.n_joints, 6))).data

            acc.pred_rot.append(pred_rot.reshape(-1, 3, 3))
            acc.true_rot.append(true_rot.reshape(-1, 3, 3))
            acc.pred_joints.append(out.joints.data)
            acc.true_joints.append(gt.joints[sl])
            if compute_vertices:
                true_verts = reconstruct(template, BodyParams.from_arrays(
                    gt.theta[sl], gt.beta[sl], gt.gamma[sl])).vertices.data
                acc.pred_vertices.append(out.vertices.data)
                acc.true_vertices.append(true_verts)
            if pending_prediction is not None:
                acc.pred_gamma_next.append(pending_prediction)
                acc.true_gamma_next.append(gt.gamma[sl])
            frames_evaluated += window
            if collect_frames:
                for i in range(window):
                    frame_dumps.append({
                        "sequence": s_idx, "frame": lo + i,
                        "joints": out.joints.data[i].tolist(),
                        "vertices": out.vertices.data[i].tolist() if compute_vertices else None,
                        "gamma": gamma[i].tolist(),
                        "gamma_pred_next": (gamma_next_pred[i].tolist()
                                            if gamma_next_pred is not None else None)})

            # next window's crop centers come from this window's prediction
            if gamma_next_pred is not None:
                pending_prediction = gamma_next_pred
                centers, source = gamma_next_pred, "predicted"
            else:  # passthrough mode tracks ground truth
                pending_prediction = gt.gamma[lo + window: lo + 2 * window] \
                    if lo + 2 * window <= len(seq.frames) else None
                if pending_prediction is not None:
                    centers, source = pending_prediction, "ground_truth"

        seq_terms = acc.report_terms(compute_vertices)
        seq_terms["sequence"] = s_idx
        per_sequence.append(seq_terms)
        total.merge(acc)

    if frames_evaluated == 0:
        raise ContractError("no sequence long enough to evaluate")
    terms = total.report_terms(compute_vertices)
    report = MetricsReport(
        mpjre_deg=terms["mpjre_deg"], mpjpe_cm=terms["mpjpe_cm"], mpvpe_cm=terms["mpvpe_cm"],
        mte_cm=terms["mte_cm"], mpte_cm=terms["mpte_cm"], per_sequence=per_sequence,
        config_fingerprint=checkpoint.fingerprint(), frames_evaluated=frames_evaluated,
        oracle_crop=oracle_crop)
    return report, frame_dumps
