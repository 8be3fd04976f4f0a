"""Training loop: teacher-forced window batches optimized with Adam.

A training sample is a pair of consecutive non-overlapping windows (k, k+1)
from one sequence: the network sees window k cropped with ground-truth
translations (teacher forcing), reconstructs window k, and is supervised to
predict window k+1's translations.  Everything random is keyed by
(seed, epoch) or (seed, step), so runs are bitwise reproducible and resume
from a checkpoint continues the identical trajectory.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .. import autodiff as ad
from ..body import BodyParams, make_template, reconstruct
from ..body.template import BodyTemplate
from ..errors import ContractError
from ..net import NetworkConfig, ReconstructionNet, WindowTruth, compute_losses, crop_window
from ..net.losses import LossReport
from ..seeding import derive_key, seeded_rng
from ..sim.io import RawSequence
from .checkpoint import Checkpoint
from .config import TrainConfig

log = logging.getLogger(__name__)


@dataclass
class PreparedSequence:
    raw: RawSequence
    vertices: np.ndarray          # (F, N_V, 3) ground-truth surface
    window_starts: list[int]      # starts with a following target window


@dataclass
class TrainResult:
    checkpoint: Checkpoint
    loss_rows: list[dict]                 # one per step, LossReport fields + "step"
    validation: list[tuple[int, float]]   # (epoch, mean validation l_total)
    train_sequences: list[int] = field(default_factory=list)
    val_sequences: list[int] = field(default_factory=list)


def build_template(config: NetworkConfig) -> BodyTemplate:
    t = config.template
    return make_template(t.n_joints, t.n_vertices, t.n_shape, t.seed)


def prepare_sequences(dataset: list[RawSequence], template: BodyTemplate,
                      window: int) -> list[PreparedSequence | None]:
    """Precompute ground-truth surfaces and usable window starts per sequence.

    Entries are None for sequences too short to yield one (window, target)
    pair; index positions are preserved so splits stay aligned.
    """
    prepared: list[PreparedSequence | None] = []
    for i, seq in enumerate(dataset):
        if seq.ground_truth is None:
            raise ContractError(f"sequence {i} carries no ground truth")
        n = len(seq.frames)
        starts = [s for s in range(0, n - 2 * window + 1, window)]
        if not starts:
            log.warning("sequence %d has %d frames < %d; skipped", i, n, 2 * window)
            prepared.append(None)
            continue
        gt = seq.ground_truth
        params = BodyParams.from_arrays(gt.theta, gt.beta, gt.gamma)
        with ad.no_grad():
            vertices = reconstruct(template, params).vertices.data
        prepared.append(PreparedSequence(seq, vertices, starts))
    return prepared


def split_sequences(n_sequences: int, fraction: float, seed: int
                    ) -> tuple[list[int], list[int]]:
    """Seeded sequence-level split; validation may be empty for tiny sets."""
    order = seeded_rng("val-split", seed).permutation(n_sequences)
    n_val = int(round(fraction * n_sequences))
    return sorted(order[n_val:].tolist()), sorted(order[:n_val].tolist())


def _sample_crop(prep: PreparedSequence, start: int, config: NetworkConfig,
                 seed: int, seq_index: int) -> np.ndarray:
    centers = prep.raw.ground_truth.gamma[start:start + config.window]
    crop = crop_window(prep.raw, start, centers, config.points,
                       derive_key("train-crop", seed, seq_index, start),
                       box_extent=config.box_extent, source="ground_truth")
    return crop.P


def _sample_truth(prep: PreparedSequence, start: int, window: int) -> dict[str, np.ndarray]:
    gt = prep.raw.ground_truth
    sl = slice(start, start + window)
    nxt = slice(start + window, start + 2 * window)
    return {"theta": gt.theta[sl], "beta": gt.beta[sl], "gamma": gt.gamma[sl],
            "joints": gt.joints[sl], "vertices": prep.vertices[sl],
            "gamma_next": gt.gamma[nxt]}


class _SampleBank:
    """Caches crops and truth slices; both are deterministic per sample."""

    def __init__(self, prepared, indices, config: NetworkConfig, seed: int):
        self.samples = [(i, start) for i in indices if prepared[i] is not None
                        for start in prepared[i].window_starts]
        self._prepared = prepared
        self._config = config
        self._seed = seed
        self._crops: dict[tuple[int, int], np.ndarray] = {}
        self._truths: dict[tuple[int, int], dict] = {}

    def __len__(self) -> int:
        return len(self.samples)

    def batch(self, chosen: list[tuple[int, int]]
              ) -> tuple[np.ndarray, np.ndarray, WindowTruth]:
        """Returns (windows (B,T,N,C), crop centers (B,T,3), stacked truth)."""
        crops, truths = [], []
        for key in chosen:
            if key not in self._crops:
                i, start = key
                self._crops[key] = _sample_crop(self._prepared[i], start, self._config,
                                                self._seed, i)
                self._truths[key] = _sample_truth(self._prepared[i], start, self._config.window)
            crops.append(self._crops[key])
            truths.append(self._truths[key])
        windows = np.stack(crops)
        stacked = {name: np.stack([t[name] for t in truths]) for name in truths[0]}
        truth = WindowTruth(**stacked)
        return windows, truth.gamma.copy(), truth


def train(net_config: NetworkConfig, train_config: TrainConfig, dataset: list[RawSequence],
          resume_from: Checkpoint | None = None) -> TrainResult:
    """Run (or continue) training; returns the final checkpoint and logs."""
    template = build_template(net_config)
    model = ReconstructionNet(net_config, seed=train_config.seed)
    from ..autodiff import AdamState, adam_step, backward

    if resume_from is not None:
        model.store.load_values(resume_from.params)
        state = resume_from.build_optimizer(model)
        start_epoch, step = resume_from.epoch, resume_from.step
    else:
        wd = train_config.weight_decay if train_config.decay_mode == "weight_decay" else 0.0
        state = AdamState.for_params(model.parameters(),
                                     learning_rate=train_config.learning_rate, weight_decay=wd)
        start_epoch, step = 0, 0

    prepared = prepare_sequences(dataset, template, net_config.window)
    train_idx, val_idx = split_sequences(len(dataset), train_config.validation_fraction,
                                         train_config.seed)
    bank = _SampleBank(prepared, train_idx, net_config, train_config.seed)
    val_bank = _SampleBank(prepared, val_idx, net_config, train_config.seed)
    if len(bank) == 0 and train_config.epochs > 0:
        raise ContractError("no usable training windows (sequences too short or all held out)")
    if not val_idx:
        log.warning("validation split is empty at fraction %.3g over %d sequences",
                    train_config.validation_fraction, len(dataset))

    loss_rows: list[dict] = []
    validation: list[tuple[int, float]] = []
    scales = net_config.loss_scales
    params = model.parameters()
    final_epoch = start_epoch
    done = train_config.max_steps is not None and step >= train_config.max_steps

    for epoch in range(start_epoch, train_config.epochs):
        if done:
            break
        order = seeded_rng("epoch-order", train_config.seed, epoch).permutation(len(bank))
        for lo in range(0, len(order), train_config.batch_size):
            chosen = [bank.samples[i] for i in order[lo:lo + train_config.batch_size]]
            windows, centers, truth = bank.batch(chosen)
            step += 1
            if train_config.decay_mode == "lr_decay":
                state.learning_rate = train_config.learning_rate / (
                    1.0 + train_config.weight_decay * step)
            outputs = model.forward_window(windows, centers, training=True, step=step)
            total, report = compute_losses(outputs, truth, template, scales)
            backward(total)
            adam_step(params, state)
            loss_rows.append({"step": step,
                              **{f: getattr(report, f) for f in LossReport.CSV_FIELDS}})
            if train_config.max_steps is not None and step >= train_config.max_steps:
                done = True  # note: mid-epoch stop; resume is exact only from epoch boundaries
                break
        if not done:
            final_epoch = epoch + 1
            if len(val_bank):
                validation.append((final_epoch,
                                   _validation_loss(model, val_bank, template, scales)))

    ckpt = Checkpoint.capture(model, state, train_config, final_epoch, step)
    return TrainResult(ckpt, loss_rows, validation, train_idx, val_idx)


def _validation_loss(model, bank: _SampleBank, template, scales) -> float:
    totals = []
    for sample in bank.samples:
        windows, centers, truth = bank.batch([sample])
        outputs = model.forward_window(windows, centers, training=False)
        total, _ = compute_losses(outputs, truth, template, scales)
        totals.append(total.item())
        ad.active_graph().clear()
    return float(np.mean(totals))


def write_loss_csv(rows: list[dict], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["step", *LossReport.CSV_FIELDS])
        for row in rows:
            writer.writerow([row["step"], *(repr(row[f]) for f in LossReport.CSV_FIELDS)])


def read_loss_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        return [{"step": int(r["step"]),
                 **{f: float(r[f]) for f in LossReport.CSV_FIELDS}} for r in reader]
