"""Checkpoints: weights + optimizer moments + configs + position in the run.

The random state needs no explicit serialization: every random stream in
training is derived from (seed, epoch or step), so (epoch, step) in the
metadata pins the whole trajectory.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..autodiff import AdamState, serialize
from ..errors import ContractError, FormatError
from ..net import NetworkConfig, ReconstructionNet
from .config import TrainConfig

CHECKPOINT_FORMAT = "radarbody-checkpoint"


@dataclass
class Checkpoint:
    network_config: NetworkConfig
    train_config: TrainConfig
    epoch: int
    step: int
    params: dict[str, np.ndarray]
    first_moment: dict[str, np.ndarray]
    second_moment: dict[str, np.ndarray]
    adam_step_count: int
    learning_rate: float  # current (may differ from config under lr_decay)

    def fingerprint(self) -> str:
        return self.network_config.fingerprint()

    @classmethod
    def capture(cls, model: ReconstructionNet, state: AdamState, train_config: TrainConfig,
                epoch: int, step: int) -> "Checkpoint":
        names = model.store.names()
        tensors = model.store.tensors()
        return cls(
            network_config=model.config, train_config=train_config, epoch=epoch, step=step,
            params={n: t.data.copy() for n, t in zip(names, tensors)},
            first_moment={n: m.copy() for n, m in zip(names, state.first_moment)},
            second_moment={n: v.copy() for n, v in zip(names, state.second_moment)},
            adam_step_count=state.step_count, learning_rate=state.learning_rate)

    def build_model(self) -> ReconstructionNet:
        model = ReconstructionNet(self.network_config, seed=self.train_config.seed)
        try:
            model.store.load_values(self.params)
        except ContractError as exc:
            raise FormatError(f"checkpoint does not fit its own config: {exc}") from exc
        return model

    def build_optimizer(self, model: ReconstructionNet) -> AdamState:
        wd = (self.train_config.weight_decay
              if self.train_config.decay_mode == "weight_decay" else 0.0)
        state = AdamState.for_params(model.parameters(), learning_rate=self.learning_rate,
                                     weight_decay=wd)
        names = model.store.names()
        state.first_moment = [np.array(self.first_moment[n]) for n in names]
        state.second_moment = [np.array(self.second_moment[n]) for n in names]
        state.step_count = self.adam_step_count
        return state


def save_checkpoint(ckpt: Checkpoint, path) -> None:
    metadata = {
        "format": CHECKPOINT_FORMAT,
        "network": ckpt.network_config.to_dict(),
        "train": ckpt.train_config.to_dict(),
        "epoch": ckpt.epoch,
        "step": ckpt.step,
        "adam_step_count": ckpt.adam_step_count,
        "learning_rate": ckpt.learning_rate,
        "config_fingerprint": ckpt.fingerprint(),
    }
    records = {name: (ckpt.params[name], ckpt.first_moment[name], ckpt.second_moment[name])
               for name in ckpt.params}
    serialize.write_container(path, records, metadata)


def load_checkpoint(path) -> Checkpoint:
    records, metadata = serialize.read_container(path)
    if metadata.get("format") != CHECKPOINT_FORMAT:
        raise FormatError(f"not a checkpoint file: format={metadata.get('format')!r}")
    network_config = NetworkConfig.from_dict(metadata["network"])
    train_config = TrainConfig.from_dict(metadata["train"])
    ckpt = Checkpoint(
        network_config=network_config, train_config=train_config,
        epoch=int(metadata["epoch"]), step=int(metadata["step"]),
        params={n: r[0] for n, r in records.items()},
        first_moment={n: r[1] for n, r in records.items()},
        second_moment={n: r[2] for n, r in records.items()},
        adam_step_count=int(metadata["adam_step_count"]),
        learning_rate=float(metadata["learning_rate"]))
    # Validate record names/shapes against the embedded config immediately so
    # a mismatched file fails here, naming the offending parameter.
    expected = ReconstructionNet(network_config, seed=train_config.seed)
    names = expected.store.names()
    if list(records) != names:
        missing = set(names) - set(records)
        extra = set(records) - set(names)
        raise FormatError(f"checkpoint parameter set mismatch: missing={sorted(missing)}, "
                          f"unexpected={sorted(extra)}")
    for name in names:
        want = expected.store[name].data.shape
        got = records[name][0].shape
        if want != got:
            raise FormatError(f"checkpoint parameter {name}: shape {got} != expected {want}")
    return ckpt
