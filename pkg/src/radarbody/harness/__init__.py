from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .config import TrainConfig
from .evaluate import (MetricsReport, evaluate, metric_mpjpe, metric_mpjre, metric_mpte,
                       metric_mpvpe, metric_mte)
from .train import (TrainResult, build_template, prepare_sequences, read_loss_csv,
                    split_sequences, train, write_loss_csv)

__all__ = [
    "Checkpoint", "MetricsReport", "TrainConfig", "TrainResult", "build_template",
    "evaluate", "load_checkpoint", "metric_mpjpe", "metric_mpjre", "metric_mpte",
    "metric_mpvpe", "metric_mte", "prepare_sequences", "read_loss_csv", "save_checkpoint",
    "split_sequences", "train", "write_loss_csv",
]
