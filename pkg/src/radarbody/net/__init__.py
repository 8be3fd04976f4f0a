from .attention import FusedJointFeatures, JointAttention
from .config import AttentionConfig, LossScales, NetworkConfig, StageConfig, TemplateConfig
from .crop import CROP_SOURCES, ProcessedSequence, crop_window
from .gru import BiGRU
from .losses import LossReport, WindowTruth, compute_losses, l1_mean
from .model import NetOutputs, ReconstructionNet
from .params import ParameterStore
from .pointnet import (GlobalAggregation, SetAbstraction, SpatialFeatureExtractor, ball_query,
                       centroid_start_index, farthest_point_sample)

__all__ = [
    "AttentionConfig", "BiGRU", "CROP_SOURCES", "FusedJointFeatures", "GlobalAggregation",
    "JointAttention", "LossReport", "LossScales", "NetOutputs", "NetworkConfig",
    "ParameterStore", "ProcessedSequence", "ReconstructionNet", "SetAbstraction",
    "SpatialFeatureExtractor", "StageConfig", "TemplateConfig", "WindowTruth", "ball_query",
    "centroid_start_index", "compute_losses", "crop_window", "farthest_point_sample", "l1_mean",
]
