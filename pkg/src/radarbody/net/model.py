"""The three-stage reconstruction network.

Stage 1 extracts per-frame spatial features from the cropped point tensor
and runs them through a bi-GRU into per-frame global features G.

Stage 2 (translation predictor) decodes G of the current window into the
root translations of the *next* window, which drive its bounding-box crop.

Stage 3 (skeleton-aware estimator) decodes a coarse skeleton from G, fuses
it with G through joint-token attention, and regresses the body parameters
(6D pose per joint from each token; shape and translation from the pooled
tokens).  The pose head's bias starts at the identity 6D rotation so early
training never hits the degenerate Gram-Schmidt region.

Coordinate handling: the crop centers are known per frame, so the model
works in box-centered coordinates internally; point xyz channels have the
frame's center subtracted, and the translation/skeleton/gamma heads regress
center-relative values that ``forward_window`` shifts back to the absolute
frame.  Losses, metrics, and the crop contract all stay absolute.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import autodiff as ad
from ..body import BodyParams
from ..errors import DimensionError
from ..seeding import derive_key
from .attention import FusedJointFeatures, JointAttention
from .config import NetworkConfig
from .gru import BiGRU
from .params import ParameterStore
from .pointnet import SpatialFeatureExtractor


@dataclass
class NetOutputs:
    gamma_pred: ad.Tensor     # (B, T, 3) translations for the *next* window
    coarse_joints: ad.Tensor  # (B, T, N_J, 3)
    fused: FusedJointFeatures
    theta: ad.Tensor          # (B, T, 6 N_J)
    beta: ad.Tensor           # (B, T, N_shape)
    gamma: ad.Tensor          # (B, T, 3)

    def body_params_flat(self) -> BodyParams:
        """Window-flattened (B*T, ...) view for kinematics and losses."""
        b, t_len = self.theta.shape[:2]
        return BodyParams(
            ad.reshape(self.theta, (b * t_len,) + self.theta.shape[2:]),
            ad.reshape(self.beta, (b * t_len,) + self.beta.shape[2:]),
            ad.reshape(self.gamma, (b * t_len, 3)))


def _mlp_head(store: ParameterStore, prefix: str, d_in: int, widths, d_out: int,
              bias_init=None):
    layers = []
    for i, w in enumerate(widths):
        layers.append(store.linear(f"{prefix}.h{i}", d_in, w))
        d_in = w
    layers.append(store.linear(f"{prefix}.out", d_in, d_out, bias_init=bias_init))
    return layers


def _run_mlp(layers, x, dropout_fn=None, tag=""):
    for i, (w, b) in enumerate(layers[:-1]):
        x = ad.relu(ad.linear_layer(x, w, b))
        if dropout_fn is not None:
            x = dropout_fn(f"{tag}.h{i}", x)
    return ad.linear_layer(x, *layers[-1])


class ReconstructionNet:
    def __init__(self, config: NetworkConfig, seed: int):
        self.config = config
        self.seed = seed
        store = ParameterStore(seed)
        g = config.global_width
        n_j = config.template.n_joints
        self.backbone = SpatialFeatureExtractor(store, config.channels, config.stages,
                                                config.feature_dim)
        self.gru = BiGRU(store, "gru", config.feature_dim, config.gru_hidden)
        self.translation_head = _mlp_head(store, "translation", g, config.translation_mlp, 3)
        self.skeleton_head = _mlp_head(store, "skeleton", g, config.skeleton_mlp, n_j * 3)
        self.attention = JointAttention(store, "attention", config.attention)
        identity6d = np.array([1.0, 0.0, 0.0, 0.0, 1.0, 0.0])
        self.pose_head = store.linear("pose_head", g, 6, bias_init=identity6d)
        self.shape_head = store.linear("shape_head", g, config.template.n_shape)
        self.gamma_head = store.linear("gamma_head", g, 3)
        self.store = store

    def parameters(self) -> list[ad.Tensor]:
        return self.store.tensors()

    def _dropout_fn(self, training: bool, step: int):
        ratio = self.config.dropout
        if not training or ratio == 0.0:
            return None

        def apply(layer_id: str, x: ad.Tensor) -> ad.Tensor:
            return ad.dropout(x, ratio, True, derive_key(self.seed, layer_id, step))

        return apply

    def global_features(self, windows: np.ndarray, training: bool = False,
                        step: int = 0) -> ad.Tensor:
        """Cropped windows (B, T, N, C) -> per-frame global features (B, T, G)."""
        if windows.ndim != 4:
            raise DimensionError(f"expected (B, T, N, C) windows, got {windows.shape}")
        b, t_len, n, c = windows.shape
        if (t_len, n, c) != (self.config.window, self.config.points, self.config.channels):
            raise DimensionError(
                f"window shape {(t_len, n, c)} != configured "
                f"{(self.config.window, self.config.points, self.config.channels)}")
        spatial = self.backbone(windows.reshape(b * t_len, n, c))
        g = self.gru(ad.reshape(spatial, (b, t_len, self.config.feature_dim)))
        drop = self._dropout_fn(training, step)
        if drop is not None:
            g = drop("gru", g)
        return g

    @staticmethod
    def _center_windows(windows: np.ndarray, centers: np.ndarray) -> np.ndarray:
        if centers.shape != windows.shape[:2] + (3,):
            raise DimensionError(
                f"centers shape {centers.shape} != {windows.shape[:2] + (3,)}")
        centered = windows.copy()
        centered[..., :3] -= centers[:, :, None, :]
        return centered

    def predict_translation(self, global_feat: ad.Tensor, training: bool = False,
                            step: int = 0) -> ad.Tensor:
        """G (B, T, G) of window k -> predicted translations (B, T, 3) of window k+1."""
        return _run_mlp(self.translation_head, global_feat,
                        self._dropout_fn(training, step), "translation")

    def estimate_coarse_skeleton(self, global_feat: ad.Tensor, training: bool = False,
                                 step: int = 0) -> ad.Tensor:
        b, t_len, _ = global_feat.shape
        flat = _run_mlp(self.skeleton_head, global_feat,
                        self._dropout_fn(training, step), "skeleton")
        return ad.reshape(flat, (b, t_len, self.config.template.n_joints, 3))

    def fuse_and_attend(self, global_feat: ad.Tensor, coarse_joints: ad.Tensor,
                        training: bool = False, step: int = 0) -> FusedJointFeatures:
        return self.attention(global_feat, coarse_joints, self._dropout_fn(training, step))

    def regress_body_params(self, fused: FusedJointFeatures
                            ) -> tuple[ad.Tensor, ad.Tensor, ad.Tensor]:
        """Joint tokens (B, T, N_J, G) -> theta (B, T, 6 N_J), beta, gamma."""
        tokens = fused.attended
        b, t_len, n_j, _ = tokens.shape
        per_joint = ad.linear_layer(tokens, *self.pose_head)       # (B, T, N_J, 6)
        theta = ad.reshape(per_joint, (b, t_len, n_j * 6))
        pooled = ad.reduce_mean(tokens, axis=2)                    # (B, T, G)
        beta = ad.linear_layer(pooled, *self.shape_head)
        gamma = ad.linear_layer(pooled, *self.gamma_head)
        return theta, beta, gamma

    def forward_window(self, windows: np.ndarray, centers: np.ndarray,
                       training: bool = False, step: int = 0) -> NetOutputs:
        """windows (B, T, N, C) with their per-frame crop centers (B, T, 3)."""
        centers = np.asarray(centers, dtype=np.float64)
        g = self.global_features(self._center_windows(windows, centers), training, step)
        offsets = ad.Tensor(centers)            # (B, T, 3), constant
        gamma_pred = ad.add(self.predict_translation(g, training, step), offsets)
        coarse_rel = self.estimate_coarse_skeleton(g, training, step)
        fused = self.fuse_and_attend(g, coarse_rel, training, step)
        theta, beta, gamma_rel = self.regress_body_params(fused)
        b, t_len = centers.shape[:2]
        coarse = ad.add(coarse_rel, ad.reshape(offsets, (b, t_len, 1, 3)))
        gamma = ad.add(gamma_rel, offsets)
        return NetOutputs(gamma_pred, coarse, fused, theta, beta, gamma)
