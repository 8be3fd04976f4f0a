"""Joint-token fusion and multi-head self-attention over the joints.

The per-frame global feature is broadcast to every joint token, concatenated
with the coarse joint position (token width 3 + G), compressed by a linear
layer, then attended: per head, softmax(Q K^T / sqrt(head_dim)) over the
key axis weights the values; head outputs are concatenated and projected.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import autodiff as ad
from ..errors import DimensionError
from .config import AttentionConfig
from .params import ParameterStore


@dataclass
class FusedJointFeatures:
    i_concat: ad.Tensor   # (B, T, N_J, 3 + G)
    i_prime: ad.Tensor    # (B, T, N_J, G)
    attended: ad.Tensor   # (B, T, N_J, G)


class JointAttention:
    def __init__(self, store: ParameterStore, prefix: str, attn: AttentionConfig,
                 n_joints: int):
        self.attn = attn
        self.n_joints = n_joints
        width, dk = attn.model_dim, attn.head_dim
        self.fuse = store.linear(f"{prefix}.fuse", 3 + width, width)
        # Learned per-joint offset on the fused tokens; without it every token
        # differs only through its 3 coarse-position dims and per-joint
        # constants (e.g. rest attitudes) are very slow to emerge.
        self.token_embed = store.add(f"{prefix}.token_embed", np.zeros((n_joints, width)))
        self.heads = []
        for h in range(attn.n_heads):
            self.heads.append({
                "q": store.linear(f"{prefix}.head{h}.q", width, dk),
                "k": store.linear(f"{prefix}.head{h}.k", width, dk),
                "v": store.linear(f"{prefix}.head{h}.v", width, dk),
            })
        self.out = store.linear(f"{prefix}.out", width, width)

    def __call__(self, global_feat: ad.Tensor, coarse_joints: ad.Tensor,
                 dropout_fn=None) -> FusedJointFeatures:
        """global_feat (B, T, G), coarse_joints (B, T, N_J, 3)."""
        b, t_len, width = global_feat.shape
        if width != self.attn.model_dim:
            raise DimensionError(f"global feature width {width} != {self.attn.model_dim}")
        n_j = coarse_joints.shape[2]
        if n_j != self.n_joints:
            raise DimensionError(f"{n_j} joint tokens != configured {self.n_joints}")
        g_tok = ad.broadcast_to(ad.reshape(global_feat, (b, t_len, 1, width)),
                                (b, t_len, n_j, width))
        i_concat = ad.concat_last_axis([coarse_joints, g_tok])
        i_prime = ad.add(ad.linear_layer(i_concat, *self.fuse), self.token_embed)
        if dropout_fn is not None:
            i_prime = dropout_fn("fuse", i_prime)

        scale = 1.0 / np.sqrt(self.attn.head_dim)
        outputs = []
        for head in self.heads:
            q = ad.linear_layer(i_prime, *head["q"])
            k = ad.linear_layer(i_prime, *head["k"])
            v = ad.linear_layer(i_prime, *head["v"])
            scores = ad.mul(ad.matmul(q, ad.transpose_last2(k)), scale)
            weights = ad.softmax(scores, axis=-1)   # rows over keys sum to 1
            outputs.append(ad.matmul(weights, v))
        attended = ad.linear_layer(ad.concat_last_axis(outputs), *self.out)
        return FusedJointFeatures(i_concat, i_prime, attended)
