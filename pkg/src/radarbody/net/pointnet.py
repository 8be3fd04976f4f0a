"""Point backbone: sampling, grouping, and attention-scored set abstraction.

Max-pooling aggregation is replaced by a learned scalar score per grouped
point: a linear layer maps point features to scores, a softmax over the
group turns them into weights, and the group feature is the weighted sum.

Index selection (sampling and grouping) is numpy-only and sits outside the
gradient path; gradients flow through the gathered features.
"""

from __future__ import annotations

import numpy as np

from .. import autodiff as ad
from ..errors import ContractError
from .config import StageConfig
from .params import ParameterStore


def centroid_start_index(points: np.ndarray) -> int:
    """Index of the point nearest the frame centroid (ties: lowest index).

    Anchoring the sampling start here makes the backbone deterministic and
    independent of point order.
    """
    centroid = points.mean(axis=0)
    return int(np.argmin(np.linalg.norm(points - centroid, axis=1)))


def farthest_point_sample(points: np.ndarray, k: int, start_index: int) -> np.ndarray:
    """Greedy max-min selection of ``k`` indices (ties: lowest index)."""
    n = points.shape[0]
    if not 1 <= k <= n:
        raise ContractError(f"farthest_point_sample needs 1 <= k <= {n}, got k={k}")
    if not 0 <= start_index < n:
        raise ContractError(f"start_index {start_index} out of range for {n} points")
    chosen = np.empty(k, dtype=np.intp)
    chosen[0] = start_index
    min_dist = np.linalg.norm(points - points[start_index], axis=1)
    for i in range(1, k):
        nxt = int(np.argmax(min_dist))  # argmax returns the first (lowest) maximizer
        chosen[i] = nxt
        np.minimum(min_dist, np.linalg.norm(points - points[nxt], axis=1), out=min_dist)
    return chosen


def ball_query(points: np.ndarray, centers: np.ndarray, radius: float,
               max_per_group: int) -> np.ndarray:
    """Fixed-size neighbour groups: (k, max_per_group) index array.

    Per center: the in-radius points (closed ball), lowest index first,
    truncated to ``max_per_group``.  Undersized groups are padded by
    repeating the nearest in-radius point; empty groups repeat the nearest
    point overall.
    """
    if radius <= 0:
        raise ContractError(f"radius must be positive, got {radius}")
    dist = np.linalg.norm(centers[:, None, :] - points[None, :, :], axis=2)
    groups = np.empty((centers.shape[0], max_per_group), dtype=np.intp)
    for c in range(centers.shape[0]):
        inside = np.flatnonzero(dist[c] <= radius)
        if inside.size == 0:
            groups[c] = np.argmin(dist[c])
        elif inside.size >= max_per_group:
            groups[c] = inside[:max_per_group]
        else:
            groups[c, :inside.size] = inside
            groups[c, inside.size:] = inside[np.argmin(dist[c, inside])]
    return groups


def centroid_start_batch(positions: np.ndarray) -> np.ndarray:
    """(F, N, 3) -> per-frame centroid-nearest start indices."""
    d = np.linalg.norm(positions - positions.mean(axis=1, keepdims=True), axis=2)
    return np.argmin(d, axis=1)


def farthest_point_sample_batch(positions: np.ndarray, k: int,
                                starts: np.ndarray) -> np.ndarray:
    """Vectorized over frames; per frame identical to farthest_point_sample."""
    f_count, n, _ = positions.shape
    if not 1 <= k <= n:
        raise ContractError(f"farthest_point_sample needs 1 <= k <= {n}, got k={k}")
    chosen = np.empty((f_count, k), dtype=np.intp)
    chosen[:, 0] = starts
    frame_axis = np.arange(f_count)
    min_dist = np.linalg.norm(positions - positions[frame_axis, starts][:, None], axis=2)
    for i in range(1, k):
        nxt = np.argmax(min_dist, axis=1)  # first maximizer; ties break to the lowest index
        chosen[:, i] = nxt
        np.minimum(min_dist,
                   np.linalg.norm(positions - positions[frame_axis, nxt][:, None], axis=2),
                   out=min_dist)
    return chosen


def ball_query_batch(positions: np.ndarray, centers: np.ndarray, radius: float,
                     max_per_group: int) -> np.ndarray:
    """Vectorized over frames; per frame identical to ball_query.

    positions (F, N, 3), centers (F, k, 3) -> (F, k, max_per_group).
    """
    if radius <= 0:
        raise ContractError(f"radius must be positive, got {radius}")
    f_count, n, _ = positions.shape
    dist = np.linalg.norm(centers[:, :, None, :] - positions[:, None, :, :], axis=3)
    inside = dist <= radius
    # Stable sort on (outside?, index): in-radius indices come first, ascending.
    key = np.where(inside, 0, n) + np.arange(n)
    order = np.argsort(key, axis=2, kind="stable")[:, :, :max_per_group]
    if order.shape[2] < max_per_group:  # fewer points than group slots; mask fills the rest
        fill = np.zeros(order.shape[:2] + (max_per_group - order.shape[2],), dtype=np.intp)
        order = np.concatenate([order, fill], axis=2)
    counts = inside.sum(axis=2)
    pad_inside = np.argmin(np.where(inside, dist, np.inf), axis=2)
    pad_any = np.argmin(dist, axis=2)
    pad = np.where(counts > 0, pad_inside, pad_any)
    slot = np.arange(max_per_group)[None, None, :]
    return np.where(slot < np.minimum(counts, max_per_group)[:, :, None],
                    order, pad[:, :, None])


def _mlp(store: ParameterStore, prefix: str, widths: tuple[int, ...], d_in: int) -> list:
    layers = []
    for i, w in enumerate(widths):
        layers.append(store.linear(f"{prefix}.mlp{i}", d_in, w))
        d_in = w
    return layers


class SetAbstraction:
    """Sample k centers, group neighbours, shared MLP, score-weighted sum."""

    def __init__(self, store: ParameterStore, prefix: str, d_in: int, stage: StageConfig):
        self.stage = stage
        self.layers = _mlp(store, prefix, stage.mlp_widths, d_in + 3)
        self.score = store.linear(f"{prefix}.score", stage.mlp_widths[-1], 1)
        self.d_out = stage.mlp_widths[-1]
        # Sampling depends only on positions, so identical frames (training
        # crops are deterministic and revisited every epoch) reuse indices.
        self._index_cache: dict[bytes, tuple[np.ndarray, np.ndarray]] = {}

    def _indices(self, positions: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        f_count = positions.shape[0]
        keys = [positions[f].tobytes() for f in range(f_count)]
        missing = [f for f, key in enumerate(keys) if key not in self._index_cache]
        if missing:
            sub = positions[missing]
            centers = farthest_point_sample_batch(sub, self.stage.n_centers,
                                                  centroid_start_batch(sub))
            groups = ball_query_batch(sub, sub[np.arange(len(missing))[:, None], centers],
                                      self.stage.radius, self.stage.max_per_group)
            for j, f in enumerate(missing):
                self._index_cache[keys[f]] = (centers[j], groups[j])
        if len(self._index_cache) > 100_000:
            self._index_cache.clear()
        pairs = [self._index_cache[key] for key in keys]
        return np.stack([p[0] for p in pairs]), np.stack([p[1] for p in pairs])

    def __call__(self, positions: np.ndarray, features: ad.Tensor
                 ) -> tuple[np.ndarray, ad.Tensor]:
        """positions (F, N, 3) constant; features (F, N, D) -> (F, k, d_out)."""
        f_count, n, _ = positions.shape
        k, mpg = self.stage.n_centers, self.stage.max_per_group
        if k > n:
            raise ContractError(f"stage wants {k} centers from {n} points")
        frame_axis = np.arange(f_count)[:, None]
        center_idx, group_idx = self._indices(positions)
        center_pos = positions[frame_axis, center_idx]                 # (F, k, 3)
        grouped_pos = positions[frame_axis[:, :, None], group_idx]     # (F, k, mpg, 3)
        rel = grouped_pos - center_pos[:, :, None, :]
        grouped = ad.gather_frames(features, group_idx)                # (F, k, mpg, D)
        h = ad.concat_last_axis([ad.Tensor(rel), grouped])
        for weight, bias in self.layers:
            h = ad.relu(ad.linear_layer(h, weight, bias))
        scores = ad.linear_layer(h, *self.score)                       # (F, k, mpg, 1)
        weights = ad.softmax(ad.reshape(scores, (f_count, k, mpg)), axis=-1)
        pooled = ad.reduce_sum(ad.mul(ad.reshape(weights, (f_count, k, mpg, 1)), h), axis=2)
        return center_pos, pooled


class GlobalAggregation:
    """Whole-frame version of the scored aggregation, producing one vector."""

    def __init__(self, store: ParameterStore, prefix: str, d_in: int, d_out: int):
        self.proj = store.linear(f"{prefix}.proj", d_in, d_out)
        self.score = store.linear(f"{prefix}.score", d_out, 1)
        self.d_out = d_out

    def __call__(self, features: ad.Tensor) -> ad.Tensor:
        """(F, N, D) -> (F, d_out)."""
        h = ad.relu(ad.linear_layer(features, *self.proj))
        scores = ad.reshape(ad.linear_layer(h, *self.score), h.shape[:-1])
        weights = ad.softmax(scores, axis=-1)
        return ad.reduce_sum(ad.mul(ad.reshape(weights, weights.shape + (1,)), h), axis=1)


class SpatialFeatureExtractor:
    """Stacked set-abstraction stages + global aggregation, per frame."""

    def __init__(self, store: ParameterStore, channels: int,
                 stages: tuple[StageConfig, ...], feature_dim: int):
        self.stages = []
        d = channels
        for i, stage in enumerate(stages):
            sa = SetAbstraction(store, f"backbone.sa{i}", d, stage)
            self.stages.append(sa)
            d = sa.d_out
        self.head = GlobalAggregation(store, "backbone.global", d, feature_dim)

    def __call__(self, frames: np.ndarray) -> ad.Tensor:
        """frames (F, N, C) -> spatial features (F, feature_dim)."""
        positions = np.ascontiguousarray(frames[..., :3])
        features = ad.Tensor(frames)
        for sa in self.stages:
            positions, features = sa(positions, features)
        return self.head(features)
