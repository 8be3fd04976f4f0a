"""Bounding-box cropping into fixed-size point tensors.

Per frame, points inside the axis-aligned box (closed boundaries) centered
at that frame's translation are kept, then sampled or repeated to exactly N
points.  Selection is deterministic given (raw, centers, N, seed).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ContractError
from ..seeding import seeded_rng
from ..sim.io import RawSequence

CROP_SOURCES = ("ground_truth", "predicted", "initial_box")


@dataclass
class ProcessedSequence:
    P: np.ndarray        # (T, N, C)
    window_start: int    # index of the first raw frame
    source: str          # one of CROP_SOURCES

    def __post_init__(self):
        if self.source not in CROP_SOURCES:
            raise ContractError(f"unknown crop source {self.source!r}")


def _fit_to_count(inside: np.ndarray, n_points: int, rng: np.random.Generator) -> np.ndarray:
    """Index selection into ``inside`` rows implementing sample-or-repeat."""
    count = inside.shape[0]
    if count == n_points:
        return np.arange(count)
    if count > n_points:
        # uniform subsample without replacement, original order preserved
        return np.sort(rng.choice(count, size=n_points, replace=False))
    start = int(rng.integers(0, count))
    return (start + np.arange(n_points)) % count


def crop_window(raw: RawSequence, window_start: int, centers: np.ndarray, n_points: int,
                seed: int, box_extent=(1.0, 1.0, 3.0), source: str = "ground_truth",
                ) -> ProcessedSequence:
    """Crop frames [window_start, window_start + len(centers)) to (T, N, C).

    Empty crops reuse the most recent non-empty cropped frame of the window;
    an empty crop on the first frame falls back to the N nearest raw points.
    """
    centers = np.asarray(centers, dtype=np.float64)
    t_len = centers.shape[0]
    if window_start < 0 or window_start + t_len > len(raw.frames):
        raise ContractError(
            f"window [{window_start}, {window_start + t_len}) outside sequence "
            f"of {len(raw.frames)} frames")
    half = np.asarray(box_extent, dtype=np.float64) / 2.0

    out = None
    prev_cropped: np.ndarray | None = None
    for i in range(t_len):
        frame = raw.frames[window_start + i]
        pts = frame.points
        if out is None:
            out = np.zeros((t_len, n_points, pts.shape[1] if pts.size else 5))
        offset = np.abs(pts[:, :3] - centers[i]) if pts.size else np.zeros((0, 3))
        keep = np.flatnonzero(np.all(offset <= half, axis=1))
        rng = seeded_rng("crop", seed, window_start + i)
        if keep.size:
            inside = pts[keep]
            cropped = inside[_fit_to_count(inside, n_points, rng)]
        elif prev_cropped is not None:
            cropped = prev_cropped
        elif pts.shape[0]:
            dist = np.linalg.norm(pts[:, :3] - centers[i], axis=1)
            nearest = np.argsort(dist, kind="stable")[:n_points]
            near_pts = pts[np.sort(nearest)]
            cropped = near_pts[_fit_to_count(near_pts, n_points, rng)]
        else:
            raise ContractError(f"frame {window_start + i} has no points to crop from")
        out[i] = cropped
        prev_cropped = cropped
    return ProcessedSequence(out, window_start, source)
