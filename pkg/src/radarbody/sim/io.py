"""Dataset container for raw radar sequences.

Binary layout (little-endian):

    magic    4 bytes  b"MMRD"
    version  u32      currently 1
    frames   u32      frame count F
    channels u32      per-point channel count C (>= 4)
    rate     f64      frame rate, Hz
    flags    u32      bit 0: ground-truth block present
    box      3 x f64  initial bounding-box center
    per frame, F times:
        count u32, count x C f64 point payload, f64 timestamp
    ground-truth block (if flagged):
        n_joints u32, n_shape u32,
        theta F x 6*n_joints f64, beta F x n_shape f64,
        gamma F x 3 f64, joints F x n_joints x 3 f64

An optional JSON sidecar (same stem, ``.json``) records the generating
configuration for provenance; it is written by the CLI, not required here.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import FormatError
from .render import CHANNELS, PointFrame

MAGIC = b"MMRD"
VERSION = 1
_FLAG_GROUND_TRUTH = 1


@dataclass
class GroundTruth:
    theta: np.ndarray    # (F, 6 N_J)
    beta: np.ndarray     # (F, N_shape)
    gamma: np.ndarray    # (F, 3)
    joints: np.ndarray   # (F, N_J, 3)

    @property
    def n_joints(self) -> int:
        return self.joints.shape[1]

    @property
    def n_shape(self) -> int:
        return self.beta.shape[1]


@dataclass
class RawSequence:
    frames: list[PointFrame]
    frame_rate: float
    ground_truth: GroundTruth | None
    initial_box_center: np.ndarray  # (3,)

    def __len__(self) -> int:
        return len(self.frames)

    def validate(self) -> None:
        times = np.array([f.timestamp for f in self.frames])
        if times.size > 1 and not np.all(np.diff(times) > 0):
            raise FormatError("timestamps must be strictly increasing")
        for i, f in enumerate(self.frames):
            if f.points.ndim != 2 or (f.points.shape[0] and f.points.shape[1] < 4):
                raise FormatError(f"frame {i}: points must be (count, C>=4)")
            if not np.all(np.isfinite(f.points)):
                raise FormatError(f"frame {i}: non-finite point values")
        if self.ground_truth is not None and self.ground_truth.gamma.shape[0] != len(self.frames):
            raise FormatError("ground truth must have one entry per frame")


def write_dataset(seq: RawSequence, path) -> None:
    seq.validate()
    channels = seq.frames[0].points.shape[1] if seq.frames and seq.frames[0].count else CHANNELS
    for i, f in enumerate(seq.frames):
        if f.count and f.points.shape[1] != channels:
            raise FormatError(f"frame {i}: channel count {f.points.shape[1]} != {channels}")
    flags = _FLAG_GROUND_TRUTH if seq.ground_truth is not None else 0
    chunks = [MAGIC, struct.pack("<III", VERSION, len(seq.frames), channels),
              struct.pack("<d", seq.frame_rate), struct.pack("<I", flags),
              np.asarray(seq.initial_box_center, dtype="<f8").tobytes()]
    for f in seq.frames:
        chunks.append(struct.pack("<I", f.count))
        chunks.append(np.ascontiguousarray(f.points, dtype="<f8").tobytes())
        chunks.append(struct.pack("<d", f.timestamp))
    gt = seq.ground_truth
    if gt is not None:
        chunks.append(struct.pack("<II", gt.n_joints, gt.n_shape))
        for arr in (gt.theta, gt.beta, gt.gamma, gt.joints):
            chunks.append(np.ascontiguousarray(arr, dtype="<f8").tobytes())
    Path(path).write_bytes(b"".join(chunks))


class _Reader:
    def __init__(self, raw: bytes):
        self.raw = raw
        self.offset = 0

    def pull(self, n: int) -> bytes:
        if self.offset + n > len(self.raw):
            raise FormatError(f"truncated dataset: wanted {n} more bytes", self.offset)
        out = self.raw[self.offset:self.offset + n]
        self.offset += n
        return out

    def u32(self) -> int:
        return struct.unpack("<I", self.pull(4))[0]

    def f64(self) -> float:
        return struct.unpack("<d", self.pull(8))[0]

    def array(self, shape: tuple[int, ...]) -> np.ndarray:
        count = int(np.prod(shape)) if shape else 1
        return np.frombuffer(self.pull(8 * count), dtype="<f8").astype(np.float64).reshape(shape)


def read_dataset(path) -> RawSequence:
    r = _Reader(Path(path).read_bytes())
    if r.pull(4) != MAGIC:
        raise FormatError("bad magic: not a radar dataset", 0)
    version = r.u32()
    if version != VERSION:
        raise FormatError(f"unsupported dataset version {version}", 4)
    n_frames = r.u32()
    channels = r.u32()
    if channels < 4:
        raise FormatError(f"channel count {channels} < 4", 12)
    frame_rate = r.f64()
    if not np.isfinite(frame_rate) or frame_rate <= 0:
        raise FormatError(f"invalid frame rate {frame_rate}", 16)
    flags = r.u32()
    box = r.array((3,))
    frames = []
    for _ in range(n_frames):
        at = r.offset
        count = r.u32()
        if count > 10_000_000:
            raise FormatError(f"implausible point count {count}", at)
        points = r.array((count, channels))
        frames.append(PointFrame(points, r.f64()))
    gt = None
    if flags & _FLAG_GROUND_TRUTH:
        nj = r.u32()
        n_shape = r.u32()
        gt = GroundTruth(theta=r.array((n_frames, 6 * nj)),
                         beta=r.array((n_frames, n_shape)),
                         gamma=r.array((n_frames, 3)),
                         joints=r.array((n_frames, nj, 3)))
    if r.offset != len(r.raw):
        raise FormatError(f"{len(r.raw) - r.offset} trailing bytes", r.offset)
    seq = RawSequence(frames, frame_rate, gt, box)
    seq.validate()
    return seq
