"""Flat binary checkpoint container.

Layout (all little-endian):

    magic   4 bytes  b"MMBT"
    version u32      currently 1
    count   u32      number of parameter records
    mlen    u64      length of the UTF-8 metadata JSON that follows
    meta    mlen bytes (JSON object, sorted keys)
    then per parameter record:
        name_len u32, name bytes (UTF-8)
        rank     u32, extents rank x u64
        values   float64 x prod(extents)
        moment1  float64 x prod(extents)   (Adam first moment)
        moment2  float64 x prod(extents)   (Adam second moment)

Writes are deterministic: same inputs, byte-identical file.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from ..errors import FormatError

MAGIC = b"MMBT"
VERSION = 1


def write_container(path, records: dict[str, tuple[np.ndarray, np.ndarray, np.ndarray]],
                    metadata: dict) -> None:
    """records maps name -> (values, first_moment, second_moment)."""
    meta_raw = json.dumps(metadata, sort_keys=True).encode("utf-8")
    chunks = [MAGIC, struct.pack("<II", VERSION, len(records)),
              struct.pack("<Q", len(meta_raw)), meta_raw]
    for name, (values, m1, m2) in records.items():
        for arr, label in ((m1, "first moment"), (m2, "second moment")):
            if arr.shape != values.shape:
                raise FormatError(f"{name}: {label} shape {arr.shape} != value shape {values.shape}")
        raw_name = name.encode("utf-8")
        chunks.append(struct.pack("<I", len(raw_name)))
        chunks.append(raw_name)
        chunks.append(struct.pack("<I", values.ndim))
        chunks.append(struct.pack(f"<{values.ndim}Q", *values.shape))
        for arr in (values, m1, m2):
            chunks.append(np.ascontiguousarray(arr, dtype="<f8").tobytes())
    Path(path).write_bytes(b"".join(chunks))


class _Reader:
    def __init__(self, raw: bytes):
        self.raw = raw
        self.offset = 0

    def pull(self, n: int) -> bytes:
        if self.offset + n > len(self.raw):
            raise FormatError(f"truncated container: wanted {n} more bytes", self.offset)
        chunk = self.raw[self.offset:self.offset + n]
        self.offset += n
        return chunk

    def u32(self) -> int:
        return struct.unpack("<I", self.pull(4))[0]

    def u64(self) -> int:
        return struct.unpack("<Q", self.pull(8))[0]

    def f64_array(self, shape: tuple[int, ...]) -> np.ndarray:
        count = int(np.prod(shape)) if shape else 1
        flat = np.frombuffer(self.pull(8 * count), dtype="<f8")
        return flat.astype(np.float64).reshape(shape)


def read_container(path) -> tuple[dict[str, tuple[np.ndarray, np.ndarray, np.ndarray]], dict]:
    raw = Path(path).read_bytes()
    r = _Reader(raw)
    if r.pull(4) != MAGIC:
        raise FormatError("bad magic: not a checkpoint container", 0)
    version = r.u32()
    if version != VERSION:
        raise FormatError(f"unsupported container version {version}", 4)
    count = r.u32()
    meta_len = r.u64()
    try:
        metadata = json.loads(r.pull(meta_len).decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"corrupt metadata block: {exc}", 20) from exc
    records: dict[str, tuple[np.ndarray, np.ndarray, np.ndarray]] = {}
    for _ in range(count):
        name_at = r.offset
        name = r.pull(r.u32()).decode("utf-8")
        rank = r.u32()
        if rank > 16:
            raise FormatError(f"implausible rank {rank} for {name}", name_at)
        shape = tuple(r.u64() for _ in range(rank))
        values = r.f64_array(shape)
        m1 = r.f64_array(shape)
        m2 = r.f64_array(shape)
        records[name] = (values, m1, m2)
    if r.offset != len(raw):
        raise FormatError(f"{len(raw) - r.offset} trailing bytes after last record", r.offset)
    return records, metadata
