"""Writer for the MTEB binary sidecar.

Layout (little-endian): magic ``MTEB``, u32 version = 1, u32 dim,
u64 count, then per record u32 camera_id, u32 instance_id, dim float32
appearance values, dim float32 surrounding values.  Records are emitted in
sorted (camera_id, instance_id) order so equal inputs give equal bytes.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

MAGIC = b"MTEB"
VERSION = 1
_HEADER = struct.Struct("<4sIIQ")
_KEY = struct.Struct("<II")


def write_sidecar(
    records: dict[tuple[int, int], tuple[np.ndarray, np.ndarray]],
    dim: int,
    path: str | Path,
) -> None:
    keys = sorted(records)
    for cam_id, inst_id in keys:
        if cam_id < 0 or inst_id < 0:
            raise ValueError(
                f"sidecar keys must be non-negative, got ({cam_id}, {inst_id})"
            )
    chunks = [_HEADER.pack(MAGIC, VERSION, dim, len(keys))]
    for key in keys:
        app, sur = records[key]
        app = np.asarray(app, dtype="<f4").reshape(-1)
        sur = np.asarray(sur, dtype="<f4").reshape(-1)
        if app.size != dim or sur.size != dim:
            raise ValueError(
                f"record {key}: vectors must have length {dim}, "
                f"got {app.size} and {sur.size}"
            )
        chunks.append(_KEY.pack(*key))
        chunks.append(app.tobytes())
        chunks.append(sur.tobytes())
    Path(path).write_bytes(b"".join(chunks))


def read_sidecar_header(path: str | Path) -> tuple[int, int]:
    """Return (dim, count) from a sidecar file; used by tests."""
    raw = Path(path).read_bytes()
    magic, version, dim, count = _HEADER.unpack_from(raw, 0)
    if magic != MAGIC or version != VERSION:
        raise ValueError(f"{path}: not a version-{VERSION} MTEB file")
    return dim, count
