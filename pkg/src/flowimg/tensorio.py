"""Versioned binary tensor container.

Layout, all little-endian:

    magic   4 bytes  b"FIMG"
    version u16      currently 1
    dtype   u8       1 = float32
    rank    u8
    shape   rank * u64
    payload prod(shape) * 4 bytes, row-major float32
    crc32   u32      CRC-32 of the payload bytes

Every reader-side violation maps to a dedicated error so a fuzzed byte flip
anywhere in the file is rejected, never silently accepted.
"""
from __future__ import annotations

import os
import struct
import zlib

import numpy as np

from .errors import (
    BadMagic,
    CrcMismatch,
    IoError,
    NonFiniteValue,
    TruncatedFile,
)

MAGIC = b"FIMG"
VERSION = 1
_DTYPE_F32 = 1
_MAX_RANK = 8


def write_tensor(path: str | os.PathLike, array: np.ndarray) -> None:
    """Write a float32 tensor; payload is fsynced before returning."""
    # np.ascontiguousarray would promote rank-0 to rank-1; tobytes below
    # copies non-contiguous input anyway
    arr = np.asarray(array, dtype=np.float32)
    if not np.isfinite(arr).all():
        raise NonFiniteValue("refusing to write NaN or infinity")
    if arr.ndim > _MAX_RANK:
        raise ValueError(f"rank {arr.ndim} exceeds {_MAX_RANK}")
    payload = arr.astype("<f4", copy=False).tobytes(order="C")
    header = MAGIC + struct.pack("<HBB", VERSION, _DTYPE_F32, arr.ndim)
    header += struct.pack(f"<{arr.ndim}Q", *arr.shape)
    crc = struct.pack("<I", zlib.crc32(payload) & 0xFFFFFFFF)
    try:
        with open(path, "wb") as fh:
            fh.write(header)
            fh.write(payload)
            fh.write(crc)
            fh.flush()
            os.fsync(fh.fileno())
    except OSError as exc:
        raise IoError(f"writing {path}: {exc}") from exc


def read_tensor(path: str | os.PathLike) -> np.ndarray:
    try:
        with open(path, "rb") as fh:
            blob = fh.read()
    except OSError as exc:
        raise IoError(f"reading {path}: {exc}") from exc
    return tensor_from_bytes(blob)


def tensor_from_bytes(blob: bytes) -> np.ndarray:
    if len(blob) < 8:
        raise TruncatedFile(f"{len(blob)} bytes is shorter than any header")
    if blob[:4] != MAGIC:
        raise BadMagic(f"expected {MAGIC!r}, found {blob[:4]!r}")
    version, dtype_tag, rank = struct.unpack_from("<HBB", blob, 4)
    if version != VERSION:
        raise BadMagic(f"unsupported version {version}")
    if dtype_tag != _DTYPE_F32:
        raise BadMagic(f"unsupported dtype tag {dtype_tag}")
    if rank > _MAX_RANK:
        raise BadMagic(f"rank {rank} exceeds {_MAX_RANK}")
    offset = 8 + 8 * rank
    if len(blob) < offset:
        raise TruncatedFile("header cut short inside the shape table")
    shape = struct.unpack_from(f"<{rank}Q", blob, 8)
    count = 1
    for dim in shape:
        count *= dim
    expected = offset + 4 * count + 4
    if len(blob) != expected:
        raise TruncatedFile(
            f"file is {len(blob)} bytes, header declares {expected}"
        )
    payload = blob[offset : offset + 4 * count]
    (crc_stored,) = struct.unpack_from("<I", blob, offset + 4 * count)
    if (zlib.crc32(payload) & 0xFFFFFFFF) != crc_stored:
        raise CrcMismatch("payload does not match its CRC-32 trailer")
    arr = np.frombuffer(payload, dtype="<f4").reshape(shape).astype(np.float32)
    if not np.isfinite(arr).all():
        raise NonFiniteValue("payload contains NaN or infinity")
    return arr
