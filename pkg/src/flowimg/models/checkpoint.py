"""Model checkpoint container.

Layout, little-endian throughout:

    magic    4 bytes  b"FCKP"
    version  u16      currently 1
    meta_len u32      followed by canonical JSON metadata (UTF-8)
    count    u32      number of named tensors
    per tensor:
        name_len u16, name bytes
        rank     u8,  rank * u64 shape
        payload  float64 row-major
    crc32    u32      CRC-32 of everything after the magic

Metadata carries the architecture tag, train config, label scale, lineage
hashes, and metrics; arrays carry parameters and batch-norm running stats.
"""
from __future__ import annotations

import json
import os
import struct
import zlib

import numpy as np

from ..errors import BadMagic, CrcMismatch, IoError, TruncatedFile

MAGIC = b"FCKP"
VERSION = 1


def _canonical_json(obj) -> bytes:
    return json.dumps(obj, sort_keys=True, separators=(",", ":")).encode("utf-8")


def save_checkpoint(
    path: str | os.PathLike,
    arrays: dict[str, np.ndarray],
    meta: dict,
) -> None:
    body = bytearray()
    body += struct.pack("<H", VERSION)
    meta_bytes = _canonical_json(meta)
    body += struct.pack("<I", len(meta_bytes))
    body += meta_bytes
    body += struct.pack("<I", len(arrays))
    for name in sorted(arrays):
        # asarray, not ascontiguousarray: the latter would silently turn
        # rank-0 scalars into rank-1 arrays; tobytes copies regardless
        arr = np.asarray(arrays[name], dtype=np.float64)
        name_b = name.encode("utf-8")
        body += struct.pack("<H", len(name_b))
        body += name_b
        body += struct.pack("<B", arr.ndim)
        body += struct.pack(f"<{arr.ndim}Q", *arr.shape)
        body += arr.astype("<f8", copy=False).tobytes(order="C")
    crc = zlib.crc32(bytes(body)) & 0xFFFFFFFF
    try:
        with open(path, "wb") as fh:
            fh.write(MAGIC)
            fh.write(body)
            fh.write(struct.pack("<I", crc))
            fh.flush()
            os.fsync(fh.fileno())
    except OSError as exc:
        raise IoError(f"writing {path}: {exc}") from exc


def load_checkpoint(path: str | os.PathLike) -> tuple[dict[str, np.ndarray], dict]:
    try:
        with open(path, "rb") as fh:
            blob = fh.read()
    except OSError as exc:
        raise IoError(f"reading {path}: {exc}") from exc
    if len(blob) < 4 or blob[:4] != MAGIC:
        raise BadMagic(f"expected {MAGIC!r}")
    body = blob[4:-4]
    if len(blob) < 8:
        raise TruncatedFile("no room for a CRC trailer")
    (crc_stored,) = struct.unpack_from("<I", blob, len(blob) - 4)
    if (zlib.crc32(body) & 0xFFFFFFFF) != crc_stored:
        raise CrcMismatch("checkpoint body does not match its CRC-32")

    off = 0

    def take(n: int) -> bytes:
        nonlocal off
        if off + n > len(body):
            raise TruncatedFile("checkpoint body cut short")
        chunk = body[off : off + n]
        off += n
        return chunk

    (version,) = struct.unpack("<H", take(2))
    if version != VERSION:
        raise BadMagic(f"unsupported checkpoint version {version}")
    (meta_len,) = struct.unpack("<I", take(4))
    meta = json.loads(take(meta_len).decode("utf-8"))
    (count,) = struct.unpack("<I", take(4))
    arrays: dict[str, np.ndarray] = {}
    for _ in range(count):
        (name_len,) = struct.unpack("<H", take(2))
        name = take(name_len).decode("utf-8")
        (rank,) = struct.unpack("<B", take(1))
        shape = struct.unpack(f"<{rank}Q", take(8 * rank))
        n_items = 1
        for dim in shape:
            n_items *= dim
        payload = take(8 * n_items)
        arrays[name] = np.frombuffer(payload, dtype="<f8").reshape(shape).copy()
    if off != len(body):
        raise TruncatedFile(f"{len(body) - off} trailing bytes after tensors")
    return arrays, meta
