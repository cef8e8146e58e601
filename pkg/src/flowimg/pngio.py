"""Write-only 8-bit RGB PNG encoder.

Pixel data goes into *stored* (uncompressed) deflate blocks, so the output
bytes depend only on the pixels, never on a compressor's tuning. That keeps
exports byte-identical across platforms and library versions.
"""
from __future__ import annotations

import os
import struct
import zlib

import numpy as np

_SIG = b"\x89PNG\r\n\x1a\n"
_STORED_MAX = 65535


def _chunk(tag: bytes, payload: bytes) -> bytes:
    crc = zlib.crc32(tag + payload) & 0xFFFFFFFF
    return struct.pack(">I", len(payload)) + tag + payload + struct.pack(">I", crc)


def _stored_deflate(data: bytes) -> bytes:
    # zlib header 0x78 0x01 (32K window, fastest), raw stored blocks, adler32
    out = [b"\x78\x01"]
    n = len(data)
    pos = 0
    while True:
        chunk = data[pos : pos + _STORED_MAX]
        pos += len(chunk)
        final = 1 if pos >= n else 0
        ln = len(chunk)
        out.append(struct.pack("<BHH", final, ln, ln ^ 0xFFFF))
        out.append(chunk)
        if final:
            break
    out.append(struct.pack(">I", zlib.adler32(data) & 0xFFFFFFFF))
    return b"".join(out)


def rgb_png_bytes(pixels: np.ndarray) -> bytes:
    """Encode an (h, w, 3) uint8 array as a PNG byte string."""
    if pixels.ndim != 3 or pixels.shape[2] != 3 or pixels.dtype != np.uint8:
        raise ValueError("expected (h, w, 3) uint8 pixels")
    h, w, _ = pixels.shape
    ihdr = struct.pack(">IIBBBBB", w, h, 8, 2, 0, 0, 0)  # 8-bit truecolor
    raw = b"".join(b"\x00" + pixels[r].tobytes() for r in range(h))  # filter 0
    return (
        _SIG
        + _chunk(b"IHDR", ihdr)
        + _chunk(b"IDAT", _stored_deflate(raw))
        + _chunk(b"IEND", b"")
    )


def write_rgb_png(path: str | os.PathLike, pixels: np.ndarray) -> None:
    data = rgb_png_bytes(pixels)
    with open(path, "wb") as fh:
        fh.write(data)
        fh.flush()
        os.fsync(fh.fileno())
