"""Bit-exact file formats: NTF tensors and binary PGM masks.

NTF layout::

    "NTF1"  | n, c, h, w as u32 little-endian | n*c*h*w float32 little-endian

The float payload follows the canonical NCHW row-major order, so writing and
re-reading a tensor reproduces it bit for bit.

Masks travel as binary PGM ("P5", maxval 255): gray values >= 128 are
foreground. Writing emits 255 for foreground and 0 for background.
"""

from __future__ import annotations

import struct

import numpy as np

from .errors import FormatError
from .tensor import Tensor

NTF_MAGIC = b"NTF1"
_NTF_HEADER = struct.Struct("<4sIIII")


def ntf_bytes(t: Tensor) -> bytes:
    n, c, h, w = t.dims
    return _NTF_HEADER.pack(NTF_MAGIC, n, c, h, w) + t.array.astype("<f4").tobytes()


def ntf_parse(data: bytes) -> Tensor:
    if len(data) < _NTF_HEADER.size:
        raise FormatError(f"NTF data truncated: {len(data)} bytes")
    magic, n, c, h, w = _NTF_HEADER.unpack_from(data)
    if magic != NTF_MAGIC:
        raise FormatError(f"bad NTF magic {magic!r}")
    count = n * c * h * w
    expected = _NTF_HEADER.size + 4 * count
    if len(data) != expected:
        raise FormatError(
            f"NTF payload is {len(data) - _NTF_HEADER.size} bytes, "
            f"dims ({n},{c},{h},{w}) need {4 * count}")
    flat = np.frombuffer(data, dtype="<f4", offset=_NTF_HEADER.size, count=count)
    return Tensor(flat.astype(np.float32).reshape(n, c, h, w), copy=False)


def read_ntf(path) -> Tensor:
    with open(path, "rb") as fh:
        return ntf_parse(fh.read())


def write_ntf(path, t: Tensor) -> None:
    with open(path, "wb") as fh:
        fh.write(ntf_bytes(t))


def pgm_bytes(mask: np.ndarray) -> bytes:
    """Serialize a binary {0,1} mask as P5 with foreground at 255."""
    m = np.asarray(mask)
    if m.ndim != 2:
        raise FormatError(f"mask must be 2-D, got shape {m.shape}")
    h, w = m.shape
    raster = np.where(m != 0, 255, 0).astype(np.uint8)
    return f"P5\n{w} {h}\n255\n".encode() + raster.tobytes()


def _pgm_header_tokens(data: bytes, count: int) -> tuple[list[bytes], int]:
    """Read whitespace-separated header tokens, skipping '#' comments."""
    tokens: list[bytes] = []
    i = 0
    n = len(data)
    while len(tokens) < count:
        while i < n and data[i:i + 1].isspace():
            i += 1
        if i < n and data[i:i + 1] == b"#":
            while i < n and data[i] != 0x0A:
                i += 1
            continue
        start = i
        while i < n and not data[i:i + 1].isspace():
            i += 1
        if start == i:
            raise FormatError("PGM header truncated")
        tokens.append(data[start:i])
    if i >= n:
        raise FormatError("PGM raster missing")
    return tokens, i + 1  # consume the single whitespace after maxval


def pgm_parse(data: bytes) -> tuple[np.ndarray, int]:
    """Parse a P5 file; returns (gray values as (h, w) uint8, maxval)."""
    try:
        tokens, offset = _pgm_header_tokens(data, 4)
    except FormatError:
        raise
    if tokens[0] != b"P5":
        raise FormatError(f"not a binary PGM: magic {tokens[0]!r}")
    try:
        w, h, maxval = int(tokens[1]), int(tokens[2]), int(tokens[3])
    except ValueError as exc:
        raise FormatError(f"bad PGM header field: {exc}") from None
    if w < 1 or h < 1:
        raise FormatError(f"bad PGM size {w}x{h}")
    if not 1 <= maxval <= 255:
        raise FormatError(f"unsupported PGM maxval {maxval}")
    raster = data[offset:]
    if len(raster) != w * h:
        raise FormatError(f"PGM raster is {len(raster)} bytes, expected {w * h}")
    return np.frombuffer(raster, dtype=np.uint8).reshape(h, w).copy(), maxval


def mask_from_pgm(data: bytes) -> np.ndarray:
    """Binary mask from a PGM: values >= 128 are foreground."""
    gray, _ = pgm_parse(data)
    return (gray >= 128).astype(np.uint8)


def gray_from_pgm(data: bytes) -> np.ndarray:
    """Grayscale (h, w) float32 image in [0, 1], scaled by the file's maxval."""
    gray, maxval = pgm_parse(data)
    return gray.astype(np.float32) / np.float32(maxval)


def read_mask(path) -> np.ndarray:
    with open(path, "rb") as fh:
        return mask_from_pgm(fh.read())


def write_mask(path, mask: np.ndarray) -> None:
    with open(path, "wb") as fh:
        fh.write(pgm_bytes(mask))
