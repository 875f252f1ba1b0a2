"""Binary checkpoint format.

Layout: magic "MNGR", then a body of version (u32) + entry count (u32) +
entries, then a trailing CRC-64 of the body.  Each entry is name length
(u32) + UTF-8 name + dtype tag (u8, 0 = float64) + rank (u32) + dims
(u64 each) + little-endian row-major values.  Round trips are bitwise
lossless and the CRC is validated before any entry is parsed.
"""

from __future__ import annotations

import struct
from pathlib import Path
from typing import Dict, Mapping, Tuple

import numpy as np

MAGIC = b"MNGR"
VERSION = 1
_DTYPE_F64 = 0


class CheckpointError(RuntimeError):
    """Base class for checkpoint load failures."""


class CheckpointMagicError(CheckpointError):
    pass


class CheckpointCrcError(CheckpointError):
    pass


class CheckpointFormatError(CheckpointError):
    pass


class CheckpointShapeError(CheckpointError):
    pass


# CRC-64/XZ (reflected ECMA-182 polynomial)
_CRC_POLY = 0xC96C5795D7870F42
_CRC_TABLE = []
for _i in range(256):
    _c = _i
    for _ in range(8):
        _c = (_c >> 1) ^ _CRC_POLY if _c & 1 else _c >> 1
    _CRC_TABLE.append(_c)


def crc64(data: bytes) -> int:
    crc = 0xFFFFFFFFFFFFFFFF
    table = _CRC_TABLE
    for byte in data:
        crc = table[(crc ^ byte) & 0xFF] ^ (crc >> 8)
    return crc ^ 0xFFFFFFFFFFFFFFFF


def save_checkpoint(payload: Mapping[str, np.ndarray], path) -> None:
    """Write named float64 tensors; atomic via temp file + rename."""
    parts = [struct.pack("<II", VERSION, len(payload))]
    for name, arr in payload.items():
        arr = np.asarray(arr, dtype=np.float64)
        name_bytes = name.encode("utf-8")
        parts.append(struct.pack("<I", len(name_bytes)))
        parts.append(name_bytes)
        parts.append(struct.pack("<BI", _DTYPE_F64, arr.ndim))
        parts.append(struct.pack(f"<{arr.ndim}Q", *arr.shape))
        parts.append(arr.astype("<f8").tobytes(order="C"))
    body = b"".join(parts)
    blob = MAGIC + body + struct.pack("<Q", crc64(body))
    path = Path(path)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_bytes(blob)
    tmp.replace(path)


def load_checkpoint(path) -> Dict[str, np.ndarray]:
    """Read and validate a checkpoint; no partial loads on any failure."""
    blob = Path(path).read_bytes()
    if len(blob) < len(MAGIC) + 8 + 8:
        raise CheckpointCrcError(f"{path}: file too short to be a checkpoint")
    if blob[:4] != MAGIC:
        raise CheckpointMagicError(f"{path}: bad magic {blob[:4]!r}")
    body, stored = blob[4:-8], struct.unpack("<Q", blob[-8:])[0]
    if crc64(body) != stored:
        raise CheckpointCrcError(f"{path}: CRC mismatch (truncated or corrupt)")

    offset = 0

    def take(n: int) -> bytes:
        nonlocal offset
        if offset + n > len(body):
            raise CheckpointFormatError(f"{path}: body ended early")
        chunk = body[offset:offset + n]
        offset += n
        return chunk

    version, count = struct.unpack("<II", take(8))
    if version != VERSION:
        raise CheckpointFormatError(f"{path}: unsupported format version {version}")
    payload: Dict[str, np.ndarray] = {}
    for _ in range(count):
        (name_len,) = struct.unpack("<I", take(4))
        name = take(name_len).decode("utf-8")
        dtype_tag, rank = struct.unpack("<BI", take(5))
        if dtype_tag != _DTYPE_F64:
            raise CheckpointFormatError(f"{path}: unknown dtype tag {dtype_tag} for {name!r}")
        dims = struct.unpack(f"<{rank}Q", take(8 * rank)) if rank else ()
        n_values = int(np.prod(dims)) if dims else 1
        values = np.frombuffer(take(8 * n_values), dtype="<f8")
        payload[name] = values.reshape(dims).astype(np.float64)
    if offset != len(body):
        raise CheckpointFormatError(f"{path}: {len(body) - offset} trailing bytes in body")
    return payload


def ensure_shapes(payload: Mapping[str, np.ndarray], expected: Mapping[str, Tuple[int, ...]]) -> None:
    """Reject a payload whose names or shapes do not match an architecture."""
    missing = set(expected) - set(payload)
    extra = set(payload) - set(expected)
    if missing or extra:
        raise CheckpointShapeError(
            f"parameter names differ: missing={sorted(missing)} unexpected={sorted(extra)}")
    for name, shape in expected.items():
        have = tuple(payload[name].shape)
        if have != tuple(shape):
            raise CheckpointShapeError(f"tensor {name!r} has shape {have}, expected {tuple(shape)}")
