"""FST1: a minimal named-tensor container.

Layout (all integers u32 little-endian)::

    b"FST1" | count | per entry: name_len, utf-8 name, rank, dims..., float32 LE values
"""
from __future__ import annotations

import struct

import numpy as np

from ..errors import FormatError, IoError

MAGIC = b"FST1"


def encode_tensors(tensors: dict) -> bytes:
    parts = [MAGIC, struct.pack("<I", len(tensors))]
    for name, value in tensors.items():
        arr = np.asarray(value, dtype="<f4")
        raw_name = name.encode("utf-8")
        parts.append(struct.pack("<I", len(raw_name)))
        parts.append(raw_name)
        parts.append(struct.pack("<I", arr.ndim))
        parts.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        parts.append(np.ascontiguousarray(arr).tobytes())
    return b"".join(parts)


def decode_tensors(data: bytes) -> dict[str, np.ndarray]:
    if data[:4] != MAGIC:
        raise FormatError("bad magic; not an FST1 file")
    pos = 4

    def take(n: int) -> bytes:
        nonlocal pos
        if pos + n > len(data):
            raise FormatError("truncated FST1 payload")
        chunk = data[pos:pos + n]
        pos += n
        return chunk

    (count,) = struct.unpack("<I", take(4))
    out: dict[str, np.ndarray] = {}
    for _ in range(count):
        (name_len,) = struct.unpack("<I", take(4))
        try:
            name = take(name_len).decode("utf-8")
        except UnicodeDecodeError as exc:
            raise FormatError("tensor name is not valid UTF-8") from exc
        (rank,) = struct.unpack("<I", take(4))
        dims = struct.unpack(f"<{rank}I", take(4 * rank))
        n = int(np.prod(dims, dtype=np.int64))
        values = np.frombuffer(take(4 * n), dtype="<f4").reshape(dims)
        if name in out:
            raise FormatError(f"duplicate tensor name {name!r}")
        out[name] = values.astype(np.float32)
    if pos != len(data):
        raise FormatError("trailing bytes after last FST1 entry")
    return out


def write_tensor(path, tensors: dict) -> None:
    try:
        with open(path, "wb") as fh:
            fh.write(encode_tensors(tensors))
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def read_tensor(path) -> dict[str, np.ndarray]:
    try:
        with open(path, "rb") as fh:
            data = fh.read()
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    return decode_tensors(data)
