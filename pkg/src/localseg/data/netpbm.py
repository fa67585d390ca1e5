"""Binary PGM (P5) / PPM (P6) reading and writing, 8-bit only."""
from __future__ import annotations

import os

import numpy as np

from ..errors import FormatError, IoError, NonBinaryMask


def _read_bytes(path) -> bytes:
    try:
        with open(path, "rb") as fh:
            return fh.read()
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc


def _write_bytes(path, payload: bytes) -> None:
    try:
        with open(path, "wb") as fh:
            fh.write(payload)
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def _tokens(data: bytes, count: int) -> tuple[list[bytes], int]:
    """Read ``count`` whitespace-separated header tokens, skipping comments."""
    toks = []
    pos = 0
    n = len(data)
    while len(toks) < count:
        while pos < n and data[pos:pos + 1].isspace():
            pos += 1
        if pos < n and data[pos:pos + 1] == b"#":
            while pos < n and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < n and not data[pos:pos + 1].isspace() and data[pos:pos + 1] != b"#":
            pos += 1
        if start == pos:
            raise FormatError("truncated netpbm header")
        toks.append(data[start:pos])
    if pos >= n or not data[pos:pos + 1].isspace():
        raise FormatError("netpbm header must end in a single whitespace byte")
    return toks, pos + 1


def decode(data: bytes) -> np.ndarray:
    """Decode P5/P6 bytes into a uint8 array of shape (H, W) or (H, W, 3)."""
    if data[:2] not in (b"P5", b"P6"):
        raise FormatError("only binary PGM (P5) and PPM (P6) are supported")
    toks, offset = _tokens(data, 4)
    if toks[0] not in (b"P5", b"P6"):
        raise FormatError(f"bad netpbm magic {toks[0]!r}")
    try:
        width, height, maxval = (int(t) for t in toks[1:])
    except ValueError as exc:
        raise FormatError("non-numeric netpbm header field") from exc
    if width < 1 or height < 1:
        raise FormatError("image dimensions must be positive")
    if not 1 <= maxval <= 255:
        raise FormatError(f"unsupported maxval {maxval}; only 8-bit samples")
    channels = 1 if toks[0] == b"P5" else 3
    size = width * height * channels
    body = data[offset:offset + size]
    if len(body) != size:
        raise FormatError("truncated netpbm payload")
    arr = np.frombuffer(body, dtype=np.uint8).reshape(height, width, channels)
    if np.any(arr > maxval):
        raise FormatError("sample exceeds maxval")
    if maxval != 255:
        arr = np.round(arr.astype(np.float64) * (255.0 / maxval)).astype(np.uint8)
    return arr[:, :, 0] if channels == 1 else arr


def encode(arr) -> bytes:
    arr = np.asarray(arr, dtype=np.uint8)
    if arr.ndim == 3 and arr.shape[2] == 1:
        arr = arr[:, :, 0]
    if arr.ndim == 2:
        magic = b"P5"
    elif arr.ndim == 3 and arr.shape[2] == 3:
        magic = b"P6"
    else:
        raise FormatError(f"cannot encode array of shape {arr.shape}")
    h, w = arr.shape[:2]
    return magic + f"\n{w} {h}\n255\n".encode("ascii") + arr.tobytes()


def _to_bytes(values) -> np.ndarray:
    v = np.asarray(values, dtype=np.float64)
    return np.clip(np.round(v * 255.0), 0, 255).astype(np.uint8)


def load_image(path) -> np.ndarray:
    """Float image in [0, 1] with shape (H, W, 1) or (H, W, 3)."""
    raw = decode(_read_bytes(path))
    if raw.ndim == 2:
        raw = raw[:, :, None]
    return raw.astype(np.float64) / 255.0


def save_image(path, img) -> None:
    _write_bytes(path, encode(_to_bytes(img)))


def save_map(path, values) -> None:
    """Write a [0, 1] real map as 8-bit grayscale."""
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 2:
        raise FormatError("maps must be 2-D")
    _write_bytes(path, encode(_to_bytes(values)))


def load_mask(path, strict: bool = False) -> np.ndarray:
    """Binary uint8 mask; pixels >= 128 are foreground.

    In strict mode any pixel other than 0 or 255 raises NonBinaryMask.
    """
    raw = decode(_read_bytes(path))
    if raw.ndim == 3:
        raw = raw.max(axis=2)
    if strict and np.any((raw != 0) & (raw != 255)):
        raise NonBinaryMask(f"{os.fspath(path)} has values outside {{0, 255}}")
    return (raw >= 128).astype(np.uint8)


def save_mask(path, mask) -> None:
    m = np.asarray(mask)
    _write_bytes(path, encode(np.where(m > 0, 255, 0).astype(np.uint8)))
