"""Fixed backbone stand-in, learnable per-pixel projections and the head.

Feature maps are ``(H, W, C)`` float64 arrays on the feature grid; images
are ``(H, W, 1 | 3)`` arrays with values in [0, 1].
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, InvalidArgument
from .linalg import matmul

BASE_CHANNELS = 6


@dataclass(frozen=True)
class ModelParams:
    """Learnable weights: embedding ``w_e`` (C0 x De), query ``w_f`` (C0 x Df),
    head ``w_h`` (Df + 1, bias last)."""

    w_e: np.ndarray
    w_f: np.ndarray
    w_h: np.ndarray

    def __post_init__(self):
        for name in ("w_e", "w_f", "w_h"):
            arr = np.asarray(getattr(self, name), dtype=np.float64)
            if not np.all(np.isfinite(arr)):
                raise InvalidArgument(f"{name} has non-finite entries")
            object.__setattr__(self, name, arr)
        if self.w_e.ndim != 2 or self.w_f.ndim != 2 or self.w_h.ndim != 1:
            raise DimensionMismatch("w_e/w_f must be matrices, w_h a vector")
        if self.w_e.shape[0] != self.w_f.shape[0]:
            raise DimensionMismatch("w_e and w_f must share their input channels")
        if self.w_h.shape[0] != self.w_f.shape[1] + 1:
            raise DimensionMismatch("w_h must have feature_dim + 1 entries")

    @property
    def embed_dim(self) -> int:
        return self.w_e.shape[1]

    @property
    def feature_dim(self) -> int:
        return self.w_f.shape[1]

    def as_tensors(self) -> dict[str, np.ndarray]:
        return {"W_e": self.w_e, "W_f": self.w_f, "W_h": self.w_h}

    @classmethod
    def from_tensors(cls, tensors: dict[str, np.ndarray]) -> "ModelParams":
        missing = {"W_e", "W_f", "W_h"} - set(tensors)
        if missing:
            raise InvalidArgument(f"params file lacks {sorted(missing)}")
        return cls(tensors["W_e"], tensors["W_f"], tensors["W_h"])


def init_params(rng: np.random.Generator, embed_dim: int = 16,
                feature_dim: int = 16,
                in_channels: int = BASE_CHANNELS) -> ModelParams:
    """Uniform(-1/sqrt(C0), 1/sqrt(C0)) projections and a zero head."""
    bound = 1.0 / np.sqrt(in_channels)
    w_e = rng.uniform(-bound, bound, size=(in_channels, embed_dim))
    w_f = rng.uniform(-bound, bound, size=(in_channels, feature_dim))
    return ModelParams(w_e, w_f, np.zeros(feature_dim + 1))


def _pad_to_multiple(arr: np.ndarray, stride: int, mode: str) -> np.ndarray:
    h, w = arr.shape[:2]
    ph = (-h) % stride
    pw = (-w) % stride
    if ph == 0 and pw == 0:
        return arr
    pad = [(0, ph), (0, pw)] + [(0, 0)] * (arr.ndim - 2)
    if mode == "reflect" and (h < 2 or w < 2):
        mode = "edge"
    return np.pad(arr, pad, mode=mode)


def _block_view(arr: np.ndarray, stride: int) -> np.ndarray:
    """(H, W) -> (H/s, W/s, s*s) block view."""
    h, w = arr.shape
    blocks = arr.reshape(h // stride, stride, w // stride, stride)
    return blocks.transpose(0, 2, 1, 3).reshape(h // stride, w // stride, -1)


def grid_shape(image_shape: tuple[int, ...], stride: int) -> tuple[int, int]:
    h, w = image_shape[:2]
    return -(-h // stride), -(-w // stride)


def extract_base_features(img, stride: int = 4) -> np.ndarray:
    """Parameter-free 6-channel descriptor of every stride x stride block.

    Channels: mean intensity, mean horizontal and vertical central-difference
    gradients, intensity standard deviation, and the block means of the
    opponent colors R - G and (R + G)/2 - B (zero for grayscale).
    """
    if stride < 1:
        raise InvalidArgument("stride must be >= 1")
    img = np.asarray(img, dtype=np.float64)
    if img.ndim == 2:
        img = img[:, :, None]
    if img.shape[2] not in (1, 3):
        raise DimensionMismatch("images must have 1 or 3 channels")
    img = _pad_to_multiple(img, stride, "reflect")

    intensity = img.mean(axis=2)
    edged = np.pad(intensity, 1, mode="edge")
    gx = (edged[1:-1, 2:] - edged[1:-1, :-2]) / 2.0
    gy = (edged[2:, 1:-1] - edged[:-2, 1:-1]) / 2.0

    blocks_i = _block_view(intensity, stride)
    out = np.zeros(blocks_i.shape[:2] + (BASE_CHANNELS,))
    out[..., 0] = blocks_i.mean(axis=2)
    out[..., 1] = _block_view(gx, stride).mean(axis=2)
    out[..., 2] = _block_view(gy, stride).mean(axis=2)
    out[..., 3] = blocks_i.std(axis=2)
    if img.shape[2] == 3:
        r, g, b = img[..., 0], img[..., 1], img[..., 2]
        out[..., 4] = _block_view(r - g, stride).mean(axis=2)
        out[..., 5] = _block_view((r + g) / 2.0 - b, stride).mean(axis=2)
    return out


def downsample_mask(mask, stride: int = 4) -> np.ndarray:
    """Block-majority mask on the feature grid.

    A non-empty input never vanishes: if no block reaches half coverage,
    the best-covered block(s) are kept.
    """
    m = np.asarray(mask, dtype=np.float64)
    if stride == 1:
        return (m > 0).astype(np.float64)
    cover = _block_view(_pad_to_multiple(m, stride, "constant"), stride).mean(axis=2)
    grid = (cover >= 0.5).astype(np.float64)
    if not grid.any() and cover.max() > 0:
        grid = (cover == cover.max()).astype(np.float64)
    return grid


def _pixelwise_linear(f, w) -> np.ndarray:
    f = np.asarray(f, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    if f.ndim != 3 or w.ndim != 2 or f.shape[2] != w.shape[0]:
        raise DimensionMismatch(
            f"feature map {f.shape} incompatible with projection {w.shape}"
        )
    h, wd, c = f.shape
    return matmul(f.reshape(h * wd, c), w).reshape(h, wd, w.shape[1])


def embed(f, w_e) -> np.ndarray:
    """Bias-free per-pixel projection into the embedding space."""
    return _pixelwise_linear(f, w_e)


def project_query(f, w_f) -> np.ndarray:
    """Bias-free per-pixel projection of the query features."""
    return _pixelwise_linear(f, w_f)


def interp_matrix(n_in: int, n_out: int) -> np.ndarray:
    """(n_out, n_in) align-corners linear interpolation weights."""
    if n_in < 1 or n_out < 1:
        raise InvalidArgument("sizes must be >= 1")
    mat = np.zeros((n_out, n_in))
    if n_in == 1 or n_out == 1:
        mat[:, 0] = 1.0
        return mat
    pos = np.arange(n_out) * ((n_in - 1) / (n_out - 1))
    lo = np.minimum(np.floor(pos).astype(int), n_in - 1)
    hi = np.minimum(lo + 1, n_in - 1)
    frac = pos - lo
    rows = np.arange(n_out)
    mat[rows, lo] += 1.0 - frac
    mat[rows, hi] += frac
    return mat


def bilinear_upsample(m, out_h: int, out_w: int) -> np.ndarray:
    """Align-corners bilinear resize of a 2-D map."""
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2:
        raise DimensionMismatch("expected a 2-D map")
    if m.shape == (out_h, out_w):
        return m.copy()
    uh = interp_matrix(m.shape[0], out_h)
    uw = interp_matrix(m.shape[1], out_w)
    return matmul(matmul(uh, m), uw.T)


def sigmoid(z):
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def head_logits(f, w_h) -> np.ndarray:
    f = np.asarray(f, dtype=np.float64)
    w_h = np.asarray(w_h, dtype=np.float64)
    if f.ndim != 3 or w_h.ndim != 1 or f.shape[2] != w_h.shape[0] - 1:
        raise DimensionMismatch(
            f"head of length {w_h.shape} cannot read features {f.shape}"
        )
    h, w, c = f.shape
    z = matmul(f.reshape(h * w, c), w_h[:-1, None])[:, 0] + w_h[-1]
    return z.reshape(h, w)


def predict_head(f, w_h, out_h: int, out_w: int) -> np.ndarray:
    """Per-pixel logistic on the grid, bilinearly resized to the image size."""
    return bilinear_upsample(sigmoid(head_logits(f, w_h)), out_h, out_w)
