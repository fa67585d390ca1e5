"""Relationship-matrix transformation from support masks to query attention.

Locations are flattened row-major (``i = y * W + x``). Relationship
matrices have one row per query location and one column per support
location, so ``R @ pinv(g_s)`` is query-shaped.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import features as feat
from .episode import Episode, check_binary
from .errors import DimensionMismatch, EmptyList, EmptyMask
from .linalg import (
    EPS_FLAT,
    cosine_matrix,
    matmul,
    minmax_normalize,
    right_inverse_row,
    unit_rows,
)


def mask_features(f, g) -> np.ndarray:
    """Zero every channel of ``f`` where the mask is background."""
    f = np.asarray(f, dtype=np.float64)
    g = check_binary(g)
    if f.shape[:2] != g.shape:
        raise DimensionMismatch(f"features {f.shape[:2]} vs mask {g.shape}")
    return f * g[:, :, None]


def _flat(x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    return x.reshape(x.shape[0] * x.shape[1], -1)


def relationship_matrix(e_q, e_s) -> np.ndarray:
    """Cosine similarity of every (query location, support location) pair."""
    e_q = np.asarray(e_q, dtype=np.float64)
    e_s = np.asarray(e_s, dtype=np.float64)
    if e_q.ndim != 3 or e_s.ndim != 3:
        raise DimensionMismatch("embeddings must be (H, W, D)")
    if e_q.shape[2] != e_s.shape[2]:
        raise DimensionMismatch(
            f"embedding dims differ: {e_q.shape[2]} vs {e_s.shape[2]}"
        )
    return cosine_matrix(_flat(e_q), _flat(e_s))


def truth_relationship(g_q, g_s) -> np.ndarray:
    """Ideal relationship: 1 exactly for foreground/foreground pairs."""
    col = check_binary(g_q, "query mask").reshape(-1, 1)
    row = check_binary(g_s, "support mask").reshape(1, -1)
    return matmul(col, row)


def raw_attention(r, g_s) -> np.ndarray:
    """``R @ g_s^+`` as a flat query vector, before normalization."""
    r = np.asarray(r, dtype=np.float64)
    g = check_binary(g_s, "support mask").ravel()
    if r.ndim != 2 or r.shape[1] != g.size:
        raise DimensionMismatch(
            f"relationship matrix {r.shape} vs support mask of {g.size} cells"
        )
    if not g.any():
        raise EmptyMask("support mask has no foreground")
    return matmul(r, right_inverse_row(g))[:, 0]


def attention_from_relationship(r, g_s, query_shape=None):
    """Return ``(normalized, raw)`` attention maps.

    Both are shaped ``query_shape`` when given, otherwise flat.
    """
    raw = raw_attention(r, g_s)
    if query_shape is not None:
        if int(np.prod(query_shape)) != raw.size:
            raise DimensionMismatch(f"{raw.size} rows cannot form {query_shape}")
        raw = raw.reshape(query_shape)
    return minmax_normalize(raw), raw


def filter_query_features(f_q, a) -> np.ndarray:
    f_q = np.asarray(f_q, dtype=np.float64)
    a = np.asarray(a, dtype=np.float64)
    if f_q.shape[:2] != a.shape:
        raise DimensionMismatch(f"features {f_q.shape[:2]} vs attention {a.shape}")
    return f_q * a[:, :, None]


def average_attention(maps) -> np.ndarray:
    """Elementwise mean of k attention maps.

    Values are sorted per location before a running-mean reduction, which
    makes the result independent of list order and exact for identical
    inputs.
    """
    maps = [np.asarray(m, dtype=np.float64) for m in maps]
    if not maps:
        raise EmptyList("no attention maps to average")
    shape = maps[0].shape
    if any(m.shape != shape for m in maps):
        raise DimensionMismatch("attention maps differ in shape")
    stacked = np.sort(np.stack(maps), axis=0)
    mean = stacked[0].copy()
    for t in range(1, len(maps)):
        mean += (stacked[t] - mean) / (t + 1)
    return mean


@dataclass
class ShotTrace:
    f_s: np.ndarray        # masked support features, (n_s, C0)
    g_s: np.ndarray        # support grid mask, (n_s,)
    u_s: np.ndarray        # unit support embeddings
    norm_s: np.ndarray
    r: np.ndarray          # (n_q, n_s)
    a_raw: np.ndarray      # (n_q,)
    a_hat: np.ndarray      # (n_q,)
    lo_idx: int
    hi_idx: int
    flat: bool


@dataclass
class EpisodeTrace:
    """Every intermediate of one forward pass, kept for backpropagation."""

    stride: int
    image_shape: tuple[int, int]
    grid_shape: tuple[int, int]
    f_q: np.ndarray        # (n_q, C0)
    u_q: np.ndarray
    norm_q: np.ndarray
    shots: list[ShotTrace]
    attention: np.ndarray  # averaged normalized attention, (n_q,)
    fhat_q: np.ndarray     # (n_q, Df)
    filtered: np.ndarray   # (n_q, Df)
    prob_grid: np.ndarray  # (Hq, Wq)
    prob: np.ndarray       # (H, W)

    @property
    def attention_map(self) -> np.ndarray:
        return self.attention.reshape(self.grid_shape)

    @property
    def raw_maps(self) -> np.ndarray:
        return np.stack([s.a_raw.reshape(self.grid_shape) for s in self.shots])


def run_episode(episode: Episode, params: feat.ModelParams,
                stride: int = 4) -> EpisodeTrace:
    """Forward pass of the full pipeline, keeping intermediates."""
    fq_map = feat.extract_base_features(episode.query, stride)
    grid = fq_map.shape[:2]
    f_q = _flat(fq_map)
    e_q = matmul(f_q, params.w_e)
    u_q, norm_q = unit_rows(e_q)

    shots = []
    for img, mask in episode.support:
        fs_map = feat.extract_base_features(img, stride)
        g_grid = feat.downsample_mask(mask, stride)
        if not g_grid.any():
            raise EmptyMask("support mask has no foreground")
        f_s = _flat(mask_features(fs_map, g_grid))
        e_s = matmul(f_s, params.w_e)
        u_s, norm_s = unit_rows(e_s)
        if e_q.shape[1] != e_s.shape[1]:
            raise DimensionMismatch("embedding dims differ")
        r = matmul(u_q, u_s.T)
        g = g_grid.ravel()
        a_raw = raw_attention(r, g_grid)
        lo, hi = int(np.argmin(a_raw)), int(np.argmax(a_raw))
        flat = bool(a_raw[hi] - a_raw[lo] < EPS_FLAT)
        shots.append(ShotTrace(f_s, g, u_s, norm_s, r, a_raw,
                               minmax_normalize(a_raw), lo, hi, flat))

    attention = average_attention([s.a_hat for s in shots])
    fhat_q = matmul(f_q, params.w_f)
    filtered = fhat_q * attention[:, None]
    prob_grid = feat.sigmoid(
        feat.head_logits(filtered.reshape(grid + (-1,)), params.w_h)
    )
    h, w = episode.query.shape[:2]
    prob = feat.bilinear_upsample(prob_grid, h, w)
    return EpisodeTrace(stride, (h, w), grid, f_q, u_q, norm_q, shots,
                        attention, fhat_q, filtered, prob_grid, prob)


def transform_episode(episode: Episode, params: feat.ModelParams,
                      stride: int = 4) -> tuple[np.ndarray, np.ndarray]:
    """Return (attention map on the feature grid, foreground probability map)."""
    trace = run_episode(episode, params, stride)
    return trace.attention_map, trace.prob
