"""Dense kernels behind the transformation module.

Matrices are 2-D float64 numpy arrays, vectors 1-D. ``matmul`` reduces
each output cell strictly left to right over the inner index, so results
never depend on BLAS threading.
"""
from __future__ import annotations

import numpy as np

from .errors import DimensionMismatch, EmptyMask

EPS_NORM = 1e-12
EPS_FLAT = 1e-12


def _as_matrix(x) -> np.ndarray:
    a = np.asarray(x, dtype=np.float64)
    if a.ndim != 2:
        raise DimensionMismatch(f"expected a 2-D matrix, got shape {a.shape}")
    return a


def matmul(a, b) -> np.ndarray:
    """Matrix product with a fixed per-cell summation order."""
    a = _as_matrix(a)
    b = _as_matrix(b)
    if a.shape[1] != b.shape[0]:
        raise DimensionMismatch(f"cannot multiply {a.shape} by {b.shape}")
    out = np.zeros((a.shape[0], b.shape[1]))
    for k in range(a.shape[1]):
        out += a[:, k : k + 1] * b[k : k + 1, :]
    return out


def cosine_similarity(u, v) -> float:
    """Cosine of the angle between ``u`` and ``v``; 0 if either is (near) zero."""
    u = np.asarray(u, dtype=np.float64).ravel()
    v = np.asarray(v, dtype=np.float64).ravel()
    if u.shape != v.shape:
        raise DimensionMismatch(f"vector lengths differ: {u.size} vs {v.size}")
    nu = np.sqrt(np.sum(u * u))
    nv = np.sqrt(np.sum(v * v))
    if nu < EPS_NORM or nv < EPS_NORM:
        return 0.0
    return float(np.sum(u * v) / (nu * nv))


def unit_rows(x) -> tuple[np.ndarray, np.ndarray]:
    """Row-normalize ``x``; rows with norm below EPS_NORM become zero.

    Returns ``(unit, norms)`` so callers can backpropagate through the
    normalization.
    """
    x = _as_matrix(x)
    norms = np.sqrt(np.sum(x * x, axis=1))
    live = norms >= EPS_NORM
    unit = np.zeros_like(x)
    unit[live] = x[live] / norms[live, None]
    return unit, norms


def cosine_matrix(a, b) -> np.ndarray:
    """All-pairs cosine similarity between the rows of ``a`` and of ``b``."""
    a = _as_matrix(a)
    b = _as_matrix(b)
    if a.shape[1] != b.shape[1]:
        raise DimensionMismatch(
            f"embedding dims differ: {a.shape[1]} vs {b.shape[1]}"
        )
    ua, _ = unit_rows(a)
    ub, _ = unit_rows(b)
    return matmul(ua, ub.T)


def right_inverse_row(g) -> np.ndarray:
    """Right inverse ``g^T (g g^T)^-1`` of a single row vector, as an n x 1 matrix."""
    row = np.asarray(g, dtype=np.float64).reshape(1, -1)
    gram = matmul(row, row.T)[0, 0]
    if gram == 0.0:
        raise EmptyMask("row vector is all zeros; right inverse undefined")
    return row.T / gram


def minmax_normalize(m) -> np.ndarray:
    """Rescale to [0, 1]; a flat input (range < EPS_FLAT) maps to all ones."""
    m = np.asarray(m, dtype=np.float64)
    lo = m.min()
    hi = m.max()
    if hi - lo < EPS_FLAT:
        return np.ones_like(m)
    return (m - lo) / (hi - lo)
