"""Training objective and its analytic gradient.

All pixel losses are sums, not means. Probabilities are clamped to
``[EPS_P, 1 - EPS_P]`` before taking logs; the clamp passes no gradient
outside that interval. Min-max normalization is differentiated with its
argmin/argmax locations held fixed.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import features as feat
from .episode import Episode, check_binary
from .errors import DimensionMismatch, InvalidArgument
from .linalg import matmul
from .transform import EpisodeTrace, run_episode

EPS_P = 1e-7


@dataclass(frozen=True)
class LossWeights:
    m: float = 1.0
    a: float = 1.0
    r: float = 1.0

    def __post_init__(self):
        for name in ("m", "a", "r"):
            v = float(getattr(self, name))
            if not np.isfinite(v) or v < 0:
                raise InvalidArgument(f"loss weight {name} must be finite and >= 0")
            object.__setattr__(self, name, v)


@dataclass(frozen=True)
class GradientSet:
    w_e: np.ndarray
    w_f: np.ndarray
    w_h: np.ndarray

    def as_tuple(self):
        return self.w_e, self.w_f, self.w_h


@dataclass(frozen=True)
class LossBreakdown:
    m: float
    a: float
    r: float
    total: float


def _bce_sum(p, y) -> float:
    pc = np.clip(p, EPS_P, 1.0 - EPS_P)
    return float(np.sum(-(y * np.log(pc) + (1.0 - y) * np.log(1.0 - pc))))


def _bce_grad(p, y) -> np.ndarray:
    pc = np.clip(p, EPS_P, 1.0 - EPS_P)
    inside = (p >= EPS_P) & (p <= 1.0 - EPS_P)
    return np.where(inside, -y / pc + (1.0 - y) / (1.0 - pc), 0.0)


def loss_m(m, y) -> float:
    """Pixel-summed binary cross-entropy of the predicted probability map."""
    m = np.asarray(m, dtype=np.float64)
    y = check_binary(y, "ground truth")
    if m.shape != y.shape:
        raise DimensionMismatch(f"prediction {m.shape} vs ground truth {y.shape}")
    return _bce_sum(m, y)


def loss_a(a, y) -> float:
    """Cross-entropy of the attention map read as a foreground probability.

    The map is bilinearly resized to the ground-truth resolution first.
    """
    a = np.asarray(a, dtype=np.float64)
    y = check_binary(y, "ground truth")
    m_a = feat.bilinear_upsample(a, *y.shape)
    return _bce_sum(m_a, y)


def loss_r(r, r_truth) -> float:
    """Squared Frobenius distance to the ideal relationship matrix."""
    r = np.asarray(r, dtype=np.float64)
    r_truth = np.asarray(r_truth, dtype=np.float64)
    if r.shape != r_truth.shape:
        raise DimensionMismatch(f"{r.shape} vs {r_truth.shape}")
    d = r - r_truth
    return float(np.sum(d * d))


def total_loss(lm: float, la: float, lr: float, w: LossWeights) -> float:
    return w.m * lm + w.a * la + w.r * lr


def _cut_grid(y: np.ndarray, trace: EpisodeTrace) -> np.ndarray:
    return feat.downsample_mask(y, trace.stride).ravel()


def losses_from_trace(trace: EpisodeTrace, y: np.ndarray,
                      w: LossWeights) -> LossBreakdown:
    g_q = _cut_grid(y, trace)
    lm = _bce_sum(trace.prob, y)
    h, wd = trace.image_shape
    la = _bce_sum(feat.bilinear_upsample(trace.attention_map, h, wd), y)
    lr = 0.0
    for shot in trace.shots:
        d = shot.r - np.outer(g_q, shot.g_s)
        lr += float(np.sum(d * d))
    lr /= len(trace.shots)
    return LossBreakdown(lm, la, lr, total_loss(lm, la, lr, w))


def _require_query_mask(episode: Episode) -> np.ndarray:
    if episode.query_mask is None:
        raise InvalidArgument("losses need the query ground-truth mask")
    return episode.query_mask


def episode_losses(episode: Episode, params: feat.ModelParams,
                   w: LossWeights, stride: int = 4) -> LossBreakdown:
    y = _require_query_mask(episode)
    return losses_from_trace(run_episode(episode, params, stride), y, w)


def _unit_rows_backward(d_unit, unit, norms):
    live = norms >= 1e-12
    out = np.zeros_like(d_unit)
    proj = np.sum(unit * d_unit, axis=1, keepdims=True)
    out[live] = (d_unit[live] - unit[live] * proj[live]) / norms[live, None]
    return out


def backward(trace: EpisodeTrace, y: np.ndarray, params: feat.ModelParams,
             w: LossWeights) -> GradientSet:
    """Gradient of the weighted loss w.r.t. every parameter tensor."""
    h, wd = trace.image_shape
    hq, wq = trace.grid_shape
    uh = feat.interp_matrix(hq, h)
    uw = feat.interp_matrix(wq, wd)
    k = len(trace.shots)
    head_w = params.w_h[:-1]

    # prediction branch
    d_prob = w.m * _bce_grad(trace.prob, y)
    d_pgrid = matmul(matmul(uh.T, d_prob), uw).ravel()
    p = trace.prob_grid.ravel()
    dz = d_pgrid * p * (1.0 - p)
    g_head = np.empty_like(params.w_h)
    g_head[:-1] = matmul(trace.filtered.T, dz[:, None])[:, 0]
    g_head[-1] = np.sum(dz)
    d_filtered = dz[:, None] * head_w[None, :]
    g_wf = matmul(trace.f_q.T, d_filtered * trace.attention[:, None])
    d_att = dz * matmul(trace.fhat_q, head_w[:, None])[:, 0]

    # attention branch
    m_a = feat.bilinear_upsample(trace.attention_map, h, wd)
    d_att = d_att + w.a * matmul(matmul(uh.T, _bce_grad(m_a, y)), uw).ravel()

    g_q = _cut_grid(y, trace)
    d_uq = np.zeros_like(trace.u_q)
    g_we = np.zeros_like(params.w_e)
    for shot in trace.shots:
        d_hat = d_att / k
        if shot.flat:
            d_raw = np.zeros_like(d_hat)
        else:
            span = shot.a_raw[shot.hi_idx] - shot.a_raw[shot.lo_idx]
            d_raw = d_hat / span
            d_raw[shot.lo_idx] -= np.sum(d_hat * (1.0 - shot.a_hat)) / span
            d_raw[shot.hi_idx] -= np.sum(d_hat * shot.a_hat) / span
        d_r = np.outer(d_raw, shot.g_s) / np.sum(shot.g_s)
        d_r += (w.r * 2.0 / k) * (shot.r - np.outer(g_q, shot.g_s))
        d_uq += matmul(d_r, shot.u_s)
        d_us = matmul(d_r.T, trace.u_q)
        d_es = _unit_rows_backward(d_us, shot.u_s, shot.norm_s)
        g_we += matmul(shot.f_s.T, d_es)
    d_eq = _unit_rows_backward(d_uq, trace.u_q, trace.norm_q)
    g_we += matmul(trace.f_q.T, d_eq)
    return GradientSet(g_we, g_wf, g_head)


def forward_backward(episode: Episode, params: feat.ModelParams,
                     w: LossWeights, stride: int = 4):
    """Return ``(LossBreakdown, GradientSet)`` for one episode."""
    y = _require_query_mask(episode)
    trace = run_episode(episode, params, stride)
    return losses_from_trace(trace, y, w), backward(trace, y, params, w)


def grad_total_loss(episode: Episode, params: feat.ModelParams,
                    w: LossWeights, stride: int = 4):
    """Weighted total loss and its analytic gradient."""
    losses, grads = forward_backward(episode, params, w, stride)
    return losses.total, grads


def max_relative_error(loss_fn, analytic, x, eps: float) -> float:
    """Compare an analytic gradient with central differences of ``loss_fn``.

    ``x`` and ``analytic`` are flat arrays. Returns
    max |g - n| / max(|g|, |n|, 1e-8) over all coordinates.
    """
    if not eps > 0:
        raise InvalidArgument("eps must be positive")
    x = np.array(x, dtype=np.float64)
    analytic = np.asarray(analytic, dtype=np.float64).ravel()
    worst = 0.0
    for i in range(x.size):
        orig = x[i]
        x[i] = orig + eps
        up = loss_fn(x)
        x[i] = orig - eps
        down = loss_fn(x)
        x[i] = orig
        num = (up - down) / (2.0 * eps)
        denom = max(abs(analytic[i]), abs(num), 1e-8)
        worst = max(worst, abs(analytic[i] - num) / denom)
    return worst


def _pack(params: feat.ModelParams) -> np.ndarray:
    return np.concatenate([params.w_e.ravel(), params.w_f.ravel(), params.w_h])


def _unpack(x: np.ndarray, like: feat.ModelParams) -> feat.ModelParams:
    ne, nf = like.w_e.size, like.w_f.size
    return feat.ModelParams(x[:ne].reshape(like.w_e.shape),
                            x[ne:ne + nf].reshape(like.w_f.shape),
                            x[ne + nf:].copy())


def finite_diff_check(episode: Episode, params: feat.ModelParams,
                      w: LossWeights, eps: float = 1e-5,
                      stride: int = 4) -> float:
    if not eps > 0:
        raise InvalidArgument("eps must be positive")
    _, grads = grad_total_loss(episode, params, w, stride)
    analytic = np.concatenate([g.ravel() for g in grads.as_tuple()])

    def loss_at(x):
        return episode_losses(episode, _unpack(x, params), w, stride).total

    return max_relative_error(loss_at, analytic, _pack(params), eps)
