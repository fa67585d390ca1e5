"""Episodic sampling, Adam training and the paired-episode evaluation protocol."""
from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import features as feat
from .data.dataset import Dataset
from .data.fst import read_tensor, write_tensor
from .episode import Episode
from .errors import ClassLeakage, InsufficientImages, InvalidArgument, InvalidConfig, IoError
from .losses import LossBreakdown, LossWeights, forward_backward
from .metrics import MetricsReport, fb_iou, foreground_iou, miou
from .transform import transform_episode


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    episodes: int = 2000
    seed: int = 1
    shots: int = 1
    loss_weights: LossWeights = LossWeights()
    embed_dim: int = 16
    feature_dim: int = 16
    stride: int = 4

    def __post_init__(self):
        if isinstance(self.loss_weights, dict):
            object.__setattr__(self, "loss_weights", LossWeights(**self.loss_weights))
        if not self.learning_rate >= 0:
            raise InvalidConfig("learning_rate must be >= 0")
        if self.episodes < 1:
            raise InvalidConfig("episodes must be >= 1")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1) or self.adam_eps <= 0:
            raise InvalidConfig("invalid Adam hyperparameters")
        if min(self.shots, self.embed_dim, self.feature_dim, self.stride) < 1:
            raise InvalidConfig("shots, dims and stride must be >= 1")

    @classmethod
    def from_json(cls, path) -> "TrainConfig":
        try:
            raw = json.loads(Path(path).read_text())
        except OSError as exc:
            raise IoError(f"cannot read config {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise InvalidConfig(f"config {path} is not valid JSON: {exc}") from exc
        unknown = set(raw) - set(cls.__dataclass_fields__)
        if unknown:
            raise InvalidConfig(f"unknown config keys {sorted(unknown)}")
        return cls(**raw)

    def to_dict(self) -> dict:
        return asdict(self)


def sample_training_episode(dataset: Dataset, k: int,
                            rng: np.random.Generator) -> Episode:
    """Uniform class, then k supports and one distinct query without replacement."""
    if k < 1:
        raise InvalidArgument("k must be >= 1")
    eligible = []
    for rec in dataset.classes:
        usable = [i for i, (_, m) in enumerate(rec.pairs) if np.any(m)]
        if len(usable) >= k + 1:
            eligible.append((rec, usable))
    if not eligible:
        raise InsufficientImages(f"no class has the {k + 1} images a {k}-shot episode needs")
    rec, usable = eligible[int(rng.integers(len(eligible)))]
    picks = rng.choice(len(usable), size=k + 1, replace=False)
    idx = [usable[int(p)] for p in picks]
    support = tuple(rec.pairs[i] for i in idx[:k])
    q_img, q_mask = rec.pairs[idx[k]]
    return Episode(support, q_img, q_mask, rec.name,
                   support_ids=tuple(idx[:k]), query_id=idx[k])


class Adam:
    """Bias-corrected Adam over a list of arrays."""

    def __init__(self, shapes, lr, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = [np.zeros(s) for s in shapes]
        self.v = [np.zeros(s) for s in shapes]
        self.t = 0

    def step(self, params, grads):
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        out = []
        for i, (p, g) in enumerate(zip(params, grads)):
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g
            m_hat = self.m[i] / c1
            v_hat = self.v[i] / c2
            out.append(p - self.lr * m_hat / (np.sqrt(v_hat) + self.eps))
        return out


@dataclass
class TrainResult:
    params: feat.ModelParams
    initial: feat.ModelParams
    trace: list[LossBreakdown] = field(default_factory=list)

    def write_trace_csv(self, path) -> None:
        try:
            with open(path, "w", newline="") as fh:
                writer = csv.writer(fh)
                writer.writerow(["episode", "L_m", "L_a", "L_r", "L"])
                for i, b in enumerate(self.trace):
                    writer.writerow([i, repr(b.m), repr(b.a), repr(b.r), repr(b.total)])
        except OSError as exc:
            raise IoError(f"cannot write loss trace {path}: {exc}") from exc


def train(dataset: Dataset, cfg: TrainConfig, progress=None) -> TrainResult:
    """Run ``cfg.episodes`` Adam steps on sampled training episodes."""
    if len(dataset) == 0:
        raise InvalidArgument("training dataset is empty")
    init_rng, episode_rng = np.random.default_rng(cfg.seed).spawn(2)
    params = feat.init_params(init_rng, cfg.embed_dim, cfg.feature_dim)
    initial = params
    adam = Adam([a.shape for a in (params.w_e, params.w_f, params.w_h)],
                cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.adam_eps)
    trace = []
    for step in range(cfg.episodes):
        episode = sample_training_episode(dataset, cfg.shots, episode_rng)
        losses, grads = forward_backward(episode, params, cfg.loss_weights, cfg.stride)
        trace.append(losses)
        params = feat.ModelParams(*adam.step(
            [params.w_e, params.w_f, params.w_h], grads.as_tuple()))
        if progress is not None:
            progress(step, losses)
    return TrainResult(params, initial, trace)


def binarize(prob, threshold: float = 0.5) -> np.ndarray:
    return (np.asarray(prob) > threshold).astype(np.uint8)


def evaluate(dataset: Dataset, params: feat.ModelParams, k: int = 1,
             pairs: int = 1000, seed: int = 0, threshold: float = 0.5,
             stride: int = 4, exclude_classes=()) -> MetricsReport:
    """Score ``pairs`` seeded test episodes.

    ``exclude_classes`` names the training classes; any overlap with the
    evaluated classes raises ClassLeakage.
    """
    if pairs < 1:
        raise InvalidArgument("pairs must be >= 1")
    leaked = set(dataset.names) & set(exclude_classes)
    if leaked:
        raise ClassLeakage(f"evaluation classes seen in training: {sorted(leaked)}")
    rng = np.random.default_rng(seed)
    by_class: dict[str, list[float]] = {}
    preds, gts = [], []
    for _ in range(pairs):
        episode = sample_training_episode(dataset, k, rng)
        _, prob = transform_episode(
            Episode(episode.support, episode.query, None, episode.class_id),
            params, stride)
        pred = binarize(prob, threshold)
        gt = episode.query_mask
        by_class.setdefault(episode.class_id, []).append(foreground_iou(pred, gt))
        preds.append(pred)
        gts.append(gt)
    per_class = {name: sum(v) / len(v) for name, v in by_class.items()
                 if name in by_class}
    per_class = {n: per_class[n] for n in dataset.names if n in per_class}
    meta = {"k": k, "seed": seed, "threshold": threshold, "stride": stride,
            "attention_path": "A_5-shot" if k == 5 else ("A" if k == 1 else f"A_{k}-shot")}
    return MetricsReport(per_class, miou(per_class.values()), fb_iou(preds, gts),
                         pairs, meta)


def random_episode(rng: np.random.Generator, size: int = 8, k: int = 1,
                   channels: int = 3, density: float = 0.4) -> Episode:
    """Uniform-noise images with random non-empty masks, for gradient checks."""

    def mask():
        m = (rng.random((size, size)) < density).astype(np.uint8)
        m[rng.integers(size), rng.integers(size)] = 1
        return m

    support = tuple((rng.random((size, size, channels)), mask()) for _ in range(k))
    return Episode(support, rng.random((size, size, channels)), mask(), "random")


def random_params(rng: np.random.Generator, embed_dim: int = 4,
                  feature_dim: int = 4) -> feat.ModelParams:
    """Initialization plus a random (non-zero) head so every path carries gradient."""
    p = feat.init_params(rng, embed_dim, feature_dim)
    return feat.ModelParams(p.w_e, p.w_f, rng.normal(0.0, 0.5, feature_dim + 1))


def save_params(path, params: feat.ModelParams, stride: int) -> None:
    tensors = params.as_tensors()
    tensors["stride"] = np.array([stride], dtype=np.float32)
    write_tensor(path, tensors)


def load_params(path) -> tuple[feat.ModelParams, int | None]:
    tensors = read_tensor(path)
    stride = int(tensors["stride"][0]) if "stride" in tensors else None
    return feat.ModelParams.from_tensors(tensors), stride
