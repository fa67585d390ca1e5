"""Foreground IoU, mIoU and FB-IoU."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import DimensionMismatch, EmptyList


def _pair(pred, gt):
    p = np.asarray(pred).astype(bool)
    g = np.asarray(gt).astype(bool)
    if p.shape != g.shape:
        raise DimensionMismatch(f"prediction {p.shape} vs ground truth {g.shape}")
    return p, g


def foreground_iou(pred, gt) -> float:
    """|pred & gt| / |pred | gt|, or 1.0 when both masks are empty."""
    p, g = _pair(pred, gt)
    union = np.count_nonzero(p | g)
    if union == 0:
        return 1.0
    return np.count_nonzero(p & g) / union


def miou(per_class) -> float:
    values = [float(v) for v in per_class]
    if not values:
        raise EmptyList("mIoU of no classes")
    return sum(values) / len(values)


def fb_iou(preds, gts) -> float:
    """Mean of dataset-aggregated foreground and background IoU."""
    preds, gts = list(preds), list(gts)
    if len(preds) != len(gts):
        raise DimensionMismatch("predictions and ground truths must pair up")
    inter = np.zeros(2, dtype=np.int64)
    union = np.zeros(2, dtype=np.int64)
    for pred, gt in zip(preds, gts):
        p, g = _pair(pred, gt)
        for c, (pc, gc) in enumerate(((p, g), (~p, ~g))):
            inter[c] += np.count_nonzero(pc & gc)
            union[c] += np.count_nonzero(pc | gc)
    ious = [1.0 if union[c] == 0 else inter[c] / union[c] for c in range(2)]
    return float(sum(ious) / 2.0)


@dataclass
class MetricsReport:
    per_class_iou: dict[str, float]
    miou: float
    fb_iou: float
    pairs_evaluated: int
    meta: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    def table(self) -> str:
        width = max([len("class")] + [len(c) for c in self.per_class_iou])
        lines = [f"{'class':<{width}}  {'IoU':>7}"]
        lines.append("-" * (width + 9))
        for name, v in self.per_class_iou.items():
            lines.append(f"{name:<{width}}  {v:7.4f}")
        lines.append("-" * (width + 9))
        lines.append(f"{'mIoU':<{width}}  {self.miou:7.4f}")
        lines.append(f"{'FB-IoU':<{width}}  {self.fb_iou:7.4f}")
        lines.append(f"pairs={self.pairs_evaluated}  " + "  ".join(
            f"{k}={v}" for k, v in sorted(self.meta.items())))
        return "\n".join(lines)
