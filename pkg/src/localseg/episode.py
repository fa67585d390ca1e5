"""The few-shot task record passed between sampling, transform and losses."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, EmptyMask, InvalidArgument


def check_binary(mask, what: str = "mask") -> np.ndarray:
    m = np.asarray(mask)
    if m.ndim != 2:
        raise DimensionMismatch(f"{what} must be 2-D, got shape {m.shape}")
    if not np.all((m == 0) | (m == 1)):
        raise InvalidArgument(f"{what} is not strictly binary")
    return m.astype(np.float64)


@dataclass(frozen=True)
class Episode:
    """k support (image, mask) pairs plus one query image of the same class.

    ``query_mask`` is only used for losses and metrics, never by the
    transformation itself.
    """

    support: tuple[tuple[np.ndarray, np.ndarray], ...]
    query: np.ndarray
    query_mask: np.ndarray | None = None
    class_id: str = ""
    support_ids: tuple[int, ...] = field(default=(), compare=False)
    query_id: int = field(default=-1, compare=False)

    def __post_init__(self):
        support = tuple((np.asarray(i, dtype=np.float64), check_binary(m, "support mask"))
                        for i, m in self.support)
        if not support:
            raise InvalidArgument("an episode needs at least one support pair")
        for img, mask in support:
            if img.shape[:2] != mask.shape:
                raise DimensionMismatch("support image and mask sizes differ")
            if not mask.any():
                raise EmptyMask("support mask has no foreground")
        object.__setattr__(self, "support", support)
        query = np.asarray(self.query, dtype=np.float64)
        object.__setattr__(self, "query", query)
        if self.query_mask is not None:
            qm = check_binary(self.query_mask, "query mask")
            if qm.shape != query.shape[:2]:
                raise DimensionMismatch("query image and mask sizes differ")
            object.__setattr__(self, "query_mask", qm)

    @property
    def k(self) -> int:
        return len(self.support)
