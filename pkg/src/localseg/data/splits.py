"""PASCAL-5^i class folds and the equivalent hold-out split for other datasets."""
from __future__ import annotations

from ..errors import InvalidSplit

PASCAL5I = (
    ("aeroplane", "bicycle", "bird", "boat", "bottle"),
    ("bus", "car", "cat", "chair", "cow"),
    ("diningtable", "dog", "horse", "motorbike", "person"),
    ("potted plant", "sheep", "sofa", "train", "tv/monitor"),
)


def pascal5i_split(i: int) -> tuple[list[str], list[str]]:
    """(train classes, test classes) for fold ``i`` in 0..3."""
    if i not in range(len(PASCAL5I)):
        raise InvalidSplit(f"PASCAL-5^i fold must be 0..3, got {i}")
    test = list(PASCAL5I[i])
    train = [c for j, fold in enumerate(PASCAL5I) if j != i for c in fold]
    return train, test


def holdout_split(classes, i: int, folds: int | None = None) -> tuple[list[str], list[str]]:
    """Partition ``classes`` into ``folds`` contiguous folds and hold out fold ``i``.

    With the default ``folds=len(classes)`` exactly one class is held out.
    """
    classes = list(classes)
    folds = len(classes) if folds is None else folds
    if folds < 2 or folds > len(classes):
        raise InvalidSplit(f"cannot make {folds} folds from {len(classes)} classes")
    if i not in range(folds):
        raise InvalidSplit(f"split index must be 0..{folds - 1}, got {i}")
    bounds = [round(j * len(classes) / folds) for j in range(folds + 1)]
    test = classes[bounds[i]:bounds[i + 1]]
    train = [c for c in classes if c not in test]
    return train, test
