"""In-memory datasets and the on-disk directory layout.

On disk: ``<root>/<class>/<index>.ppm`` (or ``.pgm``) with
``<index>_mask.pgm`` beside it, plus an optional ``classes.txt`` fixing
class order (otherwise classes sort by name).
"""
from __future__ import annotations

import os
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import DimensionMismatch, FormatError, InvalidArgument, IoError
from . import netpbm


@dataclass
class ClassRecord:
    name: str
    pairs: list
    meta: list = field(default_factory=list)

    def __post_init__(self):
        for img, mask in self.pairs:
            if np.asarray(img).shape[:2] != np.asarray(mask).shape:
                raise DimensionMismatch(f"{self.name}: image and mask sizes differ")
            if not np.asarray(mask).any():
                raise InvalidArgument(f"{self.name}: dataset masks must be non-empty")


@dataclass
class Dataset:
    classes: list[ClassRecord]

    @property
    def names(self) -> list[str]:
        return [c.name for c in self.classes]

    def get(self, name: str) -> ClassRecord:
        for c in self.classes:
            if c.name == name:
                return c
        raise KeyError(name)

    def subset(self, names) -> "Dataset":
        names = list(names)
        missing = [n for n in names if n not in self.names]
        if missing:
            raise InvalidArgument(f"classes not in dataset: {missing}")
        return Dataset([self.get(n) for n in names])

    def __len__(self) -> int:
        return sum(len(c.pairs) for c in self.classes)


def save_dataset(ds: Dataset, root) -> None:
    root = Path(root)
    try:
        root.mkdir(parents=True, exist_ok=True)
        (root / "classes.txt").write_text("".join(n + "\n" for n in ds.names))
        for rec in ds.classes:
            cdir = root / rec.name
            cdir.mkdir(exist_ok=True)
            for i, (img, mask) in enumerate(rec.pairs):
                ext = ".ppm" if np.asarray(img).ndim == 3 and np.asarray(img).shape[2] == 3 else ".pgm"
                netpbm.save_image(cdir / f"{i:03d}{ext}", img)
                netpbm.save_mask(cdir / f"{i:03d}_mask.pgm", mask)
    except OSError as exc:
        raise IoError(f"cannot write dataset under {root}: {exc}") from exc


_IMAGE_RE = re.compile(r"^(\d+)\.(ppm|pgm)$")


def load_dataset(root) -> Dataset:
    root = Path(root)
    if not root.is_dir():
        raise IoError(f"dataset directory {root} does not exist")
    order_file = root / "classes.txt"
    if order_file.exists():
        names = [ln.strip() for ln in order_file.read_text().splitlines() if ln.strip()]
    else:
        names = sorted(p.name for p in root.iterdir() if p.is_dir())
    records = []
    for name in names:
        cdir = root / name
        if not cdir.is_dir():
            raise IoError(f"class directory {cdir} missing")
        entries = []
        for fname in os.listdir(cdir):
            m = _IMAGE_RE.match(fname)
            if m:
                entries.append((int(m.group(1)), fname, m.group(1)))
        pairs = []
        for _, fname, stem in sorted(entries):
            mask_path = cdir / f"{stem}_mask.pgm"
            if not mask_path.exists():
                raise FormatError(f"{cdir / fname} has no mask file")
            mask = netpbm.load_mask(mask_path)
            if not mask.any():
                continue
            pairs.append((netpbm.load_image(cdir / fname), mask))
        records.append(ClassRecord(name, pairs))
    return Dataset(records)
