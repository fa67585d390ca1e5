"""Seeded synthetic-shapes segmentation dataset.

Each class is one shape family drawn in a class-typical hue on a darker,
randomly colored, noisy background. Masks are exact: a pixel is
foreground iff its center satisfies the shape's analytic inequality.
"""
from __future__ import annotations

import zlib
from dataclasses import dataclass

import numpy as np

from ..errors import InvalidConfig
from .dataset import ClassRecord, Dataset

SHAPES = ("circle", "square", "triangle", "cross", "ring", "bar")

BASE_COLORS = {
    "circle": (0.85, 0.25, 0.20),
    "square": (0.20, 0.70, 0.30),
    "triangle": (0.25, 0.35, 0.85),
    "cross": (0.90, 0.80, 0.20),
    "ring": (0.75, 0.30, 0.80),
    "bar": (0.20, 0.80, 0.85),
}

RING_INNER = 0.55
CROSS_ARM = 1.0 / 3.0
BAR_HALF_WIDTH = 0.25
# background mean intensity stays at least this far below the object's
MIN_CONTRAST = 0.6
BG_FLOOR = 0.02
# objects are the class hue blended toward white by this fraction
FG_WHITE = 0.75


@dataclass(frozen=True)
class SynthConfig:
    size: int = 32
    classes: tuple[str, ...] = SHAPES
    per_class: int = 40
    noise: float = 0.08
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "classes", tuple(self.classes))
        if self.size < 8:
            raise InvalidConfig("image size must be >= 8")
        if len(self.classes) < 2:
            raise InvalidConfig("need at least two shape classes")
        if len(set(self.classes)) != len(self.classes):
            raise InvalidConfig("duplicate shape classes")
        unknown = [c for c in self.classes if c not in SHAPES]
        if unknown:
            raise InvalidConfig(f"unknown shape classes {unknown}; known: {SHAPES}")
        if self.per_class < 2:
            raise InvalidConfig("need at least two images per class")
        if not self.noise >= 0:
            raise InvalidConfig("noise level must be >= 0")


def _rotated(size, cx, cy, angle):
    centers = np.arange(size) + 0.5
    x, y = np.meshgrid(centers, centers)
    dx, dy = x - cx, y - cy
    c, s = np.cos(angle), np.sin(angle)
    return c * dx + s * dy, -s * dx + c * dy


def shape_mask(kind: str, size: int, cx: float, cy: float, r: float,
               angle: float = 0.0) -> np.ndarray:
    """Boolean (size, size) mask of pixel centers inside the shape."""
    u, v = _rotated(size, cx, cy, angle)
    if kind == "circle":
        return u * u + v * v <= r * r
    if kind == "ring":
        d2 = u * u + v * v
        return (d2 <= r * r) & (d2 >= (RING_INNER * r) ** 2)
    if kind == "square":
        return np.maximum(np.abs(u), np.abs(v)) <= r
    if kind == "bar":
        return (np.abs(u) <= r) & (np.abs(v) <= BAR_HALF_WIDTH * r)
    if kind == "cross":
        arm = CROSS_ARM * r
        return ((np.abs(u) <= arm) & (np.abs(v) <= r)) | \
               ((np.abs(v) <= arm) & (np.abs(u) <= r))
    if kind == "triangle":
        # equilateral, circumradius r, apex along -v
        inside = np.ones_like(u, dtype=bool)
        for k in range(3):
            phi = -np.pi / 2 + k * 2 * np.pi / 3
            nx, ny = np.cos(phi + np.pi / 3), np.sin(phi + np.pi / 3)
            inside &= u * nx + v * ny <= r / 2
        return inside
    raise InvalidConfig(f"unknown shape {kind!r}")


def _class_rng(seed: int, name: str) -> np.random.Generator:
    return np.random.default_rng([seed, zlib.crc32(name.encode("utf-8"))])


def _background_color(fg: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Random hue whose mean intensity sits MIN_CONTRAST or more below ``fg``."""
    top = max(fg.mean() - MIN_CONTRAST, BG_FLOOR)
    level = rng.uniform(BG_FLOOR, top)
    hue = rng.dirichlet(np.ones(3))
    return np.clip(hue * 3.0 * level, 0.0, 1.0)


def render_sample(kind: str, size: int, noise: float, rng: np.random.Generator):
    """Draw one (image, mask, meta) triple."""
    while True:
        r = rng.uniform(0.18, 0.32) * size
        cx = rng.uniform(r * 0.8, size - r * 0.8)
        cy = rng.uniform(r * 0.8, size - r * 0.8)
        angle = rng.uniform(0.0, np.pi) if kind not in ("circle", "ring") else 0.0
        mask = shape_mask(kind, size, cx, cy, r, angle)
        if mask.any():
            break
    base = np.array(BASE_COLORS[kind])
    gain = rng.uniform(0.8, 1.0)
    fg = np.clip((1.0 - FG_WHITE) * base / base.max() * gain + FG_WHITE
                 + rng.uniform(-0.08, 0.08, 3), 0.0, 1.0)
    bg = _background_color(fg, rng)
    img = np.empty((size, size, 3))
    img[...] = bg
    img[mask] = fg
    if noise > 0:
        sigma = np.where(mask, noise * 0.5, noise)[:, :, None]
        img = img + sigma * rng.standard_normal(img.shape)
    img = np.clip(img, 0.0, 1.0)
    meta = {"kind": kind, "cx": cx, "cy": cy, "r": r, "angle": angle,
            "fg": fg.tolist(), "bg": bg.tolist()}
    return img, mask.astype(np.uint8), meta


def generate_synthetic_dataset(cfg: SynthConfig) -> Dataset:
    records = []
    for name in cfg.classes:
        rng = _class_rng(cfg.seed, name)
        pairs, metas = [], []
        for _ in range(cfg.per_class):
            img, mask, meta = render_sample(name, cfg.size, cfg.noise, rng)
            pairs.append((img, mask))
            metas.append(meta)
        records.append(ClassRecord(name, pairs, metas))
    return Dataset(records)
