"""
Synthetic colour images with exact ground truth.

Edge taxonomy: step, angular (corner), Y-junction, X-junction, star. Each
region gets its own colour from a chromatic palette (no greys). Ground
truth marks a pixel whose region label differs from
its left or upper neighbour, giving one-pixel-wide boundaries.

`make_scene` renders seeded multi-region scenes (half-plane cuts plus
discs) used as a small bundled-style dataset.
"""

from __future__ import annotations

import os
from typing import Callable, Dict, List, Tuple

import numpy as np

import image_io
from colorspace import RgbImage
from detector import EdgeMap

PALETTE = np.array([
    (200, 60, 50),
    (40, 110, 190),
    (90, 170, 70),
    (235, 205, 70),
    (130, 60, 150),
    (240, 140, 180),
    (30, 90, 60),
    (110, 200, 220),
    (140, 80, 30),
    (250, 170, 90),
    (60, 50, 120),
    (170, 210, 110),
], dtype=np.uint8)


def boundary(labels: np.ndarray) -> np.ndarray:
    gt = np.zeros(labels.shape, dtype=bool)
    gt[:, 1:] |= labels[:, 1:] != labels[:, :-1]
    gt[1:, :] |= labels[1:, :] != labels[:-1, :]
    return gt


def render(labels: np.ndarray, colors: np.ndarray) -> Tuple[RgbImage, EdgeMap]:
    return RgbImage(colors[labels]), EdgeMap(boundary(labels))


def _polar(size: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    rows, cols = np.mgrid[0:size, 0:size].astype(np.float64)
    c = size / 2.0
    # pixel centres, so no pixel sits exactly on the junction point
    y, x = rows + 0.5 - c, cols + 0.5 - c
    return rows, cols, np.arctan2(y, x)


def step_labels(size: int) -> np.ndarray:
    _, cols, _ = _polar(size)
    return (cols >= size // 2).astype(np.int64)


def angular_labels(size: int) -> np.ndarray:
    rows, cols, _ = _polar(size)
    return ((cols >= size // 2) & (rows >= size // 2)).astype(np.int64)


def y_junction_labels(size: int) -> np.ndarray:
    _, _, phi = _polar(size)
    deg = (np.degrees(phi) + 90.0) % 360.0
    return np.digitize(deg, [120.0, 240.0]).astype(np.int64)


def x_junction_labels(size: int) -> np.ndarray:
    rows, cols, _ = _polar(size)
    return (2 * (rows >= size // 2) + (cols >= size // 2)).astype(np.int64)


def star_labels(size: int, wedges: int = 8) -> np.ndarray:
    _, _, phi = _polar(size)
    wedge = np.floor((phi + np.pi) / (2 * np.pi) * wedges).astype(np.int64) % wedges
    return wedge % 2


SHAPES: Dict[str, Callable[[int], np.ndarray]] = {
    "step": step_labels,
    "angular": angular_labels,
    "y_junction": y_junction_labels,
    "x_junction": x_junction_labels,
    "star": star_labels,
}


def shape(name: str, size: int = 64) -> Tuple[RgbImage, EdgeMap]:
    labels = SHAPES[name](size)
    return render(labels, PALETTE)


def shapes(names=("step", "angular", "y_junction", "x_junction"), size: int = 64) -> List[Tuple[str, RgbImage, EdgeMap]]:
    return [(n, *shape(n, size)) for n in names]


def two_tone(size: int, left, right, column: int = None) -> Tuple[RgbImage, EdgeMap]:
    """Vertical step: `left` colour for columns < column, `right` from it on."""
    column = size // 2 if column is None else column
    labels = (np.arange(size)[None, :] >= column).repeat(size, axis=0).astype(np.int64)
    return render(labels, np.array([left, right], dtype=np.uint8))


def make_scene(seed: int, size: int = 64, cuts: int = 3, discs: int = 2) -> Tuple[RgbImage, EdgeMap]:
    rng = np.random.Generator(np.random.PCG64(seed))
    rows, cols = np.mgrid[0:size, 0:size].astype(np.float64)
    labels = np.zeros((size, size), dtype=np.int64)
    next_label = 1

    for _ in range(cuts):
        py, px = rng.uniform(0.2 * size, 0.8 * size, 2)
        angle = rng.uniform(0, np.pi)
        side = (cols - px) * np.cos(angle) + (rows - py) * np.sin(angle) > 0
        labels[side] = next_label
        next_label += 1

    for _ in range(discs):
        cy, cx = rng.uniform(0.15 * size, 0.85 * size, 2)
        radius = rng.uniform(0.08 * size, 0.2 * size)
        labels[(rows - cy) ** 2 + (cols - cx) ** 2 <= radius ** 2] = next_label
        next_label += 1

    colors = PALETTE[rng.permutation(len(PALETTE))[:next_label]]
    return render(labels, colors)


def write_dataset(out_dir: str, count: int = 10, seed: int = 0, size: int = 64) -> List[str]:
    """images/<name>.png and gt/<name>.png for `count` seeded scenes; returns the names."""
    names = []
    for n in range(count):
        name = f"scene_{n:02d}"
        img, gt = make_scene(seed + n, size)
        image_io.write_rgb(os.path.join(out_dir, "images", f"{name}.png"), img)
        image_io.write_edge_map(os.path.join(out_dir, "gt", f"{name}.png"), gt)
        names.append(name)
    return names
