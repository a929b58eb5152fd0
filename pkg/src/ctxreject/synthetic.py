"""Synthetic piecewise-constant test images with pixelwise ground truth."""

from __future__ import annotations

import numpy as np

from .core import ConfigError, DataError
from .features import majority_label
from .segmentation import Partition

# Moderately separated class colors: classes 2 and 3 sit closer together so
# a noisy image yields genuinely uncertain regions instead of a toy problem.
DEFAULT_COLORS = np.array([
    [0.62, 0.32, 0.32],
    [0.32, 0.55, 0.38],
    [0.34, 0.44, 0.52],
    [0.65, 0.60, 0.30],
    [0.50, 0.30, 0.60],
    [0.30, 0.60, 0.60],
])


def make_synthetic(size: int = 256, num_classes: int = 3,
                   noise_sigma: float = 0.15, seed: int = 0,
                   layout: str = "tiles", colors=None,
                   tile_grid: int = 10, tile_jitter: float = 0.02,
                   hard_fraction: float = 0.15, hard_tilt: float = 0.55):
    """Piecewise-constant class layout plus Gaussian noise, clipped to [0,1].

    Layouts: ``stripes`` (equal vertical bands), ``blocks`` (class grid) and
    ``tiles`` (vertical class bands quantized to a tile grid, with a small
    constant color offset per tile).  In the tiles layout a ``hard_fraction``
    of tiles is moved ``hard_tilt`` of the way toward the closest other
    class color: genuinely ambiguous regions that remain piecewise constant,
    the way intermediate tissue appearance does in real slides.

    Returns ``(image, truth)`` where truth holds classes 1..num_classes.
    """
    if num_classes < 1:
        raise ConfigError("num_classes must be >= 1")
    if colors is None:
        if num_classes > len(DEFAULT_COLORS):
            raise ConfigError("provide colors for more than "
                              f"{len(DEFAULT_COLORS)} classes")
        colors = DEFAULT_COLORS[:num_classes]
    colors = np.asarray(colors, dtype=float)
    rng = np.random.default_rng(seed)
    truth = np.zeros((size, size), dtype=np.int64)
    if layout == "stripes":
        bounds = np.linspace(0, size, num_classes + 1).astype(int)
        for c in range(num_classes):
            truth[:, bounds[c]:bounds[c + 1]] = c + 1
        img = colors[truth - 1]
    elif layout == "blocks":
        per_side = int(np.ceil(np.sqrt(num_classes)))
        bounds = np.linspace(0, size, per_side + 1).astype(int)
        c = 0
        for by in range(per_side):
            for bx in range(per_side):
                truth[bounds[by]:bounds[by + 1], bounds[bx]:bounds[bx + 1]] \
                    = c % num_classes + 1
                c += 1
        img = colors[truth - 1]
    elif layout == "tiles":
        nearest = {}
        for c in range(num_classes):
            others = [o for o in range(num_classes) if o != c]
            if others:
                dists = [np.linalg.norm(colors[c] - colors[o]) for o in others]
                nearest[c] = others[int(np.argmin(dists))]
        bounds = np.linspace(0, size, tile_grid + 1).astype(int)
        img = np.zeros((size, size, 3))
        for ty in range(tile_grid):
            for tx in range(tile_grid):
                cls = 1 + (num_classes * tx) // tile_grid
                color = colors[cls - 1]
                if num_classes > 1 and rng.random() < hard_fraction:
                    color = color + hard_tilt * (colors[nearest[cls - 1]]
                                                 - color)
                color = color + rng.normal(0.0, tile_jitter, size=3)
                ys, ye = bounds[ty], bounds[ty + 1]
                xs, xe = bounds[tx], bounds[tx + 1]
                truth[ys:ye, xs:xe] = cls
                img[ys:ye, xs:xe] = color
    else:
        raise ConfigError(f"unknown layout {layout!r}")
    img = np.clip(img + rng.normal(0.0, noise_sigma, img.shape), 0.0, 1.0)
    return img, truth


def sample_training_pixels(truth: np.ndarray, n_per_class: int,
                           seed: int = 0) -> list:
    """Random labeled pixels, n per class; rows of (x, y, label)."""
    if n_per_class < 1:
        raise ConfigError("n_per_class must be >= 1")
    rng = np.random.default_rng(seed)
    rows = []
    classes = np.unique(truth)
    classes = classes[classes > 0]
    if len(classes) == 0:
        raise DataError("truth map contains no labeled pixels")
    for cls in classes:
        ys, xs = np.nonzero(truth == cls)
        take = min(n_per_class, len(ys))
        pick = rng.choice(len(ys), size=take, replace=False)
        rows.extend((int(xs[i]), int(ys[i]), int(cls)) for i in sorted(pick))
    return rows


def sample_training_superpixels(part: Partition, truth: np.ndarray,
                                n_per_class: int, seed: int = 0):
    """Random superpixels per majority-truth class.

    Returns ``(indices, labels)`` over finest-scale superpixel ids.
    """
    if n_per_class < 1:
        raise ConfigError("n_per_class must be >= 1")
    rng = np.random.default_rng(seed)
    maj = majority_label(part, truth)
    indices, labels = [], []
    for cls in sorted(set(maj.tolist()) - {0}):
        pool = np.nonzero(maj == cls)[0]
        take = min(n_per_class, len(pool))
        pick = rng.choice(len(pool), size=take, replace=False)
        for i in sorted(pick):
            indices.append(int(pool[i]))
            labels.append(int(cls))
    if not indices:
        raise DataError("no labeled superpixels to sample from")
    return np.array(indices, dtype=np.int64), np.array(labels, dtype=np.int64)
