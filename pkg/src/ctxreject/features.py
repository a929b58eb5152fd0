"""Per-pixel feature images and their aggregation to superpixel statistics.

Two feature kinds flow through the pipeline: application features feed the
classifier, similarity features feed the graph weights.  Both default to raw
RGB; alternative application features plug in through a named registry.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import ConfigError, DataError
from .segmentation import Partition

_TRANSFORMS = {}


def register_feature_transform(name: str, fn):
    """Register a named transform from an RGB image to an m-channel image."""
    if name in _TRANSFORMS:
        raise ConfigError(f"feature transform {name!r} already registered")
    _TRANSFORMS[name] = fn


register_feature_transform("rgb", lambda img: img)


@dataclass(frozen=True)
class FeatureMatrix:
    """Per-superpixel feature vectors; row count matches the partition."""

    values: np.ndarray     # (n, m)
    kind: str              # "application" | "similarity"

    @property
    def m(self) -> int:
        return self.values.shape[1]


def pixel_features(img: np.ndarray, kind: str = "similarity",
                   name: str = "rgb") -> np.ndarray:
    """Per-pixel feature image for the requested kind.

    Similarity features are always plain RGB; application features go
    through the registered transform.
    """
    if kind == "similarity":
        return np.asarray(img, dtype=float)
    if kind != "application":
        raise ConfigError(f"unknown feature kind {kind!r}")
    try:
        fn = _TRANSFORMS[name]
    except KeyError:
        raise ConfigError(f"unknown application feature transform {name!r}") \
            from None
    feat = np.asarray(fn(img), dtype=float)
    if feat.ndim == 2:
        feat = feat[..., None]
    if feat.shape[:2] != np.asarray(img).shape[:2]:
        raise DataError("feature transform changed the image shape")
    if not np.isfinite(feat).all():
        raise DataError("feature transform produced non-finite values")
    return feat


def superpixel_stats(part: Partition, feat: np.ndarray,
                     kind: str = "similarity") -> FeatureMatrix:
    """Arithmetic mean of the per-pixel features inside every superpixel."""
    feat = np.asarray(feat, dtype=float)
    if feat.shape[:2] != part.shape:
        raise DataError("feature image does not match the partition")
    assign = part.assignment.ravel()
    m = feat.shape[2]
    flat = feat.reshape(-1, m)
    sums = np.zeros((part.n, m))
    np.add.at(sums, assign, flat)
    counts = np.bincount(assign, minlength=part.n).astype(float)
    return FeatureMatrix(values=sums / counts[:, None], kind=kind)


def majority_label(part: Partition, truth: np.ndarray) -> np.ndarray:
    """Modal ground-truth class per superpixel; 0 marks all-unlabeled.

    ``truth`` holds a class in 1..N per pixel, 0 for unlabeled pixels.
    Count ties resolve to the smallest class index.
    """
    truth = np.asarray(truth)
    if truth.shape != part.shape:
        raise DataError("truth map does not match the partition")
    if truth.min() < 0:
        raise DataError("truth labels must be >= 0")
    nclasses = int(truth.max())
    counts = np.zeros((part.n, nclasses + 1), dtype=np.int64)
    np.add.at(counts, (part.assignment.ravel(), truth.ravel()), 1)
    if nclasses == 0:
        return np.zeros(part.n, dtype=np.int64)
    labeled = counts[:, 1:]
    out = labeled.argmax(axis=1).astype(np.int64) + 1
    out[labeled.sum(axis=1) == 0] = 0
    return out
