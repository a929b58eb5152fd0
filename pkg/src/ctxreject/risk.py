"""Expected classification risk over the extended label set.

Posteriors become per-label risks through the cost matrix; the reject entry
is the constant rejection cost.  Inference consumes the resulting table and
never touches raw posteriors.
"""

from __future__ import annotations

import numpy as np

from .core import CostMatrix, DataError

_PROB_TOL = 1e-9


def _check_normalized(p: np.ndarray):
    sums = p.sum(axis=-1)
    if not np.all(np.abs(sums - 1.0) <= _PROB_TOL):
        worst = float(np.abs(sums - 1.0).max())
        raise DataError(f"probability vector not normalized (|sum-1| = {worst:.3g})")
    if np.any(p < -_PROB_TOL):
        raise DataError("probability vector has negative entries")


def risk_vector(p: np.ndarray, cm: CostMatrix) -> np.ndarray:
    """Per-label expected risks for one posterior; entry N+1 is ``rho``."""
    p = np.asarray(p, dtype=float)
    if p.shape != (cm.num_classes,):
        raise DataError(f"posterior has {p.shape} entries, expected "
                        f"{cm.num_classes}")
    _check_normalized(p)
    return cm.entries @ p


def risk_table(posteriors: np.ndarray, cm: CostMatrix) -> np.ndarray:
    """Risk vectors for many posteriors at once, one row per sample."""
    p = np.asarray(posteriors, dtype=float)
    if p.ndim != 2 or p.shape[1] != cm.num_classes:
        raise DataError("posterior matrix must be (n, N)")
    _check_normalized(p)
    return p @ cm.entries.T


def map_with_rejection(p: np.ndarray, rho: float) -> int:
    """Confidence-threshold decision: the posterior argmax when its value
    strictly exceeds 1 - rho, else the reject label N+1.

    Exactly hitting the threshold rejects, because the acceptance rule uses
    a strict inequality.  Argmax ties go to the smallest class index.
    """
    p = np.asarray(p, dtype=float)
    _check_normalized(p)
    k = int(np.argmax(p))
    if p[k] > 1.0 - rho:
        return k + 1
    return p.shape[-1] + 1


def map_with_rejection_batch(posteriors: np.ndarray, rho: float) -> np.ndarray:
    """Vectorized :func:`map_with_rejection` over rows."""
    p = np.asarray(posteriors, dtype=float)
    _check_normalized(p)
    k = np.argmax(p, axis=1)
    best = p[np.arange(p.shape[0]), k]
    out = k.astype(np.int64) + 1
    out[~(best > 1.0 - rho)] = p.shape[1] + 1
    return out
