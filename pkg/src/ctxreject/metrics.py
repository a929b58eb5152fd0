"""Evaluation of labelings with a reject option.

Four summary numbers: nonrejected accuracy A, rejected fraction r,
classification quality Q (fraction of samples either correctly kept or
incorrectly rejected) and rejection quality phi (likelihood ratio measuring
how strongly errors concentrate in the rejected set).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import DataError


@dataclass(frozen=True)
class EvalCounts:
    """Partition of evaluated samples by correctness and rejection.

    Correctness is judged on the base label (what the classifier would say
    without rejection); weights allow pixel-weighted superpixel counts.
    """

    n: float
    cn: float    # correct and nonrejected
    in_: float   # incorrect and nonrejected
    cr: float    # correct and rejected
    ir: float    # incorrect and rejected

    def __post_init__(self):
        parts = (self.cn, self.in_, self.cr, self.ir)
        if any(v < 0 for v in parts) or self.n < 0:
            raise DataError("counts must be nonnegative")
        if not math.isclose(sum(parts), self.n, rel_tol=0, abs_tol=1e-9):
            raise DataError("counts do not sum to n")


def confusion_counts(pred, base, truth, reject_label: int,
                     weights=None) -> EvalCounts:
    """Tally correctness/rejection for per-sample labels.

    ``pred`` carries the final labels (possibly reject), ``base`` the
    pre-rejection labels and ``truth`` the ground truth classes.
    """
    pred = np.asarray(pred)
    base = np.asarray(base)
    truth = np.asarray(truth)
    if not (pred.shape == base.shape == truth.shape):
        raise DataError("pred, base and truth must have equal length")
    if weights is None:
        weights = np.ones(pred.shape, dtype=float)
    else:
        weights = np.asarray(weights, dtype=float)
        if weights.shape != pred.shape:
            raise DataError("weights must match the sample count")
    rejected = pred == reject_label
    correct = base == truth
    return EvalCounts(
        n=float(weights.sum()),
        cn=float(weights[correct & ~rejected].sum()),
        in_=float(weights[~correct & ~rejected].sum()),
        cr=float(weights[correct & rejected].sum()),
        ir=float(weights[~correct & rejected].sum()),
    )


def nonrejected_accuracy(c: EvalCounts):
    """A = cn / (cn + in_); returns (value, flag) with flag set when the
    nonrejected set is empty and the value defaults to 1."""
    kept = c.cn + c.in_
    if kept == 0:
        return 1.0, "A_undefined_all_rejected"
    return c.cn / kept, None


def rejected_fraction(c: EvalCounts) -> float:
    if c.n == 0:
        raise DataError("no evaluated samples")
    return (c.cr + c.ir) / c.n


def classification_quality(c: EvalCounts) -> float:
    """Q = (cn + ir) / n: correct decisions of the keep-or-reject view."""
    if c.n == 0:
        raise DataError("no evaluated samples")
    return (c.cn + c.ir) / c.n


def rejection_quality(c: EvalCounts):
    """phi = (ir/cr) / ((ir+in_)/(cn+cr)); returns (value, flag).

    Conventions: no rejected samples -> undefined (flagged); no incorrect
    samples anywhere -> neutral 1; an all-incorrect rejected set -> +inf.
    """
    rejected = c.cr + c.ir
    if rejected == 0:
        return float("nan"), "phi_undefined_no_rejection"
    incorrect = c.ir + c.in_
    if incorrect == 0:
        return 1.0, "phi_neutral_no_errors"
    if c.cr == 0:
        return float("inf"), "phi_infinite_pure_rejection"
    correct = c.cn + c.cr
    return (c.ir / c.cr) / (incorrect / correct), None


def summarize(c: EvalCounts) -> dict:
    """All four metrics plus flags, JSON-friendly."""
    a, a_flag = nonrejected_accuracy(c)
    phi, phi_flag = rejection_quality(c)
    flags = [f for f in (a_flag, phi_flag) if f]
    if math.isnan(phi):
        phi_out = None
    elif math.isinf(phi):
        phi_out = "inf"
    else:
        phi_out = phi
    return {
        "A": a,
        "r": rejected_fraction(c),
        "Q": classification_quality(c),
        "phi": phi_out,
        "counts": {"n": c.n, "cn": c.cn, "in": c.in_, "cr": c.cr, "ir": c.ir},
        "flags": flags,
    }


def per_class_summary(pred, base, truth, reject_label: int, num_classes: int,
                      weights=None, train_counts=None) -> list:
    """Metric rows restricted to each ground-truth class."""
    pred = np.asarray(pred)
    base = np.asarray(base)
    truth = np.asarray(truth)
    if weights is None:
        weights = np.ones(pred.shape, dtype=float)
    weights = np.asarray(weights, dtype=float)
    rows = []
    for cls in range(1, num_classes + 1):
        mask = truth == cls
        if not mask.any():
            continue
        c = confusion_counts(pred[mask], base[mask], truth[mask],
                             reject_label, weights[mask])
        row = summarize(c)
        row["label"] = cls
        row["test_samples"] = int(mask.sum())
        row["rejected_samples"] = int((pred[mask] == reject_label).sum())
        if train_counts is not None:
            row["train_samples"] = int(train_counts.get(cls, 0))
        rows.append(row)
    return rows
