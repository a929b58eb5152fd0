"""Kernelized multinomial logistic regression with an l1-sparse trainer.

The regressor works on RBF kernel vectors against the training samples.
Training minimizes the negative log-likelihood plus an l1 penalty by
majorize-minimize: the likelihood Hessian is replaced by its label-free
upper bound, factorized once, and each surrogate problem is solved by an
alternating-direction scheme with soft thresholding.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from .core import ConfigError, DataError, NumericalError


@dataclass(frozen=True)
class TrainingSet:
    """Labeled superpixels: global sample indices, class labels, features."""

    indices: np.ndarray    # (q,) unique sample ids, bookkeeping only
    labels: np.ndarray     # (q,) classes in 1..N
    features: np.ndarray   # (q, m)

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64)
        lab = np.asarray(self.labels, dtype=np.int64)
        feat = np.asarray(self.features, dtype=float)
        if len(idx) != len(lab) or len(lab) != feat.shape[0]:
            raise DataError("training arrays disagree in length")
        if len(np.unique(idx)) != len(idx):
            raise DataError("training sample indices must be unique")
        if len(lab) and lab.min() < 1:
            raise DataError("training labels must be >= 1")
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "labels", lab)
        object.__setattr__(self, "features", feat)

    def __len__(self):
        return len(self.labels)


@dataclass(frozen=True)
class Regressor:
    """Trained coefficients plus everything needed to evaluate posteriors.

    ``objective_path`` records the true training objective at the accepted
    outer iterates; it is diagnostics only and not persisted.
    """

    W: np.ndarray              # (q+1, N); column N is pinned at zero
    train_features: np.ndarray  # (q, m)
    bandwidth: float
    objective_path: tuple = ()

    @property
    def num_classes(self) -> int:
        return self.W.shape[1]


def rbf_vector(train_features: np.ndarray, f: np.ndarray, h: float) -> np.ndarray:
    """Kernel vector (1, k_1, ..., k_q) with k_i = exp(-||f - f_i||^2 / 2h^2)."""
    if not h > 0.0:
        raise ConfigError("bandwidth must be > 0")
    train = np.asarray(train_features, dtype=float)
    f = np.asarray(f, dtype=float)
    out = np.empty(train.shape[0] + 1)
    out[0] = 1.0
    if train.shape[0]:
        d2 = ((train - f[None, :]) ** 2).sum(axis=1)
        out[1:] = np.exp(-d2 / (2.0 * h * h))
    return out


def rbf_matrix(train_features: np.ndarray, feats: np.ndarray,
               h: float) -> np.ndarray:
    """Rows of kernel vectors for many evaluation points."""
    if not h > 0.0:
        raise ConfigError("bandwidth must be > 0")
    feats = np.atleast_2d(np.asarray(feats, dtype=float))
    train = np.asarray(train_features, dtype=float)
    out = np.ones((feats.shape[0], train.shape[0] + 1))
    if train.shape[0]:
        d2 = cdist(feats, train, "sqeuclidean")
        out[:, 1:] = np.exp(-d2 / (2.0 * h * h))
    return out


def select_bandwidth(train_features: np.ndarray,
                     test_features: np.ndarray) -> float:
    """Square root of the mean train-test Euclidean distance.

    Falls back to 1 with a warning when every point coincides.
    """
    train = np.atleast_2d(np.asarray(train_features, dtype=float))
    test = np.atleast_2d(np.asarray(test_features, dtype=float))
    if train.shape[0] == 0 or test.shape[0] == 0:
        raise DataError("bandwidth selection needs nonempty feature sets")
    mean_dist = float(cdist(train, test).mean())
    if mean_dist <= 0.0:
        warnings.warn("all feature points coincide; bandwidth falls back to 1",
                      stacklevel=2)
        return 1.0
    return float(np.sqrt(mean_dist))


def _softmax_rows(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def mlr_posterior(reg: Regressor, f: np.ndarray) -> np.ndarray:
    """Class posterior for one feature vector."""
    k = rbf_vector(reg.train_features, f, reg.bandwidth)
    return _softmax_rows((k @ reg.W)[None, :])[0]


def mlr_posterior_batch(reg: Regressor, feats: np.ndarray) -> np.ndarray:
    kmat = rbf_matrix(reg.train_features, feats, reg.bandwidth)
    return _softmax_rows(kmat @ reg.W)


def neg_log_likelihood(W: np.ndarray, kmat: np.ndarray,
                       labels: np.ndarray) -> float:
    """-sum_i log p(y_i | k_i, W) for kernel rows ``kmat``."""
    logits = kmat @ W
    zmax = logits.max(axis=1)
    lse = zmax + np.log(np.exp(logits - zmax[:, None]).sum(axis=1))
    picked = logits[np.arange(len(labels)), labels - 1]
    return float((lse - picked).sum())


def neg_log_likelihood_grad(W: np.ndarray, kmat: np.ndarray,
                            labels: np.ndarray) -> np.ndarray:
    """Gradient of the negative log-likelihood in the free columns 1..N-1.

    Column N is pinned at zero, so the returned matrix has N-1 columns.
    """
    n_classes = W.shape[1]
    probs = _softmax_rows(kmat @ W)
    onehot = np.zeros((len(labels), n_classes))
    onehot[np.arange(len(labels)), labels - 1] = 1.0
    return kmat.T @ (probs[:, :-1] - onehot[:, :-1])


def bound_quadratic(dW_free: np.ndarray, kgram: np.ndarray,
                    num_classes: int) -> float:
    """Half the quadratic form of the curvature bound at a step ``dW_free``.

    The bound is 0.5 * (I - 11^T/N) (x) K, which dominates the likelihood
    Hessian for every W; it yields the surrogate used by the trainer.
    """
    u = np.eye(num_classes - 1) - np.ones((num_classes - 1,
                                           num_classes - 1)) / num_classes
    return 0.25 * float(np.trace(dW_free.T @ kgram @ dW_free @ u))


def surrogate_value(W_free: np.ndarray, Wt_free: np.ndarray, kmat: np.ndarray,
                    labels: np.ndarray, num_classes: int) -> float:
    """Majorizer of the negative log-likelihood around ``Wt_free``."""
    q1 = kmat.shape[1]
    Wt = np.column_stack([Wt_free, np.zeros(q1)])
    g = neg_log_likelihood_grad(Wt, kmat, labels)
    d = W_free - Wt_free
    return neg_log_likelihood(Wt, kmat, labels) + float((g * d).sum()) + \
        bound_quadratic(d, kmat.T @ kmat, num_classes)


def _soft(x: np.ndarray, t: float) -> np.ndarray:
    return np.sign(x) * np.maximum(np.abs(x) - t, 0.0)


def lorsal_train(ts: TrainingSet, num_classes: int, lam: float, *,
                 bandwidth: float, max_outer: int = 100, tol: float = 1e-7,
                 mu: float = 1.0, max_inner: int = 200,
                 inner_tol: float = 1e-6) -> Regressor:
    """Train the sparse kernel MLR by majorize-minimize with ADMM inner solves.

    The true objective (negative log-likelihood plus l1 penalty) is
    non-increasing across outer iterations; candidates that fail to decrease
    it are rejected, which simultaneously stops the loop.
    """
    if len(ts) == 0:
        raise DataError("training set is empty")
    if lam < 0.0:
        raise ConfigError("lambda must be >= 0")
    if num_classes < 1:
        raise ConfigError("num_classes must be >= 1")
    if ts.labels.max() > num_classes:
        raise DataError("training label exceeds num_classes")
    present = set(ts.labels.tolist())
    missing = [c for c in range(1, num_classes + 1) if c not in present]
    if missing:
        warnings.warn(f"classes without training samples: {missing}",
                      stacklevel=2)

    q = len(ts)
    kmat = rbf_matrix(ts.features, ts.features, bandwidth)   # (q, q+1)
    if num_classes == 1:
        return Regressor(W=np.zeros((q + 1, 1)), train_features=ts.features,
                         bandwidth=bandwidth)

    nfree = num_classes - 1
    # Eigenfactorizations of the two Kronecker factors of the curvature
    # bound, computed once per training run.
    kgram = kmat.T @ kmat
    s_k, v_k = np.linalg.eigh(kgram)
    s_k = np.maximum(s_k, 0.0)
    u = np.eye(nfree) - np.ones((nfree, nfree)) / num_classes
    lam_u, q_u = np.linalg.eigh(u)
    lam_u = np.maximum(lam_u, 0.0)
    denom = 0.5 * s_k[:, None] * lam_u[None, :] + mu

    def objective(w_free):
        w_full = np.column_stack([w_free, np.zeros(q + 1)])
        return neg_log_likelihood(w_full, kmat, ts.labels) + \
            lam * np.abs(w_free).sum()

    def solve_quadratic(rhs):
        # (0.5 * K (.) U + mu I) x = rhs via the joint eigenbasis
        return v_k @ ((v_k.T @ rhs @ q_u) / denom) @ q_u.T

    w_free = np.zeros((q + 1, nfree))
    best_obj = objective(w_free)
    path = [best_obj]
    for _ in range(max_outer):
        w_full = np.column_stack([w_free, np.zeros(q + 1)])
        grad = neg_log_likelihood_grad(w_full, kmat, ts.labels)
        if not np.isfinite(grad).all() or not np.isfinite(best_obj):
            raise NumericalError(
                f"non-finite training objective; W stats: "
                f"min={w_free.min():.3g} max={w_free.max():.3g}")
        rhs0 = 0.5 * (kgram @ w_free @ u) - grad
        omega = w_free.copy()
        dual = np.zeros_like(omega)
        for _ in range(max_inner):
            x = solve_quadratic(rhs0 + mu * (omega - dual))
            omega_prev = omega
            omega = _soft(x + dual, lam / mu)
            dual = dual + x - omega
            prim = np.linalg.norm(x - omega)
            drift = np.linalg.norm(omega - omega_prev)
            scale = max(1.0, np.linalg.norm(x))
            if prim <= inner_tol * scale and drift <= inner_tol * scale:
                break
        cand_obj = objective(omega)
        if not np.isfinite(cand_obj):
            raise NumericalError("inner solve produced a non-finite objective")
        if cand_obj > best_obj:
            break   # surrogate step failed to descend; keep the last iterate
        w_free = omega
        path.append(cand_obj)
        if best_obj - cand_obj <= tol * max(1.0, abs(best_obj)):
            best_obj = cand_obj
            break
        best_obj = cand_obj

    W = np.column_stack([w_free, np.zeros(q + 1)])
    return Regressor(W=W, train_features=ts.features, bandwidth=bandwidth,
                     objective_path=tuple(path))
