import numpy as np
import pytest

from ctxreject.classifier import (Regressor, TrainingSet, bound_quadratic,
                                  lorsal_train, mlr_posterior,
                                  mlr_posterior_batch, neg_log_likelihood,
                                  neg_log_likelihood_grad, rbf_matrix,
                                  rbf_vector, select_bandwidth)
from ctxreject.core import DataError


def toy_training_set(rng, q=30, classes=3, m=3, spread=1.0):
    labels = np.array([1 + i % classes for i in range(q)])
    centers = rng.normal(0, 2.0, size=(classes, m))
    feats = centers[labels - 1] + rng.normal(0, spread, size=(q, m))
    return TrainingSet(indices=np.arange(q), labels=labels, features=feats)


# ------------------------------------------------------------------ kernels

def test_rbf_vector_at_training_point():
    train = np.array([[0.0, 0.0], [1.0, 1.0]])
    k = rbf_vector(train, np.array([1.0, 1.0]), h=0.7)
    assert k[0] == 1.0
    assert k[2] == 1.0
    assert 0 < k[1] < 1


def test_rbf_vector_no_training_points():
    k = rbf_vector(np.empty((0, 3)), np.zeros(3), h=1.0)
    assert k.tolist() == [1.0]


def test_rbf_vector_at_one_bandwidth():
    train = np.array([[0.0]])
    k = rbf_vector(train, np.array([2.0]), h=2.0)
    assert k[1] == pytest.approx(np.exp(-0.5), rel=1e-12)


def test_rbf_matrix_matches_vector():
    rng = np.random.default_rng(0)
    train = rng.random((5, 3))
    pts = rng.random((4, 3))
    km = rbf_matrix(train, pts, h=0.9)
    for row, p in zip(km, pts):
        assert np.allclose(row, rbf_vector(train, p, h=0.9), atol=1e-14)


# ---------------------------------------------------------------- bandwidth

def test_bandwidth_single_pair():
    assert select_bandwidth(np.array([[0.0]]), np.array([[3.0]])) == \
        pytest.approx(np.sqrt(3.0))


def test_bandwidth_degenerate_warns():
    with pytest.warns(UserWarning):
        h = select_bandwidth(np.array([[1.0, 2.0]]), np.array([[1.0, 2.0]]))
    assert h == 1.0


def test_bandwidth_two_by_two_mean():
    # distances {1, 2, 2, 3} -> mean 2 -> h = sqrt(2)
    train = np.array([[0.0], [1.0]])
    test = np.array([[2.0], [3.0]])
    d = np.abs(train - test.T)
    assert sorted(d.ravel().tolist()) == [1.0, 2.0, 2.0, 3.0]
    assert select_bandwidth(train, test) == pytest.approx(np.sqrt(2.0))


# --------------------------------------------------------------- posteriors

def test_posterior_uniform_for_zero_coefficients():
    reg = Regressor(W=np.zeros((3, 4)), train_features=np.zeros((2, 2)),
                    bandwidth=1.0)
    p = mlr_posterior(reg, np.array([0.3, 0.4]))
    assert np.allclose(p, 0.25)
    assert p.sum() == pytest.approx(1.0, abs=1e-12)


def test_posterior_binary_reduces_to_logistic():
    rng = np.random.default_rng(1)
    train = rng.random((4, 2))
    W = np.zeros((5, 2))
    W[:, 0] = rng.normal(size=5)
    reg = Regressor(W=W, train_features=train, bandwidth=0.8)
    f = rng.random(2)
    z = rbf_vector(train, f, 0.8) @ W[:, 0]
    p = mlr_posterior(reg, f)
    assert p[0] == pytest.approx(1.0 / (1.0 + np.exp(-z)), rel=1e-12)
    assert p[1] == pytest.approx(1.0 - p[0], rel=1e-9)


def test_posterior_matches_naive_exponentiation():
    rng = np.random.default_rng(2)
    train = rng.random((6, 3))
    W = rng.normal(0, 0.5, size=(7, 3))
    W[:, -1] = 0.0
    reg = Regressor(W=W, train_features=train, bandwidth=1.1)
    f = rng.random(3)
    k = rbf_vector(train, f, 1.1)
    naive = np.exp(k @ W)
    naive /= naive.sum()
    assert np.allclose(mlr_posterior(reg, f), naive, atol=1e-12)


def test_posterior_invariant_to_common_column_shift():
    rng = np.random.default_rng(3)
    train = rng.random((5, 2))
    W = rng.normal(size=(6, 3))
    shift = rng.normal(size=6)
    reg1 = Regressor(W=W, train_features=train, bandwidth=1.0)
    reg2 = Regressor(W=W + shift[:, None], train_features=train, bandwidth=1.0)
    f = rng.random(2)
    assert np.allclose(mlr_posterior(reg1, f), mlr_posterior(reg2, f),
                       atol=1e-12)


def test_posterior_overflow_safe():
    reg = Regressor(W=np.array([[800.0, 0.0], [0.0, 0.0]]),
                    train_features=np.zeros((1, 1)), bandwidth=1.0)
    p = mlr_posterior(reg, np.zeros(1))
    assert np.isfinite(p).all()
    assert p[0] == pytest.approx(1.0)


# ----------------------------------------------------------- training math

def test_gradient_matches_central_differences():
    rng = np.random.default_rng(4)
    q, classes = 8, 3
    ts = toy_training_set(rng, q=q, classes=classes)
    kmat = rbf_matrix(ts.features, ts.features, h=1.0)
    step = 1e-5
    for _ in range(20):
        w_free = rng.normal(0, 0.5, size=(q + 1, classes - 1))
        w_full = np.column_stack([w_free, np.zeros(q + 1)])
        grad = neg_log_likelihood_grad(w_full, kmat, ts.labels)
        fd = np.zeros_like(grad)
        for i in range(q + 1):
            for j in range(classes - 1):
                wp = w_full.copy()
                wp[i, j] += step
                wm = w_full.copy()
                wm[i, j] -= step
                fd[i, j] = (neg_log_likelihood(wp, kmat, ts.labels)
                            - neg_log_likelihood(wm, kmat, ts.labels)) \
                    / (2 * step)
        rel = np.abs(grad - fd) / np.maximum(1e-8, np.abs(fd))
        assert rel.max() <= 1e-5


def test_curvature_bound_majorizes_likelihood():
    rng = np.random.default_rng(5)
    q, classes = 6, 3
    ts = toy_training_set(rng, q=q, classes=classes)
    kmat = rbf_matrix(ts.features, ts.features, h=1.0)
    kgram = kmat.T @ kmat
    for _ in range(50):
        wt = rng.normal(0, 1.0, size=(q + 1, classes - 1))
        w = wt + rng.normal(0, 1.0, size=wt.shape)
        wt_full = np.column_stack([wt, np.zeros(q + 1)])
        w_full = np.column_stack([w, np.zeros(q + 1)])
        g = neg_log_likelihood_grad(wt_full, kmat, ts.labels)
        surrogate = neg_log_likelihood(wt_full, kmat, ts.labels) \
            + float((g * (w - wt)).sum()) \
            + bound_quadratic(w - wt, kgram, classes)
        true_val = neg_log_likelihood(w_full, kmat, ts.labels)
        assert surrogate >= true_val - 1e-9 * max(1.0, abs(true_val))
    # equality at the expansion point
    wt_full = np.column_stack([wt, np.zeros(q + 1)])
    assert bound_quadratic(np.zeros_like(wt), kgram, classes) == 0.0


# -------------------------------------------------------------------- LORSAL

def test_lorsal_objective_monotone():
    rng = np.random.default_rng(6)
    ts = toy_training_set(rng, q=24, classes=3)
    reg = lorsal_train(ts, 3, lam=2.0, bandwidth=1.0, max_outer=50)
    path = np.array(reg.objective_path)
    assert len(path) >= 2
    assert (np.diff(path) <= 1e-8).all()


def test_lorsal_separable_data_perfect_training_accuracy():
    rng = np.random.default_rng(7)
    feats = np.vstack([rng.normal(-3, 0.2, size=(10, 2)),
                       rng.normal(3, 0.2, size=(10, 2))])
    labels = np.array([1] * 10 + [2] * 10)
    ts = TrainingSet(indices=np.arange(20), labels=labels, features=feats)
    h = select_bandwidth(feats, feats)
    reg = lorsal_train(ts, 2, lam=0.0, bandwidth=h, max_outer=200)
    pred = mlr_posterior_batch(reg, feats).argmax(axis=1) + 1
    assert (pred == labels).all()


def test_lorsal_huge_lambda_collapses_to_uniform():
    rng = np.random.default_rng(8)
    ts = toy_training_set(rng, q=15, classes=3)
    reg = lorsal_train(ts, 3, lam=1e6, bandwidth=1.0)
    assert np.abs(reg.W).max() <= 1e-6
    p = mlr_posterior_batch(reg, ts.features)
    assert np.allclose(p, 1.0 / 3.0, atol=1e-6)


def test_lorsal_sparsity_non_increasing_in_lambda():
    rng = np.random.default_rng(9)
    ts = toy_training_set(rng, q=30, classes=3, spread=1.5)
    h = select_bandwidth(ts.features, ts.features)
    nnz = []
    for lam in (0.1, 1.0, 10.0, 100.0):
        reg = lorsal_train(ts, 3, lam=lam, bandwidth=h, max_outer=100)
        nnz.append(int((np.abs(reg.W) > 1e-8).sum()))
    assert all(a >= b for a, b in zip(nnz, nnz[1:])), nnz
    assert nnz[0] > nnz[-1]


def test_lorsal_empty_training_set_rejected():
    ts = TrainingSet(indices=np.empty(0, dtype=int),
                     labels=np.empty(0, dtype=int),
                     features=np.empty((0, 3)))
    with pytest.raises(DataError):
        lorsal_train(ts, 3, lam=1.0, bandwidth=1.0)


def test_lorsal_warns_on_missing_class():
    ts = TrainingSet(indices=[0, 1], labels=[1, 1],
                     features=np.array([[0.0, 0.0], [1.0, 0.0]]))
    with pytest.warns(UserWarning, match="without training samples"):
        lorsal_train(ts, 3, lam=1.0, bandwidth=1.0, max_outer=5)


def test_lorsal_single_class_trivial():
    ts = TrainingSet(indices=[0], labels=[1], features=np.zeros((1, 2)))
    reg = lorsal_train(ts, 1, lam=1.0, bandwidth=1.0)
    assert mlr_posterior(reg, np.zeros(2)).tolist() == [1.0]
