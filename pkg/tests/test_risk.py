import numpy as np
import pytest

from ctxreject.core import DataError, LabelSet, build_cost_matrix
from ctxreject.risk import (map_with_rejection, map_with_rejection_batch,
                            risk_table, risk_vector)


def zero_one_cm(n=3, rho=0.46):
    return build_cost_matrix(LabelSet(num_classes=n), g=0.7, rho=rho)


def test_risk_vector_zero_one_costs():
    cm = zero_one_cm()
    r = risk_vector(np.array([0.7, 0.2, 0.1]), cm)
    assert np.allclose(r, [0.3, 0.8, 0.9, 0.46], atol=1e-12)


def test_risk_vector_one_hot():
    cm = zero_one_cm(rho=0.25)
    r = risk_vector(np.array([0.0, 1.0, 0.0]), cm)
    assert np.allclose(r, [1.0, 0.0, 1.0, 0.25], atol=1e-15)


def test_risk_vector_superclass_discount():
    ls = LabelSet(num_classes=3, superclass_of={1: 1, 2: 1, 3: 2})
    cm = build_cost_matrix(ls, g=0.7, rho=0.46)
    r = risk_vector(np.array([0.5, 0.5, 0.0]), cm)
    assert r[0] == pytest.approx(0.7 * 0.5)


def test_risk_vector_rejects_unnormalized():
    cm = zero_one_cm()
    with pytest.raises(DataError):
        risk_vector(np.array([0.5, 0.2, 0.2]), cm)


def test_risk_table_rows_match_vector():
    rng = np.random.default_rng(0)
    cm = zero_one_cm()
    p = rng.dirichlet(np.ones(3), size=50)
    table = risk_table(p, cm)
    assert table.shape == (50, 4)
    for row, pv in zip(table, p):
        assert np.allclose(row, risk_vector(pv, cm), atol=1e-12)
    assert (table >= -1e-12).all() and (table <= 1 + 1e-12).all()


def test_map_with_rejection_examples():
    assert map_with_rejection(np.array([0.7, 0.2, 0.1]), rho=0.46) == 1
    assert map_with_rejection(np.full(3, 1 / 3), rho=0.2) == 4
    # rho = 1: threshold 0, any positive maximum wins
    assert map_with_rejection(np.array([0.4, 0.35, 0.25]), rho=1.0) == 1


def test_map_with_rejection_boundary_equality_rejects():
    # exactly at the threshold: strict rule sends it to reject
    assert map_with_rejection(np.array([0.5, 0.5]), rho=0.5) == 3


def test_map_with_rejection_tie_prefers_smallest():
    assert map_with_rejection(np.array([0.4, 0.4, 0.2]), rho=0.9) == 1


def test_map_batch_matches_scalar():
    rng = np.random.default_rng(1)
    p = rng.dirichlet(np.ones(4), size=100)
    batch = map_with_rejection_batch(p, rho=0.4)
    for row, got in zip(p, batch):
        assert map_with_rejection(row, rho=0.4) == got


def test_chow_rule_consistency_on_simplex_grid():
    # With 0/1 costs the risk argmin must implement the confidence-threshold
    # rule.  Grid denominator 140 keeps every point clear of the float
    # boundary at max p == 1 - rho.
    cm = zero_one_cm(rho=0.46)
    m = 140
    points = []
    for i in range(m + 1):
        for j in range(m + 1 - i):
            points.append((i / m, j / m, (m - i - j) / m))
    p = np.array(points)
    assert len(p) >= 10_000
    risks = risk_table(p, cm)
    assert np.abs(risks[:, :-1].min(axis=1) - 0.46).min() > 1e-9
    argmin = risks.argmin(axis=1) + 1
    chow = map_with_rejection_batch(p, rho=0.46)
    assert np.array_equal(argmin, chow)


def test_rejection_monotone_in_rho():
    rng = np.random.default_rng(2)
    p = rng.dirichlet(np.ones(3), size=500)
    rejected_sets = []
    for rho in (0.1, 0.3, 0.5, 0.7, 0.9):
        rejected_sets.append(set(np.nonzero(
            map_with_rejection_batch(p, rho) == 4)[0].tolist()))
    # larger rho -> fewer rejections, nested downward
    for bigger, smaller in zip(rejected_sets, rejected_sets[1:]):
        assert smaller <= bigger
