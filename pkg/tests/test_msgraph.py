import itertools

import numpy as np
import pytest

from ctxreject.core import PipelineConfig
from ctxreject.features import FeatureMatrix, superpixel_stats
from ctxreject.msgraph import (assemble_graph, build_interscale_edges,
                               build_intrascale_edges, edge_weight,
                               graph_is_connected, validate_graph)
from ctxreject.segmentation import Partition, multiscale_partition


def part_from(assign, scale=1):
    a = np.asarray(assign, dtype=np.int32)
    return Partition(scale_index=scale, assignment=a, n=int(a.max()) + 1)


def brute_adjacency(assign):
    """Oracle: enumerate every 4-adjacent pixel pair."""
    a = np.asarray(assign)
    h, w = a.shape
    pairs = set()
    for y, x in itertools.product(range(h), range(w)):
        for dy, dx in ((0, 1), (1, 0)):
            ny, nx = y + dy, x + dx
            if ny < h and nx < w and a[y, x] != a[ny, nx]:
                pairs.add(tuple(sorted((int(a[y, x]), int(a[ny, nx])))))
    return pairs


def test_intrascale_half_split():
    part = part_from([[0, 0, 1, 1]] * 2)
    edges = build_intrascale_edges(part)
    assert edges.tolist() == [[0, 1]]


def test_intrascale_quadrants_exclude_diagonals():
    assign = np.array([[0, 0, 1, 1],
                       [0, 0, 1, 1],
                       [2, 2, 3, 3],
                       [2, 2, 3, 3]])
    part = part_from(assign)
    edges = build_intrascale_edges(part)
    got = {tuple(e) for e in edges.tolist()}
    assert got == brute_adjacency(assign)
    assert got == {(0, 1), (0, 2), (1, 3), (2, 3)}


def test_intrascale_single_superpixel():
    part = part_from(np.zeros((3, 3), dtype=int))
    assert len(build_intrascale_edges(part)) == 0


def test_interscale_nested():
    fine = part_from([[0, 1, 2, 3]])
    coarse = part_from([[0, 0, 1, 1]], scale=2)
    edges = build_interscale_edges(fine, coarse)
    assert edges.tolist() == [[0, 0], [1, 0], [2, 1], [3, 1]]


def test_interscale_max_overlap_wins():
    # fine superpixel 0 spans 6 pixels on coarse 0 and 4 on coarse 1
    fine = part_from([[0] * 10])
    coarse = part_from([[0] * 6 + [1] * 4], scale=2)
    edges = build_interscale_edges(fine, coarse)
    assert edges.tolist() == [[0, 0]]
    # overlap counting oracle
    counts = np.zeros((1, 2), dtype=int)
    for f, c in zip(fine.assignment.ravel(), coarse.assignment.ravel()):
        counts[f, c] += 1
    assert counts[0].argmax() == 0


def test_interscale_tie_prefers_smaller_coarse_id():
    fine = part_from([[0] * 4])
    coarse = part_from([[1, 1, 0, 0]], scale=2)
    assert build_interscale_edges(fine, coarse).tolist() == [[0, 0]]


def test_interscale_single_coarse_node():
    fine = part_from([[0, 1, 2]])
    coarse = part_from([[0, 0, 0]], scale=2)
    edges = build_interscale_edges(fine, coarse)
    assert edges.tolist() == [[0, 0], [1, 0], [2, 0]]


def test_edge_weight_values():
    f = np.array([0.2, 0.4, 0.6])
    assert edge_weight(f, f, True, gamma=1.0, v_intra=1.0, v_inter=4.0) == 1.0
    assert edge_weight(f, f, False, gamma=1.0, v_intra=1.0, v_inter=4.0) == 4.0
    g = f + np.sqrt(0.5 / 3)
    w = edge_weight(f, g, True, gamma=0.5, v_intra=1.0, v_inter=4.0)
    assert w == pytest.approx(np.exp(-1.0), rel=1e-12)


def test_edge_weight_gamma_monotone():
    f = np.zeros(3)
    g = np.full(3, 0.2)
    ws = [edge_weight(f, g, True, gamma, 1.0, 4.0)
          for gamma in (0.01, 0.1, 1.0, 10.0)]
    assert all(a <= b for a, b in zip(ws, ws[1:]))


def cfg_for(mss):
    return PipelineConfig(mss_list=tuple(mss), gamma=0.1, seg_k=0.3,
                          seg_sigma=0.5)


def build_synthetic_graph(seed=0, size=24, mss=(8, 16, 32)):
    rng = np.random.default_rng(seed)
    img = np.zeros((size, size, 3))
    img[:, size // 2:] = 0.7
    img = np.clip(img + rng.normal(0, 0.08, img.shape), 0, 1)
    cfg = cfg_for(mss)
    parts = multiscale_partition(img, cfg.mss_list, k=cfg.seg_k,
                                 sigma=cfg.seg_sigma)
    feats = [superpixel_stats(p, img) for p in parts]
    return parts, feats, assemble_graph(parts, feats, cfg)


def test_single_scale_graph_has_no_interscale_edges():
    parts, feats, _ = build_synthetic_graph(mss=(8,))
    graph = assemble_graph(parts, feats, cfg_for((8,)))
    assert len(graph.interscale_edges) == 0
    assert not validate_graph(graph)


def test_two_scale_graph_with_single_coarse_node():
    fine = part_from([[0, 0, 1, 1]])
    coarse = part_from([[0, 0, 0, 0]], scale=2)
    feats = [FeatureMatrix(np.array([[0.1] * 3, [0.9] * 3]), "similarity"),
             FeatureMatrix(np.array([[0.5] * 3]), "similarity")]
    graph = assemble_graph([fine, coarse], feats, cfg_for((2, 4)))
    assert len(graph.interscale_edges) == fine.n
    assert not validate_graph(graph)


def test_assembled_graph_invariants_and_connectivity():
    parts, feats, graph = build_synthetic_graph()
    assert not validate_graph(graph)
    assert graph.num_nodes == sum(p.n for p in parts)
    edges, weights, kinds = graph.all_edges()
    vmax = max(1.0, 4.0)
    assert (weights > 0).all() and (weights <= vmax + 1e-12).all()
    assert graph_is_connected(graph)
    assert set(kinds) <= {"intra", "inter"}


def test_feature_row_mismatch_rejected():
    parts, feats, _ = build_synthetic_graph(mss=(8, 16))
    bad = [FeatureMatrix(feats[0].values[:-1], "similarity"), feats[1]]
    from ctxreject.core import DataError
    with pytest.raises(DataError):
        assemble_graph(parts, bad, cfg_for((8, 16)))
