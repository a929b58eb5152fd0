"""Multiscale similarity graph: adjacency within scales, parents across.

Nodes are superpixels at every scale, flattened to global indices in
scale-major order.  Edges carry similarity weights derived from superpixel
feature distances.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import ConfigError, DataError, PipelineConfig
from .features import FeatureMatrix
from .segmentation import Partition


@dataclass(frozen=True)
class MultiscaleGraph:
    """Weighted undirected graph over superpixels of all scales.

    Edge arrays store global node indices with the lower index first.
    ``node_offsets[s]`` is the global index of superpixel 0 at scale s
    (1-based scale index).
    """

    nodes: tuple                    # ((scale, superpixel_id), ...)
    node_offsets: dict              # scale -> global offset
    scale_sizes: dict               # scale -> number of superpixels
    intrascale_edges: np.ndarray    # (E_a, 2) int
    intrascale_weights: np.ndarray
    interscale_edges: np.ndarray    # (E_r, 2) int
    interscale_weights: np.ndarray

    @property
    def num_nodes(self) -> int:
        return len(self.nodes)

    @property
    def num_scales(self) -> int:
        return len(self.scale_sizes)

    def global_index(self, scale: int, sp: int) -> int:
        return self.node_offsets[scale] + sp

    def all_edges(self):
        """Concatenated (edges, weights, kinds) over intra and inter sets."""
        edges = np.concatenate([self.intrascale_edges.reshape(-1, 2),
                                self.interscale_edges.reshape(-1, 2)])
        weights = np.concatenate([self.intrascale_weights,
                                  self.interscale_weights])
        kinds = np.array(["intra"] * len(self.intrascale_weights)
                         + ["inter"] * len(self.interscale_weights))
        return edges, weights, kinds


def build_intrascale_edges(part: Partition) -> np.ndarray:
    """Unweighted adjacency pairs: superpixels sharing a 4-adjacent pixel pair."""
    a = part.assignment
    pairs = np.concatenate([
        np.stack([a[:, :-1].ravel(), a[:, 1:].ravel()], axis=1),
        np.stack([a[:-1, :].ravel(), a[1:, :].ravel()], axis=1),
    ])
    pairs = pairs[pairs[:, 0] != pairs[:, 1]]
    if len(pairs) == 0:
        return np.empty((0, 2), dtype=np.int64)
    pairs = np.sort(pairs, axis=1).astype(np.int64)
    return np.unique(pairs, axis=0)


def build_interscale_edges(fine: Partition, coarse: Partition) -> np.ndarray:
    """One edge per fine superpixel to its maximum-overlap coarse superpixel.

    Overlap ties resolve to the smaller coarse id.
    """
    if fine.shape != coarse.shape:
        raise DataError("partitions cover different pixel grids")
    pair_codes = fine.assignment.ravel().astype(np.int64) * coarse.n \
        + coarse.assignment.ravel()
    codes, counts = np.unique(pair_codes, return_counts=True)
    fine_ids = codes // coarse.n
    coarse_ids = codes % coarse.n
    # order: fine asc, count desc, coarse asc -> first row per fine id wins
    order = np.lexsort((coarse_ids, -counts, fine_ids))
    fine_sorted = fine_ids[order]
    first = np.ones(len(order), dtype=bool)
    first[1:] = fine_sorted[1:] != fine_sorted[:-1]
    sel = order[first]
    out = np.stack([fine_ids[sel], coarse_ids[sel]], axis=1)
    return out[np.argsort(out[:, 0])]


def edge_weight(f_i, f_j, same_scale: bool, gamma: float,
                v_intra: float, v_inter: float) -> float:
    """Similarity weight v * exp(-||f_i - f_j||^2 / gamma)."""
    if not gamma > 0.0:
        raise ConfigError("gamma must be > 0")
    d = np.asarray(f_i, dtype=float) - np.asarray(f_j, dtype=float)
    v = v_intra if same_scale else v_inter
    return float(v * np.exp(-(d @ d) / gamma))


def _weights(fa: np.ndarray, fb: np.ndarray, v: float, gamma: float):
    d2 = ((fa - fb) ** 2).sum(axis=1)
    return v * np.exp(-d2 / gamma)


def assemble_graph(parts, sim_feats, cfg: PipelineConfig) -> MultiscaleGraph:
    """Union of the single-scale graphs plus parent edges between scales.

    Edge weights below ``cfg.w_min`` are pruned (default 0 keeps everything,
    and pruning interscale edges can break the one-parent invariant, so the
    knob is for experimentation only).
    """
    if len(parts) != len(sim_feats):
        raise DataError("need one feature matrix per partition")
    if not cfg.gamma > 0.0:
        raise ConfigError("gamma must be > 0")
    for part, fm in zip(parts, sim_feats):
        values = fm.values if isinstance(fm, FeatureMatrix) else np.asarray(fm)
        if values.shape[0] != part.n:
            raise DataError(f"feature rows != superpixels at scale "
                            f"{part.scale_index}")

    feats = [fm.values if isinstance(fm, FeatureMatrix) else np.asarray(fm)
             for fm in sim_feats]
    offsets = {}
    nodes = []
    total = 0
    for part in parts:
        offsets[part.scale_index] = total
        nodes.extend((part.scale_index, i) for i in range(part.n))
        total += part.n

    intra_edges, intra_w = [], []
    for part, f in zip(parts, feats):
        pairs = build_intrascale_edges(part)
        if len(pairs) == 0:
            continue
        w = _weights(f[pairs[:, 0]], f[pairs[:, 1]], cfg.v_intrascale,
                     cfg.gamma)
        off = offsets[part.scale_index]
        intra_edges.append(pairs + off)
        intra_w.append(w)

    inter_edges, inter_w = [], []
    for fine, coarse, ff, fc in zip(parts, parts[1:], feats, feats[1:]):
        pairs = build_interscale_edges(fine, coarse)
        w = _weights(ff[pairs[:, 0]], fc[pairs[:, 1]], cfg.v_interscale,
                     cfg.gamma)
        gpairs = np.stack([pairs[:, 0] + offsets[fine.scale_index],
                           pairs[:, 1] + offsets[coarse.scale_index]], axis=1)
        inter_edges.append(gpairs)
        inter_w.append(w)

    def _pack(edge_list, w_list):
        if not edge_list:
            return np.empty((0, 2), dtype=np.int64), np.empty(0)
        edges = np.concatenate(edge_list).astype(np.int64)
        w = np.concatenate(w_list)
        if cfg.w_min > 0.0:
            keep = w >= cfg.w_min
            edges, w = edges[keep], w[keep]
        return edges, w

    ia, iw = _pack(intra_edges, intra_w)
    ra, rw = _pack(inter_edges, inter_w)
    return MultiscaleGraph(nodes=tuple(nodes), node_offsets=offsets,
                           scale_sizes={p.scale_index: p.n for p in parts},
                           intrascale_edges=ia, intrascale_weights=iw,
                           interscale_edges=ra, interscale_weights=rw)


def validate_graph(graph: MultiscaleGraph) -> list:
    """Structural invariant check; returns a list of violation messages."""
    errs = []
    scales = sorted(graph.scale_sizes)
    edges, weights, _ = graph.all_edges()
    if len(weights) and (weights.min() < 0 or not np.isfinite(weights).all()):
        errs.append("edge weight negative or non-finite")
    if len(edges):
        if (edges[:, 0] >= edges[:, 1]).any():
            errs.append("edge not stored lower-index-first")
        if len(np.unique(edges[:, 0] * graph.num_nodes + edges[:, 1])) \
                != len(edges):
            errs.append("duplicate edges")
    # parent uniqueness upward, coverage downward
    up_count = np.zeros(graph.num_nodes, dtype=int)
    down_count = np.zeros(graph.num_nodes, dtype=int)
    scale_of = np.array([s for s, _ in graph.nodes])
    for a, b in graph.interscale_edges.reshape(-1, 2):
        sa, sb = scale_of[a], scale_of[b]
        if sb != sa + 1:
            errs.append("interscale edge not between adjacent scales")
            continue
        up_count[a] += 1
        down_count[b] += 1
    for s in scales[:-1]:
        off, n = graph.node_offsets[s], graph.scale_sizes[s]
        if not (up_count[off:off + n] == 1).all():
            errs.append(f"scale {s}: node without exactly one parent edge")
    for s in scales[1:]:
        off, n = graph.node_offsets[s], graph.scale_sizes[s]
        if not (down_count[off:off + n] >= 1).all():
            errs.append(f"scale {s}: node without a child edge")
    # intrascale edges must stay within one scale
    for a, b in graph.intrascale_edges.reshape(-1, 2):
        if scale_of[a] != scale_of[b]:
            errs.append("intrascale edge spans scales")
            break
    return errs


def graph_is_connected(graph: MultiscaleGraph) -> bool:
    n = graph.num_nodes
    if n <= 1:
        return True
    edges, _, _ = graph.all_edges()
    adj = [[] for _ in range(n)]
    for a, b in edges:
        adj[a].append(b)
        adj[b].append(a)
    seen = np.zeros(n, dtype=bool)
    stack = [0]
    seen[0] = True
    while stack:
        v = stack.pop()
        for u in adj[v]:
            if not seen[u]:
                seen[u] = True
                stack.append(u)
    return bool(seen.all())
