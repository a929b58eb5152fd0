"""Graph-based oversegmentation into superpixels at multiple size scales.

Merging runs over the 4-connected pixel grid with Euclidean RGB edge
weights and the adaptive threshold k/|component|; a second pass then merges
undersized components into their most color-similar neighbor until every
superpixel reaches the minimum size for the scale.  The second pass always
consumes the globally smallest component first, so the partitions for an
increasing size schedule form a strict hierarchy and can be produced by one
progressive sweep.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import gaussian_filter

from .core import ConfigError, DataError


@dataclass(frozen=True)
class Partition:
    """Labeling of pixels into superpixels at one scale.

    ``assignment`` holds a contiguous superpixel id in 0..n-1 per pixel.
    """

    scale_index: int
    assignment: np.ndarray   # (H, W) int32
    n: int

    @property
    def shape(self):
        return self.assignment.shape

    def sizes(self) -> np.ndarray:
        return np.bincount(self.assignment.ravel(), minlength=self.n)


def check_image(img: np.ndarray) -> np.ndarray:
    img = np.asarray(img, dtype=float)
    if img.ndim != 3 or img.shape[2] != 3:
        raise DataError("image must be (H, W, 3)")
    if img.shape[0] < 1 or img.shape[1] < 1:
        raise DataError("image must contain at least one pixel")
    if img.min() < 0.0 or img.max() > 1.0:
        raise DataError("image intensities must lie in [0, 1]")
    return img


def validate_partition(part: Partition, mss: int = 1) -> list:
    """Structural checks; returns a list of violation messages."""
    errs = []
    a = part.assignment
    ids = np.unique(a)
    if a.min() < 0 or a.max() >= part.n:
        errs.append("superpixel id out of range")
    if len(ids) != part.n:
        errs.append("superpixel ids not contiguous")
    sizes = part.sizes()
    area = a.size
    if area >= mss and sizes.min() < mss and part.n > 1:
        errs.append(f"superpixel smaller than mss={mss}")
    # 4-connectivity of every superpixel by flood fill
    h, w = a.shape
    seen = np.zeros_like(a, dtype=bool)
    for sp in range(part.n):
        ys, xs = np.nonzero(a == sp)
        if len(ys) == 0:
            continue
        stack = [(int(ys[0]), int(xs[0]))]
        seen_count = 0
        visited = set()
        while stack:
            y, x = stack.pop()
            if (y, x) in visited:
                continue
            visited.add((y, x))
            seen_count += 1
            for dy, dx in ((1, 0), (-1, 0), (0, 1), (0, -1)):
                ny, nx = y + dy, x + dx
                if 0 <= ny < h and 0 <= nx < w and (ny, nx) not in visited \
                        and a[ny, nx] == sp:
                    stack.append((ny, nx))
        if seen_count != len(ys):
            errs.append(f"superpixel {sp} not 4-connected")
            break
        seen[ys, xs] = True
    if not seen.all():
        errs.append("assignment does not cover all pixels")
    return errs


def _smooth(img: np.ndarray, sigma: float) -> np.ndarray:
    if sigma <= 0.0:
        return img
    out = np.empty_like(img)
    for c in range(3):
        out[..., c] = gaussian_filter(img[..., c], sigma, mode="nearest")
    return out


def _grid_edges(h: int, w: int):
    idx = np.arange(h * w, dtype=np.int64).reshape(h, w)
    horiz = np.stack([idx[:, :-1].ravel(), idx[:, 1:].ravel()], axis=1)
    vert = np.stack([idx[:-1, :].ravel(), idx[1:, :].ravel()], axis=1)
    return np.concatenate([horiz, vert], axis=0)


class _UnionFind:
    __slots__ = ("parent", "rank", "size")

    def __init__(self, n):
        self.parent = list(range(n))
        self.rank = [0] * n
        self.size = [1] * n

    def find(self, x):
        parent = self.parent
        root = x
        while parent[root] != root:
            root = parent[root]
        while parent[x] != root:   # path compression
            parent[x], x = root, parent[x]
        return root

    def union(self, a, b):
        if self.rank[a] < self.rank[b]:
            a, b = b, a
        self.parent[b] = a
        self.size[a] += self.size[b]
        if self.rank[a] == self.rank[b]:
            self.rank[a] += 1
        return a


def _merge_pass(img_s: np.ndarray, k: float):
    """Adaptive graph-merging over the pixel grid; returns pixel component ids.

    Edges are visited in weight order with stable index tie-breaking, which
    makes the result deterministic.
    """
    h, w, _ = img_s.shape
    npix = h * w
    flat = img_s.reshape(npix, 3)
    edges = _grid_edges(h, w)
    diffs = flat[edges[:, 0]] - flat[edges[:, 1]]
    weights = np.sqrt((diffs * diffs).sum(axis=1))
    order = np.argsort(weights, kind="stable")

    uf = _UnionFind(npix)
    threshold = np.full(npix, k, dtype=float)   # int(C) + k/|C| with int=0
    ea = edges[:, 0].tolist()
    eb = edges[:, 1].tolist()
    wl = weights.tolist()
    find = uf.find
    union = uf.union
    size = uf.size
    for e in order.tolist():
        a = find(ea[e])
        b = find(eb[e])
        if a == b:
            continue
        wgt = wl[e]
        if wgt <= threshold[a] and wgt <= threshold[b]:
            r = union(a, b)
            threshold[r] = wgt + k / size[r]
    return np.fromiter((find(i) for i in range(npix)), dtype=np.int64,
                       count=npix)


def _contiguous(labels_flat: np.ndarray):
    """Relabel arbitrary ids to 0..n-1 in order of first appearance."""
    uniq, first = np.unique(labels_flat, return_index=True)
    order = np.argsort(first, kind="stable")
    remap = np.empty(len(uniq), dtype=np.int64)
    remap[order] = np.arange(len(uniq))
    codes = np.searchsorted(uniq, labels_flat)
    return remap[codes], len(uniq)


def multiscale_partition(img: np.ndarray, mss_list, k: float = 300.0 / 255.0,
                         sigma: float = 0.8) -> list:
    """One partition per minimum superpixel size, coarse scales merging fine.

    ``mss_list`` must be strictly increasing; the superpixel count is
    non-increasing along the returned list.
    """
    img = check_image(img)
    mss_list = tuple(int(m) for m in mss_list)
    if len(mss_list) == 0:
        raise ConfigError("mss_list must not be empty")
    if any(m < 1 for m in mss_list):
        raise ConfigError("mss entries must be >= 1")
    if any(b <= a for a, b in zip(mss_list, mss_list[1:])):
        raise ConfigError("mss_list must be strictly increasing")

    h, w, _ = img.shape
    img_s = _smooth(img, sigma)
    comp_flat, ncomp = _contiguous(_merge_pass(img_s, k))

    # Component-level state for the min-size enforcement sweep.
    flat = img_s.reshape(-1, 3)
    sizes = np.bincount(comp_flat, minlength=ncomp).astype(np.int64)
    colorsum = np.zeros((ncomp, 3))
    np.add.at(colorsum, comp_flat, flat)
    edges = _grid_edges(h, w)
    ca = comp_flat[edges[:, 0]]
    cb = comp_flat[edges[:, 1]]
    cross = ca != cb
    nbrs = [set() for _ in range(ncomp)]
    for a, b in zip(ca[cross].tolist(), cb[cross].tolist()):
        nbrs[a].add(b)
        nbrs[b].add(a)

    parent = list(range(ncomp))

    def find(x):
        root = x
        while parent[root] != root:
            root = parent[root]
        while parent[x] != root:
            parent[x], x = root, parent[x]
        return root

    size_l = sizes.tolist()
    alive = ncomp
    heap = [(size_l[i], i) for i in range(ncomp)]
    heapq.heapify(heap)

    def merge_until(mss: int):
        nonlocal alive
        while alive > 1:
            while heap:
                sz, r = heap[0]
                if parent[r] != r or size_l[r] != sz:
                    heapq.heappop(heap)   # stale entry
                    continue
                break
            if not heap:
                break
            sz, r = heap[0]
            if sz >= mss:
                break
            heapq.heappop(heap)
            # most color-similar live neighbor; ties to the smaller id
            mean_r = colorsum[r] / size_l[r]
            best, best_d = -1, np.inf
            resolved = set()
            for x in nbrs[r]:
                rx = find(x)
                if rx != r:
                    resolved.add(rx)
            for rx in sorted(resolved):
                d = colorsum[rx] / size_l[rx] - mean_r
                dist = float(d @ d)
                if dist < best_d:
                    best, best_d = rx, dist
            if best < 0:
                break   # isolated component, nothing to merge into
            keep = min(r, best)
            gone = max(r, best)
            parent[gone] = keep
            size_l[keep] += size_l[gone]
            colorsum[keep] += colorsum[gone]
            merged = nbrs[r] | nbrs[best]
            merged.discard(r)
            merged.discard(best)
            nbrs[keep] = merged
            nbrs[gone] = set()
            alive -= 1
            heapq.heappush(heap, (size_l[keep], keep))

    parts = []
    current = comp_flat
    for s, mss in enumerate(mss_list, start=1):
        merge_until(mss)
        roots = np.fromiter((find(c) for c in range(ncomp)), dtype=np.int64,
                            count=ncomp)
        labels, n = _contiguous(roots[current])
        parts.append(Partition(scale_index=s,
                               assignment=labels.reshape(h, w).astype(np.int32),
                               n=n))
    return parts


def oversegment(img: np.ndarray, k: float = 300.0 / 255.0, sigma: float = 0.8,
                mss: int = 1, seed: int = 0) -> Partition:
    """Single-scale oversegmentation.

    ``seed`` is accepted for interface stability; the procedure is fully
    deterministic and never draws random numbers.
    """
    if mss < 1:
        raise ConfigError("mss must be >= 1")
    del seed
    return multiscale_partition(img, [mss], k=k, sigma=sigma)[0]
