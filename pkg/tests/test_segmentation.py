import numpy as np
import pytest

from ctxreject.core import ConfigError, DataError
from ctxreject.segmentation import (Partition, check_image,
                                    multiscale_partition, oversegment,
                                    validate_partition)


def two_region_image(h=8, w=8):
    img = np.zeros((h, w, 3))
    img[:, w // 2:, :] = 1.0
    return img


def reference_components(img):
    """Oracle: connected components of exactly-equal colors via flood fill."""
    h, w, _ = img.shape
    labels = -np.ones((h, w), dtype=int)
    nxt = 0
    for y in range(h):
        for x in range(w):
            if labels[y, x] >= 0:
                continue
            stack = [(y, x)]
            labels[y, x] = nxt
            while stack:
                cy, cx = stack.pop()
                for dy, dx in ((1, 0), (-1, 0), (0, 1), (0, -1)):
                    ny, nx_ = cy + dy, cx + dx
                    if 0 <= ny < h and 0 <= nx_ < w and labels[ny, nx_] < 0 \
                            and (img[ny, nx_] == img[cy, cx]).all():
                        labels[ny, nx_] = nxt
                        stack.append((ny, nx_))
            nxt += 1
    return labels, nxt


def test_two_region_split():
    img = two_region_image()
    part = oversegment(img, k=0.5, sigma=0.0, mss=4)
    ref, nref = reference_components(img)
    assert part.n == nref == 2
    # identical partition up to a relabeling
    mapping = {}
    for got, want in zip(part.assignment.ravel(), ref.ravel()):
        assert mapping.setdefault(got, want) == want


def test_constant_image_collapses():
    img = np.full((10, 10, 3), 0.25)
    part = oversegment(img, k=0.5, sigma=0.0, mss=7)
    assert part.n <= int(np.ceil(100 / 7))
    assert part.n == 1   # no boundaries, merging is unconstrained
    assert not validate_partition(part, mss=7)


def test_single_pixel_image():
    part = oversegment(np.zeros((1, 1, 3)), mss=1)
    assert part.n == 1
    assert part.assignment.tolist() == [[0]]


def test_mss_larger_than_image_gives_single_superpixel():
    img = np.random.default_rng(0).random((6, 6, 3))
    part = oversegment(img, k=0.1, sigma=0.0, mss=100)
    assert part.n == 1


def test_size_floor_enforced():
    rng = np.random.default_rng(1)
    img = np.clip(rng.normal(0.5, 0.2, size=(24, 24, 3)), 0, 1)
    for mss in (4, 16, 60):
        part = oversegment(img, k=0.3, sigma=0.5, mss=mss)
        assert part.sizes().min() >= mss
        assert not validate_partition(part, mss=mss)


def test_determinism():
    rng = np.random.default_rng(2)
    img = np.clip(rng.normal(0.5, 0.25, size=(20, 20, 3)), 0, 1)
    p1 = oversegment(img, k=0.4, sigma=0.8, mss=10)
    p2 = oversegment(img, k=0.4, sigma=0.8, mss=10)
    assert np.array_equal(p1.assignment, p2.assignment)
    assert p1.n == p2.n


def test_multiscale_counts_non_increasing_and_nested():
    rng = np.random.default_rng(3)
    img = np.clip(rng.normal(0.5, 0.2, size=(32, 32, 3)), 0, 1)
    parts = multiscale_partition(img, (8, 16, 32, 64), k=0.4, sigma=0.5)
    assert [p.scale_index for p in parts] == [1, 2, 3, 4]
    ns = [p.n for p in parts]
    assert all(a >= b for a, b in zip(ns, ns[1:]))
    # coarser superpixels are exact unions of finer ones
    for fine, coarse in zip(parts, parts[1:]):
        pair = fine.assignment.ravel().astype(np.int64) * coarse.n \
            + coarse.assignment.ravel()
        assert len(np.unique(pair)) == fine.n


def test_multiscale_matches_single_scale_runs():
    rng = np.random.default_rng(4)
    img = np.clip(rng.normal(0.5, 0.2, size=(16, 16, 3)), 0, 1)
    parts = multiscale_partition(img, (4, 16), k=0.4, sigma=0.0)
    solo = oversegment(img, k=0.4, sigma=0.0, mss=16)
    assert np.array_equal(parts[1].assignment, solo.assignment)


def test_multiscale_saturated_floor():
    img = two_region_image(6, 6)
    parts = multiscale_partition(img, (36,), k=0.5, sigma=0.0)
    assert parts[0].n == 1


def test_empty_mss_list_rejected():
    with pytest.raises(ConfigError):
        multiscale_partition(np.zeros((4, 4, 3)), ())


def test_oversegmentation_variance_property():
    # Statistically, a superpixel is more homogeneous than its union with a
    # neighbor: mean internal variance <= mean union variance.
    rng = np.random.default_rng(5)
    img = np.zeros((24, 24, 3))
    img[:, 12:, :] = 0.8
    img = np.clip(img + rng.normal(0, 0.05, img.shape), 0, 1)
    part = oversegment(img, k=0.15, sigma=0.0, mss=8)
    if part.n < 2:
        pytest.skip("degenerate segmentation")
    flat = img.reshape(-1, 3)
    assign = part.assignment.ravel()
    per_sp = [flat[assign == i] for i in range(part.n)]
    internal = np.mean([p.var(axis=0).sum() for p in per_sp])
    a = part.assignment
    pairs = set()
    pairs.update(zip(a[:, :-1].ravel(), a[:, 1:].ravel()))
    pairs.update(zip(a[:-1, :].ravel(), a[1:, :].ravel()))
    union_vars = [np.concatenate([per_sp[i], per_sp[j]]).var(axis=0).sum()
                  for i, j in pairs if i != j]
    assert internal <= np.mean(union_vars)


def test_invalid_images_rejected():
    with pytest.raises(DataError):
        check_image(np.zeros((4, 4)))
    with pytest.raises(DataError):
        check_image(np.full((4, 4, 3), 1.5))


def test_validate_partition_catches_disconnected():
    a = np.zeros((4, 4), dtype=np.int32)
    a[0, 0] = 1
    a[3, 3] = 1
    bad = Partition(scale_index=1, assignment=a, n=2)
    assert any("not 4-connected" in e for e in validate_partition(bad))
