"""File formats: images, truth maps, training specs, CSV artifacts.

Images load from PNG or binary PPM into float RGB in [0, 1].  Truth maps
are 8-bit PNGs whose pixel value is the class index, 0 meaning unlabeled.
All CSV writers use fixed float formatting so identical runs produce
byte-identical files.
"""

from __future__ import annotations

import csv
import hashlib
import io
from pathlib import Path

import numpy as np
from PIL import Image as PILImage

from .classifier import Regressor
from .core import DataError
from .segmentation import Partition


def load_image(path) -> np.ndarray:
    path = Path(path)
    if not path.exists():
        raise DataError(f"image file not found: {path}")
    try:
        with PILImage.open(path) as im:
            arr = np.asarray(im.convert("RGB"), dtype=float)
    except Exception as exc:
        raise DataError(f"cannot read image {path}: {exc}") from exc
    return arr / 255.0


def save_image_png(path, img: np.ndarray):
    """Write float RGB in [0,1] or uint8 RGB as PNG."""
    arr = np.asarray(img)
    if arr.dtype != np.uint8:
        arr = np.clip(np.round(arr * 255.0), 0, 255).astype(np.uint8)
    PILImage.fromarray(arr, mode="RGB").save(path, format="PNG")


def load_truth(path) -> np.ndarray:
    path = Path(path)
    if not path.exists():
        raise DataError(f"truth file not found: {path}")
    try:
        with PILImage.open(path) as im:
            if im.mode not in ("L", "P", "I"):
                im = im.convert("L")
            arr = np.asarray(im, dtype=np.int64)
    except Exception as exc:
        raise DataError(f"cannot read truth map {path}: {exc}") from exc
    if arr.min() < 0:
        raise DataError("truth map has negative labels")
    return arr


def save_truth_png(path, truth: np.ndarray):
    arr = np.asarray(truth)
    if arr.max() > 255:
        raise DataError("truth labels above 255 do not fit an 8-bit PNG")
    PILImage.fromarray(arr.astype(np.uint8), mode="L").save(path, format="PNG")


def load_train_csv(path) -> list:
    """Training spec rows (pixel_x, pixel_y, class_label)."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"training spec not found: {path}")
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise DataError("training spec is empty")
        expect = ["pixel_x", "pixel_y", "class_label"]
        if [h.strip() for h in header] != expect:
            raise DataError(f"training spec header must be {expect}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                x, y, lab = int(row[0]), int(row[1]), int(row[2])
            except (ValueError, IndexError) as exc:
                raise DataError(f"training spec line {lineno}: {exc}") from exc
            if lab < 1:
                raise DataError(f"training spec line {lineno}: label must be >= 1")
            rows.append((x, y, lab))
    if not rows:
        raise DataError("training spec contains no samples")
    return rows


def save_train_csv(path, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["pixel_x", "pixel_y", "class_label"])
        for x, y, lab in rows:
            writer.writerow([int(x), int(y), int(lab)])


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def write_csv(path, header, rows):
    """CSV writer with repr-based float formatting (round-trip stable)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) if isinstance(v, (int, float, np.integer,
                                                       np.floating)) else v
                             for v in row])


def save_partition(png_path, csv_path, part: Partition):
    """Superpixel ids in 24-bit RGB plus an exact CSV sidecar."""
    if part.n > 0xFFFFFF:
        raise DataError("too many superpixels for 24-bit id encoding")
    ids = part.assignment.astype(np.uint32)
    rgb = np.stack([(ids >> 16) & 0xFF, (ids >> 8) & 0xFF, ids & 0xFF],
                   axis=2).astype(np.uint8)
    PILImage.fromarray(rgb, mode="RGB").save(png_path, format="PNG")
    write_csv(csv_path, ["pixel_index", "superpixel_id"],
              list(enumerate(part.assignment.ravel().tolist())))


def load_partition_csv(path, shape, scale_index: int = 1) -> Partition:
    assign = np.empty(shape[0] * shape[1], dtype=np.int32)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        next(reader)
        count = 0
        for row in reader:
            assign[int(row[0])] = int(row[1])
            count += 1
    if count != assign.size:
        raise DataError("partition CSV does not cover every pixel")
    return Partition(scale_index=scale_index,
                     assignment=assign.reshape(shape),
                     n=int(assign.max()) + 1)


def save_graph_csv(path, graph):
    edges, weights, kinds = graph.all_edges()
    nodes = graph.nodes
    rows = []
    for (a, b), w, kind in zip(edges, weights, kinds):
        sa, ia = nodes[a]
        sb, ib = nodes[b]
        rows.append([sa, ia, sb, ib, w, kind])
    write_csv(path, ["node_a_scale", "node_a_id", "node_b_scale", "node_b_id",
                     "weight", "kind"], rows)


def save_labeling_csv(path, scale: int, labels, base_labels):
    rows = [[scale, i, int(lab), int(base)]
            for i, (lab, base) in enumerate(zip(labels, base_labels))]
    write_csv(path, ["scale", "superpixel_id", "label", "base_label"], rows)


def load_labeling_csv(path):
    """Returns (scales, superpixel_ids, labels, base_labels) arrays."""
    cols = ([], [], [], [])
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        next(reader)
        for row in reader:
            for c, v in zip(cols, row):
                c.append(int(v))
    return tuple(np.array(c, dtype=np.int64) for c in cols)


def save_risks_csv(path, graph, risks: np.ndarray):
    n_plus_1 = risks.shape[1]
    header = ["scale", "superpixel_id"] + [f"r_{k}" for k in
                                           range(1, n_plus_1 + 1)]
    rows = []
    for (scale, sp), row in zip(graph.nodes, risks):
        rows.append([scale, sp] + [float(v) for v in row])
    write_csv(path, header, rows)


def save_features_csv(path, values: np.ndarray):
    m = values.shape[1]
    header = ["superpixel_id"] + [f"f_{k}" for k in range(1, m + 1)]
    rows = [[i] + [float(v) for v in row] for i, row in enumerate(values)]
    write_csv(path, header, rows)


def save_regressor(out_dir, reg: Regressor, lam: float, seed: int):
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_csv(out_dir / "regressor_w.csv",
              [f"w_{c}" for c in range(1, reg.num_classes + 1)],
              [[float(v) for v in row] for row in reg.W])
    write_csv(out_dir / "regressor_train_features.csv",
              [f"f_{k}" for k in range(1, reg.train_features.shape[1] + 1)],
              [[float(v) for v in row] for row in reg.train_features])
    meta = (f"bandwidth = {reg.bandwidth!r}\nlambda = {lam!r}\n"
            f"seed = {seed}\nnum_classes = {reg.num_classes}\n")
    (out_dir / "regressor_meta.txt").write_text(meta)


def load_regressor(out_dir) -> Regressor:
    out_dir = Path(out_dir)

    def read_matrix(name):
        with open(out_dir / name, newline="") as fh:
            reader = csv.reader(fh)
            next(reader)
            return np.array([[float(v) for v in row] for row in reader])

    meta = {}
    for line in (out_dir / "regressor_meta.txt").read_text().splitlines():
        key, _, val = line.partition("=")
        meta[key.strip()] = val.strip()
    W = read_matrix("regressor_w.csv")
    feats = read_matrix("regressor_train_features.csv")
    if feats.size == 0:
        feats = feats.reshape(0, max(0, W.shape[0] - 1))
    return Regressor(W=W, train_features=feats,
                     bandwidth=float(meta["bandwidth"]))


def sha256_of(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(65536), b""):
            digest.update(block)
    return digest.hexdigest()
