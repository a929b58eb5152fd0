"""End-to-end orchestration: segment, featurize, train, classify, label.

`run_stages` does the computation on arrays and returns every intermediate
product; `run_pipeline` wraps it with file I/O, artifact writing and a run
manifest.  Both are deterministic given config, inputs and seed.
"""

from __future__ import annotations

import colorsys
import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import dataio
from .classifier import (TrainingSet, lorsal_train, mlr_posterior_batch,
                         select_bandwidth)
from .core import (ConfigError, DataError, LabelSet, PipelineConfig,
                   build_cost_matrix, config_to_dict, config_to_text,
                   validate_config)
from .features import majority_label, pixel_features, superpixel_stats
from .inference import EnergyProblem, alpha_expansion, data_term_from_risks
from .metrics import confusion_counts, per_class_summary, summarize
from .msgraph import assemble_graph
from .risk import risk_table
from .segmentation import check_image, multiscale_partition


@dataclass
class StageResult:
    """Everything the pipeline computes, kept for reuse and inspection."""

    cfg: PipelineConfig
    labels: LabelSet
    parts: list
    graph: object
    app_features: np.ndarray        # (num_nodes, m), scale-major
    sim_features: list              # per-scale FeatureMatrix
    training: TrainingSet
    regressor: object
    posteriors: np.ndarray          # (num_nodes, N)
    risks: np.ndarray               # (num_nodes, N+1)
    labeling: np.ndarray            # (num_nodes,) labels in 1..N+1
    base_labeling: np.ndarray       # (num_nodes,) pre-rejection reference
    metrics: dict = None
    timings: dict = field(default_factory=dict)


def training_set_from_pixels(part, app_values: np.ndarray,
                             train_pixels) -> TrainingSet:
    """Map labeled pixels to finest-scale superpixels.

    Pixels landing in one superpixel collapse to the majority label, ties
    to the smallest label.
    """
    h, w = part.shape
    votes = {}
    for x, y, lab in train_pixels:
        if not (0 <= x < w and 0 <= y < h):
            raise DataError(f"training pixel ({x},{y}) outside the image")
        sp = int(part.assignment[y, x])
        votes.setdefault(sp, []).append(int(lab))
    indices, labels = [], []
    for sp in sorted(votes):
        counts = np.bincount(votes[sp])
        labels.append(int(counts[1:].argmax()) + 1)
        indices.append(sp)
    idx = np.array(indices, dtype=np.int64)
    return TrainingSet(indices=idx, labels=np.array(labels, dtype=np.int64),
                       features=app_values[idx])


def solve_labeling(risks: np.ndarray, graph, labels: LabelSet,
                   cfg: PipelineConfig, alpha: float = None,
                   max_cycles: int = None) -> np.ndarray:
    """Risk table to MAP labeling over the multiscale graph."""
    edges, weights, _ = graph.all_edges()
    prob = EnergyProblem(
        data_term=data_term_from_risks(risks, cfg.risk_floor),
        edges=edges, weights=weights, labels=labels,
        psi_c=cfg.psi_c, psi_r=cfg.psi_r,
        alpha=cfg.alpha if alpha is None else alpha)
    return alpha_expansion(
        prob, max_cycles=cfg.expansion_max_cycles if max_cycles is None
        else max_cycles)


def base_labeling_for(result_risks: np.ndarray, graph, labels: LabelSet,
                      cfg: PipelineConfig, posteriors: np.ndarray):
    """Reference labels used to judge correctness of rejected samples.

    ``context`` reruns the solver with the rejection cost forced to 1 (its
    data term keeps every class column, so rejection appears only when the
    smoothness term forces it); ``contextfree`` takes the class-column risk
    argmin per node.
    """
    if cfg.metrics_base == "contextfree":
        return np.argmin(result_risks[:, :-1], axis=1).astype(np.int64) + 1
    cm = build_cost_matrix(labels, g=cfg.g, rho=1.0)
    risks = risk_table(posteriors, cm)
    return solve_labeling(risks, graph, labels, cfg)


def evaluate_scale(result: StageResult, truth: np.ndarray,
                   scale: int = 1) -> dict:
    """Pixel-weighted metrics for one scale against pixel ground truth."""
    part = result.parts[scale - 1]
    maj = majority_label(part, truth)
    off = result.graph.node_offsets[scale]
    n = result.graph.scale_sizes[scale]
    pred = result.labeling[off:off + n]
    base = result.base_labeling[off:off + n]
    keep = maj > 0
    if not keep.any():
        raise DataError("ground truth labels no superpixel at this scale")
    weights = part.sizes().astype(float)
    counts = confusion_counts(pred[keep], base[keep], maj[keep],
                              result.labels.reject_label, weights[keep])
    out = summarize(counts)
    train_counts = {}
    for lab in result.training.labels.tolist():
        train_counts[lab] = train_counts.get(lab, 0) + 1
    out["per_class"] = per_class_summary(
        pred[keep], base[keep], maj[keep], result.labels.reject_label,
        result.labels.num_classes, weights=weights[keep],
        train_counts=train_counts)
    out["scale"] = scale
    out["evaluated_superpixels"] = int(keep.sum())
    return out


class _Stage:
    """Times a pipeline stage and tags escaping exceptions with its name."""

    def __init__(self, name, timings):
        self.name = name
        self.timings = timings

    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, exc_type, exc, tb):
        self.timings[self.name] = time.perf_counter() - self.t0
        if exc is not None and not hasattr(exc, "stage"):
            exc.stage = self.name
        return False


def run_stages(cfg: PipelineConfig, image: np.ndarray, truth=None,
               train_pixels=None, training=None, evaluate: bool = True,
               num_scales: int = None) -> StageResult:
    """Array-level pipeline; ``training`` overrides ``train_pixels``."""
    validate_config(cfg)
    timings = {}
    with _Stage("load", timings):
        image = check_image(image)
        if truth is not None:
            truth = np.asarray(truth)
            if truth.shape != image.shape[:2]:
                raise DataError("truth map shape does not match the image")
        mss = cfg.mss_list if num_scales is None else cfg.mss_list[:num_scales]
        if not mss:
            raise ConfigError("no scales selected")

    with _Stage("segment", timings):
        parts = multiscale_partition(image, mss, k=cfg.seg_k,
                                     sigma=cfg.seg_sigma)

    with _Stage("features", timings):
        app_img = pixel_features(image, "application", cfg.application_features)
        sim_img = pixel_features(image, "similarity")
        app_per_scale = [superpixel_stats(p, app_img, "application")
                         for p in parts]
        sim_per_scale = [superpixel_stats(p, sim_img, "similarity")
                         for p in parts]
        app_all = np.concatenate([fm.values for fm in app_per_scale])

    with _Stage("graph", timings):
        graph = assemble_graph(parts, sim_per_scale, cfg)

    with _Stage("train", timings):
        if training is None:
            if train_pixels is None:
                raise DataError("no training samples provided")
            training = training_set_from_pixels(
                parts[0], app_per_scale[0].values, train_pixels)
        inferred = int(training.labels.max())
        if truth is not None:
            inferred = max(inferred, int(truth.max()))
        labels = cfg.label_set(inferred)
        if training.labels.max() > labels.num_classes:
            raise DataError("training labels exceed the configured class count")
        bandwidth = select_bandwidth(training.features, app_all)
        regressor = lorsal_train(
            training, labels.num_classes, cfg.lam, bandwidth=bandwidth,
            max_outer=cfg.lorsal_max_outer, tol=cfg.lorsal_tol,
            mu=cfg.lorsal_mu, max_inner=cfg.lorsal_max_inner,
            inner_tol=cfg.lorsal_inner_tol)

    with _Stage("posterior", timings):
        posteriors = mlr_posterior_batch(regressor, app_all)

    with _Stage("risk", timings):
        cm = build_cost_matrix(labels, g=cfg.g, rho=cfg.rho)
        risks = risk_table(posteriors, cm)

    with _Stage("inference", timings):
        labeling = solve_labeling(risks, graph, labels, cfg)
        base = base_labeling_for(risks, graph, labels, cfg, posteriors)

    result = StageResult(cfg=cfg, labels=labels, parts=parts, graph=graph,
                         app_features=app_all, sim_features=sim_per_scale,
                         training=training, regressor=regressor,
                         posteriors=posteriors, risks=risks,
                         labeling=labeling, base_labeling=base,
                         timings=timings)
    if evaluate and truth is not None:
        with _Stage("metrics", timings):
            result.metrics = evaluate_scale(result, truth, scale=1)
    return result


def default_palette(num_classes: int) -> np.ndarray:
    """(N+1, 3) uint8 colors; the last row is the reserved reject black."""
    colors = []
    for i in range(num_classes):
        r, g, b = colorsys.hsv_to_rgb(i / max(num_classes, 1), 0.75, 0.9)
        colors.append((round(r * 255), round(g * 255), round(b * 255)))
    colors.append((0, 0, 0))
    return np.array(colors, dtype=np.uint8)


def render_label_map(scale_labels: np.ndarray, part,
                     palette: np.ndarray = None) -> np.ndarray:
    """Paint every pixel its superpixel's label color; reject is black."""
    labels = np.asarray(scale_labels, dtype=np.int64)
    if labels.shape[0] != part.n:
        raise DataError("label count does not match the partition")
    num_classes = labels.max() if palette is None else palette.shape[0] - 1
    if palette is None:
        palette = default_palette(int(num_classes))
    palette = np.asarray(palette, dtype=np.uint8)
    if (palette[:-1] == 0).all(axis=1).any():
        raise ConfigError("palette assigns black to a class; black is "
                          "reserved for rejection")
    if labels.max() > palette.shape[0]:
        raise DataError("labeling holds a label outside the palette")
    return palette[labels - 1][part.assignment]


@dataclass(frozen=True)
class RunManifest:
    """Provenance record: config, input digests, timings, output digests."""

    config: dict
    inputs: dict
    timings: dict
    outputs: dict
    seed: int

    def to_json(self) -> str:
        return json.dumps({
            "config": self.config,
            "inputs": self.inputs,
            "timings": self.timings,
            "outputs": self.outputs,
            "seed": self.seed,
        }, indent=2)


def run_pipeline(cfg: PipelineConfig, image_path, out_dir, truth_path=None,
                 train_path=None, training=None, evaluate: bool = True,
                 num_scales: int = None, write_figures: bool = True) -> RunManifest:
    """File-level pipeline: read inputs, run stages, write artifacts.

    On any stage failure the partially written outputs are removed and the
    original error propagates with a ``stage`` attribute attached.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    def _write(relname, writer):
        path = out / relname
        writer(path)
        written.append(relname)
        return path

    try:
        inputs = {}
        image = dataio.load_image(image_path)
        inputs["image"] = {"path": str(image_path),
                           "sha256": dataio.sha256_of(image_path)}
        truth = None
        if truth_path is not None:
            truth = dataio.load_truth(truth_path)
            inputs["truth"] = {"path": str(truth_path),
                               "sha256": dataio.sha256_of(truth_path)}
        train_pixels = None
        if train_path is not None:
            train_pixels = dataio.load_train_csv(train_path)
            inputs["train"] = {"path": str(train_path),
                               "sha256": dataio.sha256_of(train_path)}

        result = run_stages(cfg, image, truth=truth,
                            train_pixels=train_pixels, training=training,
                            evaluate=evaluate, num_scales=num_scales)

        t0 = time.perf_counter()
        _write("config_used.txt",
               lambda p: p.write_text(config_to_text(cfg)))
        palette = default_palette(result.labels.num_classes)
        for part in result.parts:
            s = part.scale_index
            off = result.graph.node_offsets[s]
            n = result.graph.scale_sizes[s]
            lab = result.labeling[off:off + n]
            base = result.base_labeling[off:off + n]
            _write(f"labeling_scale_{s}.csv",
                   lambda p, s=s, lab=lab, base=base:
                   dataio.save_labeling_csv(p, s, lab, base))
            img = render_label_map(lab, part, palette)
            _write(f"labelmap_scale_{s}.png",
                   lambda p, img=img: dataio.save_image_png(p, img))
        if result.metrics is not None:
            payload = dict(result.metrics)
            payload["config"] = config_to_dict(cfg)
            _write("metrics.json",
                   lambda p: p.write_text(json.dumps(payload, indent=2)))
        if write_figures:
            from .report import save_run_overview
            _write("overview.png",
                   lambda p: save_run_overview(p, image, truth, result,
                                               palette))
        result.timings["write"] = time.perf_counter() - t0

        outputs = {name: dataio.sha256_of(out / name) for name in written}
        manifest = RunManifest(config=config_to_dict(cfg), inputs=inputs,
                               timings=dict(result.timings), outputs=outputs,
                               seed=cfg.seed)
        (out / "manifest.json").write_text(manifest.to_json())
        return manifest
    except Exception:
        for name in written:
            try:
                (out / name).unlink()
            except OSError:
                pass
        raise
