"""Parameter sweeps over the contextual index, rejection threshold and scales.

Segmentation, features and the similarity graph depend only on the image and
config, so they are computed once and shared; every repeat draws a fresh
training set (seed + repeat index) and is otherwise an isolated pipeline
instance.  Repeats can run in a process pool.
"""

from __future__ import annotations

import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import dataio
from .classifier import TrainingSet, lorsal_train, mlr_posterior_batch, \
    select_bandwidth
from .core import ConfigError, PipelineConfig, build_cost_matrix, \
    config_to_dict
from .features import pixel_features, superpixel_stats
from .metrics import confusion_counts, summarize
from .features import majority_label
from .msgraph import assemble_graph
from .pipeline import solve_labeling
from .risk import risk_table
from .segmentation import multiscale_partition
from .synthetic import sample_training_superpixels


@dataclass
class _Shared:
    cfg: PipelineConfig
    truth: np.ndarray
    parts: list
    graph: object
    app_all: np.ndarray
    finest_majority: np.ndarray
    finest_weights: np.ndarray


def _prepare(cfg: PipelineConfig, image: np.ndarray, truth: np.ndarray,
             num_scales=None) -> _Shared:
    mss = cfg.mss_list if num_scales is None else cfg.mss_list[:num_scales]
    parts = multiscale_partition(image, mss, k=cfg.seg_k, sigma=cfg.seg_sigma)
    app_img = pixel_features(image, "application", cfg.application_features)
    sim_img = pixel_features(image, "similarity")
    app_all = np.concatenate([superpixel_stats(p, app_img).values
                              for p in parts])
    sims = [superpixel_stats(p, sim_img) for p in parts]
    graph = assemble_graph(parts, sims, cfg)
    return _Shared(cfg=cfg, truth=truth, parts=parts, graph=graph,
                   app_all=app_all,
                   finest_majority=majority_label(parts[0], truth),
                   finest_weights=parts[0].sizes().astype(float))


def _metrics_row(shared: _Shared, labels, labeling, base_labeling):
    off = shared.graph.node_offsets[1]
    n = shared.graph.scale_sizes[1]
    maj = shared.finest_majority
    keep = maj > 0
    counts = confusion_counts(labeling[off:off + n][keep],
                              base_labeling[off:off + n][keep],
                              maj[keep], labels.reject_label,
                              shared.finest_weights[keep])
    return summarize(counts)


def _run_repeat(shared: _Shared, repeat: int, alphas, rhos,
                n_train_per_class: int):
    """All (alpha, rho) grid points for one Monte Carlo training draw."""
    cfg = shared.cfg
    seed = cfg.seed + repeat
    idx, labs = sample_training_superpixels(shared.parts[0], shared.truth,
                                            n_train_per_class, seed=seed)
    training = TrainingSet(indices=idx, labels=labs,
                           features=shared.app_all[idx])
    labels = cfg.label_set(max(int(labs.max()), int(shared.truth.max())))
    bandwidth = select_bandwidth(training.features, shared.app_all)
    reg = lorsal_train(training, labels.num_classes, cfg.lam,
                       bandwidth=bandwidth, max_outer=cfg.lorsal_max_outer,
                       tol=cfg.lorsal_tol, mu=cfg.lorsal_mu,
                       max_inner=cfg.lorsal_max_inner,
                       inner_tol=cfg.lorsal_inner_tol)
    posteriors = mlr_posterior_batch(reg, shared.app_all)

    rows = []
    rho_one_risks = risk_table(posteriors,
                               build_cost_matrix(labels, g=cfg.g, rho=1.0))
    for alpha in alphas:
        if cfg.metrics_base == "contextfree":
            base_labeling = np.argmin(rho_one_risks[:, :-1], axis=1) + 1
        else:
            base_labeling = solve_labeling(rho_one_risks, shared.graph,
                                           labels, cfg, alpha=alpha)
        for rho in rhos:
            risks = risk_table(posteriors,
                               build_cost_matrix(labels, g=cfg.g, rho=rho))
            labeling = solve_labeling(risks, shared.graph, labels, cfg,
                                      alpha=alpha)
            m = _metrics_row(shared, labels, labeling, base_labeling)
            rows.append({"alpha": alpha, "rho": rho, "repeat": repeat,
                         "seed": seed, **m})
    return rows


def _phi_csv(value):
    if value is None:
        return ""
    if value == "inf":
        return "inf"
    return value


def sweep(cfg: PipelineConfig, image: np.ndarray, truth: np.ndarray,
          alphas, rhos, repeats: int, out_dir, n_train_per_class: int = 10,
          num_scales=None, jobs: int = 1) -> list:
    """Grid sweep; writes row and mean tables plus a quality heatmap."""
    alphas = [float(a) for a in alphas]
    rhos = [float(r) for r in rhos]
    if not alphas or not rhos or repeats < 1:
        raise ConfigError("sweep needs a nonempty grid and repeats >= 1")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    shared = _prepare(cfg, image, truth, num_scales)

    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(_run_repeat, shared, r, alphas, rhos,
                                   n_train_per_class)
                       for r in range(repeats)]
            all_rows = [row for f in futures for row in f.result()]
    else:
        all_rows = [row for r in range(repeats)
                    for row in _run_repeat(shared, r, alphas, rhos,
                                           n_train_per_class)]

    dataio.write_csv(
        out / "sweep.csv",
        ["alpha", "rho", "repeat", "seed", "A", "r", "Q", "phi"],
        [[row["alpha"], row["rho"], row["repeat"], row["seed"], row["A"],
          row["r"], row["Q"], _phi_csv(row["phi"])] for row in all_rows])

    mean_rows = []
    mean_q = np.zeros((len(rhos), len(alphas)))
    for j, rho in enumerate(rhos):
        for i, alpha in enumerate(alphas):
            sel = [row for row in all_rows
                   if row["alpha"] == alpha and row["rho"] == rho]
            qs = [row["Q"] for row in sel]
            mean_q[j, i] = float(np.mean(qs))
            mean_rows.append([
                alpha, rho, len(sel),
                float(np.mean([row["A"] for row in sel])),
                float(np.mean([row["r"] for row in sel])),
                mean_q[j, i],
                sum(1 for row in sel
                    if row["phi"] == "inf"
                    or (isinstance(row["phi"], float) and row["phi"] > 1.0)),
            ])
    dataio.write_csv(out / "sweep_mean.csv",
                     ["alpha", "rho", "runs", "mean_A", "mean_r", "mean_Q",
                      "runs_phi_gt_1"], mean_rows)

    from .report import save_quality_heatmap
    save_quality_heatmap(out / "quality_Q.png", alphas, rhos, mean_q)
    (out / "sweep_config.json").write_text(
        json.dumps({"config": config_to_dict(cfg), "alphas": alphas,
                    "rhos": rhos, "repeats": repeats,
                    "n_train_per_class": n_train_per_class}, indent=2))
    return all_rows


def sweep_scales(cfg: PipelineConfig, image: np.ndarray, truth: np.ndarray,
                 scale_counts, repeats: int, out_dir,
                 n_train_per_class: int = 10, jobs: int = 1) -> list:
    """Quality against the number of graph scales at the configured
    operating point; writes a row table, a mean table and a curve figure."""
    scale_counts = [int(c) for c in scale_counts]
    if not scale_counts or min(scale_counts) < 1 \
            or max(scale_counts) > len(cfg.mss_list):
        raise ConfigError("scale_counts must select prefixes of mss_list")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    all_rows = []
    for count in scale_counts:
        shared = _prepare(cfg, image, truth, num_scales=count)
        if jobs > 1:
            with ProcessPoolExecutor(max_workers=jobs) as pool:
                futures = [pool.submit(_run_repeat, shared, r, [cfg.alpha],
                                       [cfg.rho], n_train_per_class)
                           for r in range(repeats)]
                rows = [row for f in futures for row in f.result()]
        else:
            rows = [row for r in range(repeats)
                    for row in _run_repeat(shared, r, [cfg.alpha], [cfg.rho],
                                           n_train_per_class)]
        for row in rows:
            row["scales"] = count
        all_rows.extend(rows)

    dataio.write_csv(
        out / "scales_sweep.csv",
        ["scales", "repeat", "seed", "A", "r", "Q", "phi"],
        [[row["scales"], row["repeat"], row["seed"], row["A"], row["r"],
          row["Q"], _phi_csv(row["phi"])] for row in all_rows])
    means, stds = [], []
    mean_rows = []
    for count in scale_counts:
        qs = [row["Q"] for row in all_rows if row["scales"] == count]
        means.append(float(np.mean(qs)))
        stds.append(float(np.std(qs)))
        mean_rows.append([count, len(qs), means[-1], stds[-1]])
    dataio.write_csv(out / "scales_mean.csv",
                     ["scales", "runs", "mean_Q", "std_Q"], mean_rows)
    from .report import save_scales_curve
    save_scales_curve(out / "scales_Q.png", scale_counts, means, stds)
    return all_rows
