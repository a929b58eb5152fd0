"""Rendered figures for run reports and parameter sweeps.

Figures are written next to the delimited tables they summarize; everything
uses the Agg backend so runs stay headless.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .pipeline import render_label_map  # noqa: E402


def save_run_overview(path, image, truth, result, palette):
    """Grid of the input, optional truth and per-scale label maps."""
    panels = [("input", image)]
    if truth is not None:
        truth_img = palette[np.clip(truth, 1, None) - 1].astype(float) / 255.0
        truth_img[truth == 0] = 1.0
        panels.append(("ground truth", truth_img))
    for part in result.parts:
        s = part.scale_index
        off = result.graph.node_offsets[s]
        n = result.graph.scale_sizes[s]
        lab = result.labeling[off:off + n]
        panels.append((f"scale {s}", render_label_map(lab, part, palette)
                       .astype(float) / 255.0))
    cols = min(4, len(panels))
    rows = int(np.ceil(len(panels) / cols))
    fig, axes = plt.subplots(rows, cols, figsize=(3 * cols, 3 * rows),
                             squeeze=False)
    for ax in axes.ravel():
        ax.axis("off")
    for ax, (title, img) in zip(axes.ravel(), panels):
        ax.imshow(img, interpolation="nearest")
        ax.set_title(title, fontsize=9)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_quality_heatmap(path, alphas, rhos, mean_q, title="classification quality"):
    """Mean Q over the (alpha, rho) grid with contour overlay."""
    alphas = np.asarray(alphas, dtype=float)
    rhos = np.asarray(rhos, dtype=float)
    q = np.asarray(mean_q, dtype=float)   # shape (len(rhos), len(alphas))
    fig, ax = plt.subplots(figsize=(5.2, 4.2))
    im = ax.imshow(q, origin="lower", aspect="auto",
                   extent=(alphas.min(), alphas.max(),
                           rhos.min(), rhos.max()) if len(alphas) > 1
                   and len(rhos) > 1 else None,
                   cmap="viridis")
    if len(alphas) > 1 and len(rhos) > 1:
        cs = ax.contour(alphas, rhos, q, colors="white", linewidths=0.6)
        ax.clabel(cs, inline=True, fontsize=7, fmt="%.2f")
    ax.set_xlabel("contextual index alpha")
    ax.set_ylabel("rejection threshold rho")
    ax.set_title(title)
    fig.colorbar(im, ax=ax, label="mean Q")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_scales_curve(path, scale_counts, mean_q, std_q):
    """Mean quality against the number of graph scales."""
    fig, ax = plt.subplots(figsize=(5.0, 3.6))
    ax.errorbar(scale_counts, mean_q, yerr=std_q, marker="o", capsize=3)
    ax.set_xlabel("number of scales")
    ax.set_ylabel("mean Q")
    ax.set_xticks(list(scale_counts))
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
