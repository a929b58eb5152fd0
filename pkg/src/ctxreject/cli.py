"""Command line interface.

Subcommands: make-synthetic, segment, graph, train, classify, evaluate,
pipeline, sweep.  Exit codes: 0 success, 2 config error, 3 data error,
4 numerical failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from . import dataio
from .core import (ConfigError, DataError, NumericalError, PipelineConfig,
                   load_config, validate_config)
from .pipeline import default_palette, render_label_map, run_pipeline, \
    run_stages
from .segmentation import multiscale_partition


def _load_cfg(args) -> PipelineConfig:
    cfg = load_config(args.config) if args.config else PipelineConfig()
    overrides = {}
    for name in ("alpha", "rho", "seed"):
        val = getattr(args, name, None)
        if val is not None:
            overrides[name] = val
    if overrides:
        cfg = dataclasses.replace(cfg, **overrides)
    return validate_config(cfg)


def _scales(args):
    return getattr(args, "scales", None)


def cmd_make_synthetic(args):
    from .synthetic import make_synthetic, sample_training_pixels
    img, truth = make_synthetic(size=args.size, num_classes=args.classes,
                                noise_sigma=args.noise, seed=args.seed or 0,
                                layout=args.layout)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    dataio.save_image_png(out / "image.png", img)
    dataio.save_truth_png(out / "truth.png", truth)
    rows = sample_training_pixels(truth, args.train_per_class,
                                  seed=(args.seed or 0) + 1)
    dataio.save_train_csv(out / "train.csv", rows)
    print(f"wrote image.png, truth.png, train.csv to {out}")
    return 0


def cmd_segment(args):
    cfg = _load_cfg(args)
    img = dataio.load_image(args.image)
    mss = cfg.mss_list if _scales(args) is None else cfg.mss_list[:args.scales]
    parts = multiscale_partition(img, mss, k=cfg.seg_k, sigma=cfg.seg_sigma)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for part in parts:
        dataio.save_partition(out / f"partition_scale_{part.scale_index}.png",
                              out / f"partition_scale_{part.scale_index}.csv",
                              part)
        print(f"scale {part.scale_index}: {part.n} superpixels")
    return 0


def cmd_graph(args):
    cfg = _load_cfg(args)
    img = dataio.load_image(args.image)
    from .features import pixel_features, superpixel_stats
    from .msgraph import assemble_graph, validate_graph
    mss = cfg.mss_list if _scales(args) is None else cfg.mss_list[:args.scales]
    parts = multiscale_partition(img, mss, k=cfg.seg_k, sigma=cfg.seg_sigma)
    sim_img = pixel_features(img, "similarity")
    sims = [superpixel_stats(p, sim_img) for p in parts]
    graph = assemble_graph(parts, sims, cfg)
    errs = validate_graph(graph)
    if errs:
        raise DataError("graph invariants violated: " + "; ".join(errs))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    dataio.save_graph_csv(out / "graph.csv", graph)
    print(f"graph: {graph.num_nodes} nodes, "
          f"{len(graph.intrascale_weights)} intrascale and "
          f"{len(graph.interscale_weights)} interscale edges")
    return 0


def cmd_train(args):
    cfg = _load_cfg(args)
    result = run_stages(cfg, dataio.load_image(args.image),
                        train_pixels=dataio.load_train_csv(args.train),
                        evaluate=False, num_scales=_scales(args))
    out = Path(args.out)
    dataio.save_regressor(out, result.regressor, cfg.lam, cfg.seed)
    nnz = int((np.abs(result.regressor.W) > 1e-8).sum())
    print(f"trained on {len(result.training)} superpixels; "
          f"bandwidth {result.regressor.bandwidth:.4g}; nnz(W) = {nnz}")
    return 0


def cmd_classify(args):
    cfg = _load_cfg(args)
    manifest = run_pipeline(cfg, args.image, args.out,
                            train_path=args.train, evaluate=False,
                            num_scales=_scales(args))
    print(f"wrote {len(manifest.outputs)} artifacts to {args.out}")
    return 0


def cmd_evaluate(args):
    cfg = _load_cfg(args)
    from .features import majority_label
    from .metrics import confusion_counts, summarize
    img = dataio.load_image(args.image)
    truth = dataio.load_truth(args.truth)
    scales, ids, labels, bases = dataio.load_labeling_csv(args.labeling)
    scale = int(scales.min())
    sel = scales == scale
    mss = cfg.mss_list
    parts = multiscale_partition(img, mss[:scale], k=cfg.seg_k,
                                 sigma=cfg.seg_sigma)
    part = parts[scale - 1]
    if sel.sum() != part.n:
        raise DataError("labeling rows do not match the partition at "
                        f"scale {scale}")
    order = np.argsort(ids[sel])
    lab = labels[sel][order]
    base = bases[sel][order]
    maj = majority_label(part, truth)
    keep = maj > 0
    num_classes = cfg.num_classes or int(truth.max())
    counts = confusion_counts(lab[keep], base[keep], maj[keep],
                              num_classes + 1, part.sizes()[keep].astype(float))
    out = summarize(counts)
    text = json.dumps(out, indent=2)
    if args.out:
        Path(args.out).mkdir(parents=True, exist_ok=True)
        (Path(args.out) / "metrics.json").write_text(text)
    print(text)
    return 0


def cmd_pipeline(args):
    cfg = _load_cfg(args)
    manifest = run_pipeline(cfg, args.image, args.out,
                            truth_path=None if args.no_eval else args.truth,
                            train_path=args.train,
                            evaluate=not args.no_eval,
                            num_scales=_scales(args))
    print(f"wrote {len(manifest.outputs)} artifacts to {args.out}")
    if not args.no_eval and args.truth:
        payload = json.loads((Path(args.out) / "metrics.json").read_text())
        print(f"A={payload['A']:.4f} r={payload['r']:.4f} "
              f"Q={payload['Q']:.4f} phi={payload['phi']}")
    return 0


def cmd_sweep(args):
    cfg = _load_cfg(args)
    from .sweep import sweep, sweep_scales
    img = dataio.load_image(args.image)
    truth = dataio.load_truth(args.truth)
    if args.scale_counts:
        counts = [int(tok) for tok in args.scale_counts.split(",")]
        rows = sweep_scales(cfg, img, truth, counts, args.repeats, args.out,
                            n_train_per_class=args.train_per_class,
                            jobs=args.jobs)
    else:
        alphas = [float(tok) for tok in args.alphas.split(",")]
        rhos = [float(tok) for tok in args.rhos.split(",")]
        rows = sweep(cfg, img, truth, alphas, rhos, args.repeats, args.out,
                     n_train_per_class=args.train_per_class,
                     num_scales=_scales(args), jobs=args.jobs)
    print(f"{len(rows)} sweep rows written to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ctxreject",
        description="Superpixel classification with rejection and "
                    "multiscale context")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, image=True, truth=False, train=False, out=True):
        p.add_argument("--config", help="key = value config file")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--alpha", type=float, default=None,
                       help="override the contextual index")
        p.add_argument("--rho", type=float, default=None,
                       help="override the rejection threshold")
        p.add_argument("--scales", type=int, default=None,
                       help="use only the first k scales of mss_list")
        if image:
            p.add_argument("--image", required=True)
        if truth:
            p.add_argument("--truth", required=truth == "required")
        if train:
            p.add_argument("--train", required=True,
                           help="CSV of pixel_x,pixel_y,class_label")
        if out:
            p.add_argument("--out", required=True)

    p = sub.add_parser("make-synthetic", help="generate a test image, truth "
                                              "map and training spec")
    p.add_argument("--out", required=True)
    p.add_argument("--size", type=int, default=256)
    p.add_argument("--classes", type=int, default=3)
    p.add_argument("--noise", type=float, default=0.15)
    p.add_argument("--layout", default="stripes",
                   choices=("stripes", "blocks"))
    p.add_argument("--train-per-class", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=cmd_make_synthetic)

    p = sub.add_parser("segment", help="oversegment at every scale")
    common(p)
    p.set_defaults(fn=cmd_segment)

    p = sub.add_parser("graph", help="build and export the multiscale graph")
    common(p)
    p.set_defaults(fn=cmd_graph)

    p = sub.add_parser("train", help="train the sparse kernel classifier")
    common(p, train=True)
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("classify", help="label an image without evaluation")
    common(p, train=True)
    p.set_defaults(fn=cmd_classify)

    p = sub.add_parser("evaluate", help="score a labeling CSV against truth")
    common(p, truth="required", out=False)
    p.add_argument("--labeling", required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(fn=cmd_evaluate)

    p = sub.add_parser("pipeline", help="run the full pipeline")
    common(p, truth=True, train=True)
    p.add_argument("--no-eval", action="store_true",
                   help="skip metrics even when truth is available")
    p.set_defaults(fn=cmd_pipeline)

    p = sub.add_parser("sweep", help="grid sweep over alpha and rho, or "
                                     "over scale counts")
    common(p, truth="required")
    p.add_argument("--alphas", default="0.0,0.29,0.58,0.87")
    p.add_argument("--rhos", default="0.3,0.46,0.7,1.0")
    p.add_argument("--repeats", type=int, default=10)
    p.add_argument("--train-per-class", type=int, default=10)
    p.add_argument("--scale-counts", default=None,
                   help="comma list; sweep scale counts instead of the grid")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(fn=cmd_sweep)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        stage = getattr(exc, "stage", None)
        where = f" (stage {stage})" if stage else ""
        print(f"config error{where}: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        stage = getattr(exc, "stage", None)
        where = f" (stage {stage})" if stage else ""
        print(f"data error{where}: {exc}", file=sys.stderr)
        return 3
    except NumericalError as exc:
        stage = getattr(exc, "stage", None)
        where = f" (stage {stage})" if stage else ""
        print(f"numerical failure{where}: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
