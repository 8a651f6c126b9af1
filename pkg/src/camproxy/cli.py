"""Command-line surface: gen, train, eval, labels, project.

Every subcommand that produces a report also renders companion PNG figures
next to the delimited output unless ``--no-figures`` is given.  Exit codes:
0 on success, 2 on usage errors (bad flags, missing files), 1 on any other
pipeline error.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from .clustering import dbscan, filter_reliable
from .data import LoadError, load_dataset, save_dataset
from .encoder import AffineEncoder, load_encoder, save_encoder
from .evaluate import evaluate, per_query_ap, save_eval_json, save_per_query_ap_csv
from .metric import jaccard_distance
from .proxies import save_labeling_csv, split_by_camera
from .synth import SynthSpec, generate
from .train import TrainConfig, config_from_json, run_training


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="camproxy",
        description="Camera-aware proxy training loop on feature datasets",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="generate a synthetic camera-shifted dataset")
    gen.add_argument("--ids", type=int, default=100)
    gen.add_argument("--cameras", type=int, default=4)
    gen.add_argument("--images-low", type=int, default=6)
    gen.add_argument("--images-high", type=int, default=10)
    gen.add_argument("--dim", type=int, default=16)
    gen.add_argument("--id-separation", type=float, default=1.0)
    gen.add_argument("--camera-shift", type=float, default=0.7)
    gen.add_argument("--noise-sigma", type=float, default=0.08)
    gen.add_argument("--missing-camera-prob", type=float, default=0.0)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--format", choices=("csv", "binary"), default="csv")
    gen.add_argument("--out", required=True, help="output directory")

    train = sub.add_parser("train", help="train an encoder on a dataset")
    train.add_argument("--data", required=True)
    train.add_argument("--config", help="JSON config file mirroring TrainConfig")
    train.add_argument("--out", required=True, help="output directory")
    train.add_argument("--format", choices=("csv", "binary"), default="csv")
    train.add_argument("--epochs", type=int)
    train.add_argument("--seed", type=int)
    train.add_argument("--lr", type=float)
    train.add_argument("--mode", choices=("cap", "baseline"))
    train.add_argument("--no-figures", action="store_true")

    ev = sub.add_parser("eval", help="evaluate a checkpoint on query/gallery splits")
    ev.add_argument("--checkpoint", required=True)
    ev.add_argument("--query", required=True)
    ev.add_argument("--gallery", required=True)
    ev.add_argument("--format", choices=("csv", "binary"), default="csv")
    ev.add_argument("--out", help="write the result JSON here (also printed)")
    ev.add_argument("--per-query", help="write per-query AP CSV here")

    labels = sub.add_parser("labels", help="one-shot clustering and proxy labeling dump")
    labels.add_argument("--data", required=True)
    labels.add_argument("--format", choices=("csv", "binary"), default="csv")
    labels.add_argument("--checkpoint", help="embed with this encoder first")
    labels.add_argument("--eps", type=float, default=0.5)
    labels.add_argument("--min-pts", type=int, default=4)
    labels.add_argument("--min-cluster-size", type=int, default=2)
    labels.add_argument("--k1", type=int, default=30)
    labels.add_argument("--k2", type=int, default=6)
    labels.add_argument("--out", required=True, help="output CSV path")

    proj = sub.add_parser("project", help="dump 2-D PCA coordinates for plotting")
    proj.add_argument("--data", required=True)
    proj.add_argument("--format", choices=("csv", "binary"), default="csv")
    proj.add_argument("--checkpoint", help="embed with this encoder first")
    proj.add_argument("--out", required=True, help="output CSV path")
    proj.add_argument("--no-figures", action="store_true")
    return parser


def _embed(dataset, checkpoint: str | None) -> np.ndarray:
    if checkpoint:
        encoder = load_encoder(checkpoint)
    else:
        encoder = AffineEncoder.identity(dataset.dim)
    out, _ = encoder.forward(dataset.features)
    return out


def _cmd_gen(args) -> int:
    spec = SynthSpec(
        num_ids=args.ids,
        num_cameras=args.cameras,
        images_per_id_per_camera=(args.images_low, args.images_high),
        d_in=args.dim,
        id_separation=args.id_separation,
        camera_shift=args.camera_shift,
        noise_sigma=args.noise_sigma,
        missing_camera_prob=args.missing_camera_prob,
        seed=args.seed,
    )
    train_set, query, gallery = generate(spec)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    ext = "csv" if args.format == "csv" else "bin"
    for name, part in (("train", train_set), ("query", query), ("gallery", gallery)):
        save_dataset(part, out / f"{name}.{ext}", format=args.format)
        print(f"wrote {out / f'{name}.{ext}'} ({part.num_instances} instances)")
    return 0


def _cmd_train(args) -> int:
    overrides = {
        "epochs": args.epochs,
        "seed": args.seed,
        "lr": args.lr,
        "mode": args.mode,
    }
    if args.config:
        config = config_from_json(args.config, **overrides)
    else:
        config = TrainConfig(**{k: v for k, v in overrides.items() if v is not None})
    dataset = load_dataset(args.data, format=args.format)
    encoder, report = run_training(dataset, config)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_encoder(encoder, out / "enc.bin")
    report.to_csv(out / "report.csv")
    report.to_summary_json(out / "summary.json", config)
    print(f"wrote {out / 'enc.bin'}, {out / 'report.csv'}, {out / 'summary.json'}")
    if not args.no_figures and report.records:
        from .figures import render_training_curves

        fig = render_training_curves(report, out / "report.png")
        print(f"wrote {fig}")
    return 0


def _cmd_eval(args) -> int:
    encoder = load_encoder(args.checkpoint)
    query = load_dataset(args.query, format=args.format)
    gallery = load_dataset(args.gallery, format=args.format)
    result = evaluate(query, gallery, encoder)
    print(json.dumps(result.to_dict(), indent=2))
    if args.out:
        save_eval_json(result, args.out)
    if args.per_query:
        aps, evaluated, _ = per_query_ap(query, gallery, encoder)
        save_per_query_ap_csv(query, aps, evaluated, args.per_query)
    return 0


def _cmd_labels(args) -> int:
    dataset = load_dataset(args.data, format=args.format)
    embeddings = _embed(dataset, args.checkpoint)
    dist = jaccard_distance(embeddings, k1=args.k1, k2=args.k2)
    assignment = filter_reliable(
        dbscan(dist, eps=args.eps, min_pts=args.min_pts), args.min_cluster_size
    )
    labeling = split_by_camera(assignment, dataset)
    save_labeling_csv(labeling, dataset, assignment, args.out)
    print(
        f"wrote {args.out}: {assignment.num_clusters} clusters, "
        f"{labeling.num_proxies} proxies, {assignment.num_outliers} outliers"
    )
    return 0


def _cmd_project(args) -> int:
    dataset = load_dataset(args.data, format=args.format)
    embeddings = _embed(dataset, args.checkpoint)
    centered = embeddings - embeddings.mean(axis=0)
    _, _, vt = np.linalg.svd(centered, full_matrices=False)
    components = vt[:2]
    # deterministic sign: largest-magnitude loading is positive
    for row in components:
        pivot = np.argmax(np.abs(row))
        if row[pivot] < 0:
            row *= -1.0
    coords = centered @ components.T

    with open(args.out, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["key", "camera", "true_id", "pc1", "pc2"])
        for i in range(dataset.num_instances):
            true = int(dataset.true_ids[i]) if dataset.true_ids is not None else ""
            writer.writerow(
                [
                    dataset.instance_keys[i],
                    int(dataset.camera_ids[i]),
                    true,
                    repr(float(coords[i, 0])),
                    repr(float(coords[i, 1])),
                ]
            )
    print(f"wrote {args.out}")
    if not args.no_figures:
        from .figures import render_projection

        fig_path = Path(args.out).with_suffix(".png")
        render_projection(coords, dataset.camera_ids, dataset.true_ids, fig_path)
        print(f"wrote {fig_path}")
    return 0


_COMMANDS = {
    "gen": _cmd_gen,
    "train": _cmd_train,
    "eval": _cmd_eval,
    "labels": _cmd_labels,
    "project": _cmd_project,
}


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return _COMMANDS[args.command](args)
    except FileNotFoundError as exc:
        print(f"error: missing file: {exc}", file=sys.stderr)
        return 2
    except (LoadError, ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def entry() -> None:
    raise SystemExit(main())
