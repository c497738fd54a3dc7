"""Command-line entry point exposing the whole pipeline as subcommands.

Every command takes a JSON experiment config via --config (defaults apply
otherwise) and honors --seed overrides; a single seed drives all randomness
through named child streams (see :mod:`stagetl.seeding`). Failures print one
machine-parsable line ``error category=<cat>: <message>`` and exit nonzero.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import synth
from .data.manifest import CLASS_KEYS, load_manifest
from .data.patches import extract_all, read_patch_store, write_patch_store
from .data.split import split as split_records
from .data.whitening import compute_whitening_stats
from .embed import extract_features, pca_project, separability_report, write_embedding_csv
from .errors import StageTLError, UsageError
from .metrics import aggregate, MetricsReport
from .nn.checkpoint import read_checkpoint
from .nn.gradcheck import DEFAULT_TOL, layer_suite
from .nn.model import ArchitectureConfig, Model
from .pipeline.config import ExperimentConfig
from .pipeline.matrix import run_experiment_matrix, write_matrix_report
from .pipeline.prepare import prepare
from .pipeline.rundir import write_runtime_sidecar, write_stage_run_dir
from .pipeline.stages import run_hetl, run_hotl, run_scratch, run_stage0_pretrain
from .pipeline.train import evaluate_metrics

EXIT_BY_CATEGORY = {"usage": 2, "config": 3, "data": 4, "format": 5,
                    "contract": 6, "numerics": 7, "internal": 9}


def _load_config(args) -> ExperimentConfig:
    cfg = ExperimentConfig.load(args.config) if args.config else ExperimentConfig()
    if getattr(args, "seed", None) is not None:
        cfg = cfg.with_seed(args.seed)
    return cfg


def _records(args, cfg, dataset: str):
    path = Path(args.data) / f"manifest_{dataset.lower()}.csv"
    return load_manifest(path)


def cmd_synth_gen(args) -> int:
    cfg = _load_config(args)
    spec = cfg.synth
    if args.seed is not None:
        spec = replace(spec, seed=args.seed)
    summary = synth.generate(spec, args.out)
    print(json.dumps(summary["domains"], sort_keys=True))
    return 0


def cmd_patchify(args) -> int:
    records = load_manifest(args.manifest)
    cfg = _load_config(args)
    patches = extract_all(records, cfg.pipeline.patch_edge, cfg.pipeline.max_overlap)
    index = write_patch_store(args.out, patches)
    print(f"{len(patches)} patches -> {index}")
    return 0


def cmd_split(args) -> int:
    cfg = _load_config(args)
    records = load_manifest(args.manifest, load_pixels=False)
    manifest = split_records(records, cfg.pipeline.split_ratio, cfg.seed,
                             config_hash=cfg.config_hash())
    patches = None
    if args.patches:
        tag = records[0].dataset_tag if records else "A"
        patches = read_patch_store(args.patches, tag)
        manifest = manifest.with_patches(patches)
    manifest.save(args.out)
    n_train = sum(1 for s in manifest.fragment_to_split.values() if s == "train")
    print(f"{n_train}/{len(manifest.fragment_to_split)} fragments in train -> {args.out}")
    return 0


def cmd_stats(args) -> int:
    cfg = _load_config(args)
    from .data.split import SplitManifest

    manifest = SplitManifest.load(args.split)
    patches = read_patch_store(args.patches, args.dataset)
    train_ids = set(manifest.train_patches)
    train = [p for p in patches if p.patch_id in train_ids]
    stats = compute_whitening_stats(train, args.dataset, "train",
                                    config_hash=cfg.config_hash())
    stats.save(args.out, seed=cfg.seed)
    print(f"mean={stats.mean} std={stats.std} -> {args.out}")
    return 0


def _write_stage(args, cfg, result, stage: str) -> None:
    out = Path(args.out)
    started = time.time()
    write_stage_run_dir(out, config={"stage": stage, "seed": cfg.seed,
                                     "experiment": cfg.to_dict()}, result=result)
    write_runtime_sidecar(out, started)
    if result.eval_metrics is not None:
        print(f"{stage}: test accuracy {result.eval_metrics.accuracy:.4f} -> {out}")
    else:
        print(f"{stage}: checkpoint -> {out}")


def cmd_train(args) -> int:
    cfg = _load_config(args)
    stage = args.stage
    if stage == "stage0":
        generic = synth.generic_textures(cfg.stage0.n_classes, cfg.stage0.per_class,
                                         cfg.pipeline.patch_edge, seed=cfg.seed)
        result = run_stage0_pretrain(cfg.arch, generic,
                                     replace(cfg.stage0.train, seed=cfg.seed))
    elif stage == "scratch":
        records = _records(args, cfg, args.dataset)
        data = prepare(records, args.dataset, args.subset, cfg.pipeline,
                       CLASS_KEYS[args.dataset], cfg.seed)
        result = run_scratch(cfg.arch, data, replace(cfg.scratch_train, seed=cfg.seed))
    else:
        raise UsageError(f"train handles stages scratch|stage0, not {stage!r}")
    _write_stage(args, cfg, result, stage)
    return 0


def cmd_transfer(args) -> int:
    cfg = _load_config(args)
    if args.stage == "hetl":
        source = read_checkpoint(args.from_checkpoint) if args.from_checkpoint else None
        records = _records(args, cfg, args.dataset or "A")
        data = prepare(records, args.dataset or "A", args.subset, cfg.pipeline,
                       CLASS_KEYS[args.dataset or "A"], cfg.seed)
        result = run_hetl(source, data, cfg.arch,
                          replace(cfg.hetl_train, seed=cfg.seed))
    elif args.stage == "hotl":
        if not args.from_checkpoint:
            raise UsageError("transfer --stage hotl needs --from-checkpoint: the second "
                             "stage starts from the first stage's weights")
        source = read_checkpoint(args.from_checkpoint)
        records = _records(args, cfg, args.dataset or "B")
        data = prepare(records, args.dataset or "B", args.subset, cfg.pipeline,
                       CLASS_KEYS[args.dataset or "B"], cfg.seed)
        result = run_hotl(source, data, replace(cfg.hotl_train, seed=cfg.seed))
    else:
        raise UsageError(f"transfer handles stages hetl|hotl, not {args.stage!r}")
    _write_stage(args, cfg, result, args.stage)
    return 0


def cmd_matrix(args) -> int:
    cfg = _load_config(args)
    result = run_experiment_matrix(cfg, args.data, n_runs=args.runs, out_dir=args.out)
    print((Path(args.out) / "report.txt").read_text())
    return 0 if not result.failures else 1


def cmd_evaluate(args) -> int:
    cfg = _load_config(args)
    ckpt = read_checkpoint(args.checkpoint)
    arch = ArchitectureConfig.from_dict(ckpt.metadata["arch"])
    model = Model(arch, init_seed=0)
    model.load_state(ckpt.params, ckpt.buffers)
    records = _records(args, cfg, args.dataset)
    data = prepare(records, args.dataset, args.subset, cfg.pipeline,
                   CLASS_KEYS[args.dataset], cfg.seed)
    mv, cm, ev = evaluate_metrics(model, data.test, data.class_keys)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "metrics.json").write_text(json.dumps(mv.as_dict(), sort_keys=True,
                                                 indent=2) + "\n")
    report = aggregate([mv], strategy=ckpt.metadata.get("stage", "?"),
                       subset=args.subset, dataset=args.dataset)
    (out / "report.json").write_text(report.to_json())
    print(f"accuracy={mv.accuracy:.4f} precision={mv.precision:.4f} "
          f"recall={mv.recall:.4f} f1={mv.f1:.4f}")
    return 0


def cmd_features(args) -> int:
    cfg = _load_config(args)
    ckpt = read_checkpoint(args.checkpoint)
    arch = ArchitectureConfig.from_dict(ckpt.metadata["arch"])
    model = Model(arch, init_seed=0)
    model.load_state(ckpt.params, ckpt.buffers)
    records = _records(args, cfg, args.dataset)
    data = prepare(records, args.dataset, args.subset, cfg.pipeline,
                   CLASS_KEYS[args.dataset], cfg.seed)
    x = np.ascontiguousarray(data.test.x.transpose(0, 3, 1, 2))
    keys = tuple(data.class_keys[i] for i in data.test.y)
    fm = extract_features(model, x, data.test.patch_ids, keys, data.test.views)
    pca = pca_project(fm.values, k=2)
    write_embedding_csv(args.out, fm, pca)
    rep = separability_report(pca.embedding, data.test.y)
    print(f"silhouette={rep.silhouette:.4f} -> {args.out}")
    return 0


def cmd_report(args) -> int:
    reports = [MetricsReport.from_json(Path(p).read_text()) for p in args.runs]
    merged = aggregate([m for r in reports for m in r.per_run],
                       strategy=reports[0].strategy, subset=reports[0].subset,
                       dataset=reports[0].dataset)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(merged.to_json())
    cells = "  ".join(f"{name}={merged.cell(name)}" for name in
                      ("accuracy", "precision", "recall", "f1"))
    (out / "report.txt").write_text(cells + "\n")
    print(cells)
    return 0


def cmd_gradcheck(args) -> int:
    results = layer_suite(seed=args.seed or 0, n_coords=args.coords)
    worst_name = max(results, key=results.get)
    for name, err in results.items():
        status = "ok" if err < args.tol else "FAIL"
        print(f"{name:24s} worst_rel_err={err:.3e}  {status}")
    if results[worst_name] >= args.tol:
        print(f"worst: {worst_name} at {results[worst_name]:.3e} >= {args.tol}")
        return 1
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stagetl",
        description="staged transfer-learning experiments on patch classifiers")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, *, config=True, seed=True):
        if config:
            p.add_argument("--config", help="experiment config JSON")
        if seed:
            p.add_argument("--seed", type=int, help="override the base seed")

    p = sub.add_parser("synth-gen", help="generate the two-domain synthetic benchmark")
    common(p)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_synth_gen)

    p = sub.add_parser("patchify", help="extract grid patches into a patch store")
    common(p)
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_patchify)

    p = sub.add_parser("split", help="fragment-level train/test split")
    common(p)
    p.add_argument("--manifest", required=True)
    p.add_argument("--patches", help="patch store to enumerate patch ids from")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_split)

    p = sub.add_parser("stats", help="whitening statistics of a training split")
    common(p)
    p.add_argument("--patches", required=True)
    p.add_argument("--split", required=True)
    p.add_argument("--dataset", default="A", choices=("A", "B"))
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_stats)

    p = sub.add_parser("train", help="train from scratch or pretrain the backbone")
    common(p)
    p.add_argument("--stage", default="scratch", choices=("scratch", "stage0"))
    p.add_argument("--data", help="benchmark directory (manifest_a/b.csv)")
    p.add_argument("--dataset", default="A", choices=("A", "B"))
    p.add_argument("--subset", default="mixed", choices=("surface", "section", "mixed"))
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("transfer", help="run a transfer stage (hetl or hotl)")
    common(p)
    p.add_argument("--stage", required=True, choices=("hetl", "hotl"))
    p.add_argument("--from-checkpoint", dest="from_checkpoint")
    p.add_argument("--data", required=True)
    p.add_argument("--dataset", choices=("A", "B"))
    p.add_argument("--subset", default="mixed", choices=("surface", "section", "mixed"))
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_transfer)

    p = sub.add_parser("matrix", help="full strategy-by-subset experiment matrix")
    common(p)
    p.add_argument("--data", required=True)
    p.add_argument("--runs", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_matrix)

    p = sub.add_parser("evaluate", help="evaluate a checkpoint on a dataset subset")
    common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--dataset", default="B", choices=("A", "B"))
    p.add_argument("--subset", default="mixed", choices=("surface", "section", "mixed"))
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_evaluate)

    p = sub.add_parser("features", help="export penultimate features as a 2-D embedding CSV")
    common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--dataset", default="B", choices=("A", "B"))
    p.add_argument("--subset", default="mixed", choices=("surface", "section", "mixed"))
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_features)

    p = sub.add_parser("report", help="aggregate per-run metrics JSONs into one table cell")
    p.add_argument("--runs", nargs="+", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_report)

    p = sub.add_parser("gradcheck", help="finite-difference check of every layer type")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--coords", type=int, default=10)
    p.add_argument("--tol", type=float, default=DEFAULT_TOL)
    p.set_defaults(fn=cmd_gradcheck)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except StageTLError as exc:
        print(f"error category={exc.category}: {exc}", file=sys.stderr)
        return EXIT_BY_CATEGORY.get(exc.category, 9)
    except FileNotFoundError as exc:
        print(f"error category=data: {exc}", file=sys.stderr)
        return EXIT_BY_CATEGORY["data"]


if __name__ == "__main__":
    sys.exit(main())
