"""The strategy-by-subset experiment matrix and its table-shaped report.

Five strategies (baseline on A, baseline on B, first-stage transfer
evaluated on A, first-stage transfer evaluated on B, and the two-step chain
ending on B) are trained and evaluated per patch subset (surface / section /
mixed), repeated ``n_runs`` times with seeds ``base+1 .. base+n``, and
aggregated to mean +- sample std per metric.

Runs are independent; ``STAGE_TRANSFER_THREADS`` fans them out without
changing any cell's arithmetic (results are assembled in run order).
"""

from __future__ import annotations

import csv
import json
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from ..data.manifest import CLASS_KEYS, load_manifest
from ..embed import pca_project, silhouette_score
from ..metrics import METRIC_NAMES, CONVENTIONS, MetricsReport, MetricValues, aggregate
from ..seeding import child_seed
from ..synth import generic_textures
from .config import SUBSETS, ExperimentConfig
from .prepare import PreparedData, prepare
from .rundir import (write_config_snapshot, write_runtime_sidecar,
                     write_stage_run_dir)
from .stages import StageResult, run_hetl, run_hotl, run_scratch, run_stage0_pretrain

# (strategy label, evaluation dataset, human description) in table row order
STRATEGY_ROWS = (
    ("no_tl", "A", "baseline, trained on dataset A only"),
    ("no_tl", "B", "baseline, trained on dataset B only"),
    ("hetl_only", "A", "baseline + transfer from stage-0 weights, tuned on A"),
    ("hetl_only", "B", "baseline + transfer from stage-0 weights, tuned on B"),
    ("hetl_hotl", "B", "baseline + stage-0 transfer + transfer from dataset A"),
)

STRATEGY_LABELS = {"no_tl": "No TL", "hetl_only": "HeTL only", "hetl_hotl": "HeTL+HoTL"}


@dataclass
class CellOutcome:
    strategy: str
    dataset: str
    subset: str
    run: int
    metrics: MetricValues | None = None
    silhouette: float | None = None
    error: str | None = None


@dataclass
class MatrixResult:
    config: ExperimentConfig
    cells: list[CellOutcome]
    reports: dict[tuple[str, str, str], MetricsReport]  # (strategy, dataset, subset)
    failures: list[CellOutcome] = field(default_factory=list)


def _load_domains(benchmark_dir: Path):
    records_a = load_manifest(Path(benchmark_dir) / "manifest_a.csv")
    records_b = load_manifest(Path(benchmark_dir) / "manifest_b.csv")
    return records_a, records_b


def _features_silhouette(result: StageResult, data: PreparedData) -> float:
    feats = []
    x = data.test.x
    for start in range(0, len(x), 96):
        batch = np.ascontiguousarray(x[start : start + 96].transpose(0, 3, 1, 2))
        feats.append(result.model.features(batch))
    features = np.concatenate(feats, axis=0)
    emb = pca_project(features, k=2).embedding
    score, _ = silhouette_score(emb, data.test.y)
    return score


def run_single_run(cfg: ExperimentConfig, records_a, records_b, run_index: int,
                   subsets=SUBSETS, *, out_dir: Path | None = None,
                   compute_silhouette: bool = False) -> list[CellOutcome]:
    """All matrix cells for one seeded run (seed = base + run_index)."""
    run_seed = cfg.seed + run_index
    outcomes: list[CellOutcome] = []

    generic = generic_textures(cfg.stage0.n_classes, cfg.stage0.per_class,
                               cfg.pipeline.patch_edge,
                               seed=child_seed(run_seed, "stage0-data"))
    stage0 = run_stage0_pretrain(
        cfg.arch, generic,
        replace(cfg.stage0.train, seed=child_seed(run_seed, "stage0")))

    for subset in subsets:
        data: dict[str, PreparedData] = {}
        for tag, records in (("A", records_a), ("B", records_b)):
            data[tag] = prepare(records, tag, subset, cfg.pipeline,
                                CLASS_KEYS[tag], run_seed)

        def cell(strategy: str, dataset: str, fn) -> StageResult | None:
            outcome = CellOutcome(strategy, dataset, subset, run_index)
            try:
                result = fn()
                outcome.metrics = result.eval_metrics
                if compute_silhouette:
                    outcome.silhouette = _features_silhouette(result, data[dataset])
                if out_dir is not None:
                    cell_dir = (Path(out_dir) / "cells"
                                / f"{strategy}_{dataset}_{subset}" / f"run{run_index}")
                    write_stage_run_dir(cell_dir, config={
                        "strategy": strategy, "dataset": dataset, "subset": subset,
                        "run": run_index, "seed": run_seed,
                        "experiment": cfg.to_dict(),
                    }, result=result)
            except Exception as exc:  # cell failures are recorded, matrix continues
                outcome.error = f"{type(exc).__name__}: {exc}"
                result = None
            outcomes.append(outcome)
            return result

        cell("no_tl", "A", lambda: run_scratch(
            cfg.arch, data["A"],
            replace(cfg.scratch_train, seed=child_seed(run_seed, subset, "scratch", "A"))))
        cell("no_tl", "B", lambda: run_scratch(
            cfg.arch, data["B"],
            replace(cfg.scratch_train, seed=child_seed(run_seed, subset, "scratch", "B"))))
        hetl_a = cell("hetl_only", "A", lambda: run_hetl(
            stage0.checkpoint, data["A"], cfg.arch,
            replace(cfg.hetl_train, seed=child_seed(run_seed, subset, "hetl", "A"))))
        cell("hetl_only", "B", lambda: run_hetl(
            stage0.checkpoint, data["B"], cfg.arch,
            replace(cfg.hetl_train, seed=child_seed(run_seed, subset, "hetl", "B"))))
        if hetl_a is not None:
            cell("hetl_hotl", "B", lambda: run_hotl(
                hetl_a.checkpoint, data["B"],
                replace(cfg.hotl_train, seed=child_seed(run_seed, subset, "hotl", "B"))))
        else:
            outcomes.append(CellOutcome("hetl_hotl", "B", subset, run_index,
                                        error="upstream hetl cell failed"))
    return outcomes


def run_experiment_matrix(cfg: ExperimentConfig, benchmark_dir, *,
                          n_runs: int | None = None, subsets=SUBSETS,
                          out_dir=None, compute_silhouette: bool = False) -> MatrixResult:
    started = time.time()
    n_runs = n_runs or cfg.n_runs
    records_a, records_b = _load_domains(Path(benchmark_dir))
    if out_dir is not None:
        out_dir = Path(out_dir)
        write_config_snapshot(out_dir, cfg.to_dict())

    workers = int(os.environ.get("STAGE_TRANSFER_THREADS", "1") or "1")
    runs = range(1, n_runs + 1)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=min(workers, n_runs)) as pool:
            per_run = list(pool.map(
                lambda r: run_single_run(cfg, records_a, records_b, r, subsets,
                                         out_dir=out_dir,
                                         compute_silhouette=compute_silhouette),
                runs))
    else:
        per_run = [run_single_run(cfg, records_a, records_b, r, subsets,
                                  out_dir=out_dir,
                                  compute_silhouette=compute_silhouette)
                   for r in runs]

    cells = [c for block in per_run for c in block]
    failures = [c for c in cells if c.error is not None]
    reports: dict[tuple[str, str, str], MetricsReport] = {}
    for subset in subsets:
        for strategy, dataset, _ in STRATEGY_ROWS:
            per = [c.metrics for c in cells
                   if (c.strategy, c.dataset, c.subset) == (strategy, dataset, subset)
                   and c.metrics is not None]
            if per:
                reports[(strategy, dataset, subset)] = aggregate(
                    per, strategy=STRATEGY_LABELS[strategy], subset=subset,
                    dataset=dataset)

    result = MatrixResult(cfg, cells, reports, failures)
    if out_dir is not None:
        write_matrix_report(out_dir, result, subsets)
        write_runtime_sidecar(out_dir, started)
    return result


# ---------------------------------------------------------------------------
# report rendering

def report_rows(result: MatrixResult, subsets=SUBSETS) -> list[dict]:
    rows = []
    for subset in subsets:
        for strategy, dataset, details in STRATEGY_ROWS:
            report = result.reports.get((strategy, dataset, subset))
            if report is None:
                continue
            row = {"patch_type": subset, "strategy": STRATEGY_LABELS[strategy]}
            for m in METRIC_NAMES:
                row[m] = report.cell(m)
            row["dataset"] = dataset
            row["details"] = details
            rows.append(row)
    return rows


def write_matrix_report(out_dir: Path, result: MatrixResult, subsets=SUBSETS) -> None:
    out_dir = Path(out_dir)
    rows = report_rows(result, subsets)
    header = ["patch_type", "strategy", *METRIC_NAMES, "dataset", "details"]

    with open(out_dir / "report.csv", "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(header)
        for row in rows:
            writer.writerow([row[h] for h in header])

    widths = {h: max(len(h), *(len(str(r[h])) for r in rows)) if rows else len(h)
              for h in header}
    lines = [f"# {CONVENTIONS}",
             "  ".join(h.ljust(widths[h]) for h in header)]
    for row in rows:
        lines.append("  ".join(str(row[h]).ljust(widths[h]) for h in header))
    if result.failures:
        lines.append("")
        for c in result.failures:
            lines.append(f"# FAILED {c.strategy}/{c.dataset}/{c.subset} run {c.run}: {c.error}")
    (out_dir / "report.txt").write_text("\n".join(lines) + "\n")

    blob = {
        "conventions": CONVENTIONS,
        "cells": {
            f"{s}_{d}_{sub}": json.loads(rep.to_json())
            for (s, d, sub), rep in sorted(result.reports.items())
        },
        "failures": [
            {"strategy": c.strategy, "dataset": c.dataset, "subset": c.subset,
             "run": c.run, "error": c.error} for c in result.failures
        ],
    }
    (out_dir / "report.json").write_text(json.dumps(blob, sort_keys=True, indent=2) + "\n")
