"""Run directory layout: everything regenerable from config snapshot + seed.

All files written here are byte-deterministic for a given config and seed;
wall-clock information goes only into the ``runtime.json`` sidecar, which
determinism comparisons exclude.
"""

from __future__ import annotations

import csv
import json
import time
from pathlib import Path

from ..nn.checkpoint import Checkpoint, write_checkpoint
from .train import EpochLog

RUNTIME_SIDECAR = "runtime.json"


def write_config_snapshot(run_dir: Path, config: dict) -> None:
    run_dir.mkdir(parents=True, exist_ok=True)
    (run_dir / "config.json").write_text(
        json.dumps(config, sort_keys=True, indent=2) + "\n")


def write_epoch_log(path: Path, logs: list[EpochLog]) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["epoch", "train_loss", "test_accuracy"])
        for log in logs:
            writer.writerow([log.epoch, f"{log.train_loss:.8g}",
                             f"{log.test_accuracy:.8g}"])


def write_predictions(path: Path, rows, class_keys) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["patch_id", "true", "predicted",
                         *[f"score_{k}" for k in class_keys]])
        for row in rows:
            pid, true_key, pred_key, *scores = row
            writer.writerow([pid, true_key, pred_key,
                             *[f"{s:.8g}" for s in scores]])


def write_runtime_sidecar(run_dir: Path, started: float) -> None:
    (run_dir / RUNTIME_SIDECAR).write_text(json.dumps({
        "started_unix": started,
        "elapsed_seconds": time.time() - started,
    }, indent=2) + "\n")


def write_stage_run_dir(run_dir: Path, *, config: dict, result,
                        checkpoint_name: str = "final.kstl") -> None:
    """Persist one stage run: config, checkpoint, epoch log, predictions."""
    run_dir = Path(run_dir)
    write_config_snapshot(run_dir, config)
    ckpt_dir = run_dir / "checkpoints"
    ckpt_dir.mkdir(exist_ok=True)
    write_checkpoint(ckpt_dir / checkpoint_name, result.checkpoint)
    write_epoch_log(run_dir / "log.csv", result.epoch_logs)
    if result.predictions is not None:
        class_keys = tuple(result.checkpoint.metadata["class_keys"])
        write_predictions(run_dir / "predictions.csv", rows=result.predictions,
                          class_keys=class_keys)
    if result.eval_metrics is not None:
        (run_dir / "metrics.json").write_text(json.dumps(
            result.eval_metrics.as_dict(), sort_keys=True, indent=2) + "\n")
