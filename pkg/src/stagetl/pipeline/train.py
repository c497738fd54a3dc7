"""Mini-batch SGD training loop with per-epoch logging.

All randomness (shuffling, augmentation draws, dropout masks) comes from
child streams of the stage's seed. Batches with fewer than two samples are
skipped (batch norm has no variance to work with). A non-finite loss or
activation aborts with the failing step index.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from ..data.augment import augment
from ..errors import NumericsError
from ..metrics import ConfusionMatrix, MetricValues, confusion, metrics
from ..nn.model import Model
from ..nn.ops import softmax_cross_entropy
from ..nn.optim import ParamSet, sgd_momentum_step
from ..seeding import stream
from .config import TrainConfig
from .prepare import PreparedSplit


@dataclass
class EpochLog:
    epoch: int
    train_loss: float
    test_accuracy: float


@dataclass
class TrainOutcome:
    epoch_logs: list[EpochLog]
    aug_counts: Counter
    steps: int


def train_model(model: Model, pset: ParamSet, train: PreparedSplit,
                test: PreparedSplit, cfg: TrainConfig, augmentation: str,
                *, access_log: list | None = None) -> TrainOutcome:
    shuffle_rng = stream(cfg.seed, "shuffle")
    aug_rng = stream(cfg.seed, "augment")
    drop_rng = stream(cfg.seed, "dropout")
    logs: list[EpochLog] = []
    aug_counts: Counter = Counter()
    steps = 0
    n = len(train)
    for epoch in range(1, cfg.epochs + 1):
        order = shuffle_rng.permutation(n)
        losses = []
        for start in range(0, n, cfg.batch_size):
            take = order[start : start + cfg.batch_size]
            if len(take) < 2:
                continue  # batch norm needs at least two samples
            rows = []
            for i in take:
                pixels, ops = augment(train.x[i], augmentation, aug_rng)
                aug_counts.update(ops)
                rows.append(pixels)
            if access_log is not None:
                access_log.extend(train.fragment_ids[i] for i in take)
            batch = np.ascontiguousarray(np.stack(rows).transpose(0, 3, 1, 2))
            try:
                logits = model.forward(batch, train=True, rng=drop_rng)
                loss, grad_logits = softmax_cross_entropy(logits, train.y[take])
            except NumericsError as exc:
                raise NumericsError(f"training diverged at step {steps}: {exc}") from exc
            if not np.isfinite(loss):
                raise NumericsError(f"training diverged at step {steps}: loss={loss}")
            grads = model.backward(grad_logits)
            sgd_momentum_step(pset, grads, cfg.lr, cfg.momentum)
            losses.append(loss)
            steps += 1
        acc = evaluate(model, test).accuracy if len(test) else float("nan")
        logs.append(EpochLog(epoch, float(np.mean(losses)) if losses else float("nan"), acc))
    return TrainOutcome(logs, aug_counts, steps)


@dataclass
class EvalResult:
    accuracy: float
    preds: np.ndarray
    scores: np.ndarray  # (N, C) softmax probabilities


def evaluate(model: Model, split: PreparedSplit, batch_size: int = 96) -> EvalResult:
    preds = []
    scores = []
    for start in range(0, len(split), batch_size):
        batch = np.ascontiguousarray(
            split.x[start : start + batch_size].transpose(0, 3, 1, 2))
        logits = model.forward(batch, train=False)
        z = logits - logits.max(axis=1, keepdims=True)
        p = np.exp(z)
        p /= p.sum(axis=1, keepdims=True)
        scores.append(p)
        preds.append(logits.argmax(axis=1))
    preds = np.concatenate(preds) if preds else np.zeros(0, dtype=np.int64)
    scores = np.concatenate(scores) if scores else np.zeros((0, 0))
    accuracy = float((preds == split.y).mean()) if len(split) else float("nan")
    return EvalResult(accuracy, preds, scores)


def evaluate_metrics(model: Model, split: PreparedSplit,
                     class_keys: tuple[str, ...]) -> tuple[MetricValues, ConfusionMatrix, EvalResult]:
    ev = evaluate(model, split)
    cm = confusion(ev.preds, split.y, class_keys)
    return metrics(cm), cm, ev
