"""Confusion matrices, macro-averaged metrics, and mean+-std aggregation.

Conventions (documented in every report header): accuracy is micro accuracy
(trace/total); precision, recall and F1 are unweighted macro averages over
classes; a class with an undefined per-class value contributes 0 and is
flagged. Aggregation uses the sample standard deviation (n-1 denominator);
a single run reports std 0 by convention, flagged.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DataError

METRIC_NAMES = ("accuracy", "precision", "recall", "f1")

CONVENTIONS = ("accuracy=micro; precision/recall/f1=macro (unweighted over classes); "
               "undefined per-class values count as 0 and are flagged; "
               "std uses the n-1 denominator")


@dataclass
class ConfusionMatrix:
    counts: np.ndarray  # (C, C) int64; rows true, columns predicted
    class_keys: tuple[str, ...]

    @property
    def total(self) -> int:
        return int(self.counts.sum())


@dataclass
class MetricValues:
    accuracy: float
    precision: float
    recall: float
    f1: float
    flags: tuple[str, ...] = ()

    def as_dict(self) -> dict:
        return {"accuracy": self.accuracy, "precision": self.precision,
                "recall": self.recall, "f1": self.f1, "flags": list(self.flags)}


@dataclass
class MetricsReport:
    strategy: str
    subset: str
    dataset: str
    n_runs: int
    per_run: list[MetricValues]
    mean: dict[str, float]
    std: dict[str, float]
    flags: tuple[str, ...] = ()

    def cell(self, metric: str) -> str:
        return format_mean_std(self.mean[metric], self.std[metric])

    def to_json(self) -> str:
        d = {
            "strategy": self.strategy, "subset": self.subset, "dataset": self.dataset,
            "n_runs": self.n_runs, "conventions": CONVENTIONS,
            "per_run": [m.as_dict() for m in self.per_run],
            "mean": self.mean, "std": self.std, "flags": list(self.flags),
        }
        return json.dumps(d, sort_keys=True, indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "MetricsReport":
        d = json.loads(text)
        per_run = [MetricValues(m["accuracy"], m["precision"], m["recall"], m["f1"],
                                tuple(m.get("flags", ()))) for m in d["per_run"]]
        return cls(d["strategy"], d["subset"], d["dataset"], d["n_runs"], per_run,
                   d["mean"], d["std"], tuple(d.get("flags", ())))


def confusion(preds, labels, class_keys: tuple[str, ...]) -> ConfusionMatrix:
    preds = np.asarray(preds)
    labels = np.asarray(labels)
    if preds.shape != labels.shape:
        raise DataError(f"{len(preds)} predictions vs {len(labels)} labels")
    c = len(class_keys)
    if len(preds) and (preds.min() < 0 or preds.max() >= c or labels.min() < 0
                       or labels.max() >= c):
        raise DataError(f"class indices outside [0, {c})")
    counts = np.zeros((c, c), dtype=np.int64)
    np.add.at(counts, (labels, preds), 1)
    return ConfusionMatrix(counts, tuple(class_keys))


def metrics(cm: ConfusionMatrix) -> MetricValues:
    counts = cm.counts
    total = counts.sum()
    if total == 0:
        raise DataError("cannot compute metrics of an empty confusion matrix")
    tp = np.diag(counts).astype(np.float64)
    fp = counts.sum(axis=0) - tp
    fn = counts.sum(axis=1) - tp
    flags = []
    c = len(cm.class_keys)
    precision = np.zeros(c)
    recall = np.zeros(c)
    f1 = np.zeros(c)
    for i, key in enumerate(cm.class_keys):
        if tp[i] + fp[i] > 0:
            precision[i] = tp[i] / (tp[i] + fp[i])
        else:
            flags.append(f"precision undefined for {key}; counted as 0")
        if tp[i] + fn[i] > 0:
            recall[i] = tp[i] / (tp[i] + fn[i])
        else:
            flags.append(f"recall undefined for {key}; counted as 0")
        if precision[i] + recall[i] > 0:
            f1[i] = 2 * precision[i] * recall[i] / (precision[i] + recall[i])
    return MetricValues(
        accuracy=float(tp.sum() / total),
        precision=float(precision.mean()),
        recall=float(recall.mean()),
        f1=float(f1.mean()),
        flags=tuple(flags),
    )


def aggregate(per_run: list[MetricValues], *, strategy: str = "", subset: str = "",
              dataset: str = "") -> MetricsReport:
    if not per_run:
        raise ConfigError("aggregate needs at least one run")
    flags = []
    if len(per_run) == 1:
        flags.append("single run: std is 0 by convention")
    mean, std = {}, {}
    for name in METRIC_NAMES:
        values = np.array([getattr(m, name) for m in per_run], dtype=np.float64)
        mean[name] = float(values.mean())
        std[name] = float(values.std(ddof=1)) if len(values) > 1 else 0.0
    return MetricsReport(strategy, subset, dataset, len(per_run), list(per_run),
                         mean, std, tuple(flags))


def format_mean_std(m: float, s: float) -> str:
    return f"{m:.3f}±{s:.3f}"
