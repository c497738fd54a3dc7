"""Per-channel standardization: I_w = (I - m) / sigma, channel-wise.

One statistic set is computed per dataset on its training split only and
applied to both splits; stats carry their scope so cross-dataset misuse is
rejected before any arithmetic happens.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import DataError
from .patches import Patch

SIGMA_FLOOR = 1e-6  # constant-channel inputs are legitimate; never divide by 0


@dataclass(frozen=True)
class WhiteningStats:
    mean: tuple[float, float, float]
    std: tuple[float, float, float]
    dataset_tag: str
    split_name: str
    config_hash: str = ""

    @property
    def scope(self) -> str:
        return f"{self.dataset_tag}:{self.split_name}"

    def to_json(self, seed: int | None = None) -> str:
        d = {
            "mean": list(self.mean), "std": list(self.std),
            "dataset_tag": self.dataset_tag, "split_name": self.split_name,
            "config_hash": self.config_hash,
        }
        if seed is not None:
            d["seed"] = seed
        return json.dumps(d, sort_keys=True, indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "WhiteningStats":
        d = json.loads(text)
        return cls(tuple(d["mean"]), tuple(d["std"]), d["dataset_tag"],
                   d["split_name"], d.get("config_hash", ""))

    def save(self, path, seed: int | None = None) -> None:
        Path(path).write_text(self.to_json(seed))

    @classmethod
    def load(cls, path) -> "WhiteningStats":
        return cls.from_json(Path(path).read_text())


def compute_whitening_stats(patches: list[Patch], dataset_tag: str,
                            split_name: str = "train",
                            config_hash: str = "") -> WhiteningStats:
    """Population mean/std per channel over all pixels of all patches."""
    if not patches:
        raise DataError("cannot compute whitening stats from zero patches")
    acc = np.zeros(3)
    acc2 = np.zeros(3)
    count = 0
    for p in patches:
        if p.dataset_tag != dataset_tag:
            raise DataError(
                f"patch {p.patch_id!r} is from dataset {p.dataset_tag}, "
                f"stats scope is {dataset_tag}")
        px = p.pixels.reshape(-1, 3).astype(np.float64)
        acc += px.sum(axis=0)
        acc2 += (px * px).sum(axis=0)
        count += px.shape[0]
    mean = acc / count
    var = np.maximum(acc2 / count - mean * mean, 0.0)
    std = np.sqrt(var)
    return WhiteningStats(tuple(float(m) for m in mean), tuple(float(s) for s in std),
                          dataset_tag, split_name, config_hash)


def whiten(patch: Patch, stats: WhiteningStats, dtype=np.float32) -> np.ndarray:
    """Standardized HxWx3 float array for one patch."""
    if patch.dataset_tag != stats.dataset_tag:
        raise DataError(
            f"whitening stats with scope {stats.scope!r} cannot be applied to "
            f"a dataset-{patch.dataset_tag} patch ({patch.patch_id!r})")
    return whiten_pixels(patch.pixels, stats, dtype)


def whiten_pixels(pixels: np.ndarray, stats: WhiteningStats, dtype=np.float32) -> np.ndarray:
    mean = np.asarray(stats.mean, dtype=np.float64)
    std = np.maximum(np.asarray(stats.std, dtype=np.float64), SIGMA_FLOOR)
    return ((pixels.astype(np.float64) - mean) / std).astype(dtype)
