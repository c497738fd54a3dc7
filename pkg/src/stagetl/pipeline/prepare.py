"""Dataset preparation: subset filter, fragment split, patching, balancing,
whitening, and packing into training-ready arrays.

Balancing happens after the split and independently per side, so augmented
copies can never cross the train/test boundary; whitening statistics come
from the balanced training split only and are applied to both sides.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..data.balance import balance
from ..data.manifest import ImageRecord
from ..data.patches import Patch, extract_all
from ..data.split import SplitManifest, split, verify_disjoint
from ..data.whitening import WhiteningStats, compute_whitening_stats, whiten
from ..errors import ConfigError
from ..seeding import child_seed, stream
from .config import PipelineConfig


@dataclass
class PreparedSplit:
    x: np.ndarray  # (N, edge, edge, 3) float32, whitened, HWC
    y: np.ndarray  # (N,) int64 indices into class_keys
    patch_ids: tuple[str, ...] = ()
    fragment_ids: tuple[str, ...] = ()
    views: tuple[str, ...] = ()

    def __len__(self) -> int:
        return len(self.y)


@dataclass
class PreparedData:
    dataset: str
    subset: str
    class_keys: tuple[str, ...]
    train: PreparedSplit
    test: PreparedSplit
    stats: WhiteningStats
    split_manifest: SplitManifest


def _pack(patches: list[Patch], class_keys: tuple[str, ...],
          stats: WhiteningStats) -> PreparedSplit:
    index = {k: i for i, k in enumerate(class_keys)}
    x = np.stack([whiten(p, stats) for p in patches]) if patches else \
        np.zeros((0, 0, 0, 3), np.float32)
    y = np.array([index[p.class_key] for p in patches], dtype=np.int64)
    return PreparedSplit(
        x=x, y=y,
        patch_ids=tuple(p.patch_id for p in patches),
        fragment_ids=tuple(p.fragment_id for p in patches),
        views=tuple(p.view for p in patches),
    )


def prepare(records: list[ImageRecord], dataset_tag: str, subset: str,
            pipeline: PipelineConfig, class_keys: tuple[str, ...],
            seed: int) -> PreparedData:
    """Build whitened train/test arrays for one (dataset, subset) pair."""
    if subset == "mixed":
        selected = records
    elif subset in ("surface", "section"):
        selected = [r for r in records if r.view == subset]
    else:
        raise ConfigError(f"unknown patch subset {subset!r}")
    if not selected:
        raise ConfigError(f"no images left for dataset {dataset_tag} subset {subset}")

    manifest = split(selected, pipeline.split_ratio,
                     child_seed(seed, "split", dataset_tag, subset))
    patches = extract_all(selected, pipeline.patch_edge, pipeline.max_overlap)
    manifest = manifest.with_patches(patches)
    verify_disjoint(manifest, patches)

    by_split = {"train": [], "test": []}
    for p in patches:
        by_split[manifest.split_of_fragment(p.fragment_id)].append(p)

    train = balance(by_split["train"], pipeline.train_per_class,
                    stream(seed, "balance", dataset_tag, subset, "train"), class_keys)
    test = balance(by_split["test"], pipeline.test_per_class,
                   stream(seed, "balance", dataset_tag, subset, "test"), class_keys)

    stats = compute_whitening_stats(train, dataset_tag, "train")
    return PreparedData(
        dataset=dataset_tag, subset=subset, class_keys=tuple(class_keys),
        train=_pack(train, class_keys, stats),
        test=_pack(test, class_keys, stats),
        stats=stats, split_manifest=manifest,
    )
