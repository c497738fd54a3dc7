"""Leakage-free train/test partitioning at fragment granularity.

The unit of assignment is the physical fragment: all images (and hence all
patches) of a fragment land in the same split, so near-duplicate views of
one object can never straddle the boundary. Within each class, fragments
are shuffled with the seeded generator and assigned greedily by image count
until the train share reaches the requested ratio.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, replace
from pathlib import Path

from ..errors import ConfigError, DataError
from ..seeding import stream
from .manifest import ImageRecord
from .patches import Patch

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SplitManifest:
    seed: int
    ratio: float
    fragment_to_split: dict[str, str]
    train_patches: tuple[str, ...] = ()
    test_patches: tuple[str, ...] = ()
    config_hash: str = ""

    def split_of_fragment(self, fragment_id: str) -> str:
        try:
            return self.fragment_to_split[fragment_id]
        except KeyError:
            raise DataError(f"fragment {fragment_id!r} is not covered by this split") from None

    def with_patches(self, patches: list[Patch]) -> "SplitManifest":
        train, test = [], []
        for p in patches:
            (train if self.split_of_fragment(p.fragment_id) == "train" else test).append(p.patch_id)
        return replace(self, train_patches=tuple(train), test_patches=tuple(test))

    def to_json(self) -> str:
        d = {
            "seed": self.seed,
            "ratio": self.ratio,
            "fragment_to_split": dict(sorted(self.fragment_to_split.items())),
            "train_patches": list(self.train_patches),
            "test_patches": list(self.test_patches),
            "config_hash": self.config_hash,
        }
        return json.dumps(d, sort_keys=True, indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "SplitManifest":
        d = json.loads(text)
        return cls(d["seed"], d["ratio"], d["fragment_to_split"],
                   tuple(d["train_patches"]), tuple(d["test_patches"]),
                   d.get("config_hash", ""))

    def save(self, path) -> None:
        Path(path).write_text(self.to_json())

    @classmethod
    def load(cls, path) -> "SplitManifest":
        return cls.from_json(Path(path).read_text())


def split(records: list[ImageRecord], ratio: float, seed: int,
          config_hash: str = "") -> SplitManifest:
    """Assign fragments to train/test, aiming at ``ratio`` train images per class."""
    if not 0.0 < ratio < 1.0:
        raise ConfigError(f"split ratio must be in (0, 1), got {ratio}")
    by_class: dict[str, dict[str, int]] = {}
    for r in records:
        if not r.fragment_id:
            raise DataError(f"image {r.image_id!r} has no fragment_id")
        by_class.setdefault(r.class_key, {})
        by_class[r.class_key][r.fragment_id] = by_class[r.class_key].get(r.fragment_id, 0) + 1

    assignment: dict[str, str] = {}
    for class_key in sorted(by_class):
        frags = sorted(by_class[class_key])
        if len(frags) == 1:
            log.warning("class %s has a single fragment; it cannot appear in both splits",
                        class_key)
        rng = stream(seed, "split", class_key)
        order = [frags[i] for i in rng.permutation(len(frags))]
        total = sum(by_class[class_key].values())
        target = ratio * total
        assigned = 0
        for frag in order:
            if assigned < target:
                assignment[frag] = "train"
                assigned += by_class[class_key][frag]
            else:
                assignment[frag] = "test"
    return SplitManifest(seed=seed, ratio=ratio, fragment_to_split=assignment,
                         config_hash=config_hash)


def verify_disjoint(manifest: SplitManifest, patches: list[Patch]) -> None:
    """Raise if any fragment or patch would straddle the two splits."""
    overlap = set(manifest.train_patches) & set(manifest.test_patches)
    if overlap:
        raise DataError(f"patches in both splits: {sorted(overlap)[:5]}")
    train = set(manifest.train_patches)
    test = set(manifest.test_patches)
    for p in patches:
        want = manifest.split_of_fragment(p.fragment_id)
        if p.patch_id in train and want != "train":
            raise DataError(f"patch {p.patch_id!r} crossed into train from a {want} fragment")
        if p.patch_id in test and want != "test":
            raise DataError(f"patch {p.patch_id!r} crossed into test from a {want} fragment")
