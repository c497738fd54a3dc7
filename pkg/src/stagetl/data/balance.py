"""Per-class patch balancing: downsample extras, upsample via augmentation.

Upsampled copies are fresh geometric augmentations of existing patches of
the same class, so every copy traces back to an original through its
patch_id prefix, image_id and fragment_id.
"""

from __future__ import annotations

import numpy as np

from ..errors import ConfigError, DataError
from .augment import augment
from .patches import Patch, with_pixels


def balance(patches: list[Patch], target: int, rng: np.random.Generator,
            class_keys: tuple[str, ...], policy: str = "geometric") -> list[Patch]:
    """Exactly ``target`` patches per class, deterministically under ``rng``."""
    if target < 1:
        raise ConfigError(f"per-class target must be >= 1, got {target}")
    groups: dict[str, list[Patch]] = {k: [] for k in class_keys}
    for p in patches:
        if p.class_key not in groups:
            raise DataError(f"patch {p.patch_id!r} has class {p.class_key!r}, "
                            f"not in {class_keys}")
        groups[p.class_key].append(p)

    out: list[Patch] = []
    for key in class_keys:
        group = sorted(groups[key], key=lambda p: p.patch_id)
        if not group:
            raise DataError(f"class {key!r} has zero patches; cannot balance")
        if len(group) > target:
            keep = rng.choice(len(group), size=target, replace=False)
            out.extend(group[i] for i in sorted(keep))
        else:
            out.extend(group)
            for k in range(target - len(group)):
                src = group[int(rng.integers(0, len(group)))]
                pixels, _ = augment(src.pixels, policy, rng)
                out.append(with_pixels(src, pixels, f"~a{k}"))
    return out
