"""Fixed-size patch extraction on a deterministic grid, plus the patch store.

Patches are placed at multiples of ``edge - max_overlap`` starting from the
top-left corner; a position is kept while the whole patch fits inside the
image, so grid-adjacent patches overlap by exactly ``max_overlap`` pixels.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from ..errors import ConfigError, DataError
from .manifest import ImageRecord
from .ppm import read_ppm, write_ppm

log = logging.getLogger(__name__)

INDEX_HEADER = ["patch_id", "image_id", "fragment_id", "x", "y", "class_key", "view"]


@dataclass
class Patch:
    patch_id: str
    image_id: str
    fragment_id: str
    x: int
    y: int
    pixels: np.ndarray  # edge x edge x 3 uint8
    class_key: str
    view: str
    dataset_tag: str


def grid_positions(image_extent: int, edge: int, max_overlap: int) -> list[int]:
    stride = edge - max_overlap
    return [p for p in range(0, image_extent - edge + 1, stride)]


def extract_patches(record: ImageRecord, edge: int = 256, max_overlap: int = 20) -> list[Patch]:
    """Grid patches of one image, ordered by (y, x); [] if the image is small."""
    if max_overlap >= edge:
        raise ConfigError(f"max_overlap {max_overlap} must be smaller than edge {edge}")
    if record.pixels is None:
        raise DataError(f"image {record.image_id!r} was loaded without pixels")
    h, w, _ = record.pixels.shape
    if h < edge or w < edge:
        log.warning("image %s is %dx%d, smaller than patch edge %d; no patches",
                    record.image_id, w, h, edge)
        return []
    patches = []
    for y in grid_positions(h, edge, max_overlap):
        for x in grid_positions(w, edge, max_overlap):
            patches.append(Patch(
                patch_id=f"{record.image_id}@x{x}y{y}",
                image_id=record.image_id,
                fragment_id=record.fragment_id,
                x=x, y=y,
                pixels=record.pixels[y : y + edge, x : x + edge].copy(),
                class_key=record.class_key,
                view=record.view,
                dataset_tag=record.dataset_tag,
            ))
    return patches


def extract_all(records: list[ImageRecord], edge: int = 256,
                max_overlap: int = 20) -> list[Patch]:
    out: list[Patch] = []
    for rec in sorted(records, key=lambda r: r.image_id):
        out.extend(extract_patches(rec, edge, max_overlap))
    return out


def write_patch_store(dirpath, patches: list[Patch]) -> Path:
    """Rasters plus an index CSV; returns the index path."""
    dirpath = Path(dirpath)
    dirpath.mkdir(parents=True, exist_ok=True)
    index = dirpath / "index.csv"
    with open(index, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(INDEX_HEADER)
        for p in patches:
            write_ppm(dirpath / f"{p.patch_id}.ppm", p.pixels)
            writer.writerow([p.patch_id, p.image_id, p.fragment_id, p.x, p.y,
                             p.class_key, p.view])
    return index


def read_patch_store(dirpath, dataset_tag: str) -> list[Patch]:
    dirpath = Path(dirpath)
    index = dirpath / "index.csv"
    patches = []
    with open(index, newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header != INDEX_HEADER:
            raise DataError(f"{index}: index header {header} != {INDEX_HEADER}")
        for row in reader:
            patch_id, image_id, fragment_id, x, y, class_key, view = row
            patches.append(Patch(
                patch_id=patch_id, image_id=image_id, fragment_id=fragment_id,
                x=int(x), y=int(y),
                pixels=read_ppm(dirpath / f"{patch_id}.ppm"),
                class_key=class_key, view=view, dataset_tag=dataset_tag,
            ))
    return patches


def with_pixels(patch: Patch, pixels: np.ndarray, suffix: str) -> Patch:
    """Copy of a patch with new pixels and a derived id (augmented copies)."""
    return replace(patch, patch_id=patch.patch_id + suffix, pixels=pixels)
