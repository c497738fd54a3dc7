"""Image manifest ingestion and the reference class inventories.

A manifest is a CSV with header ``image_id,fragment_id,dataset,class_key,
view,path``; raster paths are resolved relative to the manifest file. Every
image belongs to a physical fragment, and all images of one fragment must
share its class.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import DataError
from .ppm import read_image

MANIFEST_HEADER = ["image_id", "fragment_id", "dataset", "class_key", "view", "path"]
VIEWS = ("surface", "section")

CLASS_KEYS = {
    "A": ("WW", "CAR", "CAR2", "STR", "BRU", "CYS"),
    "B": ("WW", "WD", "AU", "STR", "BRU", "CYS"),
}

# Published per-class image counts (surface, section) of the two reference
# collections; used by audit fixtures and sanity checks.
REFERENCE_INVENTORY = {
    "A": {
        "WW": (50, 74), "CAR": (18, 18), "CAR2": (36, 18),
        "STR": (25, 19), "BRU": (43, 17), "CYS": (37, 11),
    },
    "B": {
        "WW": (62, 25), "WD": (13, 12), "AU": (58, 50),
        "STR": (43, 24), "BRU": (23, 4), "CYS": (47, 48),
    },
}


@dataclass
class ImageRecord:
    image_id: str
    fragment_id: str
    dataset_tag: str
    class_key: str
    view: str
    pixels: np.ndarray | None  # HxWx3 uint8; None when loaded without rasters


def load_manifest(path, *, load_pixels: bool = True) -> list[ImageRecord]:
    """Read and validate a manifest CSV; empty manifests are fine."""
    path = Path(path)
    base = path.parent
    records: list[ImageRecord] = []
    seen: set[str] = set()
    with open(path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header != MANIFEST_HEADER:
            raise DataError(f"{path}: manifest header {header} != {MANIFEST_HEADER}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(MANIFEST_HEADER):
                raise DataError(f"{path}:{lineno}: expected {len(MANIFEST_HEADER)} fields")
            image_id, fragment_id, dataset, class_key, view, rel = row
            if dataset not in CLASS_KEYS:
                raise DataError(f"{path}:{lineno}: unknown dataset tag {dataset!r}")
            if class_key not in CLASS_KEYS[dataset]:
                raise DataError(
                    f"{path}:{lineno}: class key {class_key!r} is not in dataset "
                    f"{dataset}'s key set {CLASS_KEYS[dataset]}")
            if view not in VIEWS:
                raise DataError(f"{path}:{lineno}: view must be one of {VIEWS}, got {view!r}")
            if not fragment_id:
                raise DataError(f"{path}:{lineno}: empty fragment_id")
            if image_id in seen:
                raise DataError(f"{path}:{lineno}: duplicate image_id {image_id!r}")
            seen.add(image_id)
            pixels = None
            if load_pixels:
                try:
                    pixels = read_image(base / rel)
                except DataError as exc:
                    raise DataError(f"{path}:{lineno}: {exc}") from exc
            records.append(ImageRecord(image_id, fragment_id, dataset, class_key, view, pixels))
    _check_fragment_classes(records, path)
    return records


def _check_fragment_classes(records, origin) -> None:
    frag_class: dict[str, str] = {}
    for r in records:
        prev = frag_class.setdefault(r.fragment_id, r.class_key)
        if prev != r.class_key:
            raise DataError(
                f"{origin}: fragment {r.fragment_id!r} mixes classes {prev!r} and {r.class_key!r}")


def census(records) -> dict[tuple[str, str], int]:
    """Per-(class_key, view) image counts, for audits against the inventory."""
    counts: dict[tuple[str, str], int] = {}
    for r in records:
        counts[(r.class_key, r.view)] = counts.get((r.class_key, r.view), 0) + 1
    return counts


def write_manifest(path, rows: list[dict]) -> None:
    """Write manifest rows ({column: value} in MANIFEST_HEADER terms)."""
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(MANIFEST_HEADER)
        for row in rows:
            writer.writerow([row[c] for c in MANIFEST_HEADER])


def write_inventory_fixture(dirpath, dataset_tag: str, *, edge: int = 8,
                            images_per_fragment: int = 2) -> Path:
    """Materialize an audit manifest matching the reference inventory.

    Writes one tiny gray PPM per image so the manifest is fully loadable;
    returns the manifest path. Intended for audits and tests.
    """
    from .ppm import write_ppm

    dirpath = Path(dirpath)
    dirpath.mkdir(parents=True, exist_ok=True)
    pixels = np.full((edge, edge, 3), 128, dtype=np.uint8)
    rows = []
    for class_key, (n_surface, n_section) in REFERENCE_INVENTORY[dataset_tag].items():
        for view, count in (("surface", n_surface), ("section", n_section)):
            for i in range(count):
                frag = f"{dataset_tag}-{class_key}-{view[:3]}-f{i // images_per_fragment:03d}"
                image_id = f"{frag}-i{i % images_per_fragment}"
                name = f"{image_id}.ppm"
                write_ppm(dirpath / name, pixels)
                rows.append({
                    "image_id": image_id, "fragment_id": frag,
                    "dataset": dataset_tag, "class_key": class_key,
                    "view": view, "path": name,
                })
    manifest = dirpath / f"manifest_{dataset_tag.lower()}.csv"
    write_manifest(manifest, rows)
    return manifest
