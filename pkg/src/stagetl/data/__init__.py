from .augment import (GEOMETRIC_INVERSE, GEOMETRIC_OPS, POLICIES, apply_geometric,
                      augment, gaussian_blur, gaussian_kernel)
from .balance import balance
from .manifest import (CLASS_KEYS, REFERENCE_INVENTORY, ImageRecord, census,
                       load_manifest, write_inventory_fixture, write_manifest)
from .patches import (Patch, extract_all, extract_patches, read_patch_store,
                      write_patch_store)
from .ppm import read_image, read_ppm, write_ppm
from .split import SplitManifest, split, verify_disjoint
from .whitening import (WhiteningStats, compute_whitening_stats, whiten,
                        whiten_pixels)

__all__ = [
    "CLASS_KEYS", "GEOMETRIC_INVERSE", "GEOMETRIC_OPS", "ImageRecord",
    "POLICIES", "Patch", "REFERENCE_INVENTORY", "SplitManifest",
    "WhiteningStats", "apply_geometric", "augment", "balance", "census",
    "compute_whitening_stats", "extract_all", "extract_patches",
    "gaussian_blur", "gaussian_kernel", "load_manifest", "read_image",
    "read_patch_store", "read_ppm", "split", "verify_disjoint", "whiten",
    "whiten_pixels", "write_inventory_fixture", "write_manifest",
    "write_patch_store", "write_ppm",
]
