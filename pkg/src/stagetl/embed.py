"""Penultimate-layer features, PCA projection, and a separability score.

The 2-D projection deliberately uses plain PCA (deterministic, checkable
against an eigensolver) rather than a neighbor-graph embedding; output
headers say so.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DataError

PROJECTION_NOTE = "projection=PCA (deterministic linear projection, not a neighbor embedding)"


@dataclass
class FeatureMatrix:
    values: np.ndarray  # (N, D)
    patch_ids: tuple[str, ...]
    class_keys: tuple[str, ...]  # per row
    views: tuple[str, ...]

    def __post_init__(self):
        n = self.values.shape[0]
        if not (len(self.patch_ids) == len(self.class_keys) == len(self.views) == n):
            raise ConfigError("feature row metadata does not align with the matrix")


@dataclass
class PCAResult:
    embedding: np.ndarray          # (N, k)
    components: np.ndarray         # (k, D)
    explained_fraction: np.ndarray  # (k,)
    mean: np.ndarray               # (D,)


def extract_features(model, x: np.ndarray, patch_ids, class_keys, views,
                     batch_size: int = 64) -> FeatureMatrix:
    """One feature row per sample from the layer feeding the classifier."""
    rows = []
    for i in range(0, len(x), batch_size):
        rows.append(model.features(x[i : i + batch_size]))
    values = np.concatenate(rows, axis=0) if rows else np.zeros((0, 0))
    return FeatureMatrix(values, tuple(patch_ids), tuple(class_keys), tuple(views))


def pca_project(features: np.ndarray, k: int = 2) -> PCAResult:
    """Mean-centered projection onto the top-k variance axes.

    Axes are ordered by decreasing variance; the first nonzero loading of
    each axis is made positive so results are reproducible up to nothing.
    Zero-variance axes are fine (rank-deficient input allowed).
    """
    x = np.asarray(features, dtype=np.float64)
    n, d = x.shape
    if n <= k:
        raise ConfigError(f"PCA needs more than k={k} rows, got {n}")
    mean = x.mean(axis=0)
    xc = x - mean
    _, svals, vt = np.linalg.svd(xc, full_matrices=False)
    components = vt[:k].copy()
    for i in range(components.shape[0]):
        nz = np.nonzero(np.abs(components[i]) > 1e-12)[0]
        if len(nz) and components[i, nz[0]] < 0:
            components[i] = -components[i]
    variances = svals**2
    total = variances.sum()
    explained = variances[:k] / total if total > 0 else np.zeros(k)
    return PCAResult(xc @ components.T, components, explained, mean)


def silhouette_score(points: np.ndarray, labels) -> tuple[float, tuple[str, ...]]:
    """Mean silhouette with Euclidean distances; degenerate cases score 0.

    Returns (score, flags); a flag records when all pairwise structure
    collapsed (identical points) instead of producing NaN.
    """
    points = np.asarray(points, dtype=np.float64)
    labels = np.asarray(labels)
    classes = np.unique(labels)
    if len(classes) < 2:
        raise DataError("silhouette needs at least two classes present")
    d2 = ((points[:, None, :] - points[None, :, :]) ** 2).sum(axis=2)
    dist = np.sqrt(np.maximum(d2, 0.0))
    n = len(points)
    s = np.zeros(n)
    flags = []
    degenerate = 0
    for i in range(n):
        same = labels == labels[i]
        n_same = int(same.sum())
        if n_same < 2:
            s[i] = 0.0  # singleton cluster
            continue
        a = dist[i, same].sum() / (n_same - 1)
        b = min(dist[i, labels == c].mean() for c in classes if c != labels[i])
        m = max(a, b)
        if m == 0.0:
            s[i] = 0.0
            degenerate += 1
        else:
            s[i] = (b - a) / m
    if degenerate:
        flags.append(f"{degenerate} points with zero intra/inter distance scored 0")
    return float(s.mean()), tuple(flags)


@dataclass
class SeparabilityReport:
    silhouette: float
    centroids: dict[str, np.ndarray]
    flags: tuple[str, ...] = ()


def separability_report(embedding: np.ndarray, labels) -> SeparabilityReport:
    labels = np.asarray(labels)
    score, flags = silhouette_score(embedding, labels)
    centroids = {str(c): embedding[labels == c].mean(axis=0) for c in np.unique(labels)}
    return SeparabilityReport(score, centroids, flags)


def write_embedding_csv(path, fm: FeatureMatrix, pca: PCAResult) -> None:
    """Plot-ready CSV: patch_id, class_key, view, x, y."""
    with open(path, "w", newline="") as f:
        f.write(f"# {PROJECTION_NOTE}\n")
        f.write("# explained_variance_fractions="
                + ",".join(f"{v:.6f}" for v in pca.explained_fraction) + "\n")
        writer = csv.writer(f)
        writer.writerow(["patch_id", "class_key", "view", "x", "y"])
        for pid, key, view, row in zip(fm.patch_ids, fm.class_keys, fm.views,
                                       pca.embedding):
            writer.writerow([pid, key, view, f"{row[0]:.8g}", f"{row[1]:.8g}"])
