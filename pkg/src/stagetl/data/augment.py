"""Training-time augmentation: the 8-fold-lite geometric group and Gaussian blur.

The geometric group is {identity, horizontal flip, vertical flip, rotations
by 90/180/270}; a draw picks one uniformly. Blur draws sigma from [0.5, 1.5],
builds a normalized kernel of size 2*ceil(2*sigma)+1 and convolves separably
with reflect padding, so shape and DC level are preserved.
"""

from __future__ import annotations

import math

import numpy as np

from ..errors import ConfigError

POLICIES = ("none", "geometric", "geometric+blur")

GEOMETRIC_OPS = ("identity", "hflip", "vflip", "rot90", "rot180", "rot270")

GEOMETRIC_INVERSE = {
    "identity": "identity", "hflip": "hflip", "vflip": "vflip",
    "rot90": "rot270", "rot180": "rot180", "rot270": "rot90",
}

BLUR_SIGMA_RANGE = (0.5, 1.5)


def apply_geometric(pixels: np.ndarray, op: str) -> np.ndarray:
    if op == "identity":
        return pixels
    if op == "hflip":
        return pixels[:, ::-1]
    if op == "vflip":
        return pixels[::-1, :]
    if op == "rot90":
        return np.rot90(pixels, 1, axes=(0, 1))
    if op == "rot180":
        return np.rot90(pixels, 2, axes=(0, 1))
    if op == "rot270":
        return np.rot90(pixels, 3, axes=(0, 1))
    raise ConfigError(f"unknown geometric op {op!r}")


def gaussian_kernel(sigma: float) -> np.ndarray:
    radius = math.ceil(2 * sigma)
    t = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-(t * t) / (2.0 * sigma * sigma))
    return k / k.sum()


def gaussian_blur(pixels: np.ndarray, sigma: float) -> np.ndarray:
    """Separable blur with reflect padding; float output, shape unchanged."""
    k = gaussian_kernel(sigma)
    r = (len(k) - 1) // 2
    x = pixels.astype(np.float64)
    xp = np.pad(x, ((r, r), (0, 0), (0, 0)), mode="reflect")
    x = sum(k[i] * xp[i : i + x.shape[0]] for i in range(len(k)))
    xp = np.pad(x, ((0, 0), (r, r), (0, 0)), mode="reflect")
    x = sum(k[i] * xp[:, i : i + pixels.shape[1]] for i in range(len(k)))
    return x


def augment(pixels: np.ndarray, policy: str,
            rng: np.random.Generator) -> tuple[np.ndarray, tuple[str, ...]]:
    """Apply one augmentation draw; returns (pixels, names of ops applied).

    uint8 inputs come back as uint8 (blur output is rounded and clipped);
    float inputs stay float.
    """
    if policy not in POLICIES:
        raise ConfigError(f"augmentation policy must be one of {POLICIES}, got {policy!r}")
    applied: list[str] = []
    if policy == "none":
        return pixels, ()
    op = GEOMETRIC_OPS[int(rng.integers(0, len(GEOMETRIC_OPS)))]
    out = apply_geometric(pixels, op)
    applied.append(op)
    if policy == "geometric+blur":
        sigma = float(rng.uniform(*BLUR_SIGMA_RANGE))
        blurred = gaussian_blur(out, sigma)
        if pixels.dtype == np.uint8:
            out = np.clip(np.rint(blurred), 0, 255).astype(np.uint8)
        else:
            out = blurred.astype(pixels.dtype)
        applied.append("blur")
    return np.ascontiguousarray(out), tuple(applied)
