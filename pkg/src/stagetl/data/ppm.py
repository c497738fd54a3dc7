"""8-bit RGB raster I/O. Binary PPM (P6) is native; PNG needs Pillow."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from ..errors import DataError


def read_ppm(path) -> np.ndarray:
    data = Path(path).read_bytes()
    if data[:2] != b"P6":
        raise DataError(f"{path}: not a binary PPM (magic {data[:2]!r})")
    # header: magic, width, height, maxval -- whitespace separated, with
    # optional '#' comments between tokens
    pos = 2
    fields = []
    while len(fields) < 3:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if pos < len(data) and data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos] != 0x0A:
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise DataError(f"{path}: truncated PPM header")
        fields.append(data[start:pos])
    pos += 1  # single whitespace byte after maxval
    try:
        width, height, maxval = (int(f) for f in fields)
    except ValueError:
        raise DataError(f"{path}: malformed PPM header fields {fields}") from None
    if maxval != 255:
        raise DataError(f"{path}: only maxval 255 PPMs are supported, got {maxval}")
    n = width * height * 3
    raw = data[pos : pos + n]
    if len(raw) != n:
        raise DataError(f"{path}: expected {n} pixel bytes, found {len(raw)}")
    return np.frombuffer(raw, dtype=np.uint8).reshape(height, width, 3).copy()


def write_ppm(path, pixels: np.ndarray) -> None:
    if pixels.ndim != 3 or pixels.shape[2] != 3 or pixels.dtype != np.uint8:
        raise DataError(f"write_ppm needs HxWx3 uint8 pixels, got {pixels.shape} {pixels.dtype}")
    h, w, _ = pixels.shape
    with open(path, "wb") as f:
        f.write(f"P6\n{w} {h}\n255\n".encode("ascii"))
        f.write(np.ascontiguousarray(pixels).tobytes())


def read_image(path) -> np.ndarray:
    """Read a raster by extension; PPM natively, anything else via Pillow."""
    p = Path(path)
    if not p.exists():
        raise DataError(f"raster file {p} is missing")
    if p.suffix.lower() == ".ppm":
        return read_ppm(p)
    try:
        from PIL import Image
    except ImportError:
        raise DataError(
            f"{p}: non-PPM rasters need Pillow (install the 'png' extra)") from None
    with Image.open(p) as im:
        return np.asarray(im.convert("RGB"), dtype=np.uint8)
