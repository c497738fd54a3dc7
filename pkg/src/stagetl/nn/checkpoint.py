"""Binary checkpoint format ("KSTL"), the hand-off unit between stages.

Layout, all multi-byte values little-endian:

    magic   4 bytes  b"KSTL"
    version u32      currently 1
    meta    u32 length + UTF-8 JSON (stage, seed, class_keys, arch_hash, arch)
    count   u32      number of tensor entries
    entry   u16 name length, name UTF-8, u8 dtype tag (4=f32, 8=f64),
            u8 rank, u32 dims[rank], raw C-order values
    crc     u32      CRC32 of every preceding byte

Tensor names carry a ``param/``, ``velocity/`` or ``buffer/`` prefix; order
is preserved, so save -> load -> save is byte-identical.
"""

from __future__ import annotations

import json
import struct
import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import (ArchHashMismatchError, BadMagicError, CheckpointError,
                      ChecksumError, TruncatedCheckpointError,
                      UnsupportedVersionError)

MAGIC = b"KSTL"
VERSION = 1

_TAG_TO_DTYPE = {4: np.dtype("<f4"), 8: np.dtype("<f8")}
_DTYPE_TO_TAG = {np.dtype(np.float32): 4, np.dtype(np.float64): 8}


@dataclass
class Checkpoint:
    metadata: dict
    params: dict[str, np.ndarray]
    velocity: dict[str, np.ndarray]
    buffers: dict[str, np.ndarray] = field(default_factory=dict)

    @property
    def arch_hash(self) -> str:
        return self.metadata.get("arch_hash", "")

    def param_count(self) -> int:
        return sum(int(v.size) for v in self.params.values())


def _pack_tensor(name: str, arr: np.ndarray) -> bytes:
    dt = np.dtype(arr.dtype)
    if dt not in _DTYPE_TO_TAG:
        raise CheckpointError(f"tensor {name!r} has unsupported dtype {dt}")
    nb = name.encode("utf-8")
    out = [struct.pack("<H", len(nb)), nb,
           struct.pack("<BB", _DTYPE_TO_TAG[dt], arr.ndim)]
    out.append(struct.pack(f"<{arr.ndim}I", *arr.shape) if arr.ndim else b"")
    out.append(np.ascontiguousarray(arr, dtype=dt.newbyteorder("<")).tobytes())
    return b"".join(out)


def save_checkpoint(ckpt: Checkpoint) -> bytes:
    entries: list[tuple[str, np.ndarray]] = []
    entries += [(f"param/{k}", v) for k, v in ckpt.params.items()]
    entries += [(f"velocity/{k}", v) for k, v in ckpt.velocity.items()]
    entries += [(f"buffer/{k}", v) for k, v in ckpt.buffers.items()]
    meta = json.dumps(ckpt.metadata, sort_keys=True, separators=(",", ":")).encode("utf-8")
    parts = [MAGIC, struct.pack("<I", VERSION), struct.pack("<I", len(meta)), meta,
             struct.pack("<I", len(entries))]
    parts += [_pack_tensor(name, arr) for name, arr in entries]
    payload = b"".join(parts)
    return payload + struct.pack("<I", zlib.crc32(payload))


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise TruncatedCheckpointError(
                f"checkpoint ends at byte {len(self.data)} while reading "
                f"{n} bytes at offset {self.pos}")
        out = self.data[self.pos : self.pos + n]
        self.pos += n
        return out

    def u8(self):
        return self.take(1)[0]

    def u16(self):
        return struct.unpack("<H", self.take(2))[0]

    def u32(self):
        return struct.unpack("<I", self.take(4))[0]


def _scan(r: _Reader, decode: bool):
    """Walk the full layout; with ``decode`` build the metadata and tensors.

    The first (bounds-only) pass turns physical truncation into its own
    error before the checksum is consulted; the decoding pass runs on
    CRC-verified bytes, so semantic failures there indicate writer bugs.
    """
    meta_raw = r.take(r.u32())
    metadata = None
    if decode:
        try:
            metadata = json.loads(meta_raw.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise CheckpointError(f"metadata block is not valid JSON: {exc}") from exc
    tensors: dict[str, np.ndarray] = {}
    for _ in range(r.u32()):
        name_raw = r.take(r.u16())
        tag = r.u8()
        rank = r.u8()
        dims = tuple(r.u32() for _ in range(rank))
        itemsize = _TAG_TO_DTYPE[tag].itemsize if tag in _TAG_TO_DTYPE else 4
        if decode and tag not in _TAG_TO_DTYPE:
            raise CheckpointError(f"tensor {name_raw!r} has unknown dtype tag {tag}")
        n = int(np.prod(dims, dtype=np.int64)) if rank else 1
        raw = r.take(n * itemsize)
        if decode:
            dt = _TAG_TO_DTYPE[tag]
            tensors[name_raw.decode("utf-8")] = (
                np.frombuffer(raw, dtype=dt).reshape(dims).copy())
    return metadata, tensors


def load_checkpoint(data: bytes, expect_arch_hash: str | None = None) -> Checkpoint:
    r = _Reader(data)
    if r.take(4) != MAGIC:
        raise BadMagicError(f"not a KSTL checkpoint (magic {data[:4]!r})")
    version = r.u32()
    if version != VERSION:
        raise UnsupportedVersionError(f"unsupported checkpoint version {version}")

    _scan(r, decode=False)
    crc_stored = r.u32()
    if r.pos != len(data):
        raise CheckpointError(f"{len(data) - r.pos} trailing bytes after checksum")
    if zlib.crc32(data[:-4]) != crc_stored:
        raise ChecksumError("checkpoint payload fails its CRC32 check")

    r.pos = 8
    metadata, tensors = _scan(r, decode=True)

    if expect_arch_hash is not None and metadata.get("arch_hash") != expect_arch_hash:
        raise ArchHashMismatchError(
            f"checkpoint was built for arch {metadata.get('arch_hash')!r}, "
            f"requested arch is {expect_arch_hash!r}")

    params, velocity, buffers = {}, {}, {}
    for name, arr in tensors.items():
        kind, _, rest = name.partition("/")
        {"param": params, "velocity": velocity, "buffer": buffers}.get(
            kind, params)[rest or name] = arr
    return Checkpoint(metadata, params, velocity, buffers)


def write_checkpoint(path, ckpt: Checkpoint) -> None:
    Path(path).write_bytes(save_checkpoint(ckpt))


def read_checkpoint(path, expect_arch_hash: str | None = None) -> Checkpoint:
    return load_checkpoint(Path(path).read_bytes(), expect_arch_hash)
