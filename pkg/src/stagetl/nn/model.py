"""Architecture description and the assembled classifier.

The backbone is a stack of conv blocks (3x3 conv, optional batch norm, ReLU,
optional 2x2 max pool) closed by global average pooling; the head is a chain
of fully connected layers (optional batch norm, ReLU, dropout on hidden
layers). The classifier output layer is zero-initialized so an untrained
model predicts the uniform distribution; everything else uses fan-in scaled
normal init, seeded.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError, NumericsError, UsageError
from ..seeding import stream
from . import layers as L

DTYPES = {"single": np.float32, "double": np.float64}

# Head used by the full-scale configuration: four fully connected layers of
# 768/256/128/6 units with batch norm, ReLU and dropout 0.5 on hidden layers.
PAPER_HEAD_WIDTHS = (768, 256, 128, 6)
PAPER_HEAD_DROPOUT = 0.5


@dataclass(frozen=True)
class ConvBlock:
    channels: int
    batch_norm: bool = True
    pool: bool = True


@dataclass(frozen=True)
class ArchitectureConfig:
    input_edge: int
    blocks: tuple[ConvBlock, ...] = (ConvBlock(8), ConvBlock(16), ConvBlock(32))
    head_widths: tuple[int, ...] = (64, 32, 6)
    head_batch_norm: bool = True
    head_dropout: float = 0.5
    in_channels: int = 3
    kernel_size: int = 3

    def __post_init__(self):
        if not self.blocks:
            raise ConfigError("architecture needs at least one conv block")
        if not self.head_widths:
            raise ConfigError("head_widths must end in the class count")
        if not 0.0 <= self.head_dropout < 1.0:
            raise ConfigError(f"head dropout must be in [0, 1), got {self.head_dropout}")
        edge = self.input_edge
        for blk in self.blocks:
            if blk.pool:
                edge //= 2
        if edge < 1:
            raise ConfigError(
                f"input edge {self.input_edge} collapses to zero after pooling")
        object.__setattr__(self, "blocks", tuple(self.blocks))
        object.__setattr__(self, "head_widths", tuple(int(w) for w in self.head_widths))

    @property
    def n_classes(self) -> int:
        return self.head_widths[-1]

    @property
    def feature_width(self) -> int:
        return self.blocks[-1].channels

    @property
    def penultimate_width(self) -> int:
        if len(self.head_widths) >= 2:
            return self.head_widths[-2]
        return self.feature_width

    def param_count(self) -> int:
        """Trainable parameter count, closed-form from the config."""
        k = self.kernel_size
        total = 0
        cin = self.in_channels
        for blk in self.blocks:
            total += blk.channels * cin * k * k + blk.channels
            if blk.batch_norm:
                total += 2 * blk.channels
            cin = blk.channels
        win = self.feature_width
        for w in self.head_widths[:-1]:
            total += win * w + w
            if self.head_batch_norm:
                total += 2 * w
            win = w
        total += win * self.n_classes + self.n_classes
        return total

    def to_dict(self) -> dict:
        return {
            "input_edge": self.input_edge,
            "blocks": [
                {"channels": b.channels, "batch_norm": b.batch_norm, "pool": b.pool}
                for b in self.blocks
            ],
            "head_widths": list(self.head_widths),
            "head_batch_norm": self.head_batch_norm,
            "head_dropout": self.head_dropout,
            "in_channels": self.in_channels,
            "kernel_size": self.kernel_size,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ArchitectureConfig":
        return cls(
            input_edge=d["input_edge"],
            blocks=tuple(ConvBlock(b["channels"], b["batch_norm"], b["pool"])
                         for b in d["blocks"]),
            head_widths=tuple(d["head_widths"]),
            head_batch_norm=d["head_batch_norm"],
            head_dropout=d["head_dropout"],
            in_channels=d.get("in_channels", 3),
            kernel_size=d.get("kernel_size", 3),
        )

    def arch_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


def paper_head(n_classes: int = 6) -> tuple[int, ...]:
    """The full-scale head widths with the requested class count."""
    return PAPER_HEAD_WIDTHS[:-1] + (n_classes,)


class Model:
    """Assembled classifier with explicit forward/backward passes."""

    def __init__(self, arch: ArchitectureConfig, *, precision: str = "single",
                 init_seed: int = 0):
        if precision not in DTYPES:
            raise ConfigError(f"precision must be one of {sorted(DTYPES)}")
        self.arch = arch
        self.precision = precision
        dtype = DTYPES[precision]
        rng = stream(init_seed, "init")

        named: list[tuple[str, L.Layer]] = []
        cin = arch.in_channels
        for i, blk in enumerate(arch.blocks):
            p = f"backbone.block{i}"
            named.append((f"{p}.conv", L.Conv2d(
                cin, blk.channels, arch.kernel_size, stride=1,
                padding=arch.kernel_size // 2, dtype=dtype, rng=rng)))
            if blk.batch_norm:
                named.append((f"{p}.bn", L.BatchNorm(blk.channels, dtype=dtype)))
            named.append((f"{p}.relu", L.ReLU()))
            if blk.pool:
                named.append((f"{p}.pool", L.MaxPool2()))
            cin = blk.channels
        named.append(("backbone.gap", L.GlobalAvgPool()))

        win = arch.feature_width
        for j, w in enumerate(arch.head_widths[:-1]):
            p = f"head.fc{j}"
            named.append((f"{p}", L.Linear(win, w, dtype=dtype, rng=rng)))
            if arch.head_batch_norm:
                named.append((f"{p}.bn", L.BatchNorm(w, dtype=dtype)))
            named.append((f"{p}.relu", L.ReLU()))
            if arch.head_dropout > 0.0:
                named.append((f"{p}.drop", L.Dropout(arch.head_dropout)))
            win = w
        named.append(("head.out", L.Linear(win, arch.n_classes, dtype=dtype,
                                           zero_init=True)))

        self._layers = named
        self._forward_ran = False
        self._features = None

    # -- execution ----------------------------------------------------------

    def forward(self, x, train: bool = False, rng=None, check_finite: bool = True):
        n, c, h, w = x.shape
        if c != self.arch.in_channels or h != self.arch.input_edge or w != self.arch.input_edge:
            raise ConfigError(
                f"batch shape {x.shape[1:]} does not match architecture input "
                f"({self.arch.in_channels}, {self.arch.input_edge}, {self.arch.input_edge})")
        out = x
        for name, layer in self._layers:
            if name == "head.out":
                self._features = out
            out = layer.forward(out, train=train, rng=rng)
            if check_finite and not np.isfinite(out).all():
                raise NumericsError(f"non-finite activations after {name}")
        self._forward_ran = True
        return out

    def backward(self, grad_logits) -> dict[str, np.ndarray]:
        if not self._forward_ran:
            raise UsageError("model backward called before forward")
        g = grad_logits
        for name, layer in reversed(self._layers):
            g = layer.backward(g)
        return self.grads()

    def features(self, x) -> np.ndarray:
        """Activations entering the classifier layer, in eval mode."""
        self.forward(x, train=False)
        return self._features

    # -- state --------------------------------------------------------------

    def params(self) -> dict[str, np.ndarray]:
        out = {}
        for name, layer in self._layers:
            for k, v in layer.params().items():
                out[f"{name}.{k}"] = v
        return out

    def grads(self) -> dict[str, np.ndarray]:
        out = {}
        for name, layer in self._layers:
            for k, v in layer.grads().items():
                out[f"{name}.{k}"] = v
        return out

    def buffers(self) -> dict[str, np.ndarray]:
        out = {}
        for name, layer in self._layers:
            for k, v in layer.buffers().items():
                out[f"{name}.{k}"] = v
        return out

    def param_count(self) -> int:
        return sum(int(v.size) for v in self.params().values())

    def load_state(self, params: dict, buffers: dict | None = None,
                   only_prefix: str | None = None) -> None:
        """Copy named arrays into the model, validating names and shapes.

        ``only_prefix`` restricts loading to entries whose name starts with
        the prefix (used to adopt a backbone while keeping a fresh head).
        """
        own_p = self.params()
        own_b = self.buffers()
        for src, own, kind in ((params, own_p, "param"), (buffers or {}, own_b, "buffer")):
            for name, value in src.items():
                if only_prefix and not name.startswith(only_prefix):
                    continue
                if name not in own:
                    raise ConfigError(f"unknown {kind} {name!r} for this architecture")
                if own[name].shape != value.shape:
                    raise ConfigError(
                        f"{kind} {name!r} has shape {value.shape}, expected {own[name].shape}")
                own[name][...] = value.astype(own[name].dtype, copy=False)
