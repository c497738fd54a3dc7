"""Serializable configuration for stages and whole experiments.

``HETL_PRESET`` and ``HOTL_PRESET`` carry the full-scale hyperparameters
verbatim (batch 24, SGD momentum 0.9; lr 0.001 with dropout 0.5 for the
first transfer stage, lr 0.01 for 30 epochs in the second). The desk-scale
defaults below are sized so the whole strategy matrix trains on a laptop
CPU in minutes; they live in one place so every entry point shares them.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

from ..errors import ConfigError, ContractError
from ..nn.model import ArchitectureConfig, ConvBlock
from ..synth import SynthSpec

STAGE_KINDS = ("scratch", "stage0", "hetl", "hotl")
SUBSETS = ("surface", "section", "mixed")

# stage -> training-time augmentation policy; HeTL adds blur to brace the
# model for the degraded target domain, HoTL must never blur
AUGMENTATION_BY_KIND = {
    "scratch": "geometric",
    "stage0": "geometric",
    "hetl": "geometric+blur",
    "hotl": "geometric",
}


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 24
    lr: float = 0.001
    momentum: float = 0.9
    epochs: int = 30
    dropout: float | None = 0.5  # None keeps the architecture's rate
    seed: int = 0
    precision: str = "single"

    def __post_init__(self):
        if self.batch_size < 2:
            raise ConfigError("batch size must be at least 2 (batch norm needs it)")
        if self.dropout is not None and not 0.0 <= self.dropout < 1.0:
            raise ConfigError(f"dropout must be in [0, 1), got {self.dropout}")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        return cls(**d)


HETL_PRESET = TrainConfig(batch_size=24, lr=0.001, momentum=0.9, epochs=30, dropout=0.5)
HOTL_PRESET = TrainConfig(batch_size=24, lr=0.01, momentum=0.9, epochs=30, dropout=None)


@dataclass(frozen=True)
class StageSpec:
    kind: str
    dataset: str                     # "A" | "B" | "generic"
    class_keys: tuple[str, ...]
    train: TrainConfig
    subset: str = "mixed"
    augmentation: str | None = None  # None = the stage's mandatory policy
    source_checkpoint: str | None = None

    def __post_init__(self):
        if self.kind not in STAGE_KINDS:
            raise ConfigError(f"stage kind must be one of {STAGE_KINDS}, got {self.kind!r}")
        if self.subset not in SUBSETS:
            raise ConfigError(f"subset must be one of {SUBSETS}, got {self.subset!r}")
        aug = self.augmentation or AUGMENTATION_BY_KIND[self.kind]
        if self.kind == "hetl" and aug != "geometric+blur":
            raise ContractError("the first transfer stage trains with geometric+blur")
        if self.kind == "hotl" and aug != "geometric":
            raise ContractError("the second transfer stage trains with geometric only; "
                                "blur must never fire there")
        if self.kind == "hotl" and not self.source_checkpoint:
            raise ContractError("hotl needs --from-checkpoint: it fine-tunes the "
                                "first-stage model and adds nothing")
        object.__setattr__(self, "augmentation", aug)


@dataclass(frozen=True)
class PipelineConfig:
    patch_edge: int = 24
    max_overlap: int = 0
    split_ratio: float = 0.8
    train_per_class: int = 100
    test_per_class: int = 25

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "PipelineConfig":
        return cls(**d)


@dataclass(frozen=True)
class Stage0Config:
    n_classes: int = 12
    per_class: int = 32
    train: TrainConfig = field(default_factory=lambda: TrainConfig(
        batch_size=24, lr=0.01, momentum=0.9, epochs=5, dropout=0.25))

    def to_dict(self) -> dict:
        return {"n_classes": self.n_classes, "per_class": self.per_class,
                "train": self.train.to_dict()}

    @classmethod
    def from_dict(cls, d: dict) -> "Stage0Config":
        return cls(d["n_classes"], d["per_class"], TrainConfig.from_dict(d["train"]))


@dataclass(frozen=True)
class ExperimentConfig:
    seed: int = 0
    n_runs: int = 5
    synth: SynthSpec = field(default_factory=SynthSpec)
    pipeline: PipelineConfig = field(default_factory=PipelineConfig)
    arch: ArchitectureConfig = field(default_factory=lambda: ArchitectureConfig(input_edge=24))
    stage0: Stage0Config = field(default_factory=Stage0Config)
    scratch_train: TrainConfig = field(default_factory=lambda: TrainConfig(
        batch_size=24, lr=0.02, momentum=0.9, epochs=8, dropout=0.25))
    hetl_train: TrainConfig = field(default_factory=lambda: TrainConfig(
        batch_size=24, lr=0.01, momentum=0.9, epochs=8, dropout=0.25))
    hotl_train: TrainConfig = field(default_factory=lambda: TrainConfig(
        batch_size=24, lr=0.01, momentum=0.9, epochs=8, dropout=None))

    def __post_init__(self):
        if self.arch.input_edge != self.pipeline.patch_edge:
            raise ConfigError(
                f"architecture input edge {self.arch.input_edge} != patch edge "
                f"{self.pipeline.patch_edge}")
        if self.synth.image_edge < self.pipeline.patch_edge:
            raise ConfigError("synthetic images are smaller than the patch edge")

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "n_runs": self.n_runs,
            "synth": self.synth.to_dict(),
            "pipeline": self.pipeline.to_dict(),
            "arch": self.arch.to_dict(),
            "stage0": self.stage0.to_dict(),
            "scratch_train": self.scratch_train.to_dict(),
            "hetl_train": self.hetl_train.to_dict(),
            "hotl_train": self.hotl_train.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        base = cls()
        return cls(
            seed=d.get("seed", 0),
            n_runs=d.get("n_runs", base.n_runs),
            synth=SynthSpec.from_dict(d["synth"]) if "synth" in d else base.synth,
            pipeline=PipelineConfig.from_dict(d["pipeline"]) if "pipeline" in d else base.pipeline,
            arch=ArchitectureConfig.from_dict(d["arch"]) if "arch" in d else base.arch,
            stage0=Stage0Config.from_dict(d["stage0"]) if "stage0" in d else base.stage0,
            scratch_train=TrainConfig.from_dict(d["scratch_train"]) if "scratch_train" in d else base.scratch_train,
            hetl_train=TrainConfig.from_dict(d["hetl_train"]) if "hetl_train" in d else base.hetl_train,
            hotl_train=TrainConfig.from_dict(d["hotl_train"]) if "hotl_train" in d else base.hotl_train,
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        return cls.from_dict(json.loads(text))

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        return cls.from_json(Path(path).read_text())

    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def with_seed(self, seed: int) -> "ExperimentConfig":
        return replace(self, seed=seed)


def desk_config(seed: int = 0) -> ExperimentConfig:
    """The shipped desk-scale operating point used by the acceptance suite."""
    return ExperimentConfig(seed=seed)
