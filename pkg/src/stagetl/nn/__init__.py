from .checkpoint import (Checkpoint, load_checkpoint, read_checkpoint,
                         save_checkpoint, write_checkpoint)
from .model import (ArchitectureConfig, ConvBlock, Model, PAPER_HEAD_WIDTHS,
                    paper_head)
from .optim import ParamSet, sgd_momentum_step

__all__ = [
    "ArchitectureConfig", "Checkpoint", "ConvBlock", "Model",
    "PAPER_HEAD_WIDTHS", "ParamSet", "load_checkpoint", "paper_head",
    "read_checkpoint", "save_checkpoint", "sgd_momentum_step",
    "write_checkpoint",
]
