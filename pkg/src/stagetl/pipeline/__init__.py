from .config import (AUGMENTATION_BY_KIND, HETL_PRESET, HOTL_PRESET,
                     ExperimentConfig, PipelineConfig, Stage0Config, StageSpec,
                     SUBSETS, TrainConfig, desk_config)
from .matrix import (MatrixResult, STRATEGY_ROWS, run_experiment_matrix,
                     run_single_run, write_matrix_report)
from .prepare import PreparedData, PreparedSplit, prepare
from .stages import (StageResult, run_hetl, run_hotl, run_scratch,
                     run_stage0_pretrain)
from .train import EpochLog, evaluate, evaluate_metrics, train_model

__all__ = [
    "AUGMENTATION_BY_KIND", "EpochLog", "ExperimentConfig", "HETL_PRESET",
    "HOTL_PRESET", "MatrixResult", "PipelineConfig", "PreparedData",
    "PreparedSplit", "STRATEGY_ROWS", "SUBSETS", "Stage0Config", "StageResult",
    "StageSpec", "TrainConfig", "desk_config", "evaluate", "evaluate_metrics",
    "prepare", "run_experiment_matrix", "run_hetl", "run_hotl", "run_scratch",
    "run_single_run", "run_stage0_pretrain", "train_model",
    "write_matrix_report",
]
