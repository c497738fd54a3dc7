"""The three training strategies and the two-step hand-off between them.

Stage contracts enforced here:
  - scratch touches nothing pre-existing (fresh seeded init);
  - the first transfer stage (hetl) adopts a source backbone and appends a
    fresh head - nothing else;
  - the second transfer stage (hotl) loads every parameter of its source
    checkpoint, adds or removes none, relabels the output indices to the
    target class keys, and starts with zeroed optimizer velocity.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, replace

from ..errors import ConfigError, ContractError
from ..metrics import ConfusionMatrix, MetricValues
from ..nn.checkpoint import Checkpoint
from ..nn.model import ArchitectureConfig, Model
from ..nn.optim import ParamSet
from ..synth import GenericTextures
from .config import AUGMENTATION_BY_KIND, TrainConfig
from .prepare import PreparedData, PreparedSplit
from .train import EpochLog, evaluate, evaluate_metrics, train_model


@dataclass
class StageResult:
    checkpoint: Checkpoint
    model: Model
    epoch_logs: list[EpochLog]
    aug_counts: Counter
    eval_metrics: MetricValues | None = None
    confusion: ConfusionMatrix | None = None
    predictions: list[tuple] | None = None  # (patch_id, true_key, pred_key, *scores)


def _arch_for(arch: ArchitectureConfig, cfg: TrainConfig) -> ArchitectureConfig:
    if cfg.dropout is None or cfg.dropout == arch.head_dropout:
        return arch
    return replace(arch, head_dropout=cfg.dropout)


def _checkpoint_of(model: Model, pset: ParamSet, *, stage: str, seed: int,
                   class_keys: tuple[str, ...], extra: dict | None = None) -> Checkpoint:
    metadata = {
        "stage": stage,
        "seed": seed,
        "class_keys": list(class_keys),
        "arch_hash": model.arch.arch_hash(),
        "arch": model.arch.to_dict(),
    }
    if extra:
        metadata.update(extra)
    return Checkpoint(metadata, dict(model.params()), dict(pset.velocity),
                      dict(model.buffers()))


def _finish(model: Model, pset: ParamSet, outcome, data: PreparedData | None,
            *, stage: str, cfg: TrainConfig, class_keys, extra=None) -> StageResult:
    result = StageResult(
        checkpoint=_checkpoint_of(model, pset, stage=stage, seed=cfg.seed,
                                  class_keys=class_keys, extra=extra),
        model=model, epoch_logs=outcome.epoch_logs, aug_counts=outcome.aug_counts)
    if data is not None and len(data.test):
        mv, cm, ev = evaluate_metrics(model, data.test, data.class_keys)
        result.eval_metrics = mv
        result.confusion = cm
        result.predictions = [
            (pid, data.class_keys[int(t)], data.class_keys[int(p)],
             *(float(s) for s in srow))
            for pid, t, p, srow in zip(data.test.patch_ids, data.test.y, ev.preds,
                                       ev.scores)
        ]
    return result


def run_scratch(arch: ArchitectureConfig, data: PreparedData, cfg: TrainConfig,
                augmentation: str | None = None,
                access_log: list | None = None) -> StageResult:
    """Seeded random init, no transfer."""
    model = Model(_arch_for(arch, cfg), precision=cfg.precision, init_seed=cfg.seed)
    pset = ParamSet(model.params())
    outcome = train_model(model, pset, data.train, data.test, cfg,
                          augmentation or AUGMENTATION_BY_KIND["scratch"],
                          access_log=access_log)
    return _finish(model, pset, outcome, data, stage="scratch", cfg=cfg,
                   class_keys=data.class_keys)


def run_stage0_pretrain(arch: ArchitectureConfig, generic: GenericTextures,
                        cfg: TrainConfig) -> StageResult:
    """Backbone pretraining on the many-class generic texture task.

    The head is sized for the generic class count and discarded at transfer;
    only ``backbone.*`` entries travel onward.
    """
    arch0 = replace(_arch_for(arch, cfg),
                    head_widths=arch.head_widths[:-1] + (generic.n_classes,))
    model = Model(arch0, precision=cfg.precision, init_seed=cfg.seed)
    pset = ParamSet(model.params())
    train = PreparedSplit(x=generic.train_x, y=generic.train_y)
    test = PreparedSplit(x=generic.test_x, y=generic.test_y)
    outcome = train_model(model, pset, train, test, cfg,
                          AUGMENTATION_BY_KIND["stage0"])
    result = _finish(model, pset, outcome, None, stage="stage0", cfg=cfg,
                     class_keys=tuple(f"T{i:02d}" for i in range(generic.n_classes)))
    result.checkpoint.metadata["generic_test_accuracy"] = evaluate(model, test).accuracy
    return result


def _check_backbone_compatible(arch: ArchitectureConfig, source_arch: dict) -> None:
    src = ArchitectureConfig.from_dict(source_arch)
    same = (src.blocks == arch.blocks and src.in_channels == arch.in_channels
            and src.kernel_size == arch.kernel_size)
    if not same:
        raise ConfigError(
            "source backbone does not match the requested architecture: "
            f"{src.blocks} vs {arch.blocks}")
    if src.feature_width != arch.feature_width:
        raise ConfigError(
            f"backbone feature width {src.feature_width} does not feed a head "
            f"expecting {arch.feature_width}")


def run_hetl(stage0_checkpoint: Checkpoint | None, data: PreparedData,
             arch: ArchitectureConfig, cfg: TrainConfig,
             access_log: list | None = None) -> StageResult:
    """First transfer stage: adopted backbone (if given) plus a fresh head."""
    model = Model(_arch_for(arch, cfg), precision=cfg.precision, init_seed=cfg.seed)
    extra = {"source_stage": None}
    if stage0_checkpoint is not None:
        _check_backbone_compatible(model.arch, stage0_checkpoint.metadata["arch"])
        model.load_state(stage0_checkpoint.params, stage0_checkpoint.buffers,
                         only_prefix="backbone.")
        extra["source_stage"] = stage0_checkpoint.metadata.get("stage")
    pset = ParamSet(model.params())
    outcome = train_model(model, pset, data.train, data.test, cfg,
                          AUGMENTATION_BY_KIND["hetl"], access_log=access_log)
    return _finish(model, pset, outcome, data, stage="hetl", cfg=cfg,
                   class_keys=data.class_keys, extra=extra)


def run_hotl(source: Checkpoint, data: PreparedData, cfg: TrainConfig,
             requested_arch: ArchitectureConfig | None = None,
             access_log: list | None = None) -> StageResult:
    """Second transfer stage: the source model continued on the new domain.

    Every parameter comes from the source checkpoint; output indices are
    relabeled positionally to the target class keys; velocity starts at zero.
    """
    source_arch = ArchitectureConfig.from_dict(source.metadata["arch"])
    if requested_arch is not None and requested_arch != source_arch:
        raise ContractError(
            "the second transfer stage must reuse the source architecture "
            "without modifications (no added layers): requested arch "
            f"{requested_arch.arch_hash()} != source arch {source_arch.arch_hash()}")
    if cfg.dropout is not None and cfg.dropout != source_arch.head_dropout:
        raise ContractError(
            f"hotl cannot change dropout ({source_arch.head_dropout} -> {cfg.dropout}); "
            "the architecture is reused unchanged")
    if len(data.class_keys) != source_arch.n_classes:
        raise ContractError(
            f"target has {len(data.class_keys)} classes but the source head "
            f"emits {source_arch.n_classes}")

    model = Model(source_arch, precision=cfg.precision, init_seed=cfg.seed)
    model.load_state(source.params, source.buffers)
    if model.param_count() != source.param_count():
        raise ContractError(
            f"parameter count changed across the hand-off: "
            f"{source.param_count()} -> {model.param_count()}")

    source_keys = tuple(source.metadata.get("class_keys", ()))
    key_map = {a: b for a, b in zip(source_keys, data.class_keys) if a != b}

    pset = ParamSet(model.params())  # velocity zeroed: weights transfer, optimizer state does not
    outcome = train_model(model, pset, data.train, data.test, cfg,
                          AUGMENTATION_BY_KIND["hotl"], access_log=access_log)
    return _finish(model, pset, outcome, data, stage="hotl", cfg=cfg,
                   class_keys=data.class_keys,
                   extra={"source_stage": source.metadata.get("stage"),
                          "class_key_map": key_map,
                          "initial_param_count": source.param_count()})
