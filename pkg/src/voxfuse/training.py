"""Training loop: batch assembly, cyclic-LR AdamW epochs, dev-EER early
stopping with best-checkpoint restore, and resumable checkpoints.

Determinism contract: everything random is drawn from generators seeded
as default_rng([rng_seed, stream, ...]), with one stream per purpose and
per-epoch substreams. Two runs with the same seed and data produce
bit-identical parameters and metric logs, and a resumed run reproduces
the uninterrupted one exactly.
"""
from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .data import (
    Augmentation, AUGMENT_VARIANTS, DatasetManifest, EmbeddingSet, Split,
    TrialSet,
)
from .errors import ConfigError, MissingEmbeddingError
from .model import ExtractMode, FusionModel, ModelConfig
from .nn.optim import AdamW, LrSchedule, cyclic_lr
from .scoring import evaluate

AUG_NONE = "none"
AUG_ANONYMIZED_MIX = "anonymized_mix"
AUG_SPEC = "spec_augment"
_AUG_CHOICES = {AUG_ANONYMIZED_MIX, AUG_SPEC}

ORIGINAL_SOURCE_TAG = "original"


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 32
    originals_per_batch: int = 8
    max_epochs: int = 25
    early_stop_patience: int = 10
    lr_schedule: LrSchedule = field(default_factory=LrSchedule)
    weight_decay: float = 1e-5
    augmentation: frozenset[str] = frozenset()
    source_tags: tuple[str, ...] = ()
    rng_seed: int = 0

    def __post_init__(self):
        if self.batch_size <= 0:
            raise ConfigError(f"batch_size must be positive, got {self.batch_size}")
        if self.max_epochs <= 0:
            raise ConfigError(f"max_epochs must be positive, got {self.max_epochs}")
        if self.early_stop_patience < 0:
            raise ConfigError("early_stop_patience must be >= 0, got "
                              f"{self.early_stop_patience}")
        if self.early_stop_patience > self.max_epochs:
            raise ConfigError(
                f"early_stop_patience {self.early_stop_patience} exceeds "
                f"max_epochs {self.max_epochs}")
        unknown = set(self.augmentation) - _AUG_CHOICES
        if unknown:
            raise ConfigError(
                f"unknown augmentation flags: {sorted(unknown)}; "
                f"expected subset of {sorted(_AUG_CHOICES)}")
        if self.spec_augment:
            per_original = 1 + len(AUGMENT_VARIANTS)
            if self.originals_per_batch * per_original != self.batch_size:
                raise ConfigError(
                    f"with spec_augment, originals_per_batch * {per_original} "
                    f"must equal batch_size; got {self.originals_per_batch} * "
                    f"{per_original} != {self.batch_size}")
        if self.weight_decay < 0:
            raise ConfigError(
                f"weight_decay must be >= 0, got {self.weight_decay}")

    @property
    def spec_augment(self) -> bool:
        return AUG_SPEC in self.augmentation

    @property
    def originals_per_step(self) -> int:
        return self.originals_per_batch if self.spec_augment else self.batch_size


@dataclass
class Batch:
    audio: np.ndarray      # (batch, audio_dim) float64
    text: np.ndarray       # (batch, text_dim) float64
    targets: np.ndarray    # (batch,) int class indices
    items: list[tuple[str, Augmentation]]  # (utterance_id, variant) per row


def train_pool(manifest: DatasetManifest, config: TrainConfig) -> list:
    """Train-split manifest entries eligible under the dataset filters.

    An explicit source_tags list wins; otherwise anonymized_mix admits
    every source and its absence restricts to original recordings.
    """
    if config.source_tags:
        tags = set(config.source_tags)
    elif AUG_ANONYMIZED_MIX in config.augmentation:
        tags = None
    else:
        tags = {ORIGINAL_SOURCE_TAG}
    entries = manifest.utterances(Split.TRAIN, source_tags=tags)
    return sorted(entries, key=lambda e: e.utterance_id)


def class_index(manifest: DatasetManifest, config: TrainConfig) -> dict[str, int]:
    """Maps each train-pool speaker to a stable class id."""
    speakers = sorted({e.speaker_id for e in train_pool(manifest, config)})
    if not speakers:
        raise ConfigError("no training speakers under the configured filters")
    return {spk: i for i, spk in enumerate(speakers)}


def assemble_batch(entries, classes: dict[str, int], audio_set: EmbeddingSet,
                   text_set: EmbeddingSet, spec_augment: bool) -> Batch:
    """Builds a batch from original utterances, expanding each into its
    tagged variants when spec_augment is on. Text embeddings are shared
    across an utterance's variants (the transcript does not change)."""
    audio_rows, text_rows, targets, items = [], [], [], []
    variants = ((Augmentation.ORIGINAL,) + AUGMENT_VARIANTS if spec_augment
                else (Augmentation.ORIGINAL,))
    for e in entries:
        if not text_set.has(e.speaker_id, e.utterance_id):
            raise MissingEmbeddingError(
                f"text:{e.utterance_id} missing from the text archive")
        text_vec = text_set.get(e.speaker_id, e.utterance_id).vector
        for aug in variants:
            if not audio_set.has(e.speaker_id, e.utterance_id, aug):
                raise MissingEmbeddingError(
                    f"audio:{e.utterance_id}/{aug.value} missing from the "
                    f"audio archive")
            audio_rows.append(audio_set.get(e.speaker_id, e.utterance_id,
                                            aug).vector)
            text_rows.append(text_vec)
            targets.append(classes[e.speaker_id])
            items.append((e.utterance_id, aug))
    return Batch(
        audio=np.ascontiguousarray(np.stack(audio_rows), dtype=np.float64),
        text=np.ascontiguousarray(np.stack(text_rows), dtype=np.float64),
        targets=np.asarray(targets, dtype=np.int64),
        items=items)


def sample_batch(manifest: DatasetManifest, audio_set: EmbeddingSet,
                 text_set: EmbeddingSet, config: TrainConfig,
                 rng: np.random.Generator,
                 classes: dict[str, int] | None = None) -> Batch:
    """One independently sampled batch of distinct original utterances."""
    if classes is None:
        classes = class_index(manifest, config)
    pool = train_pool(manifest, config)
    n = config.originals_per_step
    if len(pool) < n:
        raise ConfigError(
            f"train pool has {len(pool)} utterances, need at least {n}")
    picked = rng.choice(len(pool), size=n, replace=False)
    entries = [pool[int(i)] for i in picked]
    return assemble_batch(entries, classes, audio_set, text_set,
                          config.spec_augment)


def epoch_batches(pool, classes, audio_set, text_set, config: TrainConfig,
                  rng: np.random.Generator):
    """Yields one epoch of batches: shuffled distinct originals split into
    fixed-size groups, final short group dropped."""
    order = rng.permutation(len(pool))
    n = config.originals_per_step
    for start in range(0, len(pool) - n + 1, n):
        entries = [pool[int(i)] for i in order[start:start + n]]
        yield assemble_batch(entries, classes, audio_set, text_set,
                             config.spec_augment)


@dataclass
class EpochStats:
    epoch: int        # 1-based
    train_loss: float
    dev_eer: float    # fraction
    lr: float         # rate used for the last step of the epoch


@dataclass
class TrainResult:
    history: list[EpochStats]
    best_epoch: int
    best_eer: float
    global_step: int
    stopped_early: bool


def format_log_line(stats: EpochStats) -> str:
    return (f"{stats.epoch}\t{stats.train_loss:.8f}\t{stats.dev_eer:.8f}"
            f"\t{stats.lr:.10e}")


METRIC_LOG_HEADER = "epoch\ttrain_loss\tdev_eer\tlr"

_CHECKPOINT_FORMAT = 1


def save_checkpoint(path: str | Path, model: FusionModel, optimizer: AdamW,
                    meta: dict) -> None:
    """Atomically writes model + optimizer + bookkeeping to one npz file."""
    arrays: dict[str, np.ndarray] = {}
    for name, values in model.state_dict().items():
        arrays[f"param/{name}"] = values
    opt_state = optimizer.state_dict()
    for name, values in opt_state["m"].items():
        arrays[f"opt_m/{name}"] = values
    for name, values in opt_state["v"].items():
        arrays[f"opt_v/{name}"] = values
    meta = dict(meta)
    for name, values in meta.pop("_best_params").items():
        arrays[f"best/{name}"] = values
    meta["format"] = _CHECKPOINT_FORMAT
    meta["opt_step_count"] = opt_state["step_count"]
    arrays["meta"] = np.array(json.dumps(meta))
    path = Path(path)
    tmp = path.with_name(path.name + f".tmp-{os.getpid()}")
    try:
        with open(tmp, "wb") as fh:
            np.savez(fh, **arrays)
        os.replace(tmp, path)
    finally:
        if tmp.exists():
            tmp.unlink()


@dataclass
class Checkpoint:
    meta: dict
    params: dict[str, np.ndarray]
    opt_m: dict[str, np.ndarray]
    opt_v: dict[str, np.ndarray]
    best_params: dict[str, np.ndarray]

    def model_config(self) -> ModelConfig:
        cfg = dict(self.meta["model_config"])
        cfg["loss_weights"] = tuple(cfg["loss_weights"])
        return ModelConfig(**cfg)

    def build_model(self, use_best: bool = True) -> FusionModel:
        model = FusionModel(self.model_config())
        model.load_state_dict(self.best_params if use_best else self.params)
        return model


def load_checkpoint(path: str | Path) -> Checkpoint:
    with np.load(path) as data:
        meta = json.loads(str(data["meta"]))
        if meta.get("format") != _CHECKPOINT_FORMAT:
            raise ConfigError(
                f"unsupported checkpoint format {meta.get('format')!r}")
        params, opt_m, opt_v, best = {}, {}, {}, {}
        for key in data.files:
            if key == "meta":
                continue
            prefix, _, name = key.partition("/")
            {"param": params, "opt_m": opt_m, "opt_v": opt_v,
             "best": best}[prefix][name] = data[key]
    return Checkpoint(meta, params, opt_m, opt_v, best)


def fit(model: FusionModel, train_config: TrainConfig,
        manifest: DatasetManifest, audio_set: EmbeddingSet,
        text_set: EmbeddingSet, dev_trials: TrialSet,
        checkpoint_path: str | Path,
        log_path: str | Path | None = None,
        eval_mode: ExtractMode | str = ExtractMode.FUSION,
        resume_from: str | Path | None = None) -> TrainResult:
    """Runs the full training loop and leaves `model` holding the best
    parameters by dev EER. The checkpoint at `checkpoint_path` is updated
    after every epoch; it carries the last-epoch state for resuming plus
    the best parameters as the deliverable."""
    classes = class_index(manifest, train_config)
    if model.config.n_classes != len(classes):
        raise ConfigError(
            f"model has {model.config.n_classes} classes but the train pool "
            f"has {len(classes)} speakers")
    pool = train_pool(manifest, train_config)
    if len(pool) < train_config.originals_per_step:
        raise ConfigError(
            f"train pool has {len(pool)} utterances, need at least "
            f"{train_config.originals_per_step} per batch")

    optimizer = AdamW(model.parameters(),
                      weight_decay=train_config.weight_decay)
    seed = train_config.rng_seed
    schedule = train_config.lr_schedule
    eval_mode = ExtractMode(eval_mode)

    start_epoch = 1
    global_step = 0
    best_eer = float("inf")
    best_epoch = 0
    best_params = model.state_dict()
    history: list[EpochStats] = []
    log_lines = [METRIC_LOG_HEADER]

    if resume_from is not None:
        ck = load_checkpoint(resume_from)
        if ck.meta.get("classes") != sorted(classes):
            raise ConfigError(
                "checkpoint was trained with a different class inventory")
        model.load_state_dict(ck.params)
        optimizer.load_state_dict({
            "step_count": ck.meta["opt_step_count"],
            "m": ck.opt_m, "v": ck.opt_v})
        start_epoch = int(ck.meta["epoch"]) + 1
        global_step = int(ck.meta["global_step"])
        best_eer = float(ck.meta["best_eer"])
        best_epoch = int(ck.meta["best_epoch"])
        best_params = ck.best_params
        for row in ck.meta["history"]:
            stats = EpochStats(**row)
            history.append(stats)
            log_lines.append(format_log_line(stats))

    streak = 0
    if history:
        streak = history[-1].epoch - best_epoch
    stopped_early = False

    for epoch in range(start_epoch, train_config.max_epochs + 1):
        epoch_rng = np.random.default_rng([seed, 1, epoch])
        losses = []
        lr = cyclic_lr(global_step, schedule)
        for batch in epoch_batches(pool, classes, audio_set, text_set,
                                   train_config, epoch_rng):
            optimizer.zero_grad()
            state = model.forward(batch.audio, batch.text, train=True,
                                  rng=epoch_rng)
            terms = model.loss_and_backward(state, batch.targets)
            lr = cyclic_lr(global_step, schedule)
            optimizer.step(lr)
            global_step += 1
            losses.append(terms.total)
        if not losses:
            raise ConfigError("epoch produced no batches")

        result = evaluate(model, manifest, dev_trials, audio_set=audio_set,
                          text_set=text_set, mode=eval_mode)
        dev_eer = result.report.eer_avg / 100.0
        stats = EpochStats(epoch=epoch, train_loss=float(np.mean(losses)),
                           dev_eer=dev_eer, lr=lr)
        history.append(stats)
        log_lines.append(format_log_line(stats))

        if dev_eer < best_eer:
            best_eer = dev_eer
            best_epoch = epoch
            best_params = model.state_dict()
            streak = 0
        else:
            streak += 1

        meta = {
            "epoch": epoch,
            "global_step": global_step,
            "best_eer": best_eer,
            "best_epoch": best_epoch,
            "model_config": _config_as_dict(model.config),
            "classes": sorted(classes),
            "history": [vars(s) for s in history],
            "_best_params": best_params,
        }
        save_checkpoint(checkpoint_path, model, optimizer, meta)
        if log_path is not None:
            write_text_atomic(log_path, "\n".join(log_lines) + "\n")

        if streak >= max(1, train_config.early_stop_patience):
            stopped_early = epoch < train_config.max_epochs
            break

    # the per-epoch checkpoint keeps the last-epoch parameters under
    # param/ (the resume point) and the best ones under best/; only the
    # in-memory model is rolled back to the best state here
    model.load_state_dict(best_params)
    return TrainResult(history=history, best_epoch=best_epoch,
                       best_eer=best_eer, global_step=global_step,
                       stopped_early=stopped_early)


def _config_as_dict(config: ModelConfig) -> dict:
    return {
        "audio_in": config.audio_in, "text_in": config.text_in,
        "proj_dim": config.proj_dim,
        "confidence_hidden": config.confidence_hidden,
        "gate_hidden": config.gate_hidden, "n_classes": config.n_classes,
        "dropout_audio": config.dropout_audio,
        "dropout_text": config.dropout_text,
        "aam_scale": config.aam_scale, "aam_margin": config.aam_margin,
        "loss_weights": list(config.loss_weights),
    }


def write_text_atomic(path: str | Path, text: str) -> None:
    path = Path(path)
    tmp = path.with_name(path.name + f".tmp-{os.getpid()}")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)
