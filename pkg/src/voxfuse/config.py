"""Run configuration: a flat key=value file plus command-line overrides.

File syntax: one `key = value` per line, `#` starts a comment, blank
lines are skipped. Unknown keys are rejected so typos fail loudly
instead of silently running with defaults. Values keep their raw string
form until typed parsing, so overrides and file entries go through the
same code path.
"""
from __future__ import annotations

from dataclasses import dataclass, fields
from pathlib import Path

from .errors import ConfigError
from .model import ExtractMode, ModelConfig
from .nn.optim import LrSchedule
from .synth import SynthConfig
from .training import AUG_NONE, TrainConfig


@dataclass
class RunConfig:
    # model
    audio_in: int = 192
    text_in: int = 768
    proj_dim: int = 512
    confidence_hidden: int = 256
    gate_hidden: int = 512
    n_classes: int = 0  # 0 = derive from the training manifest
    dropout_audio: float = 0.3
    dropout_text: float = 0.1
    aam_scale: float = 30.0
    aam_margin: float = 0.15
    lambda_ensemble: float = 1.0
    lambda_fusion: float = 0.1
    lambda_audio: float = 0.1
    lambda_text: float = 0.1
    # training
    batch_size: int = 32
    originals_per_batch: int = 8
    max_epochs: int = 25
    early_stop_patience: int = 10
    lr_min: float = 1e-6
    lr_max: float = 1e-4
    cycle_steps: int = 13000
    weight_decay: float = 1e-5
    augmentation: tuple[str, ...] = ("spec_augment",)
    source_tags: tuple[str, ...] = ()
    rng_seed: int = 0
    # evaluation
    mode_select: str = "fusion"
    use_as_norm: bool = False
    cohort_size: int = 0  # 0 = use every training utterance
    as_norm_top_k: int = 100
    # paths
    audio_archive: str = ""
    text_archive: str = ""
    manifest: str = ""
    trials: str = ""
    checkpoint: str = ""
    report: str = ""
    metric_log: str = ""
    # synthetic export
    synth_speakers: int = 20
    synth_utts_per_speaker: int = 20
    synth_train: int = 14
    synth_dev_enroll: int = 3
    synth_dev_trial: int = 3
    synth_test_enroll: int = 0
    synth_test_trial: int = 0
    synth_sample_rate: int = 16000
    synth_duration: float = 1.0
    synth_bins: int = 24
    synth_time_mask_width: int = 10
    synth_freq_mask_width: int = 4
    synth_text_noise: float = 0.35

    def set_key(self, key: str, raw: str) -> None:
        """Assigns one key from its textual form; unknown keys fail."""
        spec = _FIELD_TYPES.get(key)
        if spec is None:
            raise ConfigError(f"unknown config key {key!r}")
        raw = raw.strip()
        try:
            if spec is bool:
                value = _parse_bool(raw)
            elif spec is int:
                value = int(raw)
            elif spec is float:
                value = float(raw)
            elif spec is str:
                value = raw
            else:  # tuple of strings
                value = _parse_list(raw)
        except ValueError:
            raise ConfigError(
                f"config key {key!r}: cannot parse {raw!r} as "
                f"{getattr(spec, '__name__', 'list')}") from None
        setattr(self, key, value)

    def model_config(self, n_classes: int | None = None) -> ModelConfig:
        classes = n_classes if n_classes is not None else self.n_classes
        if classes <= 0:
            raise ConfigError(
                "n_classes is unset; give it explicitly or derive it from "
                "a training manifest")
        return ModelConfig(
            audio_in=self.audio_in, text_in=self.text_in,
            proj_dim=self.proj_dim, confidence_hidden=self.confidence_hidden,
            gate_hidden=self.gate_hidden, n_classes=classes,
            dropout_audio=self.dropout_audio, dropout_text=self.dropout_text,
            aam_scale=self.aam_scale, aam_margin=self.aam_margin,
            loss_weights=(self.lambda_ensemble, self.lambda_fusion,
                          self.lambda_audio, self.lambda_text))

    def train_config(self) -> TrainConfig:
        aug = {a for a in self.augmentation if a != AUG_NONE}
        return TrainConfig(
            batch_size=self.batch_size,
            originals_per_batch=self.originals_per_batch,
            max_epochs=self.max_epochs,
            early_stop_patience=self.early_stop_patience,
            lr_schedule=LrSchedule(lr_min=self.lr_min, lr_max=self.lr_max,
                                   cycle_steps=self.cycle_steps),
            weight_decay=self.weight_decay,
            augmentation=frozenset(aug),
            source_tags=self.source_tags,
            rng_seed=self.rng_seed)

    def synth_config(self) -> SynthConfig:
        return SynthConfig(
            n_speakers=self.synth_speakers,
            utts_per_speaker=self.synth_utts_per_speaker,
            train_per_speaker=self.synth_train,
            dev_enroll_per_speaker=self.synth_dev_enroll,
            dev_trial_per_speaker=self.synth_dev_trial,
            test_enroll_per_speaker=self.synth_test_enroll,
            test_trial_per_speaker=self.synth_test_trial,
            sample_rate=self.synth_sample_rate,
            duration=self.synth_duration,
            n_bins=self.synth_bins,
            time_mask_width=self.synth_time_mask_width,
            freq_mask_width=self.synth_freq_mask_width,
            text_noise=self.synth_text_noise,
            seed=self.rng_seed)

    def extract_mode(self) -> ExtractMode:
        try:
            return ExtractMode(self.mode_select)
        except ValueError:
            raise ConfigError(
                f"mode_select must be one of "
                f"{', '.join(m.value for m in ExtractMode)}; "
                f"got {self.mode_select!r}") from None

    def require_paths(self, *keys: str, existing: bool = True) -> None:
        """Checks that each named path key is set (and exists, for inputs)
        before any work starts."""
        for key in keys:
            value = getattr(self, key)
            if not value:
                raise ConfigError(f"required path {key!r} is not configured")
            if existing and not Path(value).exists():
                raise ConfigError(f"{key} path does not exist: {value}")


_FIELD_TYPES = {}
for _f in fields(RunConfig):
    _FIELD_TYPES[_f.name] = (
        tuple if _f.type.startswith("tuple") else
        {"int": int, "float": float, "bool": bool, "str": str}[_f.type])


def _parse_bool(raw: str) -> bool:
    low = raw.lower()
    if low in ("true", "1", "yes", "on"):
        return True
    if low in ("false", "0", "no", "off"):
        return False
    raise ValueError(raw)


def _parse_list(raw: str) -> tuple[str, ...]:
    if not raw or raw.lower() == AUG_NONE:
        return ()
    return tuple(part.strip() for part in raw.split(",") if part.strip())


def load_config(path: str | Path | None = None,
                overrides: dict[str, str] | None = None) -> RunConfig:
    """Builds a RunConfig from defaults, then the file, then overrides."""
    cfg = RunConfig()
    if path is not None:
        text = Path(path).read_text(encoding="utf-8")
        for lineno, line in enumerate(text.splitlines(), start=1):
            stripped = line.split("#", 1)[0].strip()
            if not stripped:
                continue
            if "=" not in stripped:
                raise ConfigError(
                    f"{path}:{lineno}: expected 'key = value', got {line!r}")
            key, _, raw = stripped.partition("=")
            cfg.set_key(key.strip(), raw)
    for key, raw in (overrides or {}).items():
        cfg.set_key(key, raw)
    return cfg
