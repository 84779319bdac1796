"""Synthetic desk-scale dataset: waveforms with per-speaker spectral
structure, derived backbone embeddings for audio (original plus masked
and speed-perturbed variants) and text, a split manifest, and
within-gender verification trials.

Speaker identity enters the audio embeddings twice: each speaker has a
fixed set of sinusoidal components (a crude vocal signature) and a
speaker-specific backbone projection seed. Text embeddings are noisy
copies of a per-speaker center. All randomness derives from the base
seed through fixed stream constants, so regeneration is bit-identical.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .data import (
    Augmentation, DatasetManifest, EmbeddingRecord, EmbeddingSet, Gender,
    Label, ManifestEntry, Modality, Split, Trial, TrialSet,
)
from .errors import ConfigError
from .frontend import (
    Waveform, preprocess_waveform, speed_perturb, synthetic_backbone,
    synthetic_features, time_mask, freq_mask,
)

# seed-derivation stream tags; never reuse across purposes
_S_VOICE = 10
_S_UTT = 11
_S_PROJ = 12
_S_TEXT_CENTER = 13
_S_TEXT_UTT = 14
_S_MASK_T = 15
_S_MASK_F = 16
_S_SPEED = 17
_S_CROP = 18


@dataclass(frozen=True)
class SynthConfig:
    n_speakers: int = 20
    utts_per_speaker: int = 20
    train_per_speaker: int = 14
    dev_enroll_per_speaker: int = 3
    dev_trial_per_speaker: int = 3
    test_enroll_per_speaker: int = 0
    test_trial_per_speaker: int = 0
    sample_rate: int = 16000
    duration: float = 1.0
    n_bins: int = 24
    audio_dim: int = 192
    text_dim: int = 768
    n_components: int = 6
    noise_level: float = 0.05
    text_noise: float = 0.35
    time_mask_width: int = 10
    freq_mask_width: int = 4
    speed_factors: tuple[float, float] = (0.9, 1.1)
    seed: int = 0

    def __post_init__(self):
        if self.n_speakers < 2:
            raise ConfigError("need at least 2 speakers")
        counts = (self.train_per_speaker, self.dev_enroll_per_speaker,
                  self.dev_trial_per_speaker, self.test_enroll_per_speaker,
                  self.test_trial_per_speaker)
        if any(c < 0 for c in counts):
            raise ConfigError("split counts must be non-negative")
        if sum(counts) != self.utts_per_speaker:
            raise ConfigError(
                f"split counts {counts} must sum to utts_per_speaker "
                f"{self.utts_per_speaker}")
        if self.duration <= 0 or self.sample_rate <= 0:
            raise ConfigError("duration and sample_rate must be positive")
        if any(f <= 0 for f in self.speed_factors):
            raise ConfigError("speed factors must be positive")


def _derived_seed(*parts: int) -> int:
    return int(np.random.SeedSequence(list(parts)).generate_state(1)[0])


def _speaker_id(i: int) -> str:
    return f"spk{i:03d}"


def _utterance_id(spk: int, utt: int) -> str:
    return f"{_speaker_id(spk)}_u{utt:02d}"


def _split_plan(config: SynthConfig) -> list[Split]:
    plan = ([Split.TRAIN] * config.train_per_speaker
            + [Split.DEV_ENROLL] * config.dev_enroll_per_speaker
            + [Split.DEV_TRIAL] * config.dev_trial_per_speaker
            + [Split.TEST_ENROLL] * config.test_enroll_per_speaker
            + [Split.TEST_TRIAL] * config.test_trial_per_speaker)
    return plan


def generate_manifest(config: SynthConfig) -> DatasetManifest:
    """Genders alternate across speakers; per-speaker utterances fill the
    split plan in order."""
    manifest = DatasetManifest()
    plan = _split_plan(config)
    for s in range(config.n_speakers):
        gender = Gender.F if s % 2 == 0 else Gender.M
        for u, split in enumerate(plan):
            manifest.add(ManifestEntry(
                utterance_id=_utterance_id(s, u),
                speaker_id=_speaker_id(s),
                gender=gender,
                split=split,
                source_tag="original"))
    return manifest


def generate_trials(manifest: DatasetManifest,
                    trial_split: Split = Split.DEV_TRIAL) -> TrialSet:
    """Full within-gender cross of enrolled speakers and trial utterances."""
    if trial_split is Split.DEV_TRIAL:
        enroll_split = Split.DEV_ENROLL
    elif trial_split is Split.TEST_TRIAL:
        enroll_split = Split.TEST_ENROLL
    else:
        raise ConfigError(f"{trial_split.value} is not a trial split")
    speakers = manifest.speakers(enroll_split)
    gender_of = {}
    for spk in speakers:
        for e in manifest.utterances(enroll_split):
            if e.speaker_id == spk:
                gender_of[spk] = e.gender
                break
    trials = []
    for entry in sorted(manifest.utterances(trial_split),
                        key=lambda e: e.utterance_id):
        for spk in speakers:
            if gender_of[spk] is not entry.gender:
                continue
            label = Label.TARGET if spk == entry.speaker_id else Label.NONTARGET
            trials.append(Trial(enroll_speaker=spk,
                                test_utterance=entry.utterance_id,
                                label=label, gender=entry.gender))
    return TrialSet(trials)


def _speaker_voice(config: SynthConfig, spk: int):
    rng = np.random.default_rng([config.seed, _S_VOICE, spk])
    nyquist = config.sample_rate / 2.0
    freqs = rng.uniform(80.0, 0.45 * nyquist, config.n_components)
    amps = rng.uniform(0.3, 1.0, config.n_components)
    return freqs, amps


def _utterance_wave(config: SynthConfig, spk: int, utt: int) -> Waveform:
    freqs, amps = _speaker_voice(config, spk)
    rng = np.random.default_rng([config.seed, _S_UTT, spk, utt])
    phases = rng.uniform(0.0, 2.0 * math.pi, config.n_components)
    wobble = 1.0 + 0.02 * rng.standard_normal(config.n_components)
    n = int(round(config.duration * config.sample_rate))
    t = np.arange(n) / config.sample_rate
    x = np.zeros(n)
    for a, f, w, ph in zip(amps, freqs, wobble, phases):
        x += a * np.sin(2.0 * math.pi * f * w * t + ph)
    x += config.noise_level * rng.standard_normal(n)
    return Waveform(samples=x, sample_rate=config.sample_rate)


def _audio_embedding(config: SynthConfig, wave: Waveform, crop_seed: int,
                     proj_seed: int) -> np.ndarray:
    clean = preprocess_waveform(wave, max_seconds=10.0, rng_seed=crop_seed,
                                crop="center")
    feats = synthetic_features(clean, config.n_bins)
    return synthetic_backbone(feats, config.audio_dim, proj_seed)


def _masked_embedding(config: SynthConfig, wave: Waveform, crop_seed: int,
                      proj_seed: int, mask_seed: int,
                      aug: Augmentation) -> np.ndarray:
    clean = preprocess_waveform(wave, max_seconds=10.0, rng_seed=crop_seed,
                                crop="center")
    feats = synthetic_features(clean, config.n_bins)
    if aug is Augmentation.TIME_MASK:
        feats = time_mask(feats, config.time_mask_width, mask_seed)
    else:
        feats = freq_mask(feats, config.freq_mask_width, mask_seed)
    return synthetic_backbone(feats, config.audio_dim, proj_seed)


def export_synthetic(config: SynthConfig,
                     manifest: DatasetManifest) -> tuple[EmbeddingSet, EmbeddingSet]:
    """Builds the audio archive (original + 3 tagged variants per
    utterance) and the text archive (one original per utterance)."""
    audio_set = EmbeddingSet(config.audio_dim, Modality.AUDIO)
    text_set = EmbeddingSet(config.text_dim, Modality.TEXT)
    seed = config.seed
    speaker_index = {spk: i for i, spk in enumerate(manifest.speakers())}
    text_centers = {}
    for entry in sorted(manifest.utterances(), key=lambda e: e.utterance_id):
        spk = speaker_index[entry.speaker_id]
        utt = int(entry.utterance_id.rsplit("u", 1)[1])
        proj_seed = _derived_seed(seed, _S_PROJ, spk)
        crop_seed = _derived_seed(seed, _S_CROP, spk, utt)
        wave = _utterance_wave(config, spk, utt)

        def add_audio(aug: Augmentation, vector: np.ndarray) -> None:
            audio_set.add(EmbeddingRecord(
                speaker_id=entry.speaker_id, utterance_id=entry.utterance_id,
                modality=Modality.AUDIO, augmentation=aug,
                vector=vector.astype(np.float32)))

        add_audio(Augmentation.ORIGINAL,
                  _audio_embedding(config, wave, crop_seed, proj_seed))
        add_audio(Augmentation.TIME_MASK,
                  _masked_embedding(config, wave, crop_seed, proj_seed,
                                    _derived_seed(seed, _S_MASK_T, spk, utt),
                                    Augmentation.TIME_MASK))
        add_audio(Augmentation.FREQ_MASK,
                  _masked_embedding(config, wave, crop_seed, proj_seed,
                                    _derived_seed(seed, _S_MASK_F, spk, utt),
                                    Augmentation.FREQ_MASK))
        speed_rng = np.random.default_rng([seed, _S_SPEED, spk, utt])
        factor = config.speed_factors[
            int(speed_rng.integers(0, len(config.speed_factors)))]
        add_audio(Augmentation.SPEED,
                  _audio_embedding(config, speed_perturb(wave, factor),
                                   crop_seed, proj_seed))

        if spk not in text_centers:
            center_rng = np.random.default_rng([seed, _S_TEXT_CENTER, spk])
            text_centers[spk] = center_rng.standard_normal(config.text_dim)
        utt_rng = np.random.default_rng([seed, _S_TEXT_UTT, spk, utt])
        text_vec = (text_centers[spk]
                    + config.text_noise * utt_rng.standard_normal(config.text_dim))
        text_set.add(EmbeddingRecord(
            speaker_id=entry.speaker_id, utterance_id=entry.utterance_id,
            modality=Modality.TEXT, augmentation=Augmentation.ORIGINAL,
            vector=text_vec.astype(np.float32)))
    return audio_set, text_set
