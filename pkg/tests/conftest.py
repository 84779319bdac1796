"""Shared fixtures: a tiny model configuration and a small in-memory
synthetic corpus that the training/scoring/CLI tests reuse."""
from dataclasses import dataclass

import pytest

from voxfuse.data import DatasetManifest, EmbeddingSet, TrialSet
from voxfuse.model import FusionModel, ModelConfig
from voxfuse.synth import (
    SynthConfig, export_synthetic, generate_manifest, generate_trials,
)

TINY_DIMS = dict(audio_in=10, text_in=14, proj_dim=8, confidence_hidden=6,
                 gate_hidden=7, n_classes=5)


@pytest.fixture
def tiny_config():
    return ModelConfig(**TINY_DIMS)


@pytest.fixture
def tiny_model(tiny_config):
    return FusionModel(tiny_config, seed=0)


@dataclass(frozen=True)
class Corpus:
    config: SynthConfig
    manifest: DatasetManifest
    audio_set: EmbeddingSet
    text_set: EmbeddingSet
    trials: TrialSet


def make_corpus(**overrides) -> Corpus:
    defaults = dict(n_speakers=6, utts_per_speaker=8, train_per_speaker=4,
                    dev_enroll_per_speaker=2, dev_trial_per_speaker=2,
                    duration=0.5, n_bins=8, audio_dim=12, text_dim=16, seed=3)
    defaults.update(overrides)
    config = SynthConfig(**defaults)
    manifest = generate_manifest(config)
    audio_set, text_set = export_synthetic(config, manifest)
    return Corpus(config, manifest, audio_set, text_set,
                  generate_trials(manifest))


@pytest.fixture(scope="session")
def small_corpus() -> Corpus:
    """6 speakers x 8 utterances: 4 train / 2 dev enroll / 2 dev trial."""
    return make_corpus()


def corpus_model_config(corpus: Corpus, **overrides) -> ModelConfig:
    """A small model whose input dims match the corpus archives."""
    settings = dict(audio_in=corpus.config.audio_dim,
                    text_in=corpus.config.text_dim,
                    proj_dim=8, confidence_hidden=6, gate_hidden=7,
                    n_classes=corpus.config.n_speakers)
    settings.update(overrides)
    return ModelConfig(**settings)
