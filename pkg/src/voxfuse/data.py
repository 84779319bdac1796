"""Core data types: embedding records, trial lists, and dataset manifests.

Everything here is immutable after load and safe to share across threads.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DuplicateKeyError, ParseError, ShapeError


class Modality(enum.Enum):
    AUDIO = "audio"
    TEXT = "text"

    @property
    def wire_tag(self) -> int:
        return {Modality.AUDIO: 0, Modality.TEXT: 1}[self]

    @classmethod
    def from_wire_tag(cls, tag: int) -> "Modality":
        try:
            return {0: cls.AUDIO, 1: cls.TEXT}[tag]
        except KeyError:
            raise ValueError(f"unknown modality tag {tag}") from None


class Augmentation(enum.Enum):
    ORIGINAL = "original"
    TIME_MASK = "time_mask"
    FREQ_MASK = "freq_mask"
    SPEED = "speed"

    @property
    def wire_tag(self) -> int:
        return _AUG_TO_TAG[self]

    @classmethod
    def from_wire_tag(cls, tag: int) -> "Augmentation":
        try:
            return _TAG_TO_AUG[tag]
        except KeyError:
            raise ValueError(f"unknown augmentation tag {tag}") from None


_AUG_TO_TAG = {
    Augmentation.ORIGINAL: 0,
    Augmentation.TIME_MASK: 1,
    Augmentation.FREQ_MASK: 2,
    Augmentation.SPEED: 3,
}
_TAG_TO_AUG = {v: k for k, v in _AUG_TO_TAG.items()}

AUGMENT_VARIANTS = (Augmentation.TIME_MASK, Augmentation.FREQ_MASK, Augmentation.SPEED)


class Label(enum.Enum):
    TARGET = "target"
    NONTARGET = "nontarget"


class Gender(enum.Enum):
    F = "F"
    M = "M"


class Split(enum.Enum):
    TRAIN = "train"
    DEV_ENROLL = "dev_enroll"
    DEV_TRIAL = "dev_trial"
    TEST_ENROLL = "test_enroll"
    TEST_TRIAL = "test_trial"


@dataclass(frozen=True)
class EmbeddingRecord:
    """One utterance's backbone vector plus its identifying tags.

    The vector is kept in float32, the archive's on-disk precision;
    downstream numerics widen to float64 at the point of use.
    """

    speaker_id: str
    utterance_id: str
    modality: Modality
    augmentation: Augmentation
    vector: np.ndarray

    def __post_init__(self):
        vec = np.ascontiguousarray(self.vector, dtype=np.float32)
        if vec.ndim != 1:
            raise ShapeError(f"embedding vector must be 1-D, got shape {vec.shape}")
        if not np.all(np.isfinite(vec)):
            raise ShapeError(
                f"non-finite embedding for ({self.speaker_id}, {self.utterance_id})"
            )
        object.__setattr__(self, "vector", vec)

    @property
    def key(self) -> tuple[str, str, Augmentation]:
        return (self.speaker_id, self.utterance_id, self.augmentation)


class EmbeddingSet:
    """A dimension-homogeneous collection of records with unique keys."""

    def __init__(self, dimension: int, modality: Modality,
                 records: list[EmbeddingRecord] | None = None):
        if dimension <= 0:
            raise ShapeError(f"dimension must be positive, got {dimension}")
        self.dimension = int(dimension)
        self.modality = modality
        self.records: list[EmbeddingRecord] = []
        self.index: dict[tuple[str, str, Augmentation], int] = {}
        for rec in records or []:
            self.add(rec)

    def add(self, rec: EmbeddingRecord) -> None:
        if rec.modality is not self.modality:
            raise ShapeError(
                f"record modality {rec.modality.value} does not match "
                f"set modality {self.modality.value}"
            )
        if rec.vector.shape[0] != self.dimension:
            raise ShapeError(
                f"record ({rec.speaker_id}, {rec.utterance_id}) has dimension "
                f"{rec.vector.shape[0]}, expected {self.dimension}"
            )
        if rec.key in self.index:
            raise DuplicateKeyError(
                f"duplicate record key {rec.speaker_id}/{rec.utterance_id}/"
                f"{rec.augmentation.value}"
            )
        self.index[rec.key] = len(self.records)
        self.records.append(rec)

    def get(self, speaker_id: str, utterance_id: str,
            augmentation: Augmentation = Augmentation.ORIGINAL) -> EmbeddingRecord:
        try:
            return self.records[self.index[(speaker_id, utterance_id, augmentation)]]
        except KeyError:
            raise KeyError(
                f"no record {speaker_id}/{utterance_id}/{augmentation.value}"
            ) from None

    def has(self, speaker_id: str, utterance_id: str,
            augmentation: Augmentation = Augmentation.ORIGINAL) -> bool:
        return (speaker_id, utterance_id, augmentation) in self.index

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def __eq__(self, other) -> bool:
        if not isinstance(other, EmbeddingSet):
            return NotImplemented
        if (self.dimension, self.modality) != (other.dimension, other.modality):
            return False
        if len(self.records) != len(other.records):
            return False
        for a, b in zip(self.records, other.records):
            if (a.speaker_id, a.utterance_id, a.modality, a.augmentation) != (
                    b.speaker_id, b.utterance_id, b.modality, b.augmentation):
                return False
            if a.vector.tobytes() != b.vector.tobytes():
                return False
        return True


@dataclass(frozen=True)
class Trial:
    enroll_speaker: str
    test_utterance: str
    label: Label
    gender: Gender


class TrialSet:
    """Ordered list of verification trials with queryable label/gender counts."""

    def __init__(self, trials: list[Trial] | None = None):
        self.trials: list[Trial] = list(trials or [])

    def count(self, label: Label | None = None, gender: Gender | None = None) -> int:
        n = 0
        for t in self.trials:
            if label is not None and t.label is not label:
                continue
            if gender is not None and t.gender is not gender:
                continue
            n += 1
        return n

    def __len__(self) -> int:
        return len(self.trials)

    def __iter__(self):
        return iter(self.trials)

    def __getitem__(self, i: int) -> Trial:
        return self.trials[i]


@dataclass(frozen=True)
class ManifestEntry:
    utterance_id: str
    speaker_id: str
    gender: Gender
    split: Split
    source_tag: str


class DatasetManifest:
    """utterance -> (speaker, gender, split, source) mapping for one dataset."""

    def __init__(self, entries: list[ManifestEntry] | None = None):
        self.entries: dict[str, ManifestEntry] = {}
        for e in entries or []:
            self.add(e)

    def add(self, entry: ManifestEntry) -> None:
        if entry.utterance_id in self.entries:
            raise DuplicateKeyError(f"duplicate utterance_id {entry.utterance_id!r}")
        self.entries[entry.utterance_id] = entry

    def speakers(self, split: Split | None = None) -> list[str]:
        seen = []
        for e in self.entries.values():
            if split is not None and e.split is not split:
                continue
            if e.speaker_id not in seen:
                seen.append(e.speaker_id)
        return sorted(seen)

    def utterances(self, split: Split | None = None,
                   source_tags: set[str] | None = None) -> list[ManifestEntry]:
        out = []
        for e in self.entries.values():
            if split is not None and e.split is not split:
                continue
            if source_tags is not None and e.source_tag not in source_tags:
                continue
            out.append(e)
        return out

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, utterance_id: str) -> bool:
        return utterance_id in self.entries

    def __getitem__(self, utterance_id: str) -> ManifestEntry:
        try:
            return self.entries[utterance_id]
        except KeyError:
            raise KeyError(
                f"utterance {utterance_id!r} not in manifest") from None


TRIAL_HEADER = "enroll_speaker\ttest_utterance\tlabel\tgender"
MANIFEST_HEADER = "utterance_id\tspeaker_id\tgender\tsplit\tsource_tag"


def _read_tsv(path: str | Path, expected_header: str):
    text = Path(path).read_text(encoding="utf-8")
    lines = text.splitlines()
    if not lines or lines[0].rstrip("\r") != expected_header:
        raise ParseError(f"expected header {expected_header!r}", line=1)
    for lineno, raw in enumerate(lines[1:], start=2):
        raw = raw.rstrip("\r")
        if not raw:
            continue
        yield lineno, raw.split("\t")


def load_trials(path: str | Path) -> TrialSet:
    """Parse a trial TSV; raises ParseError with the offending line number."""
    trials = []
    for lineno, fields in _read_tsv(path, TRIAL_HEADER):
        if len(fields) != 4:
            raise ParseError(f"expected 4 fields, got {len(fields)}", line=lineno)
        speaker, utt, label_s, gender_s = fields
        try:
            label = Label(label_s)
        except ValueError:
            raise ParseError(f"unknown label {label_s!r}", line=lineno) from None
        try:
            gender = Gender(gender_s)
        except ValueError:
            raise ParseError(f"unknown gender {gender_s!r}", line=lineno) from None
        trials.append(Trial(speaker, utt, label, gender))
    return TrialSet(trials)


def load_manifest(path: str | Path) -> DatasetManifest:
    """Parse a manifest TSV; duplicate utterance ids are hard errors."""
    manifest = DatasetManifest()
    for lineno, fields in _read_tsv(path, MANIFEST_HEADER):
        if len(fields) != 5:
            raise ParseError(f"expected 5 fields, got {len(fields)}", line=lineno)
        utt, speaker, gender_s, split_s, source = fields
        try:
            gender = Gender(gender_s)
        except ValueError:
            raise ParseError(f"unknown gender {gender_s!r}", line=lineno) from None
        try:
            split = Split(split_s)
        except ValueError:
            raise ParseError(f"unknown split {split_s!r}", line=lineno) from None
        manifest.add(ManifestEntry(utt, speaker, gender, split, source))
    return manifest


def write_trials(trials: TrialSet, path: str | Path) -> None:
    lines = [TRIAL_HEADER]
    for t in trials:
        lines.append(f"{t.enroll_speaker}\t{t.test_utterance}\t{t.label.value}\t{t.gender.value}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_manifest(manifest: DatasetManifest, path: str | Path) -> None:
    lines = [MANIFEST_HEADER]
    for e in manifest.entries.values():
        lines.append(
            f"{e.utterance_id}\t{e.speaker_id}\t{e.gender.value}\t{e.split.value}\t{e.source_tag}"
        )
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
