"""Verification scoring: cosine trials, adaptive score normalization,
equal error rate, and the per-split/per-gender report."""
from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass

import numpy as np

from .data import DatasetManifest, EmbeddingSet, Label, Split, TrialSet
from .errors import (
    ConfigError, DegenerateInputError, MissingEmbeddingError, ShapeError,
)
from .model import ExtractMode, FusionModel
from .nn import kernels as K

_STD_FLOOR = 1e-6


def l2_normalize(v: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    norm = np.linalg.norm(v, axis=-1, keepdims=True)
    if np.any(norm == 0.0):
        raise DegenerateInputError("cannot normalize a zero vector")
    return v / norm


def enroll(embeddings: np.ndarray) -> np.ndarray:
    """Speaker centroid: mean of the utterance embeddings, re-normalized."""
    embeddings = np.asarray(embeddings, dtype=np.float64)
    if embeddings.ndim != 2 or embeddings.shape[0] == 0:
        raise ShapeError(
            f"enrollment needs a non-empty (n, dim) matrix, got {embeddings.shape}")
    return l2_normalize(embeddings.mean(axis=0))


def cosine_score(a: np.ndarray, b: np.ndarray) -> float:
    return float(l2_normalize(a) @ l2_normalize(b))


class Cohort:
    """A fixed set of unit-normalized imposter embeddings plus the top-K
    depth used for adaptive normalization statistics."""

    def __init__(self, embeddings: np.ndarray, top_k: int):
        embeddings = np.asarray(embeddings, dtype=np.float64)
        if embeddings.ndim != 2 or embeddings.shape[0] == 0:
            raise ShapeError(
                f"cohort needs a non-empty (n, dim) matrix, got {embeddings.shape}")
        if top_k < 2:
            raise ConfigError(f"top_k must be at least 2, got {top_k}")
        if top_k > embeddings.shape[0]:
            raise ConfigError(
                f"top_k {top_k} exceeds cohort size {embeddings.shape[0]}")
        self.embeddings = np.ascontiguousarray(l2_normalize(embeddings))
        self.top_k = top_k

    def __len__(self) -> int:
        return self.embeddings.shape[0]

    def stats(self, vectors: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Mean/std of each vector's top-K cohort cosines; rows unit-norm."""
        vectors = np.ascontiguousarray(np.atleast_2d(vectors), dtype=np.float64)
        scores = K.gemm(vectors, self.embeddings, trans_b=True)
        means, stds = K.topk_mean_std(scores, self.top_k)
        return means, np.maximum(stds, _STD_FLOOR)


def as_norm_from_scores(raw: float, enroll_cohort_scores: np.ndarray,
                        test_cohort_scores: np.ndarray, top_k: int) -> float:
    """Symmetric adaptive normalization from precomputed cohort scores.

    Each side is standardized by the mean/std of its own top-K cohort
    scores and the two standardized values are averaged.
    """
    stats = []
    for side, scores in (("enroll", enroll_cohort_scores),
                         ("test", test_cohort_scores)):
        scores = np.asarray(scores, dtype=np.float64)
        if scores.ndim != 1 or scores.size == 0:
            raise ShapeError(f"{side} cohort scores must be a non-empty vector")
        if top_k < 2:
            raise ConfigError(f"top_k must be at least 2, got {top_k}")
        if top_k > scores.size:
            raise ConfigError(
                f"top_k {top_k} exceeds {side} cohort size {scores.size}")
        mean, std = K.topk_mean_std(
            np.ascontiguousarray(scores[None, :]), top_k)
        stats.append((mean[0], max(std[0], _STD_FLOOR)))
    (mu_e, sd_e), (mu_t, sd_t) = stats
    return 0.5 * ((raw - mu_e) / sd_e + (raw - mu_t) / sd_t)


def as_norm(raw: float, enroll_emb: np.ndarray, test_emb: np.ndarray,
            cohort: Cohort) -> float:
    """Adaptive normalization of one raw cosine score against a cohort."""
    enroll_hat = l2_normalize(enroll_emb)
    test_hat = l2_normalize(test_emb)
    mu, sd = cohort.stats(np.stack([enroll_hat, test_hat]))
    return 0.5 * ((raw - mu[0]) / sd[0] + (raw - mu[1]) / sd[1])


def compute_eer(target_scores, nontarget_scores) -> float:
    """Equal error rate as a fraction in [0, 1].

    Sweeps every observed score as a decision threshold (accept when
    score >= threshold), walks the resulting ROC to the first point where
    false-accept drops below false-reject, and linearly interpolates
    between the bracketing points.
    """
    t = np.sort(np.asarray(target_scores, dtype=np.float64))
    nt = np.sort(np.asarray(nontarget_scores, dtype=np.float64))
    if t.size == 0 or nt.size == 0:
        raise DegenerateInputError(
            "EER needs at least one target and one nontarget score")
    if not (np.isfinite(t).all() and np.isfinite(nt).all()):
        raise DegenerateInputError("EER scores must be finite")
    thresholds = np.unique(np.concatenate([t, nt]))
    far = 1.0 - np.searchsorted(nt, thresholds, side="left") / nt.size
    frr = np.searchsorted(t, thresholds, side="left") / t.size
    # virtual threshold above every score: reject all
    far = np.append(far, 0.0)
    frr = np.append(frr, 1.0)
    diff = far - frr
    cross = int(np.argmax(diff < 0.0))
    a, b = cross - 1, cross
    if diff[a] == diff[b]:
        return float(frr[a])
    alpha = diff[a] / (diff[a] - diff[b])
    return float(frr[a] + alpha * (frr[b] - frr[a]))


@dataclass(frozen=True)
class EERReport:
    """EERs in percent, keyed by (split, gender), with per-split averages
    over whichever genders are present and a grand average over splits."""

    per_gender: dict[tuple[str, str], float]
    split_avg: dict[str, float]
    eer_avg: float

    def to_tsv(self) -> str:
        lines = ["split\tgender\teer_percent"]
        for split in sorted(self.split_avg):
            genders = sorted(g for (s, g) in self.per_gender if s == split)
            for gender in genders:
                lines.append(
                    f"{split}\t{gender}\t{self.per_gender[(split, gender)]:.2f}")
            lines.append(f"{split}\tavg\t{self.split_avg[split]:.2f}")
        lines.append(f"EER_avg\tavg\t{self.eer_avg:.2f}")
        return "\n".join(lines) + "\n"


def build_report(per_gender: dict[tuple[str, str], float]) -> EERReport:
    if not per_gender:
        raise DegenerateInputError("no trial groups to report on")
    splits = defaultdict(list)
    for (split, _gender), eer in per_gender.items():
        splits[split].append(eer)
    split_avg = {s: float(np.mean(v)) for s, v in splits.items()}
    eer_avg = float(np.mean(list(split_avg.values())))
    return EERReport(dict(per_gender), split_avg, eer_avg)


@dataclass(frozen=True)
class EvaluationResult:
    report: EERReport
    scores: list[float]  # aligned with the input trial order


_TRIAL_SPLIT_NAME = {Split.DEV_TRIAL: "dev", Split.TEST_TRIAL: "test"}
_ENROLL_SPLIT_FOR = {Split.DEV_TRIAL: Split.DEV_ENROLL,
                     Split.TEST_TRIAL: Split.TEST_ENROLL}


def extract_utterances(model: FusionModel, mode: ExtractMode | str,
                       keys: list[tuple[str, str]],
                       audio_set: EmbeddingSet | None,
                       text_set: EmbeddingSet | None) -> dict[str, np.ndarray]:
    """Batch-extract eval embeddings for (speaker, utterance) keys.

    Uses the original (non-augmented) record of each utterance; every
    required record must be present for the selected mode.
    """
    mode = ExtractMode(mode)
    use_audio = mode is not ExtractMode.TEXT_ONLY
    use_text = mode is not ExtractMode.AUDIO_ONLY
    missing = []
    for modality, store, used in (("audio", audio_set, use_audio),
                                  ("text", text_set, use_text)):
        if not used:
            continue
        if store is None:
            raise MissingEmbeddingError(
                f"{modality} embeddings required for mode {mode.value}")
        missing.extend(f"{modality}:{u}" for spk, u in keys
                       if not store.has(spk, u))
    if missing:
        shown = sorted(missing)[:20]
        raise MissingEmbeddingError(
            "missing embeddings for: " + ", ".join(shown)
            + ("..." if len(missing) > 20 else ""))
    audio_x = text_x = None
    if use_audio:
        audio_x = np.stack([audio_set.get(spk, u).vector for spk, u in keys])
    if use_text:
        text_x = np.stack([text_set.get(spk, u).vector for spk, u in keys])
    rows = model.extract(audio_x, text_x, mode)
    return {u: rows[i] for i, (_spk, u) in enumerate(keys)}


def evaluate(model: FusionModel, manifest: DatasetManifest, trials: TrialSet,
             audio_set: EmbeddingSet | None = None,
             text_set: EmbeddingSet | None = None,
             mode: ExtractMode | str = ExtractMode.FUSION,
             cohort: Cohort | None = None) -> EvaluationResult:
    """Scores every trial and reports EER per split and gender.

    Enrollment embeddings come from each split's enrollment utterances,
    averaged per speaker. When a cohort is given, every raw cosine is
    adaptively normalized before EER computation.
    """
    mode = ExtractMode(mode)
    if len(trials) == 0:
        raise DegenerateInputError("no trials to evaluate")

    by_split: dict[Split, list[int]] = defaultdict(list)
    for i, trial in enumerate(trials):
        try:
            entry = manifest[trial.test_utterance]
        except KeyError as exc:
            raise MissingEmbeddingError(str(exc)) from None
        if entry.split not in _TRIAL_SPLIT_NAME:
            raise ConfigError(
                f"trial utterance {trial.test_utterance} sits in split "
                f"{entry.split.value}, expected a *_trial split")
        by_split[entry.split].append(i)

    scores: list[float | None] = [None] * len(trials)
    per_gender: dict[tuple[str, str], float] = {}

    for trial_split, indices in sorted(by_split.items(), key=lambda kv: kv[0].value):
        enroll_split = _ENROLL_SPLIT_FOR[trial_split]
        speakers = sorted({trials[i].enroll_speaker for i in indices})
        enroll_utts: dict[str, list[str]] = {s: [] for s in speakers}
        for entry in manifest.utterances(enroll_split):
            if entry.speaker_id in enroll_utts:
                enroll_utts[entry.speaker_id].append(entry.utterance_id)
        empty = [s for s, utts in enroll_utts.items() if not utts]
        if empty:
            raise MissingEmbeddingError(
                f"no {enroll_split.value} utterances for speakers: "
                + ", ".join(empty))

        test_utts = sorted({trials[i].test_utterance for i in indices})
        needed = sorted({u for utts in enroll_utts.values() for u in utts}
                        | set(test_utts))
        keys = [(manifest[u].speaker_id, u) for u in needed]
        emb = extract_utterances(model, mode, keys, audio_set, text_set)

        centroids = {
            spk: enroll(np.stack([emb[u] for u in utts]))
            for spk, utts in enroll_utts.items()
        }
        test_hat = {u: l2_normalize(emb[u]) for u in test_utts}

        if cohort is not None:
            cent_stats = cohort.stats(np.stack([centroids[s] for s in speakers]))
            hat_stats = cohort.stats(np.stack([test_hat[u] for u in test_utts]))
            spk_stats = {s: (cent_stats[0][j], cent_stats[1][j])
                         for j, s in enumerate(speakers)}
            utt_stats = {u: (hat_stats[0][j], hat_stats[1][j])
                         for j, u in enumerate(test_utts)}

        grouped: dict[tuple[str, str], dict[str, list[float]]] = defaultdict(
            lambda: {"target": [], "nontarget": []})
        split_name = _TRIAL_SPLIT_NAME[trial_split]
        for i in indices:
            trial = trials[i]
            raw = float(centroids[trial.enroll_speaker]
                        @ test_hat[trial.test_utterance])
            if cohort is not None:
                mu_e, sd_e = spk_stats[trial.enroll_speaker]
                mu_t, sd_t = utt_stats[trial.test_utterance]
                raw = 0.5 * ((raw - mu_e) / sd_e + (raw - mu_t) / sd_t)
            scores[i] = raw
            bucket = grouped[(split_name, trial.gender.value)]
            key = "target" if trial.label is Label.TARGET else "nontarget"
            bucket[key].append(raw)

        for (split_name_g, gender), bucket in grouped.items():
            per_gender[(split_name_g, gender)] = 100.0 * compute_eer(
                bucket["target"], bucket["nontarget"])

    return EvaluationResult(build_report(per_gender), [float(s) for s in scores])


def build_cohort(model: FusionModel, manifest: DatasetManifest,
                 audio_set: EmbeddingSet | None, text_set: EmbeddingSet | None,
                 mode: ExtractMode | str, top_k: int,
                 max_size: int | None = None,
                 rng: np.random.Generator | None = None) -> Cohort:
    """Builds an imposter cohort from training-split utterances."""
    mode = ExtractMode(mode)
    entries = sorted(manifest.utterances(Split.TRAIN),
                     key=lambda e: e.utterance_id)
    if max_size is not None and len(entries) > max_size:
        if rng is None:
            rng = np.random.default_rng(0)
        picked = rng.choice(len(entries), size=max_size, replace=False)
        entries = [entries[int(i)] for i in sorted(picked)]
    if not entries:
        raise DegenerateInputError("no training utterances to build a cohort")
    keys = [(e.speaker_id, e.utterance_id) for e in entries]
    emb = extract_utterances(model, mode, keys, audio_set, text_set)
    return Cohort(np.stack([emb[u] for _spk, u in keys]), top_k)
