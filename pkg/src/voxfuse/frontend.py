"""Waveform preprocessing, masking/speed augmentations, and the synthetic
feature/backbone pair used to exercise the pipeline without pretrained models.

Every operation is a pure function of (input, seed).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ShapeError

TARGET_RMS = 0.1  # -20 dB relative to full scale
WINDOW_SECONDS = 0.025
HOP_SECONDS = 0.010
LOG_EPS = 1e-10


@dataclass(frozen=True)
class Waveform:
    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        samples = np.ascontiguousarray(self.samples, dtype=np.float64)
        if samples.ndim != 1:
            raise ShapeError(f"waveform must be 1-D, got shape {samples.shape}")
        if self.sample_rate <= 0:
            raise ValueError(f"sample_rate must be positive, got {self.sample_rate}")
        object.__setattr__(self, "samples", samples)

    def __len__(self) -> int:
        return self.samples.shape[0]

    @property
    def duration(self) -> float:
        return len(self) / self.sample_rate


@dataclass(frozen=True)
class FeatureMatrix:
    """T x F grid of log-energy surrogates (time frames x frequency bands)."""

    frames: np.ndarray

    def __post_init__(self):
        frames = np.ascontiguousarray(self.frames, dtype=np.float64)
        if frames.ndim != 2 or frames.shape[0] < 1 or frames.shape[1] < 1:
            raise ShapeError(f"feature matrix must be T x F with T,F >= 1, got {frames.shape}")
        if not np.all(np.isfinite(frames)):
            raise ShapeError("feature matrix contains non-finite entries")
        object.__setattr__(self, "frames", frames)

    @property
    def n_frames(self) -> int:
        return self.frames.shape[0]

    @property
    def n_bins(self) -> int:
        return self.frames.shape[1]


def preprocess_waveform(w: Waveform, max_seconds: float, rng_seed: int,
                        crop: str = "random") -> Waveform:
    """Crop to at most `max_seconds`, mean-center, scale to -20 dB RMS, clip to [-1, 1].

    Crop placement is seeded-random for training and centered for evaluation
    (`crop="center"`). An all-constant input mean-centers to zero RMS and is
    returned unscaled.
    """
    if len(w) == 0:
        raise ValueError("cannot preprocess an empty waveform")
    if crop not in ("random", "center"):
        raise ValueError(f"crop must be 'random' or 'center', got {crop!r}")
    x = w.samples
    max_len = int(round(max_seconds * w.sample_rate))
    if max_len > 0 and len(x) > max_len:
        if crop == "random":
            start = int(np.random.default_rng(rng_seed).integers(0, len(x) - max_len + 1))
        else:
            start = (len(x) - max_len) // 2
        x = x[start:start + max_len]
    x = x - x.mean()
    rms = float(np.sqrt(np.mean(np.square(x))))
    if rms > 0.0:
        x = x * (TARGET_RMS / rms)
        x = np.clip(x, -1.0, 1.0)
    return Waveform(x, w.sample_rate)


def _mask_axis(frames: np.ndarray, max_width: int, rng_seed: int, axis: int) -> np.ndarray:
    size = frames.shape[axis]
    if max_width < 0 or max_width > size:
        raise ValueError(f"max_width must be in [0, {size}], got {max_width}")
    out = frames.copy()
    if max_width == 0:
        return out
    rng = np.random.default_rng(rng_seed)
    width = int(rng.integers(1, max_width + 1))
    start = int(rng.integers(0, size - width + 1))
    if axis == 0:
        out[start:start + width, :] = 0.0
    else:
        out[:, start:start + width] = 0.0
    return out


def time_mask(f: FeatureMatrix, max_width: int, rng_seed: int) -> FeatureMatrix:
    """Zero one seeded contiguous span of at most `max_width` time frames."""
    return FeatureMatrix(_mask_axis(f.frames, max_width, rng_seed, axis=0))


def freq_mask(f: FeatureMatrix, max_width: int, rng_seed: int) -> FeatureMatrix:
    """Zero one seeded contiguous span of at most `max_width` frequency bands."""
    return FeatureMatrix(_mask_axis(f.frames, max_width, rng_seed, axis=1))


def speed_perturb(w: Waveform, factor: float) -> Waveform:
    """Resample to round(N / factor) samples by linear interpolation.

    Endpoint-matched positions keep affine signals exactly affine; the
    sample rate is unchanged, so factor > 1 shortens the waveform.
    """
    if factor <= 0.0:
        raise ValueError(f"speed factor must be positive, got {factor}")
    n = len(w)
    if n == 0:
        raise ValueError("cannot speed-perturb an empty waveform")
    out_len = max(1, int(round(n / factor)))
    if out_len == n:
        return Waveform(w.samples.copy(), w.sample_rate)
    if out_len == 1 or n == 1:
        return Waveform(np.array([w.samples[0]]), w.sample_rate)
    positions = np.arange(out_len) * ((n - 1) / (out_len - 1))
    resampled = np.interp(positions, np.arange(n), w.samples)
    return Waveform(resampled, w.sample_rate)


def synthetic_features(w: Waveform, n_bins: int) -> FeatureMatrix:
    """Deterministic log-energy features: 25 ms frames at 10 ms hop, power
    spectrum pooled into `n_bins` fixed triangular bands (linear spacing)."""
    if n_bins < 1:
        raise ValueError(f"n_bins must be >= 1, got {n_bins}")
    x = w.samples
    win = max(2, int(round(WINDOW_SECONDS * w.sample_rate)))
    hop = max(1, int(round(HOP_SECONDS * w.sample_rate)))
    if len(x) < win:
        padded = np.zeros(win)
        padded[:len(x)] = x
        frames = padded[None, :]
    else:
        n_frames = (len(x) - win) // hop + 1
        idx = np.arange(win)[None, :] + hop * np.arange(n_frames)[:, None]
        frames = x[idx]
    power = np.abs(np.fft.rfft(frames, axis=1)) ** 2
    bands = _triangular_bands(power.shape[1], n_bins)
    energies = power @ bands.T
    return FeatureMatrix(np.log(energies + LOG_EPS))


def _triangular_bands(n_freqs: int, n_bins: int) -> np.ndarray:
    """n_bins x n_freqs triangular weights with evenly spaced peaks."""
    edges = np.linspace(0.0, n_freqs - 1.0, n_bins + 2)
    freqs = np.arange(n_freqs, dtype=np.float64)
    bands = np.zeros((n_bins, n_freqs))
    for k in range(n_bins):
        lo, mid, hi = edges[k], edges[k + 1], edges[k + 2]
        rising = (freqs - lo) / max(mid - lo, 1e-12)
        falling = (hi - freqs) / max(hi - mid, 1e-12)
        bands[k] = np.clip(np.minimum(rising, falling), 0.0, None)
    return bands


def synthetic_backbone(f: FeatureMatrix, dim: int, seed: int) -> np.ndarray:
    """Mean-pool frames and project with a fixed seed-derived random matrix.

    Stands in for a pretrained embedding extractor in tests; linear in the
    features, deterministic given (features, dim, seed).
    """
    if dim < 1:
        raise ValueError(f"dim must be >= 1, got {dim}")
    pooled = f.frames.mean(axis=0)
    projection = np.random.default_rng(seed).standard_normal((f.n_bins, dim))
    projection /= np.sqrt(f.n_bins)
    return pooled @ projection
