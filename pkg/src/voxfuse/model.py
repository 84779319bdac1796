"""Dual-branch audio+text fusion model with margin-based classifier heads.

Architecture, per batch row:

  audio embedding (192) -> LayerNorm -> FC 192x512 -> GELU -> Dropout 0.3 -> e_a
  text  embedding (768) -> LayerNorm -> FC 768x512 -> GELU -> Dropout 0.1 -> e_t

Each branch also estimates a confidence scalar from its projected
embedding (FC 512x256 -> ReLU -> FC 256x1 -> Sigmoid), giving gamma_a and
gamma_t in (0, 1). The fused representation concatenates the
confidence-scaled branch embeddings:

  e_fusion = [gamma_a * e_a ; gamma_t * e_t]            (1024)

A gate network maps [e_a ; e_t ; gamma_a ; gamma_t] (1026) through
FC 1026x512 -> ReLU -> FC 512x3 -> Softmax to per-sample ensemble weights
(w_f, w_a, w_t). Three bias-free cosine classifier heads score e_fusion,
e_a and e_t against L2-normalized class weights, and the ensemble logits
are the w-weighted sum of the three heads' cosines.

Training minimizes additive-angular-margin softmax cross-entropy on all
four logit sets: ensemble (weight 1.0) plus the three heads (weight 0.1
each). The margin/scale transform is applied to the ensemble's combined
cosines the same way as to raw head cosines.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import ConfigError, DegenerateInputError, NonFiniteError, ShapeError
from .nn import kernels as K
from .nn.layers import (
    GELU, Dropout, LayerNorm, Linear, Parameter, ReLU, Sigmoid, Softmax,
    as_matrix,
)


@dataclass(frozen=True)
class ModelConfig:
    audio_in: int = 192
    text_in: int = 768
    proj_dim: int = 512
    confidence_hidden: int = 256
    gate_hidden: int = 512
    n_classes: int = 1001
    dropout_audio: float = 0.3
    dropout_text: float = 0.1
    aam_scale: float = 30.0
    aam_margin: float = 0.15
    loss_weights: tuple[float, float, float, float] = (1.0, 0.1, 0.1, 0.1)

    def __post_init__(self):
        for name in ("audio_in", "text_in", "proj_dim", "confidence_hidden",
                     "gate_hidden", "n_classes"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)}")
        for name in ("dropout_audio", "dropout_text"):
            p = getattr(self, name)
            if not 0.0 <= p < 1.0:
                raise ConfigError(f"{name} must be in [0, 1), got {p}")
        if self.aam_scale <= 0.0:
            raise ConfigError(f"aam_scale must be positive, got {self.aam_scale}")
        if not 0.0 <= self.aam_margin < math.pi / 2:
            raise ConfigError(
                f"aam_margin must be in [0, pi/2), got {self.aam_margin}")
        if len(self.loss_weights) != 4 or any(w < 0 for w in self.loss_weights):
            raise ConfigError(
                "loss_weights must be 4 non-negative values "
                "(ensemble, fusion, audio, text)")

    @property
    def fusion_dim(self) -> int:
        return 2 * self.proj_dim

    @property
    def gate_in(self) -> int:
        return 2 * self.proj_dim + 2


class ExtractMode(str, Enum):
    FUSION = "fusion"
    AUDIO_ONLY = "audio_only"
    TEXT_ONLY = "text_only"


_COS_CLAMP = 1e-7


def aam_loss_and_grad(cosines: np.ndarray, targets: np.ndarray,
                      scale: float, margin: float) -> tuple[float, np.ndarray]:
    """Batch-mean additive-angular-margin cross-entropy over cosine logits.

    The target-class cosine t = cos(theta) becomes cos(theta + margin)
    while theta + margin stays below pi; past that the monotone fallback
    t - margin*sin(margin) is used. All cosines are clamped away from +-1
    before the angle arithmetic. Returns (loss, d loss / d cosines).
    """
    if cosines.ndim != 2:
        raise ShapeError(f"cosines must be 2-D, got shape {cosines.shape}")
    b, c = cosines.shape
    targets = np.asarray(targets)
    if targets.shape != (b,):
        raise ShapeError(
            f"targets shape {targets.shape} does not match batch size {b}")
    if targets.min() < 0 or targets.max() >= c:
        raise ValueError(f"target labels must lie in [0, {c})")
    rows = np.arange(b)
    t = np.clip(cosines[rows, targets], -1.0 + _COS_CLAMP, 1.0 - _COS_CLAMP)
    cos_m = math.cos(margin)
    sin_m = math.sin(margin)
    sin_t = np.sqrt(1.0 - t * t)
    in_range = t > math.cos(math.pi - margin)
    modified = np.where(in_range, t * cos_m - sin_t * sin_m, t - margin * sin_m)
    dmod_dt = np.where(in_range, cos_m + t * sin_m / sin_t, 1.0)

    logits = scale * cosines
    logits[rows, targets] = scale * modified
    row_max = logits.max(axis=1, keepdims=True)
    lse = row_max[:, 0] + np.log(np.exp(logits - row_max).sum(axis=1))
    loss = float(np.mean(lse - logits[rows, targets]))

    p = np.exp(logits - lse[:, None])
    p[rows, targets] -= 1.0
    dcos = (scale / b) * p
    dcos[rows, targets] *= dmod_dt
    return loss, dcos


def aam_loss(cosines: np.ndarray, target: int, scale: float,
             margin: float) -> float:
    """Single-sample convenience wrapper around `aam_loss_and_grad`."""
    cosines = np.asarray(cosines, dtype=np.float64)
    if cosines.ndim != 1:
        raise ShapeError(f"expected a cosine vector, got shape {cosines.shape}")
    loss, _ = aam_loss_and_grad(
        cosines[None, :], np.array([target]), scale, margin)
    return loss


class Branch:
    """One modality branch: normalize, project, activate, drop, plus the
    confidence estimator on the projected embedding."""

    def __init__(self, in_dim: int, proj_dim: int, conf_hidden: int,
                 dropout_p: float, rng: np.random.Generator, name: str):
        self.norm = LayerNorm(in_dim, name=f"{name}.norm")
        self.proj = Linear(in_dim, proj_dim, rng, name=f"{name}.proj")
        self.act = GELU()
        self.drop = Dropout(dropout_p)
        self.conf_fc1 = Linear(proj_dim, conf_hidden, rng, name=f"{name}.conf1")
        self.conf_act = ReLU()
        self.conf_fc2 = Linear(conf_hidden, 1, rng, name=f"{name}.conf2")
        self.conf_squash = Sigmoid()

    def forward(self, x: np.ndarray, train: bool = False,
                rng: np.random.Generator | None = None
                ) -> tuple[np.ndarray, np.ndarray]:
        h = self.norm.forward(x)
        h = self.proj.forward(h)
        h = self.act.forward(h)
        e = self.drop.forward(h, train=train, rng=rng)
        c = self.conf_fc1.forward(e)
        c = self.conf_act.forward(c)
        c = self.conf_fc2.forward(c)
        gamma = self.conf_squash.forward(c)
        return e, gamma

    def backward(self, ge: np.ndarray, ggamma: np.ndarray) -> np.ndarray:
        gc = self.conf_squash.backward(ggamma)
        gc = self.conf_fc2.backward(gc)
        gc = self.conf_act.backward(gc)
        ge = ge + self.conf_fc1.backward(gc)
        gh = self.drop.backward(ge)
        gh = self.act.backward(gh)
        gh = self.proj.backward(gh)
        return self.norm.backward(gh)

    def parameters(self) -> list[Parameter]:
        return (self.norm.parameters() + self.proj.parameters()
                + self.conf_fc1.parameters() + self.conf_fc2.parameters())


class Gate:
    """Maps branch embeddings plus confidences to 3 ensemble weights."""

    def __init__(self, in_dim: int, hidden: int, rng: np.random.Generator):
        self.fc1 = Linear(in_dim, hidden, rng, name="gate.fc1")
        self.act = ReLU()
        self.fc2 = Linear(hidden, 3, rng, name="gate.fc2")
        self.squash = Softmax()

    def forward(self, u: np.ndarray) -> np.ndarray:
        h = self.fc1.forward(u)
        h = self.act.forward(h)
        h = self.fc2.forward(h)
        return self.squash.forward(h)

    def backward(self, gw: np.ndarray) -> np.ndarray:
        gh = self.squash.backward(gw)
        gh = self.fc2.backward(gh)
        gh = self.act.backward(gh)
        return self.fc1.backward(gh)

    def parameters(self) -> list[Parameter]:
        return self.fc1.parameters() + self.fc2.parameters()


class CosineClassifier:
    """Bias-free head: cosine similarity between the L2-normalized input
    and each L2-normalized class weight row."""

    def __init__(self, dim: int, n_classes: int, rng: np.random.Generator,
                 name: str):
        w = rng.standard_normal((n_classes, dim))
        w /= np.linalg.norm(w, axis=1, keepdims=True)
        self.weight = Parameter(f"{name}.weight", w)
        self._ehat: np.ndarray | None = None
        self._enorm: np.ndarray | None = None
        self._what: np.ndarray | None = None
        self._wnorm: np.ndarray | None = None

    def forward(self, e: np.ndarray) -> np.ndarray:
        self._enorm = np.linalg.norm(e, axis=1, keepdims=True)
        if np.any(self._enorm == 0.0):
            raise DegenerateInputError(
                f"{self.weight.name}: zero-norm embedding cannot be scored")
        self._ehat = e / self._enorm
        self._wnorm = np.linalg.norm(self.weight.values, axis=1, keepdims=True)
        self._what = self.weight.values / self._wnorm
        return K.gemm(self._ehat, self._what, trans_b=True)

    def backward(self, gcos: np.ndarray) -> np.ndarray:
        ghat_e = K.gemm(gcos, self._what)
        ge = (ghat_e - self._ehat * (ghat_e * self._ehat).sum(axis=1, keepdims=True))
        ge /= self._enorm
        ghat_w = K.gemm(gcos, self._ehat, trans_a=True)
        gw = (ghat_w - self._what * (ghat_w * self._what).sum(axis=1, keepdims=True))
        gw /= self._wnorm
        self.weight.grad += gw
        return ge

    def parameters(self) -> list[Parameter]:
        return [self.weight]


@dataclass
class ForwardState:
    """Activations a loss/backward pass needs beyond the layer caches."""

    e_a: np.ndarray
    e_t: np.ndarray
    gamma_a: np.ndarray
    gamma_t: np.ndarray
    e_fusion: np.ndarray
    w_ens: np.ndarray
    z_fusion: np.ndarray
    z_audio: np.ndarray
    z_text: np.ndarray
    z_ens: np.ndarray


@dataclass
class LossTerms:
    total: float
    ensemble: float
    fusion: float
    audio: float
    text: float


class FusionModel:
    def __init__(self, config: ModelConfig, seed: int = 0):
        self.config = config
        rng = np.random.default_rng([seed, 0])
        self.audio = Branch(config.audio_in, config.proj_dim,
                            config.confidence_hidden, config.dropout_audio,
                            rng, "audio")
        self.text = Branch(config.text_in, config.proj_dim,
                           config.confidence_hidden, config.dropout_text,
                           rng, "text")
        self.gate = Gate(config.gate_in, config.gate_hidden, rng)
        self.head_fusion = CosineClassifier(
            config.fusion_dim, config.n_classes, rng, "head_fusion")
        self.head_audio = CosineClassifier(
            config.proj_dim, config.n_classes, rng, "head_audio")
        self.head_text = CosineClassifier(
            config.proj_dim, config.n_classes, rng, "head_text")

    def parameters(self) -> list[Parameter]:
        return (self.audio.parameters() + self.text.parameters()
                + self.gate.parameters() + self.head_fusion.parameters()
                + self.head_audio.parameters() + self.head_text.parameters())

    def count_parameters(self) -> int:
        return sum(p.size for p in self.parameters())

    def forward(self, audio_x: np.ndarray, text_x: np.ndarray,
                train: bool = False,
                rng: np.random.Generator | None = None) -> ForwardState:
        audio_x = as_matrix(audio_x)
        text_x = as_matrix(text_x)
        if audio_x.shape[0] != text_x.shape[0]:
            raise ShapeError(
                f"audio batch {audio_x.shape[0]} != text batch {text_x.shape[0]}")
        e_a, gamma_a = self.audio.forward(audio_x, train=train, rng=rng)
        e_t, gamma_t = self.text.forward(text_x, train=train, rng=rng)
        e_fusion = np.concatenate([gamma_a * e_a, gamma_t * e_t], axis=1)
        u = np.concatenate([e_a, e_t, gamma_a, gamma_t], axis=1)
        w_ens = self.gate.forward(u)
        z_fusion = self.head_fusion.forward(e_fusion)
        z_audio = self.head_audio.forward(e_a)
        z_text = self.head_text.forward(e_t)
        z_ens = (w_ens[:, 0:1] * z_fusion + w_ens[:, 1:2] * z_audio
                 + w_ens[:, 2:3] * z_text)
        return ForwardState(e_a, e_t, gamma_a, gamma_t, e_fusion, w_ens,
                            z_fusion, z_audio, z_text, z_ens)

    def loss_and_backward(self, state: ForwardState,
                          targets: np.ndarray) -> LossTerms:
        """Computes the weighted four-term loss and accumulates gradients.

        Must follow the forward pass that produced `state`; layer caches
        are single-use.
        """
        cfg = self.config
        s, m = cfg.aam_scale, cfg.aam_margin
        lam_e, lam_f, lam_a, lam_t = cfg.loss_weights
        loss_e, d_ze = aam_loss_and_grad(state.z_ens, targets, s, m)
        loss_f, d_zf = aam_loss_and_grad(state.z_fusion, targets, s, m)
        loss_a, d_za = aam_loss_and_grad(state.z_audio, targets, s, m)
        loss_t, d_zt = aam_loss_and_grad(state.z_text, targets, s, m)
        terms = LossTerms(
            total=lam_e * loss_e + lam_f * loss_f + lam_a * loss_a + lam_t * loss_t,
            ensemble=loss_e, fusion=loss_f, audio=loss_a, text=loss_t)
        for name in ("ensemble", "fusion", "audio", "text"):
            if not math.isfinite(getattr(terms, name)):
                raise NonFiniteError(f"{name} loss term is non-finite")

        g_zf = lam_f * d_zf + lam_e * state.w_ens[:, 0:1] * d_ze
        g_za = lam_a * d_za + lam_e * state.w_ens[:, 1:2] * d_ze
        g_zt = lam_t * d_zt + lam_e * state.w_ens[:, 2:3] * d_ze
        g_w = lam_e * np.stack([
            (d_ze * state.z_fusion).sum(axis=1),
            (d_ze * state.z_audio).sum(axis=1),
            (d_ze * state.z_text).sum(axis=1),
        ], axis=1)

        ge_f = self.head_fusion.backward(g_zf)
        ge_a = self.head_audio.backward(g_za)
        ge_t = self.head_text.backward(g_zt)
        gu = self.gate.backward(np.ascontiguousarray(g_w))

        p = cfg.proj_dim
        ge_a = ge_a + state.gamma_a * ge_f[:, :p] + gu[:, :p]
        ge_t = ge_t + state.gamma_t * ge_f[:, p:] + gu[:, p:2 * p]
        g_gamma_a = ((ge_f[:, :p] * state.e_a).sum(axis=1, keepdims=True)
                     + gu[:, 2 * p:2 * p + 1])
        g_gamma_t = ((ge_f[:, p:] * state.e_t).sum(axis=1, keepdims=True)
                     + gu[:, 2 * p + 1:2 * p + 2])

        self.audio.backward(np.ascontiguousarray(ge_a),
                            np.ascontiguousarray(g_gamma_a))
        self.text.backward(np.ascontiguousarray(ge_t),
                           np.ascontiguousarray(g_gamma_t))
        return terms

    def extract(self, audio_x: np.ndarray | None = None,
                text_x: np.ndarray | None = None,
                mode: ExtractMode | str = ExtractMode.FUSION) -> np.ndarray:
        """Evaluation-mode embeddings for verification scoring.

        fusion needs both modalities and returns the confidence-scaled
        concatenation; audio_only / text_only need just their own input
        and return the branch embedding before confidence scaling.
        """
        mode = ExtractMode(mode)
        if mode is ExtractMode.AUDIO_ONLY:
            if audio_x is None:
                raise ValueError("audio_only extraction requires audio input")
            e_a, _ = self.audio.forward(as_matrix(audio_x))
            return e_a
        if mode is ExtractMode.TEXT_ONLY:
            if text_x is None:
                raise ValueError("text_only extraction requires text input")
            e_t, _ = self.text.forward(as_matrix(text_x))
            return e_t
        if audio_x is None or text_x is None:
            raise ValueError("fusion extraction requires audio and text input")
        audio_x = as_matrix(audio_x)
        text_x = as_matrix(text_x)
        if audio_x.shape[0] != text_x.shape[0]:
            raise ShapeError(
                f"audio batch {audio_x.shape[0]} != text batch {text_x.shape[0]}")
        e_a, gamma_a = self.audio.forward(audio_x)
        e_t, gamma_t = self.text.forward(text_x)
        return np.concatenate([gamma_a * e_a, gamma_t * e_t], axis=1)

    def state_dict(self) -> dict[str, np.ndarray]:
        return {p.name: p.values.copy() for p in self.parameters()}

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        params = {p.name: p for p in self.parameters()}
        if set(state) != set(params):
            missing = sorted(set(params) - set(state))
            extra = sorted(set(state) - set(params))
            raise ConfigError(
                f"state dict mismatch: missing {missing}, extra {extra}")
        for name, values in state.items():
            if values.shape != params[name].values.shape:
                raise ConfigError(
                    f"shape mismatch for {name}: checkpoint {values.shape}, "
                    f"model {params[name].values.shape}")
            params[name].values[...] = values
