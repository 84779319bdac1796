"""Pure-numpy implementations of the hot numeric kernels.

This is the fallback backend; `_ckernels` mirrors every signature. All
functions expect C-contiguous float64 arrays and 2-D shapes are (batch,
features) unless noted.
"""
from __future__ import annotations

import math

import numpy as np
from scipy.special import erf

BACKEND = "py"

_INV_SQRT2 = 1.0 / math.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


def gemm(a: np.ndarray, b: np.ndarray, trans_a: bool = False,
         trans_b: bool = False) -> np.ndarray:
    if trans_a:
        a = a.T
    if trans_b:
        b = b.T
    return a @ b


def relu_fwd(x):
    return np.maximum(x, 0.0)


def relu_bwd(x, gout):
    return gout * (x > 0.0)


def gelu_fwd(x):
    return 0.5 * x * (1.0 + erf(x * _INV_SQRT2))


def gelu_bwd(x, gout):
    cdf = 0.5 * (1.0 + erf(x * _INV_SQRT2))
    pdf = np.exp(-0.5 * x * x) * _INV_SQRT_2PI
    return gout * (cdf + x * pdf)


def sigmoid_fwd(x):
    out = np.empty_like(x)
    pos = x >= 0.0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def sigmoid_bwd(y, gout):
    return gout * y * (1.0 - y)


def softmax_fwd(x):
    z = x - x.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def softmax_bwd(y, gout):
    dot = (gout * y).sum(axis=1, keepdims=True)
    return y * (gout - dot)


def layernorm_fwd(x, gain, shift, eps):
    """Returns (y, xhat, inv_std); statistics over the feature axis."""
    mu = x.mean(axis=1, keepdims=True)
    var = x.var(axis=1, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = (x - mu) * inv_std
    return xhat * gain + shift, xhat, inv_std[:, 0].copy()


def layernorm_bwd(xhat, inv_std, gain, gout):
    """Returns (gx, ggain, gshift) for population-variance layer norm."""
    gxhat = gout * gain
    m1 = gxhat.mean(axis=1, keepdims=True)
    m2 = (gxhat * xhat).mean(axis=1, keepdims=True)
    gx = inv_std[:, None] * (gxhat - m1 - xhat * m2)
    ggain = (gout * xhat).sum(axis=0)
    gshift = gout.sum(axis=0)
    return gx, ggain, gshift


def adamw_update(p, g, m, v, t, lr, beta1, beta2, eps, weight_decay):
    """One decoupled-weight-decay Adam step, in place on flat views p/m/v.

    `t` is the 1-based step count used for bias correction; the decay term
    uses the pre-step parameter values.
    """
    m *= beta1
    m += (1.0 - beta1) * g
    v *= beta2
    v += (1.0 - beta2) * g * g
    bc1 = 1.0 - beta1 ** t
    bc2 = 1.0 - beta2 ** t
    if weight_decay != 0.0:
        p *= 1.0 - lr * weight_decay
    p -= lr * (m / bc1) / (np.sqrt(v / bc2) + eps)


def topk_mean_std(scores, k):
    """Per-row mean and population std of the k largest entries.

    scores: (rows, cohort) matrix; returns two (rows,) vectors.
    """
    n = scores.shape[1]
    if not 1 <= k <= n:
        raise ValueError(f"k must be in [1, {n}], got {k}")
    top = np.partition(scores, n - k, axis=1)[:, n - k:]
    return top.mean(axis=1), top.std(axis=1)
