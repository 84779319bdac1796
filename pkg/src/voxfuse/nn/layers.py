"""Trainable layers with hand-written forward and backward passes.

Every layer caches what its backward pass needs during forward, so the
call pattern is strictly forward-then-backward per step. Gradients
accumulate into `Parameter.grad`; the optimizer reads and the caller
zeroes them. All activations flow as C-contiguous float64 matrices of
shape (batch, features).
"""
from __future__ import annotations

import math

import numpy as np

from ..errors import ShapeError
from . import kernels as K


class Parameter:
    """A named trainable array paired with its gradient accumulator."""

    __slots__ = ("name", "values", "grad")

    def __init__(self, name: str, values: np.ndarray):
        self.name = name
        self.values = np.ascontiguousarray(values, dtype=np.float64)
        self.grad = np.zeros_like(self.values)

    @property
    def size(self) -> int:
        return self.values.size

    def zero_grad(self) -> None:
        self.grad[...] = 0.0

    def __repr__(self) -> str:
        return f"Parameter({self.name!r}, shape={self.values.shape})"


def as_matrix(x: np.ndarray) -> np.ndarray:
    """Validate and coerce an input batch to C-contiguous float64."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise ShapeError(f"expected a 2-D batch, got shape {x.shape}")
    return x


class Linear:
    """Affine map (batch, in_dim) -> (batch, out_dim).

    Weights start uniform in +-sqrt(1/in_dim); biases start at zero.
    """

    def __init__(self, in_dim: int, out_dim: int, rng: np.random.Generator,
                 bias: bool = True, name: str = "linear"):
        limit = math.sqrt(1.0 / in_dim)
        self.in_dim = in_dim
        self.out_dim = out_dim
        self.weight = Parameter(
            f"{name}.weight", rng.uniform(-limit, limit, size=(in_dim, out_dim)))
        self.bias = Parameter(f"{name}.bias", np.zeros(out_dim)) if bias else None
        self._x: np.ndarray | None = None

    def forward(self, x: np.ndarray) -> np.ndarray:
        if x.shape[1] != self.in_dim:
            raise ShapeError(
                f"{self.weight.name}: expected {self.in_dim} input features, "
                f"got {x.shape[1]}")
        self._x = x
        y = K.gemm(x, self.weight.values)
        if self.bias is not None:
            y += self.bias.values
        return y

    def backward(self, gout: np.ndarray) -> np.ndarray:
        self.weight.grad += K.gemm(self._x, gout, trans_a=True)
        if self.bias is not None:
            self.bias.grad += gout.sum(axis=0)
        return K.gemm(gout, self.weight.values, trans_b=True)

    def parameters(self) -> list[Parameter]:
        return [self.weight] if self.bias is None else [self.weight, self.bias]


class LayerNorm:
    """Per-row normalization with learned gain and shift."""

    def __init__(self, dim: int, eps: float = 1e-5, name: str = "ln"):
        self.dim = dim
        self.eps = eps
        self.gain = Parameter(f"{name}.gain", np.ones(dim))
        self.shift = Parameter(f"{name}.shift", np.zeros(dim))
        self._xhat: np.ndarray | None = None
        self._inv_std: np.ndarray | None = None

    def forward(self, x: np.ndarray) -> np.ndarray:
        if x.shape[1] != self.dim:
            raise ShapeError(
                f"{self.gain.name}: expected {self.dim} features, got {x.shape[1]}")
        y, self._xhat, self._inv_std = K.layernorm_fwd(
            x, self.gain.values, self.shift.values, self.eps)
        return y

    def backward(self, gout: np.ndarray) -> np.ndarray:
        gx, ggain, gshift = K.layernorm_bwd(
            self._xhat, self._inv_std, self.gain.values, gout)
        self.gain.grad += ggain
        self.shift.grad += gshift
        return gx

    def parameters(self) -> list[Parameter]:
        return [self.gain, self.shift]


class ReLU:
    def __init__(self):
        self._x: np.ndarray | None = None

    def forward(self, x: np.ndarray) -> np.ndarray:
        self._x = x
        return K.relu_fwd(x)

    def backward(self, gout: np.ndarray) -> np.ndarray:
        return K.relu_bwd(self._x, gout)


class GELU:
    """Exact-CDF Gaussian error linear unit."""

    def __init__(self):
        self._x: np.ndarray | None = None

    def forward(self, x: np.ndarray) -> np.ndarray:
        self._x = x
        return K.gelu_fwd(x)

    def backward(self, gout: np.ndarray) -> np.ndarray:
        return K.gelu_bwd(self._x, gout)


class Sigmoid:
    def __init__(self):
        self._y: np.ndarray | None = None

    def forward(self, x: np.ndarray) -> np.ndarray:
        self._y = K.sigmoid_fwd(x)
        return self._y

    def backward(self, gout: np.ndarray) -> np.ndarray:
        return K.sigmoid_bwd(self._y, gout)


class Softmax:
    """Row-wise softmax over the feature axis."""

    def __init__(self):
        self._y: np.ndarray | None = None

    def forward(self, x: np.ndarray) -> np.ndarray:
        self._y = K.softmax_fwd(x)
        return self._y

    def backward(self, gout: np.ndarray) -> np.ndarray:
        return K.softmax_bwd(self._y, gout)


class Dropout:
    """Inverted dropout: surviving units are scaled by 1/(1-p) during
    training so evaluation needs no rescaling."""

    def __init__(self, p: float):
        if not 0.0 <= p < 1.0:
            raise ValueError(f"dropout rate must be in [0, 1), got {p}")
        self.p = p
        self._mask: np.ndarray | None = None

    def forward(self, x: np.ndarray, train: bool = False,
                rng: np.random.Generator | None = None) -> np.ndarray:
        if not train or self.p == 0.0:
            self._mask = None
            return x
        if rng is None:
            raise ValueError("training-mode dropout requires an rng")
        keep = 1.0 - self.p
        self._mask = (rng.random(x.shape) < keep) / keep
        return x * self._mask

    def backward(self, gout: np.ndarray) -> np.ndarray:
        if self._mask is None:
            return gout
        return gout * self._mask
