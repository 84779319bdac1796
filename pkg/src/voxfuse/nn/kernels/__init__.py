"""Numeric kernel dispatch.

Two interchangeable backends implement the same function set: a compiled
Cython module (`cy`) and a pure-numpy fallback (`py`). Selection happens
once at import via the VOXFUSE_BACKEND environment variable:

  auto  use the compiled module when importable, else fall back (default)
  cy    require the compiled module, fail loudly if it is missing
  py    force the numpy fallback
"""
from __future__ import annotations

import os

from ...errors import ConfigError

_CHOICES = ("auto", "py", "cy")


def load_backend(name: str):
    """Import and return one backend module by short name ("py" or "cy")."""
    if name == "py":
        from . import _numpy_backend
        return _numpy_backend
    if name == "cy":
        from . import _ckernels
        return _ckernels
    raise ConfigError(f"unknown kernel backend {name!r}; expected 'py' or 'cy'")


def _select():
    requested = os.environ.get("VOXFUSE_BACKEND", "auto")
    if requested not in _CHOICES:
        raise ConfigError(
            f"VOXFUSE_BACKEND={requested!r} not recognized; "
            f"expected one of {', '.join(_CHOICES)}")
    if requested == "auto":
        try:
            return load_backend("cy")
        except ImportError:
            return load_backend("py")
    return load_backend(requested)


_impl = _select()

BACKEND = _impl.BACKEND
gemm = _impl.gemm
relu_fwd = _impl.relu_fwd
relu_bwd = _impl.relu_bwd
gelu_fwd = _impl.gelu_fwd
gelu_bwd = _impl.gelu_bwd
sigmoid_fwd = _impl.sigmoid_fwd
sigmoid_bwd = _impl.sigmoid_bwd
softmax_fwd = _impl.softmax_fwd
softmax_bwd = _impl.softmax_bwd
layernorm_fwd = _impl.layernorm_fwd
layernorm_bwd = _impl.layernorm_bwd
adamw_update = _impl.adamw_update
topk_mean_std = _impl.topk_mean_std

__all__ = [
    "BACKEND", "load_backend", "gemm",
    "relu_fwd", "relu_bwd", "gelu_fwd", "gelu_bwd",
    "sigmoid_fwd", "sigmoid_bwd", "softmax_fwd", "softmax_bwd",
    "layernorm_fwd", "layernorm_bwd", "adamw_update", "topk_mean_std",
]
