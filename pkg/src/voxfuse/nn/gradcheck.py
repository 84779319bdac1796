"""Central-finite-difference gradient verification.

The caller runs one forward+backward pass so that analytic gradients sit
in each Parameter's `.grad`, then hands over a pure re-evaluation
closure. Every coordinate is perturbed both ways and compared.

The error metric is |numeric - analytic| / max(|numeric|, |analytic|,
guard). The guard keeps finite-difference round-off noise out of the
denominator for near-zero coordinates; with eps around 1e-5 and losses
of order 1..50 the noise floor on the numeric derivative is about 1e-9,
far below guard * any tolerance used here.
"""
from __future__ import annotations

from typing import Callable, Iterable

import numpy as np

from .layers import Parameter


def gradient_check(loss_fn: Callable[[], float], params: Iterable[Parameter],
                   eps: float = 1e-5, guard: float = 1e-2) -> float:
    """Returns the max relative error across every parameter coordinate."""
    worst = 0.0
    for p in params:
        flat = p.values.reshape(-1)
        gflat = p.grad.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            up = loss_fn()
            flat[i] = orig - eps
            down = loss_fn()
            flat[i] = orig
            numeric = (up - down) / (2.0 * eps)
            analytic = gflat[i]
            denom = max(abs(numeric), abs(analytic), guard)
            err = abs(numeric - analytic) / denom
            if err > worst:
                worst = err
    return worst


def input_gradient_check(loss_fn: Callable[[], float], x: np.ndarray,
                         gx: np.ndarray, eps: float = 1e-5,
                         guard: float = 1e-2) -> float:
    """Same metric, but for a gradient with respect to an input array."""
    flat = x.reshape(-1)
    gflat = gx.reshape(-1)
    worst = 0.0
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + eps
        up = loss_fn()
        flat[i] = orig - eps
        down = loss_fn()
        flat[i] = orig
        numeric = (up - down) / (2.0 * eps)
        denom = max(abs(numeric), abs(gflat[i]), guard)
        err = abs(numeric - gflat[i]) / denom
        if err > worst:
            worst = err
    return worst
