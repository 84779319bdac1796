"""Benchmark the compiled kernel backend against the numpy fallback.

Each kernel runs on shapes representative of the fusion model (batch 256,
projection 512, the 1026-wide gate input, 1001 classifier columns) plus
the score-normalization top-K reduction. Timings are the median of
`--repeats` measurements, each averaging over enough iterations to make
one measurement take a few milliseconds.

Usage:
    python3 benchmarks/bench_kernels.py [--repeats N] [--backends py,cy]
"""
from __future__ import annotations

import argparse
import statistics
import time

import numpy as np

from voxfuse.nn.kernels import load_backend


def _timer(fn, repeats: int, min_seconds: float = 3e-3) -> float:
    """Median seconds per call, averaged within each measurement."""
    fn()  # warm caches, trigger any lazy allocation
    iters = 1
    while True:
        t0 = time.perf_counter()
        for _ in range(iters):
            fn()
        elapsed = time.perf_counter() - t0
        if elapsed >= min_seconds:
            break
        iters *= 4
    samples = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        for _ in range(iters):
            fn()
        samples.append((time.perf_counter() - t0) / iters)
    return statistics.median(samples)


def build_cases(rng: np.random.Generator):
    """(name, shape label, callable factory) per kernel; the factory binds
    one backend module and returns a zero-argument callable."""
    a = rng.standard_normal((256, 192))
    wa = rng.standard_normal((192, 512))
    gate_x = rng.standard_normal((32, 1026))
    gate_w = rng.standard_normal((1026, 512))
    act_x = rng.standard_normal((256, 512))
    act_g = rng.standard_normal((256, 512))
    logits = rng.standard_normal((256, 1001))
    softmax_y = None  # filled lazily per backend
    ln_x = rng.standard_normal((256, 768))
    ln_gain = rng.standard_normal(768)
    ln_shift = rng.standard_normal(768)
    ln_g = rng.standard_normal((256, 768))
    p = rng.standard_normal(1_000_000)
    g = rng.standard_normal(1_000_000)
    scores = rng.standard_normal((64, 2000))

    def cases_for(K):
        y_sig = K.sigmoid_fwd(act_x)
        y_soft = K.softmax_fwd(logits)
        _, xhat, inv_std = K.layernorm_fwd(ln_x, ln_gain, ln_shift, 1e-5)
        m = np.zeros_like(p)
        v = np.zeros_like(p)
        pw = p.copy()
        return [
            ("gemm", "256x192 @ 192x512",
             lambda: K.gemm(a, wa)),
            ("gemm", "32x1026 @ 1026x512",
             lambda: K.gemm(gate_x, gate_w)),
            ("gelu_fwd", "256x512", lambda: K.gelu_fwd(act_x)),
            ("gelu_bwd", "256x512", lambda: K.gelu_bwd(act_x, act_g)),
            ("sigmoid_fwd", "256x512", lambda: K.sigmoid_fwd(act_x)),
            ("sigmoid_bwd", "256x512", lambda: K.sigmoid_bwd(y_sig, act_g)),
            ("softmax_fwd", "256x1001", lambda: K.softmax_fwd(logits)),
            ("softmax_bwd", "256x1001",
             lambda: K.softmax_bwd(y_soft, np.ones_like(y_soft))),
            ("layernorm_fwd", "256x768",
             lambda: K.layernorm_fwd(ln_x, ln_gain, ln_shift, 1e-5)),
            ("layernorm_bwd", "256x768",
             lambda: K.layernorm_bwd(xhat, inv_std, ln_gain, ln_g)),
            ("adamw_update", "1M params",
             lambda: K.adamw_update(pw, g, m, v, 1, 1e-4, 0.9, 0.999, 1e-8,
                                    1e-5)),
            ("topk_mean_std", "64x2000, k=100",
             lambda: K.topk_mean_std(scores, 100)),
        ]

    return cases_for


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeats", type=int, default=7,
                        help="measurements per kernel (median is reported)")
    parser.add_argument("--backends", default="py,cy",
                        help="comma-separated backend names to compare")
    args = parser.parse_args()

    names = [n.strip() for n in args.backends.split(",") if n.strip()]
    backends = {}
    for name in names:
        try:
            backends[name] = load_backend(name)
        except ImportError as exc:
            print(f"skipping backend {name!r}: {exc}")
    if not backends:
        print("no backends available")
        return 1

    rng = np.random.default_rng(0)
    cases_for = build_cases(rng)
    timings: dict[str, list[tuple[str, str, float]]] = {}
    for name, module in backends.items():
        rows = []
        for kernel, shape, fn in cases_for(module):
            rows.append((kernel, shape, _timer(fn, args.repeats)))
        timings[name] = rows

    first = next(iter(backends))
    header = f"{'kernel':<14} {'shape':<20}"
    for name in backends:
        header += f" {name + ' (us)':>12}"
    if len(backends) == 2:
        header += f" {'speedup':>9}"
    print(header)
    print("-" * len(header))
    for i, (kernel, shape, _) in enumerate(timings[first]):
        line = f"{kernel:<14} {shape:<20}"
        per_backend = [timings[name][i][2] for name in backends]
        for seconds in per_backend:
            line += f" {seconds * 1e6:>12.1f}"
        if len(per_backend) == 2:
            line += f" {per_backend[0] / per_backend[1]:>8.2f}x"
        print(line)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
