"""Timing harness comparing closed-form norms with oracle methods."""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Any, Callable, Optional

import numpy as np

from .errors import SizeOverflow
from .norms import Kernel4D, l1_norm, linf_norm
from .oracle import materialize, matrix_l1, matrix_linf, power_iteration_l2, size_cap

# (kernel height, kernel width, input channels, output channels)
STANDARD_SHAPES = [
    (3, 3, 32, 32),
    (3, 3, 32, 128),
    (3, 3, 128, 256),
    (3, 3, 256, 512),
    (5, 5, 256, 128),
    (5, 5, 512, 256),
]

_sink: list = []


@dataclass(frozen=True)
class Timing:
    median: float
    p10: float
    p90: float
    runs: int


def time_method(fn: Callable[[], Any], warmup: int = 5, runs: int = 100) -> Timing:
    """Median/p10/p90 wall time of ``fn()`` over ``runs`` calls after
    ``warmup`` unrecorded calls. Uses ``time.perf_counter``."""
    if runs < 1:
        raise ValueError("runs must be >= 1")
    for _ in range(warmup):
        _sink.append(fn())
        _sink.clear()
    samples = np.empty(runs)
    for n in range(runs):
        t0 = time.perf_counter()
        result = fn()
        samples[n] = time.perf_counter() - t0
        _sink.append(result)
        _sink.clear()
    p10, median, p90 = np.percentile(samples, [10, 50, 90])
    return Timing(float(median), float(p10), float(p90), runs)


@dataclass
class BenchResult:
    shape: tuple
    input_hw: tuple
    timings: dict = field(default_factory=dict)
    notes: dict = field(default_factory=dict)

    @property
    def ratios(self) -> dict:
        """Slow-method median over formula median, for every pair that ran."""
        out = {}
        for slow in ("oracle", "power_iter"):
            for fast in ("l1", "linf"):
                if slow in self.timings and fast in self.timings and self.timings[fast].median > 0:
                    out[f"{slow}/{fast}"] = self.timings[slow].median / self.timings[fast].median
        return out

    def row(self) -> dict:
        row = {"shape": "x".join(map(str, self.shape)), "input": "x".join(map(str, self.input_hw))}
        for method in ("l1", "linf", "oracle", "power_iter"):
            t = self.timings.get(method)
            row[f"{method}_median"] = t.median if t else None
            row[f"{method}_p10"] = t.p10 if t else None
            row[f"{method}_p90"] = t.p90 if t else None
        for key in ("oracle/l1", "oracle/linf", "power_iter/l1", "power_iter/linf"):
            row[key] = self.ratios.get(key)
        row["notes"] = "; ".join(f"{k}: {v}" for k, v in self.notes.items())
        return row


def _single_thread():
    try:
        from threadpoolctl import threadpool_limits
    except ImportError:  # pragma: no cover
        import contextlib

        return contextlib.nullcontext()
    return threadpool_limits(limits=1)


def bench_shape(
    shape,
    input_hw=(32, 32),
    runs: int = 100,
    warmup: int = 5,
    slow_runs: int = 3,
    slow_warmup: int = 1,
    power_iters: int = 20,
    padding: Optional[int] = None,
    seed: int = 42,
    cap: Optional[int] = None,
) -> BenchResult:
    """Time all methods on one ``(k1, k2, d_in, d_out)`` kernel shape.

    Closed-form norms get ``runs`` repetitions. The oracle (dense matrix plus
    column/row sums) and a fixed budget of ``power_iters`` power iterations
    get ``slow_runs``. The oracle is skipped when the matrix would exceed
    ``cap`` entries. Padding defaults to "same" padding ``k // 2``.
    """
    k1, k2, d_in, d_out = shape
    h, w = input_hw
    pad = (k1 // 2, k2 // 2) if padding is None else (padding, padding)
    rng = np.random.default_rng(seed)
    kernel = Kernel4D.from_array(rng.standard_normal((d_out, d_in, k1, k2)), (h, w), 1, pad)
    result = BenchResult(tuple(shape), (h, w))
    cap = size_cap() if cap is None else cap
    with _single_thread():
        result.timings["l1"] = time_method(lambda: l1_norm(kernel), warmup, runs)
        result.timings["linf"] = time_method(lambda: linf_norm(kernel), warmup, runs)
        rows, cols = kernel.geometry.matrix_shape
        if rows * cols > cap:
            result.notes["oracle"] = f"skipped, {rows * cols} entries > cap {cap}"
        else:
            def oracle():
                M = materialize(kernel, cap=cap)
                return matrix_l1(M), matrix_linf(M)

            result.timings["oracle"] = time_method(oracle, slow_warmup, slow_runs)
        result.timings["power_iter"] = time_method(
            lambda: power_iteration_l2(kernel, max_iters=power_iters, tol=0.0, seed=seed),
            slow_warmup,
            slow_runs,
        )
    return result


def run_bench(shapes=STANDARD_SHAPES, **kwargs) -> list:
    return [bench_shape(s, **kwargs) for s in shapes]
