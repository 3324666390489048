"""Batched 5x5 matrix addition versus multiplication timing."""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError

DEFAULT_SIZES = (128, 256, 512, 1024)


@dataclass(frozen=True)
class BenchRow:
    batch: int
    add_s: float  # median seconds per batched addition
    mul_s: float  # median seconds per batched product
    repeats: int

    @property
    def ratio(self) -> float:
        return self.add_s / self.mul_s


def _median_time(fn, repeats):
    fn()  # warm-up
    times = np.empty(repeats)
    for i in range(repeats):
        t0 = time.perf_counter()
        fn()
        times[i] = time.perf_counter() - t0
    return float(np.median(times))


def bench_addmul(sizes=DEFAULT_SIZES, repeats: int = 200, seed: int = 0, inner: int = 10):
    """Median timings over ``repeats`` samples, each averaging ``inner`` calls."""
    sizes = [int(s) for s in sizes]
    if not sizes or any(s < 1 for s in sizes):
        raise ConfigError("batch sizes must be positive integers")
    if repeats < 100:
        raise ConfigError("at least 100 repetitions are required")
    rng = np.random.default_rng(seed)
    rows = []
    for n in sizes:
        a = rng.standard_normal((n, 5, 5))
        b = rng.standard_normal((n, 5, 5))
        out = np.empty_like(a)

        def add():
            for _ in range(inner):
                np.add(a, b, out=out)

        def mul():
            for _ in range(inner):
                np.matmul(a, b, out=out)

        rows.append(BenchRow(n, _median_time(add, repeats) / inner, _median_time(mul, repeats) / inner, repeats))
    return rows


def format_table(rows) -> str:
    lines = [f"{'batch':>6} {'add [us]':>10} {'mul [us]':>10} {'add/mul':>8}"]
    for r in rows:
        lines.append(f"{r.batch:>6d} {r.add_s * 1e6:>10.2f} {r.mul_s * 1e6:>10.2f} {r.ratio:>8.3f}")
    return "\n".join(lines)
