#!/usr/bin/env python3
"""Benchmark the compiled kernels against the NumPy reference backend.

Times each kernel at the sizes the Monte Carlo engine actually uses
(L=50 sensors, M=20 or 40 measurements, K=3 or 10 lags), then an
end-to-end threshold calibration in a subprocess per backend, since the
backend is chosen once at import.

Usage: python benchmarks/bench_kernels.py [--repeats N] [--trials N]
"""

from __future__ import annotations

import argparse
import os
import subprocess
import sys
import time

import numpy as np

from covdet._kernels import reference

try:
    from covdet._kernels import _native
except ImportError:
    _native = None


def best_of(fn, args, repeats: int) -> float:
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - start)
    return best


def bench_kernels(repeats: int) -> None:
    rng = np.random.default_rng(0)
    cases = []
    for m, l, k, t in ((20, 50, 3, 50), (40, 50, 10, 100)):
        a = rng.standard_normal((m, l))
        y = rng.standard_normal((m, t))
        b = reference.lag_basis(a, k)
        s = reference.sample_covariance(y)
        g = rng.standard_normal((m, l))
        tag = f"M={m} L={l} K={k} T={t}"
        cases += [
            (f"sample_covariance   {tag}", "sample_covariance", (y,)),
            (f"lag_basis           {tag}", "lag_basis", (a, k)),
            (f"basis_gram          {tag}", "basis_gram", (b,)),
            (f"basis_project       {tag}", "basis_project", (s, b)),
            (f"orthonormalize_rows {tag}", "orthonormalize_rows", (g,)),
        ]

    print(f"{'kernel':<45} {'pure':>10} {'native':>10} {'speedup':>8}", flush=True)
    for label, name, args in cases:
        pure = best_of(getattr(reference, name), args, repeats)
        if _native is None:
            print(f"{label:<45} {pure * 1e6:>8.1f}us {'n/a':>10} {'':>8}")
            continue
        native = best_of(getattr(_native, name), args, repeats)
        print(
            f"{label:<45} {pure * 1e6:>8.1f}us {native * 1e6:>8.1f}us "
            f"{pure / native:>7.1f}x",
            flush=True,
        )


_CALIBRATE_SNIPPET = """
import time
from covdet import (DirectRho, ExperimentPlan, ProjectionSpec, ScenarioConfig,
                    calibrate_threshold)
import covdet
scenario = ScenarioConfig(num_sensors=50, correlation=DirectRho(0.8),
                          sigma_s2=1.0, sigma_v2=0.5, sigma_w2=1.0)
plan = ExperimentPlan(scenario=scenario,
                      projection=ProjectionSpec("orthonormal", 20),
                      num_snapshots=50, trials={trials}, seed=7, alpha0=0.1)
start = time.perf_counter()
tau = calibrate_threshold(plan)
elapsed = time.perf_counter() - start
print(f"{{covdet.KERNEL_BACKEND}} backend: tau={{tau:.6f}} in {{elapsed:.2f}}s "
      f"({{1e3 * elapsed / {trials}:.2f}} ms/trial)")
"""


def bench_end_to_end(trials: int) -> None:
    print(
        f"\nend-to-end: calibrate {trials} noise-only trials (L=50, M=20, T=50)",
        flush=True,
    )
    backends = ["pure"] + (["native"] if _native is not None else [])
    for backend in backends:
        env = dict(os.environ, COVDET_BACKEND=backend)
        subprocess.run(
            [sys.executable, "-c", _CALIBRATE_SNIPPET.format(trials=trials)],
            env=env,
            check=True,
        )


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=200)
    parser.add_argument("--trials", type=int, default=400)
    args = parser.parse_args()
    if _native is None:
        print("note: compiled backend unavailable; timing the reference only")
    bench_kernels(args.repeats)
    bench_end_to_end(args.trials)


if __name__ == "__main__":
    main()
