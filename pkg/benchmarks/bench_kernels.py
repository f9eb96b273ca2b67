#!/usr/bin/env python3
"""Benchmark the numba kernels against the pure-NumPy fallback.

Times the hot inner loops (convolution, patch resampling, full network
forward) and one end-to-end search on each path.  The same comparison can be
forced process-wide with GRASP_PSO_NO_NUMBA=1.

Usage: python benchmarks/bench_kernels.py [--repeats N]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from psograsp import accel
from psograsp.geometry import GraspRect
from psograsp.imaging import extract_patch, resize_bilinear
from psograsp.nn import class_probs, conv2d, random_weights
from psograsp.pso import SwarmConfig, search
from psograsp.scorer import CnnScorer


def timeit(fn, repeats: int) -> float:
    fn()  # warm-up (numba compilation, caches)
    t0 = time.perf_counter()
    for _ in range(repeats):
        fn()
    return (time.perf_counter() - t0) / repeats * 1000.0


def bench(name, fn, repeats, rows):
    times = {}
    for path in ("numba", "numpy"):
        accel.FORCE_NUMPY = path == "numpy"
        times[path] = timeit(fn, repeats)
    accel.FORCE_NUMPY = False
    rows.append((name, times["numba"], times["numpy"]))


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--repeats", type=int, default=20)
    args = ap.parse_args()

    if not accel.HAS_NUMBA:
        raise SystemExit("numba is not importable; nothing to compare")

    rng = np.random.default_rng(0)
    img = rng.random((224, 224, 3)).astype(np.float32)
    wts = random_weights(seed=0)
    scorer = CnnScorer(wts)
    rect = GraspRect(112, 112, 30, 20, 45)
    patch = rng.random((24, 24, 3), dtype=np.float32)
    conv_in = rng.normal(size=(22, 22, 32))
    conv_k = rng.normal(size=(3, 3, 32, 64))

    rows: list[tuple[str, float, float]] = []
    bench("conv2d 22x22x32 -> 64 (s2)", lambda: conv2d(conv_in, conv_k, 2), args.repeats, rows)
    bench("resize 300x300 -> 224x224", lambda: resize_bilinear(img[:224, :224], 112, 112), args.repeats, rows)
    bench("extract_patch", lambda: extract_patch(img, rect), args.repeats, rows)
    bench("network forward (24x24 patch)", lambda: class_probs(patch, wts), args.repeats, rows)

    cfg = SwarmConfig(seed=1, n_particles=8, max_iter=3, init_threshold=0.0, prob_threshold=1.0)
    bench("search 8 particles x 3 iters (CNN)", lambda: search(img, scorer, cfg), max(args.repeats // 10, 1), rows)

    name_w = max(len(r[0]) for r in rows)
    print(f"{'kernel'.ljust(name_w)}  {'numba ms':>10}  {'numpy ms':>10}  {'speedup':>8}")
    for name, t_nb, t_np in rows:
        print(f"{name.ljust(name_w)}  {t_nb:>10.3f}  {t_np:>10.3f}  {t_np / t_nb:>7.2f}x")


if __name__ == "__main__":
    main()
