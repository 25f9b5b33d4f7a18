#!/usr/bin/env python3
"""Benchmark the numba kernels against the pure-numpy fallback.

Runs both backends on the same inputs, checks they agree, and prints a small
table. Sizes default to something that finishes in well under a minute:

    python3 benchmarks/bench_kernels.py
    python3 benchmarks/bench_kernels.py --gallery 200000 --dim 256 --queries 64
"""

from __future__ import annotations

import argparse
import random
import string
import time

import numpy as np

from lookmatch import _kernels as K


def bench_topk(n_gallery: int, dim: int, n_queries: int, k: int, repeats: int) -> None:
    rng = np.random.default_rng(7)
    gallery = rng.normal(size=(n_gallery, dim)).astype(np.float32)
    gallery /= np.linalg.norm(gallery, axis=1, keepdims=True)
    queries = rng.normal(size=(n_queries, dim)).astype(np.float32)
    queries /= np.linalg.norm(queries, axis=1, keepdims=True)
    sel = np.arange(n_gallery, dtype=np.int64)
    ranks = np.arange(n_gallery, dtype=np.int64)
    kk = min(k, n_gallery)

    def run_numpy():
        rows = np.full((n_queries, kk), -1, dtype=np.int64)
        scores = np.zeros((n_queries, kk))
        counts = np.zeros(n_queries, dtype=np.int64)
        K._topk_numpy(gallery, queries, sel, ranks, kk, rows, scores, counts, workers=1)
        return rows, scores

    def run_numba():
        rows = np.full((n_queries, kk), -1, dtype=np.int64)
        scores = np.zeros((n_queries, kk))
        counts = np.zeros(n_queries, dtype=np.int64)
        K._topk_numba(gallery, queries, sel, ranks, kk, rows, scores, counts)
        return rows, scores

    timings = {}
    results = {}
    results["numpy"], timings["numpy"] = time_best(run_numpy, repeats)
    if K._HAVE_NUMBA:
        run_numba()  # JIT warmup
        results["numba"], timings["numba"] = time_best(run_numba, repeats)
        assert np.array_equal(results["numba"][0], results["numpy"][0]), "top-k ids disagree"
        assert np.allclose(results["numba"][1], results["numpy"][1], atol=1e-10)
    report("topk", f"{n_gallery}x{dim}, {n_queries} queries, k={kk}", timings)


def bench_indel(n_candidates: int, max_len: int, repeats: int) -> None:
    r = random.Random(7)
    alphabet = string.ascii_lowercase + " &"
    candidates = [
        "".join(r.choice(alphabet) for _ in range(r.randint(3, max_len)))
        for _ in range(n_candidates)
    ]
    query = candidates[0]

    def run_numpy():
        return np.array([K._indel_numpy(K.str_codes(query), K.str_codes(c)) for c in candidates])

    def run_numba():
        offsets = np.zeros(n_candidates + 1, dtype=np.int64)
        for i, c in enumerate(candidates):
            offsets[i + 1] = offsets[i] + len(c)
        flat = np.empty(offsets[-1], dtype=np.uint32)
        for i, c in enumerate(candidates):
            flat[offsets[i]: offsets[i + 1]] = K.str_codes(c)
        out = np.zeros(n_candidates, dtype=np.int64)
        K._indel_batch_numba(K.str_codes(query), flat, offsets, out)
        return out

    timings = {}
    results = {}
    results["numpy"], timings["numpy"] = time_best(run_numpy, repeats)
    if K._HAVE_NUMBA:
        run_numba()
        results["numba"], timings["numba"] = time_best(run_numba, repeats)
        assert np.array_equal(results["numba"], results["numpy"]), "indel distances disagree"
    report("indel", f"{n_candidates} brands, len<={max_len}", timings)


def time_best(fn, repeats: int):
    best = float("inf")
    result = None
    for _ in range(repeats):
        t0 = time.perf_counter()
        result = fn()
        best = min(best, time.perf_counter() - t0)
    return result, best


def report(name: str, workload: str, timings: dict[str, float]) -> None:
    print(f"\n{name}: {workload}")
    for backend in ("numpy", "numba"):
        if backend in timings:
            line = f"  {backend:>6}: {timings[backend] * 1000:9.1f} ms"
            if backend == "numba" and "numpy" in timings:
                line += f"   ({timings['numpy'] / timings[backend]:5.1f}x vs numpy)"
            print(line)
    if "numba" not in timings:
        print("  numba : unavailable (not installed)")


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--gallery", type=int, default=50_000)
    parser.add_argument("--dim", type=int, default=128)
    parser.add_argument("--queries", type=int, default=32)
    parser.add_argument("-k", type=int, default=2000)
    parser.add_argument("--brands", type=int, default=4000)
    parser.add_argument("--repeats", type=int, default=3)
    args = parser.parse_args()
    print(f"active backend per LOOKMATCH_NUMBA: {K.backend_name()}")
    bench_topk(args.gallery, args.dim, args.queries, args.k, args.repeats)
    bench_indel(args.brands, 18, args.repeats)


if __name__ == "__main__":
    main()
