"""Hot numeric kernels: exact top-k dot-product search and indel string distance.

Two interchangeable backends live here. The numba backend JIT-compiles the
inner loops; the numpy backend is a vectorized fallback used when numba is
unavailable or disabled via ``LOOKMATCH_NUMBA=0``. Both backends implement the
same contracts and are exercised against each other by the benchmark in
``benchmarks/bench_kernels.py``.

Contracts shared by both backends:
  * dot products accumulate in float64 over float32 storage;
  * top-k ties are broken by ascending tie-rank (callers pass the rank of each
    gallery row's id in id-sorted order), so results are total-ordered and
    independent of worker count;
  * indel distance is the minimum number of insertions plus deletions
    transforming one string into the other (integer-exact on both backends).
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Sequence

import numpy as np


def _env_enabled() -> bool:
    return os.environ.get("LOOKMATCH_NUMBA", "1").strip().lower() not in (
        "0", "false", "off", "no",
    )


try:
    import numba
    from numba import njit, prange

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised via LOOKMATCH_NUMBA=0 instead
    _HAVE_NUMBA = False

NUMBA_ENABLED = _HAVE_NUMBA and _env_enabled()


def backend_name() -> str:
    return "numba" if NUMBA_ENABLED else "numpy"


# ---------------------------------------------------------------------------
# top-k exact dot-product search
# ---------------------------------------------------------------------------

# Selection keeps the k best (score desc, rank asc) gallery rows per query.
# (score, rank) keys are totally ordered because ranks are unique per row.

if _HAVE_NUMBA:

    @njit(cache=True, inline="always")
    def _is_worse(s_a, r_a, s_b, r_b):
        return s_a < s_b or (s_a == s_b and r_a > r_b)

    @njit(cache=True, parallel=True)
    def _topk_numba(gallery, queries, sel, ranks, k, out_row, out_score, out_n):
        m = queries.shape[0]
        d = queries.shape[1]
        s = sel.shape[0]
        for qi in prange(m):
            hs = np.empty(k, np.float64)
            hr = np.empty(k, np.int64)
            hw = np.empty(k, np.int64)
            size = 0
            for si in range(s):
                row = sel[si]
                acc = 0.0
                for t in range(d):
                    acc += np.float64(gallery[row, t]) * np.float64(queries[qi, t])
                rk = ranks[row]
                if size < k:
                    i = size
                    hs[i] = acc
                    hr[i] = rk
                    hw[i] = row
                    size += 1
                    while i > 0:
                        p = (i - 1) // 2
                        if _is_worse(hs[i], hr[i], hs[p], hr[p]):
                            hs[i], hs[p] = hs[p], hs[i]
                            hr[i], hr[p] = hr[p], hr[i]
                            hw[i], hw[p] = hw[p], hw[i]
                            i = p
                        else:
                            break
                elif _is_worse(hs[0], hr[0], acc, rk):
                    hs[0] = acc
                    hr[0] = rk
                    hw[0] = row
                    i = 0
                    while True:
                        left = 2 * i + 1
                        right = left + 1
                        w = i
                        if left < size and _is_worse(hs[left], hr[left], hs[w], hr[w]):
                            w = left
                        if right < size and _is_worse(hs[right], hr[right], hs[w], hr[w]):
                            w = right
                        if w == i:
                            break
                        hs[i], hs[w] = hs[w], hs[i]
                        hr[i], hr[w] = hr[w], hr[i]
                        hw[i], hw[w] = hw[w], hw[i]
                        i = w
            out_n[qi] = size
            # pop worst-first into the tail so out ends up best-first
            for pos in range(size - 1, -1, -1):
                out_score[qi, pos] = hs[0]
                out_row[qi, pos] = hw[0]
                size -= 1
                hs[0] = hs[size]
                hr[0] = hr[size]
                hw[0] = hw[size]
                i = 0
                while True:
                    left = 2 * i + 1
                    right = left + 1
                    w = i
                    if left < size and _is_worse(hs[left], hr[left], hs[w], hr[w]):
                        w = left
                    if right < size and _is_worse(hs[right], hr[right], hs[w], hr[w]):
                        w = right
                    if w == i:
                        break
                    hs[i], hs[w] = hs[w], hs[i]
                    hr[i], hr[w] = hr[w], hr[i]
                    hw[i], hw[w] = hw[w], hw[i]
                    i = w


_ROW_CHUNK = 8192  # float64 staging per matmul block stays a few MB
_QUERY_CHUNK = 32  # fixed query chunk so results never depend on workers


def _scores_numpy(gallery: np.ndarray, queries64: np.ndarray, sel: np.ndarray) -> np.ndarray:
    out = np.empty((queries64.shape[0], sel.shape[0]), dtype=np.float64)
    for lo in range(0, sel.shape[0], _ROW_CHUNK):
        chunk = sel[lo : lo + _ROW_CHUNK]
        block = gallery[chunk].astype(np.float64)
        out[:, lo : lo + chunk.shape[0]] = queries64 @ block.T
    return out


def _select_row_numpy(scores: np.ndarray, ranks_sel: np.ndarray, k: int) -> np.ndarray:
    n = scores.shape[0]
    if k >= n:
        cand = np.arange(n)
    else:
        kth = np.partition(scores, n - k)[n - k]
        cand = np.flatnonzero(scores >= kth)
    order = np.lexsort((ranks_sel[cand], -scores[cand]))
    return cand[order[:k]]


def _topk_numpy(gallery, queries, sel, ranks, k, out_row, out_score, out_n, workers):
    ranks_sel = ranks[sel]

    def run(lo: int, hi: int) -> None:
        q64 = queries[lo:hi].astype(np.float64)
        scores = _scores_numpy(gallery, q64, sel)
        for i in range(hi - lo):
            keep = _select_row_numpy(scores[i], ranks_sel, k)
            n = keep.shape[0]
            out_n[lo + i] = n
            out_row[lo + i, :n] = sel[keep]
            out_score[lo + i, :n] = scores[i, keep]

    # chunk boundaries are fixed so matmul shapes (and thus float results)
    # do not depend on the worker count
    m = queries.shape[0]
    bounds = [(lo, min(lo + _QUERY_CHUNK, m)) for lo in range(0, m, _QUERY_CHUNK)]
    if workers <= 1 or len(bounds) == 1:
        for b in bounds:
            run(*b)
        return
    with ThreadPoolExecutor(max_workers=workers) as pool:
        list(pool.map(lambda b: run(*b), bounds))


def topk_dots(
    gallery: np.ndarray,
    queries: np.ndarray,
    k: int,
    sel: np.ndarray | None = None,
    ranks: np.ndarray | None = None,
    workers: int = 1,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Exact top-k gallery rows by dot product for each query row.

    Returns ``(rows, scores, counts)`` where ``rows[q, :counts[q]]`` are gallery
    row indices sorted by (score desc, rank asc) and ``scores`` are the float64
    dot products. ``sel`` restricts the searched gallery rows; ``ranks`` maps
    every gallery row to its tie-break rank (defaults to row order).
    """
    if gallery.ndim != 2 or queries.ndim != 2 or gallery.shape[1] != queries.shape[1]:
        raise ValueError("gallery and queries must be 2-d with equal dim")
    if k < 1:
        raise ValueError("k must be >= 1")
    n = gallery.shape[0]
    m = queries.shape[0]
    if sel is None:
        sel = np.arange(n, dtype=np.int64)
    else:
        sel = np.ascontiguousarray(sel, dtype=np.int64)
    if ranks is None:
        ranks = np.arange(n, dtype=np.int64)
    else:
        ranks = np.ascontiguousarray(ranks, dtype=np.int64)
    gallery = np.ascontiguousarray(gallery, dtype=np.float32)
    queries = np.ascontiguousarray(queries, dtype=np.float32)
    kk = min(k, sel.shape[0])
    out_row = np.full((m, kk), -1, dtype=np.int64)
    out_score = np.zeros((m, kk), dtype=np.float64)
    out_n = np.zeros(m, dtype=np.int64)
    if sel.shape[0] == 0:
        return out_row, out_score, out_n
    if NUMBA_ENABLED:
        numba.set_num_threads(max(1, min(workers, numba.config.NUMBA_NUM_THREADS)))
        _topk_numba(gallery, queries, sel, ranks, kk, out_row, out_score, out_n)
    else:
        _topk_numpy(gallery, queries, sel, ranks, kk, out_row, out_score, out_n, workers)
    return out_row, out_score, out_n


# ---------------------------------------------------------------------------
# indel (insert/delete) string distance
# ---------------------------------------------------------------------------


def str_codes(s: str) -> np.ndarray:
    """Unicode code points of ``s`` as a uint32 array."""
    if not s:
        return np.empty(0, dtype=np.uint32)
    return np.frombuffer(s.encode("utf-32-le"), dtype="<u4").astype(np.uint32)


if _HAVE_NUMBA:

    @njit(cache=True)
    def _indel_numba(a, b):
        la = a.shape[0]
        lb = b.shape[0]
        if la == 0:
            return lb
        if lb == 0:
            return la
        prev = np.arange(lb + 1)
        cur = np.empty(lb + 1, np.int64)
        for i in range(1, la + 1):
            cur[0] = i
            ai = a[i - 1]
            for j in range(1, lb + 1):
                if ai == b[j - 1]:
                    best = prev[j - 1]
                else:
                    best = prev[j] + 1
                    left = cur[j - 1] + 1
                    if left < best:
                        best = left
                cur[j] = best
            tmp = prev
            prev = cur
            cur = tmp
        return prev[lb]

    @njit(cache=True, parallel=True)
    def _indel_batch_numba(q, flat, offsets, out):
        n = offsets.shape[0] - 1
        for i in prange(n):
            out[i] = _indel_numba(q, flat[offsets[i] : offsets[i + 1]])


def _indel_numpy(a: np.ndarray, b: np.ndarray) -> int:
    la = a.shape[0]
    lb = b.shape[0]
    if la == 0:
        return lb
    if lb == 0:
        return la
    # row recurrence: cur[j] = min_{j'<=j} cand[j'] + (j - j'), solved by a
    # running minimum over cand[j] - j
    js = np.arange(lb + 1, dtype=np.int64)
    prev = js.copy()
    for i in range(1, la + 1):
        eq = a[i - 1] == b
        cand = prev[1:] + 1
        cand = np.where(eq, np.minimum(prev[:-1], cand), cand)
        cand = np.concatenate(([np.int64(i)], cand))
        cur = np.minimum.accumulate(cand - js) + js
        prev = cur
    return int(prev[lb])


def indel_distance(a: str, b: str) -> int:
    """Minimum insertions+deletions transforming ``a`` into ``b``."""
    ca = str_codes(a)
    cb = str_codes(b)
    if NUMBA_ENABLED:
        return int(_indel_numba(ca, cb))
    return _indel_numpy(ca, cb)


def indel_batch(query: str, candidates: Sequence[str]) -> np.ndarray:
    """Indel distance of ``query`` against every candidate string."""
    q = str_codes(query)
    n = len(candidates)
    out = np.zeros(n, dtype=np.int64)
    if n == 0:
        return out
    if NUMBA_ENABLED:
        offsets = np.zeros(n + 1, dtype=np.int64)
        for i, c in enumerate(candidates):
            offsets[i + 1] = offsets[i] + len(c)
        flat = np.empty(offsets[-1], dtype=np.uint32)
        for i, c in enumerate(candidates):
            flat[offsets[i] : offsets[i + 1]] = str_codes(c)
        _indel_batch_numba(q, flat, offsets, out)
    else:
        for i, c in enumerate(candidates):
            out[i] = _indel_numpy(q, str_codes(c))
    return out
