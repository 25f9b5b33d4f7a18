"""Independent brute-force oracles the real implementations are checked against.

Everything here favors obviousness over speed and shares no code with the
package: full-matrix DP, double loops, full sorts.
"""

from __future__ import annotations

import numpy as np


def indel_dp(a: str, b: str) -> int:
    """Full-matrix DP for minimum insertions+deletions."""
    la, lb = len(a), len(b)
    d = [[0] * (lb + 1) for _ in range(la + 1)]
    for i in range(la + 1):
        d[i][0] = i
    for j in range(lb + 1):
        d[0][j] = j
    for i in range(1, la + 1):
        for j in range(1, lb + 1):
            best = min(d[i - 1][j] + 1, d[i][j - 1] + 1)
            if a[i - 1] == b[j - 1]:
                best = min(best, d[i - 1][j - 1])
            d[i][j] = best
    return d[la][lb]


def brand_similarity_oracle(a: str, b: str) -> float:
    """Normalized indel ratio over already-canonical strings."""
    if not a and not b:
        return 100.0
    if not a or not b:
        return 0.0
    return 100.0 * (1.0 - indel_dp(a, b) / (len(a) + len(b)))


def topk_fullsort(
    gallery: np.ndarray, ids: list[str], qvec: np.ndarray, k: int,
    allowed: set[str] | None = None,
) -> list[tuple[str, float]]:
    """Score every row, fully sort by (score desc, id asc), cut to k."""
    scored = []
    for i, gid in enumerate(ids):
        if allowed is not None and gid not in allowed:
            continue
        s = float(np.dot(gallery[i].astype(np.float64), qvec.astype(np.float64)))
        scored.append((gid, s))
    scored.sort(key=lambda e: (-e[1], e[0]))
    return scored[:k]


def dense_dots_loop(queries: np.ndarray, gallery: np.ndarray) -> np.ndarray:
    """Naive double-loop float64 dot products."""
    m, n = queries.shape[0], gallery.shape[0]
    out = np.zeros((m, n))
    for i in range(m):
        for j in range(n):
            out[i, j] = float(
                np.dot(queries[i].astype(np.float64), gallery[j].astype(np.float64))
            )
    return out


def average_ranks_counting(x: list[float]) -> list[float]:
    """1-based tie-averaged ranks by explicit counting."""
    n = len(x)
    ranks = []
    for v in x:
        less = sum(1 for u in x if u < v)
        equal = sum(1 for u in x if u == v)
        # ranks occupied by the tie group: less+1 .. less+equal
        ranks.append(less + (equal + 1) / 2.0)
    assert len(ranks) == n
    return ranks


def spearman_bruteforce(x: list[float], y: list[float]) -> float:
    rx = average_ranks_counting(list(x))
    ry = average_ranks_counting(list(y))
    n = len(rx)
    mx = sum(rx) / n
    my = sum(ry) / n
    cov = sum((a - mx) * (b - my) for a, b in zip(rx, ry))
    vx = sum((a - mx) ** 2 for a in rx)
    vy = sum((b - my) ** 2 for b in ry)
    return cov / (vx * vy) ** 0.5


def second_highest(scores: list[float], min_support: int) -> float | None:
    if len(scores) < min_support:
        return None
    return sorted(scores, reverse=True)[1]


def recall_counting(
    ranking: dict[str, list[str]], truth_pairs: set[tuple[str, str]], k: int
) -> float:
    queries = sorted({q for q, _ in truth_pairs})
    hits = 0
    for q in queries:
        true_set = {g for qq, g in truth_pairs if qq == q}
        if any(g in true_set for g in ranking[q][:k]):
            hits += 1
    return hits / len(queries)
