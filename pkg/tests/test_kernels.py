from __future__ import annotations

import os
import random
import string
import subprocess
import sys

import numpy as np
import pytest

from conftest import unit_rows
from lookmatch import _kernels as K
from oracles import indel_dp


def test_env_flag_selects_numpy_backend():
    env = dict(os.environ, LOOKMATCH_NUMBA="0")
    out = subprocess.run(
        [sys.executable, "-c",
         "from lookmatch import _kernels; print(_kernels.backend_name())"],
        env=env, capture_output=True, text=True, check=True,
    )
    assert out.stdout.strip() == "numpy"


def test_str_codes():
    assert K.str_codes("").size == 0
    codes = K.str_codes("abé")
    assert codes.tolist() == [ord("a"), ord("b"), 0xE9]


def test_indel_against_dp_oracle_both_backends():
    r = random.Random(42)
    alphabet = string.ascii_lowercase[:6]
    for _ in range(200):
        a = "".join(r.choice(alphabet) for _ in range(r.randint(0, 10)))
        b = "".join(r.choice(alphabet) for _ in range(r.randint(0, 10)))
        expected = indel_dp(a, b)
        assert K.indel_distance(a, b) == expected
        assert K._indel_numpy(K.str_codes(a), K.str_codes(b)) == expected


def test_indel_batch_matches_scalar():
    cands = ["prada", "prado", "", "miu miu", "pra da"]
    out = K.indel_batch("prada", cands)
    assert out.tolist() == [K.indel_distance("prada", c) for c in cands]


@pytest.mark.skipif(not K.NUMBA_ENABLED, reason="numba backend disabled")
def test_topk_backend_parity(rng):
    gallery = unit_rows(300, 24, rng)
    queries = unit_rows(9, 24, rng)
    ranks = np.arange(300, dtype=np.int64)
    sel = np.arange(300, dtype=np.int64)
    k = 11
    rows_nb = np.full((9, k), -1, dtype=np.int64)
    sco_nb = np.zeros((9, k))
    cnt_nb = np.zeros(9, dtype=np.int64)
    K._topk_numba(gallery, queries, sel, ranks, k, rows_nb, sco_nb, cnt_nb)
    rows_np = np.full((9, k), -1, dtype=np.int64)
    sco_np = np.zeros((9, k))
    cnt_np = np.zeros(9, dtype=np.int64)
    K._topk_numpy(gallery, queries, sel, ranks, k, rows_np, sco_np, cnt_np, workers=1)
    assert np.array_equal(rows_nb, rows_np)
    assert np.array_equal(cnt_nb, cnt_np)
    assert np.max(np.abs(sco_nb - sco_np)) < 1e-12


def test_topk_masked_selection(rng):
    gallery = unit_rows(50, 8, rng)
    queries = gallery[:2].copy()
    sel = np.array([5, 9, 21], dtype=np.int64)
    rows, scores, counts = K.topk_dots(gallery, queries, 10, sel=sel)
    assert counts.tolist() == [3, 3]
    assert set(rows[0].tolist()) == {5, 9, 21}


def test_topk_identical_across_worker_counts(rng):
    gallery = unit_rows(400, 16, rng)
    queries = unit_rows(70, 16, rng)
    base = K.topk_dots(gallery, queries, 9, workers=1)
    for w in (2, 3, 8):
        got = K.topk_dots(gallery, queries, 9, workers=w)
        for a, b in zip(base, got):
            assert np.array_equal(a, b)


def test_topk_validates_inputs(rng):
    g = unit_rows(5, 8, rng)
    q = unit_rows(2, 4, rng)
    with pytest.raises(ValueError):
        K.topk_dots(g, q, 3)
    with pytest.raises(ValueError):
        K.topk_dots(g, unit_rows(2, 8, rng), 0)


def test_topk_float64_accumulation(rng):
    # float32 accumulation of this construction loses the small component
    g = np.zeros((1, 3), dtype=np.float32)
    g[0] = [1.0, 2.0 ** -13, 0.0]
    g /= np.linalg.norm(g.astype(np.float64), axis=1, keepdims=True).astype(np.float32)
    q = g.copy()
    _, scores, _ = K.topk_dots(g, q, 1)
    expected = float(g[0].astype(np.float64) @ g[0].astype(np.float64))
    assert scores[0, 0] == pytest.approx(expected, abs=1e-15)
