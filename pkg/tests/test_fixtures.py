from __future__ import annotations

import numpy as np

from lookmatch.blocks import read_block
from lookmatch.fixtures import (
    generate_pipeline_fixture,
    mock_vector,
    planted_blocks,
    synthetic_corpus,
    synthetic_external_table,
)
from lookmatch.retrieval import BrandFilter


def test_mock_vector_determinism_and_norm():
    a = mock_vector("query_image", "q1", None, 7, 64)
    b = mock_vector("query_image", "q1", None, 7, 64)
    assert a.dtype == np.float32
    assert np.array_equal(a, b)
    assert abs(np.linalg.norm(a.astype(np.float64)) - 1.0) < 1e-6


def test_mock_vector_varies_with_inputs():
    base = mock_vector("query_image", "q1", None, 7, 32)
    assert not np.array_equal(base, mock_vector("query_image", "q2", None, 7, 32))
    assert not np.array_equal(base, mock_vector("query_image", "q1", None, 8, 32))
    assert not np.array_equal(base, mock_vector("gallery_image", "q1", None, 7, 32))
    with_ord = mock_vector("gallery_text", "q1", 0, 7, 32)
    assert not np.array_equal(with_ord, mock_vector("gallery_text", "q1", 1, 7, 32))


def test_synthetic_corpus_shape():
    queries, gallery, planted = synthetic_corpus(20, 80, seed=3)
    assert len(queries) == 20
    assert len(gallery) == 80
    assert len(planted) == 20
    filt = BrandFilter()
    for q in queries:
        partner = next(g for g in gallery if g.id == planted[q.id])
        assert filt.canon(partner.brand) == filt.canon(q.brand)
    assert any(g.brand == "" for g in gallery)


def test_planted_blocks_nearest_neighbor():
    queries, gallery, planted = synthetic_corpus(10, 60, seed=5)
    blocks = planted_blocks(queries, gallery, planted, dim=32, seed=5)
    qb = blocks["query_image"]
    gb = blocks["gallery_image"]
    dots = qb.vectors.astype(np.float64) @ gb.vectors.astype(np.float64).T
    g_ids = gb.ids()
    for qi, q in enumerate(queries):
        best = g_ids[int(np.argmax(dots[qi]))]
        assert best == planted[q.id]
    # some galleries have no text parts, planted ones have at least one
    text_ids = set(blocks["gallery_text"].ids())
    assert set(planted.values()) <= text_ids
    assert text_ids < {g.id for g in gallery}


def test_external_table_ranks_planted_first():
    queries, gallery, planted = synthetic_corpus(8, 40, seed=9)
    q_ids = [r.id for r in queries]
    g_ids = [r.id for r in gallery]
    table = synthetic_external_table("ext", q_ids, g_ids, planted, seed=9)
    assert len(table) == 8 * 40
    for q in q_ids:
        best = max(
            ((g, table.entries[(q, g)]) for g in g_ids), key=lambda e: e[1]
        )
        assert best[0] == planted[q]


def test_generate_pipeline_fixture_files_check_out(tmp_path):
    fx = generate_pipeline_fixture(tmp_path, n_queries=6, n_gallery=20, dim=16, seed=2)
    for kind, path in fx["blocks"].items():
        block = read_block(path)
        assert block.kind == kind
        assert block.dim == 16
    assert fx["planted"]["q000003"] == "g000003"
    # regenerating produces byte-identical blocks
    fx2 = generate_pipeline_fixture(tmp_path / "again", 6, 20, 16, 2)
    from pathlib import Path
    for kind in fx["blocks"]:
        assert Path(fx["blocks"][kind]).read_bytes() == Path(fx2["blocks"][kind]).read_bytes()
