"""Deterministic synthetic corpora and mock-embedded blocks.

Mock vectors follow the same keyed-hash scheme the embedding sidecar uses in
mock mode, so fixtures generated here are bit-identical to sidecar output for
the same (seed, corpus):

    key      = seed as 8 little-endian bytes (blake2b key)
    message  = kind 0x1f id 0x1f ordinal 0x1f block_index (ordinal empty for
               image kinds; block_index counts 32-byte digest blocks)
    values   = digest bytes as little-endian uint32, mapped to (-1, 1) via
               (u + 0.5) / 2**32 * 2 - 1, then unit-normalized in float64
               and stored as float32

Planted fixtures additionally blend a known query vector into its partner
gallery's vectors so nearest neighbors are known in advance.
"""

from __future__ import annotations

import hashlib
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .blocks import (
    KIND_GALLERY_BBOX,
    KIND_GALLERY_IMAGE,
    KIND_GALLERY_TEXT,
    KIND_QUERY_IMAGE,
    EmbeddingBlock,
    write_block,
)
from .channels import DENSE, ScoreTable
from .corpus import ImageRecord, save_corpus

_BLOCK_BYTES = 32
_U32_PER_BLOCK = _BLOCK_BYTES // 4

BRAND_POOL = (
    "Aster & Vale", "Borealis", "Cachemire Freres", "Delacroix",
    "Ellsworth", "Fenmore", "Gilt Atelier", "Hartwell",
    "Ishikawa Studio", "Juniper Row", "Kestrel", "Lumen House",
    "Maison Arbre", "Northgate", "Opaline", "Pembrook",
    "Quill & Thread", "Rossalyn", "Silvermark", "Tessellate",
)


def mock_vector(kind: str, record_id: str, ordinal: int | None, seed: int, dim: int) -> np.ndarray:
    """Deterministic unit float32 vector for one (kind, id, ordinal, seed)."""
    key = (seed & 0xFFFFFFFFFFFFFFFF).to_bytes(8, "little")
    ord_bytes = b"" if ordinal is None else str(ordinal).encode("ascii")
    base = kind.encode("ascii") + b"\x1f" + record_id.encode("utf-8") + b"\x1f" + ord_bytes
    n_blocks = -(-dim // _U32_PER_BLOCK)
    raw = b"".join(
        hashlib.blake2b(
            base + b"\x1f" + i.to_bytes(4, "little"), key=key, digest_size=_BLOCK_BYTES
        ).digest()
        for i in range(n_blocks)
    )
    u = np.frombuffer(raw, dtype="<u4")[:dim].astype(np.float64)
    x = (u + 0.5) / 2.0**32 * 2.0 - 1.0
    x /= np.linalg.norm(x)
    return x.astype(np.float32)


def _blend(base: np.ndarray, noise: np.ndarray, align: float) -> np.ndarray:
    v = align * base.astype(np.float64) + (1.0 - align) * noise.astype(np.float64)
    v /= np.linalg.norm(v)
    return v.astype(np.float32)


def _hash_int(*parts: str) -> int:
    h = hashlib.blake2b("\x1f".join(parts).encode("utf-8"), digest_size=8)
    return int.from_bytes(h.digest(), "little")


def _jitter_brand(brand: str, salt: int) -> str:
    """Case/spacing variants that stay fuzzy-identical after canonicalization."""
    mode = salt % 4
    if mode == 0:
        return brand
    if mode == 1:
        return brand.upper()
    if mode == 2:
        return brand.lower()
    return "  " + brand + " "


def synthetic_corpus(
    n_queries: int,
    n_gallery: int,
    seed: int,
    brands: Sequence[str] = BRAND_POOL,
    unbranded_every: int = 13,
) -> tuple[list[ImageRecord], list[ImageRecord], dict[str, str]]:
    """Corpus with one planted gallery partner per query (same brand).

    Gallery record i < n_queries is the partner of query i; remaining gallery
    records cycle through the brand pool, with every ``unbranded_every``-th
    non-planted record left brandless to exercise the empty-brand rule.
    """
    if n_gallery < n_queries:
        raise ValueError("need at least one gallery record per query")
    queries = []
    gallery = []
    planted: dict[str, str] = {}
    for i in range(n_queries):
        qid = f"q{i:06d}"
        brand = brands[i % len(brands)]
        queries.append(
            ImageRecord(qid, "query", brand, f"synthetic://garment/{qid}.jpg", "fixture")
        )
    for j in range(n_gallery):
        gid = f"g{j:06d}"
        brand = brands[j % len(brands)]
        if j >= n_queries and (j - n_queries) % unbranded_every == 0:
            brand_field = ""
        else:
            brand_field = _jitter_brand(brand, _hash_int("brand", gid, str(seed)))
        gallery.append(
            ImageRecord(gid, "gallery", brand_field, f"synthetic://lookbook/{gid}.jpg", "fixture")
        )
        if j < n_queries:
            planted[f"q{j:06d}"] = gid
    return queries, gallery, planted


def planted_blocks(
    queries: Sequence[ImageRecord],
    gallery: Sequence[ImageRecord],
    planted: Mapping[str, str],
    dim: int,
    seed: int,
    align: float = 0.92,
) -> dict[str, EmbeddingBlock]:
    """Mock blocks for all four kinds with planted nearest neighbors.

    The planted gallery image (and its first description and first crop) get
    vectors blended toward the partner query vector; everything else is pure
    hash noise. Some non-planted galleries have no descriptions or crops.
    """
    partner_of = {g: q for q, g in planted.items()}
    qvecs = {
        r.id: mock_vector(KIND_QUERY_IMAGE, r.id, None, seed, dim) for r in queries
    }
    q_block = EmbeddingBlock(
        KIND_QUERY_IMAGE,
        np.stack([qvecs[r.id] for r in queries]),
        tuple((r.id, None) for r in queries),
    )

    g_rows = []
    for r in gallery:
        noise = mock_vector(KIND_GALLERY_IMAGE, r.id, None, seed, dim)
        if r.id in partner_of:
            g_rows.append(_blend(qvecs[partner_of[r.id]], noise, align))
        else:
            g_rows.append(noise)
    g_block = EmbeddingBlock(
        KIND_GALLERY_IMAGE, np.stack(g_rows), tuple((r.id, None) for r in gallery)
    )

    def parts_block(kind: str) -> EmbeddingBlock:
        rows = []
        keys = []
        for r in gallery:
            is_planted = r.id in partner_of
            draw = _hash_int(kind, "count", r.id, str(seed))
            count = 1 + draw % 2 if is_planted else draw % 3
            for ordinal in range(count):
                noise = mock_vector(kind, r.id, ordinal, seed, dim)
                if is_planted and ordinal == 0:
                    rows.append(_blend(qvecs[partner_of[r.id]], noise, align))
                else:
                    rows.append(noise)
                keys.append((r.id, ordinal))
        if not rows:
            return EmbeddingBlock(kind, np.empty((0, dim), np.float32), ())
        return EmbeddingBlock(kind, np.stack(rows), tuple(keys))

    return {
        "query_image": q_block,
        "gallery_image": g_block,
        "gallery_text": parts_block(KIND_GALLERY_TEXT),
        "gallery_bbox": parts_block(KIND_GALLERY_BBOX),
    }


def synthetic_external_table(
    model: str,
    query_ids: Sequence[str],
    gallery_ids: Sequence[str],
    planted: Mapping[str, str],
    seed: int,
    planted_score: float = 0.9,
    noise_scale: float = 0.12,
) -> ScoreTable:
    """Dense raw score table imitating an externally trained model.

    Background scores are seeded gaussians; planted pairs sit planted_score
    above them, so every model agrees on the planted matches while disagreeing
    elsewhere.
    """
    rng = np.random.default_rng([seed, _hash_int("external", model)])
    noise = rng.normal(0.0, noise_scale, size=(len(query_ids), len(gallery_ids)))
    entries: dict[tuple[str, str], float] = {}
    for i, q in enumerate(query_ids):
        target = planted.get(q)
        for j, g in enumerate(gallery_ids):
            s = noise[i, j]
            if g == target:
                s += planted_score
            entries[(q, g)] = float(s)
    return ScoreTable(model, entries, DENSE)


def generate_pipeline_fixture(
    root: str | Path,
    n_queries: int = 200,
    n_gallery: int = 1000,
    dim: int = 64,
    seed: int = 7,
) -> dict:
    """Write the full on-disk input set for an end-to-end pipeline run.

    Returns the paths plus the planted query->gallery mapping so callers can
    assert the expected top pairs.
    """
    from .channels import write_table  # local to avoid cycle at import time

    root = Path(root)
    (root / "blocks").mkdir(parents=True, exist_ok=True)
    queries, gallery, planted = synthetic_corpus(n_queries, n_gallery, seed)
    save_corpus(queries, root / "queries.tsv")
    save_corpus(gallery, root / "gallery.tsv")
    blocks = planted_blocks(queries, gallery, planted, dim, seed)
    paths = {}
    for name, block in blocks.items():
        path = root / "blocks" / f"{name}.blk"
        write_block(block, path)
        paths[name] = str(path)
    q_ids = [r.id for r in queries]
    g_ids = [r.id for r in gallery]
    externals = {}
    for model in ("extmodel_a", "extmodel_b"):
        table = synthetic_external_table(model, q_ids, g_ids, planted, seed)
        path = root / f"raw_{model}.tsv"
        write_table(table, path)
        externals[model] = str(path)
    return {
        "queries_manifest": str(root / "queries.tsv"),
        "gallery_manifest": str(root / "gallery.tsv"),
        "blocks": paths,
        "external_scores": externals,
        "planted": planted,
    }
