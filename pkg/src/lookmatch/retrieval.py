"""Exact top-k retrieval with fuzzy brand prefiltering.

The hot loop is exact dot-product search over the full gallery block (see
``_kernels``); brand prefiltering shrinks it before any scoring happens.
Queries sharing a canonical brand share a prefiltered gallery, so search runs
batched per brand group. All tie-breaking is by ascending gallery id, which
makes every output independent of worker count and repeatable byte for byte.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import _kernels
from .blocks import EmbeddingBlock
from .channels import (
    CHANNEL_BB2I,
    CHANNEL_FI2I,
    CHANNEL_I2I,
    CHANNEL_T2I,
    ScoreTable,
)
from .corpus import ImageRecord
from .errors import DimMismatch, EmptyMask, MalformedManifest

DEFAULT_K = 2000
DEFAULT_BRAND_THRESHOLD = 90.0


@dataclass(frozen=True)
class BrandFilter:
    """Fuzzy brand gate: canonicalize, then keep pairs at or above threshold.

    Records whose canonical brand is empty never pass; an absent brand cannot
    corroborate a match.
    """

    threshold: float = DEFAULT_BRAND_THRESHOLD
    lowercase: bool = True
    trim: bool = True
    collapse_whitespace: bool = True

    def __post_init__(self) -> None:
        if not 0.0 <= self.threshold <= 100.0:
            raise ValueError(f"threshold {self.threshold} outside [0, 100]")

    def canon(self, s: str) -> str:
        if self.lowercase:
            s = s.lower()
        if self.trim:
            s = s.strip()
        if self.collapse_whitespace:
            s = " ".join(s.split())
        return s


def brand_similarity(a: str, b: str, filt: BrandFilter | None = None) -> float:
    """Normalized indel similarity of canonical brands, scaled to [0, 100].

    100 * (1 - indel(a, b) / (|a| + |b|)); both empty -> 100, one empty -> 0.
    """
    filt = filt or BrandFilter()
    ca = filt.canon(a)
    cb = filt.canon(b)
    if not ca and not cb:
        return 100.0
    if not ca or not cb:
        return 0.0
    dist = _kernels.indel_distance(ca, cb)
    return 100.0 * (1.0 - dist / (len(ca) + len(cb)))


def prefilter(
    query: ImageRecord, gallery: Sequence[ImageRecord], filt: BrandFilter
) -> set[str]:
    """Gallery ids whose brand is sufficiently similar to the query's brand."""
    cq = filt.canon(query.brand)
    if not cq:
        return set()
    by_brand: dict[str, list[str]] = {}
    for rec in gallery:
        cg = filt.canon(rec.brand)
        if cg:
            by_brand.setdefault(cg, []).append(rec.id)
    brands = sorted(by_brand)
    if not brands:
        return set()
    dists = _kernels.indel_batch(cq, brands)
    keep: set[str] = set()
    for brand, dist in zip(brands, dists):
        sim = 100.0 * (1.0 - dist / (len(cq) + len(brand)))
        if sim >= filt.threshold:
            keep.update(by_brand[brand])
    return keep


@dataclass(frozen=True)
class CandidateList:
    """Top candidates for one (query, model), best first."""

    query_id: str
    model: str
    entries: tuple[tuple[str, float], ...]
    capacity: int

    def __post_init__(self) -> None:
        if len(self.entries) > self.capacity:
            raise ValueError(
                f"{len(self.entries)} entries exceed capacity {self.capacity}"
            )
        for (g_a, s_a), (g_b, s_b) in zip(self.entries, self.entries[1:]):
            if not (s_a > s_b or (s_a == s_b and g_a < g_b)):
                raise ValueError(
                    f"entries not sorted by (score desc, id asc) near {g_a!r}/{g_b!r}"
                )


def _id_ranks(ids: Sequence[str]) -> np.ndarray:
    order = sorted(range(len(ids)), key=lambda i: ids[i])
    ranks = np.empty(len(ids), dtype=np.int64)
    for rank, row in enumerate(order):
        ranks[row] = rank
    return ranks


def topk(
    query_vec: np.ndarray,
    gallery: EmbeddingBlock,
    k: int,
    mask: set[str] | None = None,
    query_id: str = "",
    model: str = CHANNEL_FI2I,
) -> CandidateList:
    """Exact k highest-dot-product gallery rows, optionally within a mask."""
    lists = topk_batch(
        np.asarray(query_vec, dtype=np.float32)[None, :],
        [query_id],
        gallery,
        k,
        mask=mask,
        model=model,
    )
    return lists[0]


def topk_batch(
    query_vecs: np.ndarray,
    query_ids: Sequence[str],
    gallery: EmbeddingBlock,
    k: int,
    mask: set[str] | None = None,
    model: str = CHANNEL_FI2I,
    workers: int = 1,
) -> list[CandidateList]:
    """topk for many queries sharing one mask; one kernel invocation."""
    if query_vecs.ndim != 2 or query_vecs.shape[1] != gallery.dim:
        raise DimMismatch(
            f"query dim {query_vecs.shape[-1]} vs gallery dim {gallery.dim}"
        )
    if k < 1:
        raise ValueError("k must be >= 1")
    ids = gallery.ids()
    if mask is not None:
        sel = np.array(
            [i for i, g in enumerate(ids) if g in mask], dtype=np.int64
        )
        if sel.size == 0:
            raise EmptyMask("mask excludes every gallery row")
    else:
        sel = None
    ranks = _id_ranks(ids)
    rows, scores, counts = _kernels.topk_dots(
        gallery.vectors, query_vecs, k, sel=sel, ranks=ranks, workers=workers
    )
    out = []
    for qi, qid in enumerate(query_ids):
        n = int(counts[qi])
        entries = tuple(
            (ids[int(rows[qi, j])], float(scores[qi, j])) for j in range(n)
        )
        out.append(CandidateList(qid, model, entries, k))
    return out


def _select_from_scores(
    scores: np.ndarray, ranks: np.ndarray, k: int
) -> np.ndarray:
    """Indices of the k best scores, ties by ascending rank; -inf never kept."""
    finite = np.flatnonzero(np.isfinite(scores))
    if finite.size == 0:
        return finite
    sub = scores[finite]
    if k < sub.shape[0]:
        kth = np.partition(sub, sub.shape[0] - k)[sub.shape[0] - k]
        cand = finite[sub >= kth]
    else:
        cand = finite
    order = np.lexsort((ranks[cand], -scores[cand]))
    return cand[order[:k]]


def _grouped_max_scores(
    queries64: np.ndarray,
    parts: EmbeddingBlock,
    gallery_pos: Mapping[str, int],
    n_gallery: int,
) -> np.ndarray:
    """Per-gallery max dot over part rows; -inf where a gallery has no parts."""
    out = np.full((queries64.shape[0], n_gallery), -np.inf)
    if parts.rows == 0:
        return out
    part_ids = parts.ids()
    col = np.array([gallery_pos[g] for g in part_ids], dtype=np.int64)
    order = np.argsort(col, kind="stable")
    col_sorted = col[order]
    dots = queries64 @ parts.vectors[order].astype(np.float64).T
    uniq, starts = np.unique(col_sorted, return_index=True)
    gmax = np.maximum.reduceat(dots, starts, axis=1)
    out[:, uniq] = gmax
    return out


def build_candidates(
    queries: EmbeddingBlock,
    gallery_blocks: Mapping[str, EmbeddingBlock],
    models: Sequence[str],
    k: int,
    filt: BrandFilter | None = None,
    query_records: Sequence[ImageRecord] | None = None,
    gallery_records: Sequence[ImageRecord] | None = None,
    workers: int = 1,
) -> list[CandidateList]:
    """Per (query, model) top-k candidates over the prefiltered gallery.

    ``gallery_blocks`` maps channel names to their blocks: fi2i and i2i need
    ``gallery_image``, t2i needs ``gallery_text``, bb2i and i2i need
    ``gallery_bbox``. Brand filtering requires the corpus records; queries
    whose prefilter retains nothing produce no candidate lists.
    """
    image_block = gallery_blocks.get("gallery_image")
    if image_block is None:
        raise ValueError("gallery_image block is required")
    gallery_ids = image_block.ids()
    gallery_pos = {g: i for i, g in enumerate(gallery_ids)}
    ranks = _id_ranks(gallery_ids)
    query_ids = queries.ids()

    # queries sharing a canonical brand share one prefiltered gallery
    groups: list[tuple[list[int], set[str] | None]] = []
    if filt is not None:
        if query_records is None or gallery_records is None:
            raise ValueError("brand filtering needs query and gallery records")
        brand_of = {r.id: r.brand for r in query_records}
        by_brand: dict[str, list[int]] = {}
        for qi, qid in enumerate(query_ids):
            by_brand.setdefault(filt.canon(brand_of[qid]), []).append(qi)
        for brand in sorted(by_brand):
            qidx = by_brand[brand]
            rep = query_records[0]
            probe = ImageRecord(rep.id, rep.role, brand, rep.image_uri, rep.source)
            groups.append((qidx, prefilter(probe, gallery_records, filt)))
    else:
        groups.append((list(range(len(query_ids))), None))

    results: list[CandidateList] = []
    for model in models:
        if model not in (CHANNEL_FI2I, CHANNEL_T2I, CHANNEL_BB2I, CHANNEL_I2I):
            raise ValueError(f"unknown channel {model!r}")
        for qidx, mask in groups:
            if mask is not None and not mask:
                continue
            qvecs = queries.vectors[qidx]
            ids_batch = [query_ids[i] for i in qidx]
            if model == CHANNEL_FI2I:
                results.extend(
                    topk_batch(
                        qvecs, ids_batch, image_block, k,
                        mask=mask, model=model, workers=workers,
                    )
                )
            else:
                q64 = qvecs.astype(np.float64)
                if model == CHANNEL_T2I:
                    parts = gallery_blocks.get("gallery_text")
                    if parts is None:
                        raise ValueError("t2i needs a gallery_text block")
                    scores = _grouped_max_scores(q64, parts, gallery_pos, len(gallery_ids))
                elif model == CHANNEL_BB2I:
                    parts = gallery_blocks.get("gallery_bbox")
                    if parts is None:
                        raise ValueError("bb2i needs a gallery_bbox block")
                    scores = _grouped_max_scores(q64, parts, gallery_pos, len(gallery_ids))
                else:  # i2i
                    parts = gallery_blocks.get("gallery_bbox")
                    if parts is None:
                        raise ValueError("i2i needs a gallery_bbox block")
                    crop_scores = _grouped_max_scores(q64, parts, gallery_pos, len(gallery_ids))
                    full = q64 @ image_block.vectors.astype(np.float64).T
                    scores = np.maximum(full, crop_scores)
                if mask is not None:
                    allowed = np.zeros(len(gallery_ids), dtype=bool)
                    for g in mask:
                        allowed[gallery_pos[g]] = True
                    scores = np.where(allowed[None, :], scores, -np.inf)
                for bi, qid in enumerate(ids_batch):
                    keep = _select_from_scores(scores[bi], ranks, k)
                    entries = tuple(
                        (gallery_ids[int(j)], float(scores[bi, j])) for j in keep
                    )
                    results.append(CandidateList(qid, model, entries, k))

    by_query = {qid: i for i, qid in enumerate(query_ids)}
    model_order = {m: i for i, m in enumerate(models)}
    results.sort(key=lambda c: (model_order[c.model], by_query[c.query_id]))
    return results


def truncate_per_query(
    table: ScoreTable,
    k: int,
    allowed: Mapping[str, set[str]] | None = None,
) -> ScoreTable:
    """Keep each query's top-k entries (score desc, id asc) within its mask.

    Table-level counterpart of build_candidates used when dense tables already
    exist; standardization is monotone per model, so truncation before or
    after it keeps the same pairs.
    """
    per_query: dict[str, list[tuple[str, float]]] = {}
    for (q, g), s in table.entries.items():
        if allowed is not None and g not in allowed.get(q, ()):
            continue
        per_query.setdefault(q, []).append((g, s))
    entries: dict[tuple[str, str], float] = {}
    for q, cands in per_query.items():
        cands.sort(key=lambda e: (-e[1], e[0]))
        for g, s in cands[:k]:
            entries[(q, g)] = s
    return ScoreTable(table.model, entries, "truncated", dict(table.meta))


# --- candidate list files -----------------------------------------------------
#
# One file holds the lists of one model, each list as a section:
#   #query=<id>\tmodel=<name>\tk=<k>[\tkey=value ...]
#   gallery_id\tscore


def write_candidates(
    lists: Iterable[CandidateList], path: str | Path, meta: Mapping[str, str] | None = None
) -> None:
    extra = ""
    if meta:
        extra = "".join(f"\t{k}={meta[k]}" for k in sorted(meta))
    with Path(path).open("w", encoding="utf-8", newline="\n") as fh:
        for lst in lists:
            fh.write(f"#query={lst.query_id}\tmodel={lst.model}\tk={lst.capacity}{extra}\n")
            for g, s in lst.entries:
                fh.write(f"{g}\t{s:.9g}\n")


def read_candidates(path: str | Path) -> list[CandidateList]:
    p = Path(path)
    out: list[CandidateList] = []
    query_id = model = None
    capacity = 0
    entries: list[tuple[str, float]] = []

    def flush() -> None:
        if query_id is not None:
            out.append(CandidateList(query_id, model or "", tuple(entries), capacity))

    with p.open("r", encoding="utf-8", newline="\n") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            if line.startswith("#"):
                flush()
                fields = dict(
                    part.partition("=")[::2] for part in line[1:].split("\t")
                )
                if "query" not in fields or "model" not in fields or "k" not in fields:
                    raise MalformedManifest(f"{p}:{lineno}: bad candidate header")
                query_id = fields["query"]
                model = fields["model"]
                capacity = int(fields["k"])
                entries = []
            else:
                g, sep, s = line.partition("\t")
                if not sep:
                    raise MalformedManifest(f"{p}:{lineno}: expected gallery_id\\tscore")
                entries.append((g, float(s)))
    flush()
    return out
