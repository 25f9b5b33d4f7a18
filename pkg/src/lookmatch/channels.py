"""Per-model similarity channels over embedding blocks.

Four channels are computed from unit-normalized blocks, so cosine similarity
reduces to a dot product (float64 accumulation over float32 storage):

  fi2i  query image vs full gallery image
  t2i   query image vs per-gallery garment descriptions, max over descriptions
  bb2i  query image vs per-gallery detected crops, max over crops
  i2i   elementwise max of fi2i and bb2i

Galleries without descriptions/crops get no entry at all; an absent entry is
not the same thing as a measured low similarity once scores are standardized.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .blocks import (
    KIND_GALLERY_BBOX,
    KIND_GALLERY_IMAGE,
    KIND_GALLERY_TEXT,
    KIND_QUERY_IMAGE,
    EmbeddingBlock,
)
from .errors import DimMismatch, DomainMismatch, MalformedManifest

CHANNEL_FI2I = "fi2i"
CHANNEL_T2I = "t2i"
CHANNEL_BB2I = "bb2i"
CHANNEL_I2I = "i2i"
CHANNELS = (CHANNEL_FI2I, CHANNEL_T2I, CHANNEL_BB2I, CHANNEL_I2I)

DENSE = "dense"
TRUNCATED = "truncated"

SCORE_FMT = "{:.9g}"


@dataclass
class ScoreTable:
    """(query_id, gallery_id) -> raw or standardized similarity for one model."""

    model: str
    entries: dict[tuple[str, str], float]
    completeness: str = TRUNCATED
    meta: dict[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.completeness not in (DENSE, TRUNCATED):
            raise ValueError(f"bad completeness {self.completeness!r}")

    def __len__(self) -> int:
        return len(self.entries)

    def query_ids(self) -> set[str]:
        return {q for q, _ in self.entries}

    def gallery_ids(self) -> set[str]:
        return {g for _, g in self.entries}

    def sorted_items(self) -> list[tuple[tuple[str, str], float]]:
        """Entries in canonical (query_id, gallery_id) order."""
        return sorted(self.entries.items())

    def values_array(self) -> np.ndarray:
        """Scores in canonical entry order."""
        return np.array([v for _, v in self.sorted_items()], dtype=np.float64)


def write_table(table: ScoreTable, path: str | Path) -> None:
    header = f"#model={table.model}\tcompleteness={table.completeness}"
    for key in sorted(table.meta):
        header += f"\t{key}={table.meta[key]}"
    with Path(path).open("w", encoding="utf-8", newline="\n") as fh:
        fh.write(header + "\n")
        for (q, g), s in table.sorted_items():
            fh.write(f"{q}\t{g}\t{SCORE_FMT.format(s)}\n")


def read_table(path: str | Path) -> ScoreTable:
    p = Path(path)
    with p.open("r", encoding="utf-8", newline="\n") as fh:
        header = fh.readline().rstrip("\n")
        if not header.startswith("#"):
            raise MalformedManifest(f"{p}: missing score table header")
        meta: dict[str, str] = {}
        for part in header[1:].split("\t"):
            key, sep, value = part.partition("=")
            if not sep:
                raise MalformedManifest(f"{p}: bad header field {part!r}")
            meta[key] = value
        if "model" not in meta or "completeness" not in meta:
            raise MalformedManifest(f"{p}: header must declare model and completeness")
        model = meta.pop("model")
        completeness = meta.pop("completeness")
        entries: dict[tuple[str, str], float] = {}
        for lineno, line in enumerate(fh, start=2):
            line = line.rstrip("\n")
            if not line:
                continue
            fields = line.split("\t")
            if len(fields) != 3:
                raise MalformedManifest(f"{p}:{lineno}: expected 3 fields")
            key = (fields[0], fields[1])
            if key in entries:
                raise MalformedManifest(f"{p}:{lineno}: duplicate entry {key}")
            entries[key] = float(fields[2])
    return ScoreTable(model, entries, completeness, meta)


def _require_dims(a: EmbeddingBlock, b: EmbeddingBlock) -> None:
    if a.dim != b.dim:
        raise DimMismatch(f"blocks disagree on dim: {a.dim} vs {b.dim}")


def _require_kind(block: EmbeddingBlock, kind: str) -> None:
    if block.kind != kind:
        raise ValueError(f"expected a {kind} block, got {block.kind}")


def _dots(queries: EmbeddingBlock, rows: np.ndarray) -> np.ndarray:
    q64 = queries.vectors.astype(np.float64)
    return q64 @ rows.astype(np.float64).T


def score_fi2i(
    queries: EmbeddingBlock, gallery: EmbeddingBlock, model: str = CHANNEL_FI2I
) -> ScoreTable:
    """Full-image similarity: dense over every (query, gallery) pair."""
    _require_kind(queries, KIND_QUERY_IMAGE)
    _require_kind(gallery, KIND_GALLERY_IMAGE)
    _require_dims(queries, gallery)
    dots = _dots(queries, gallery.vectors)
    q_ids = queries.ids()
    g_ids = gallery.ids()
    entries = {
        (q_ids[i], g_ids[j]): float(dots[i, j])
        for i in range(len(q_ids))
        for j in range(len(g_ids))
    }
    return ScoreTable(model, entries, DENSE)


def _grouped_max(
    queries: EmbeddingBlock,
    parts: EmbeddingBlock,
    gallery_ids: Iterable[str] | None,
    model: str,
) -> ScoreTable:
    _require_dims(queries, parts)
    q_ids = queries.ids()
    if parts.rows == 0:
        return ScoreTable(model, {}, TRUNCATED)
    part_ids = np.array(parts.ids())
    uniq, inverse = np.unique(part_ids, return_inverse=True)
    order = np.argsort(inverse, kind="stable")
    starts = np.searchsorted(inverse[order], np.arange(uniq.shape[0]))
    dots = _dots(queries, parts.vectors[order])
    gmax = np.maximum.reduceat(dots, starts, axis=1)
    entries = {
        (q_ids[i], str(uniq[j])): float(gmax[i, j])
        for i in range(len(q_ids))
        for j in range(uniq.shape[0])
    }
    completeness = TRUNCATED
    if gallery_ids is not None:
        universe = set(gallery_ids)
        covered = set(uniq.tolist())
        if not covered <= universe:
            raise DomainMismatch(
                f"rows reference galleries outside the corpus: {sorted(covered - universe)[:3]}"
            )
        if covered == universe:
            completeness = DENSE
    return ScoreTable(model, entries, completeness)


def score_t2i(
    queries: EmbeddingBlock,
    texts: EmbeddingBlock,
    gallery_ids: Iterable[str] | None = None,
    model: str = CHANNEL_T2I,
) -> ScoreTable:
    """Query image vs garment-description embeddings, max per gallery image.

    The table is dense only when ``gallery_ids`` is supplied and every gallery
    image has at least one description; otherwise it is truncated.
    """
    _require_kind(queries, KIND_QUERY_IMAGE)
    _require_kind(texts, KIND_GALLERY_TEXT)
    return _grouped_max(queries, texts, gallery_ids, model)


def score_bb2i(
    queries: EmbeddingBlock,
    crops: EmbeddingBlock,
    gallery_ids: Iterable[str] | None = None,
    model: str = CHANNEL_BB2I,
) -> ScoreTable:
    """Query image vs detected-crop embeddings, max per gallery image."""
    _require_kind(queries, KIND_QUERY_IMAGE)
    _require_kind(crops, KIND_GALLERY_BBOX)
    return _grouped_max(queries, crops, gallery_ids, model)


def aggregate_i2i(
    fi2i: ScoreTable, bb2i: ScoreTable, model: str = CHANNEL_I2I
) -> ScoreTable:
    """Elementwise max of full-image and crop similarity; dense like fi2i.

    Pairs without a crop score fall back to the full-image score alone, so
    i2i(q, g) >= fi2i(q, g) always holds.
    """
    if fi2i.completeness != DENSE:
        raise ValueError("aggregate_i2i requires a dense fi2i table")
    extra = set(bb2i.entries) - set(fi2i.entries)
    if extra:
        raise DomainMismatch(
            f"bb2i scores pairs unknown to fi2i, e.g. {sorted(extra)[0]}"
        )
    entries = {
        key: max(s, bb2i.entries[key]) if key in bb2i.entries else s
        for key, s in fi2i.entries.items()
    }
    return ScoreTable(model, entries, DENSE)


def table_from_candidates(
    model: str, per_query: Mapping[str, Sequence[tuple[str, float]]]
) -> ScoreTable:
    """Flatten per-query candidate lists into a truncated ScoreTable."""
    entries: dict[tuple[str, str], float] = {}
    for q, cands in per_query.items():
        for g, s in cands:
            entries[(q, g)] = float(s)
    return ScoreTable(model, entries, TRUNCATED)
