"""Retrieval evaluation: recall@K, rank correlation, and annotation curves.

recall@K counts a query as a hit when any of its true gallery matches appears
in its top K. Rank correlation is Spearman with tie-averaged ranks. The
quality curve turns human match/no-match verdicts collected at probe ranks
into per-probe match fractions.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .channels import ScoreTable
from .errors import (
    ConstantVector,
    DuplicateVerdict,
    EmptyIntersection,
    LengthMismatch,
    MalformedManifest,
    MissingQuery,
    UnknownProbe,
)
from .fusion import rank_correlation_inputs
from .retrieval import CandidateList

VERDICT_MATCH = "match"
VERDICT_NO_MATCH = "no_match"
VERDICTS = (VERDICT_MATCH, VERDICT_NO_MATCH)


@dataclass(frozen=True)
class GroundTruth:
    """True (query_id, gallery_id) matches; a query may have several."""

    pairs: frozenset[tuple[str, str]]

    def by_query(self) -> dict[str, set[str]]:
        out: dict[str, set[str]] = {}
        for q, g in self.pairs:
            out.setdefault(q, set()).add(g)
        return out


def load_ground_truth(path: str | Path) -> GroundTruth:
    pairs = set()
    p = Path(path)
    with p.open("r", encoding="utf-8", newline="\n") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            fields = line.split("\t")
            if len(fields) != 2:
                raise MalformedManifest(f"{p}:{lineno}: expected query_id\\tgallery_id")
            pairs.add((fields[0], fields[1]))
    return GroundTruth(frozenset(pairs))


def save_ground_truth(truth: GroundTruth, path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8", newline="\n") as fh:
        for q, g in sorted(truth.pairs):
            fh.write(f"{q}\t{g}\n")


def recall_at_k(
    ranking: Mapping[str, Sequence[str]], truth: GroundTruth, k: int
) -> float:
    """Fraction of truth queries with a true match among their top k."""
    if k < 1:
        raise ValueError("k must be >= 1")
    per_query = truth.by_query()
    if not per_query:
        raise ValueError("ground truth is empty")
    hits = 0
    for q, true_galleries in per_query.items():
        if q not in ranking:
            raise MissingQuery(f"no ranking for truth query {q!r}")
        top = ranking[q][:k]
        if any(g in true_galleries for g in top):
            hits += 1
    return hits / len(per_query)


def ranking_from_table(table: ScoreTable) -> dict[str, list[str]]:
    """Per-query gallery ids ordered by (score desc, gallery_id asc)."""
    per_query: dict[str, list[tuple[str, float]]] = {}
    for (q, g), s in table.entries.items():
        per_query.setdefault(q, []).append((g, s))
    out: dict[str, list[str]] = {}
    for q, cands in per_query.items():
        cands.sort(key=lambda e: (-e[1], e[0]))
        out[q] = [g for g, _ in cands]
    return out


def ranking_from_candidates(lists: Sequence[CandidateList]) -> dict[str, list[str]]:
    out: dict[str, list[str]] = {}
    for lst in lists:
        if lst.query_id in out:
            raise ValueError(f"two candidate lists for query {lst.query_id!r}")
        out[lst.query_id] = [g for g, _ in lst.entries]
    return out


# --- rank correlation ---------------------------------------------------------


def average_ranks(x: np.ndarray) -> np.ndarray:
    """1-based ranks with ties replaced by the group average."""
    x = np.asarray(x, dtype=np.float64)
    _, inverse, counts = np.unique(x, return_inverse=True, return_counts=True)
    cum = np.concatenate(([0], np.cumsum(counts)))
    avg = cum[:-1] + (counts + 1) / 2.0
    return avg[inverse]


def spearman(x: np.ndarray, y: np.ndarray) -> float:
    """Pearson correlation of tie-averaged ranks of x and y."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise LengthMismatch(f"shapes {x.shape} and {y.shape} differ")
    if x.shape[0] < 2:
        raise ValueError("need at least 2 observations")
    rx = average_ranks(x)
    ry = average_ranks(y)
    dx = rx - rx.mean()
    dy = ry - ry.mean()
    vx = float(dx @ dx)
    vy = float(dy @ dy)
    if vx == 0.0 or vy == 0.0:
        raise ConstantVector("an input has zero rank variance")
    return float((dx @ dy) / np.sqrt(vx * vy))


def correlation_matrix(
    tables: Sequence[ScoreTable], sample: int | None, seed: int
) -> np.ndarray:
    """Pairwise Spearman over a shared seeded sample of common pairs."""
    if len(tables) < 2:
        raise ValueError("need at least two tables")
    _, vectors = rank_correlation_inputs(tables, sample, seed)
    n = len(tables)
    mat = np.eye(n)
    for i in range(n):
        for j in range(i + 1, n):
            rho = spearman(vectors[i], vectors[j])
            mat[i, j] = rho
            mat[j, i] = rho
    return mat


def format_correlation_heatmap(models: Sequence[str], matrix: np.ndarray) -> str:
    """Text heatmap, values rounded to two decimals."""
    if matrix.shape != (len(models), len(models)):
        raise ValueError("matrix shape does not match model count")
    name_w = max(len(m) for m in models)
    cell_w = max(5, *(len(m) for m in models))
    lines = [" " * name_w + "".join(f"  {m:>{cell_w}}" for m in models)]
    for i, m in enumerate(models):
        cells = "".join(f"  {matrix[i, j]:>{cell_w}.2f}" for j in range(len(models)))
        lines.append(f"{m:<{name_w}}{cells}")
    return "\n".join(lines) + "\n"


# --- annotation records and the quality curve ----------------------------------


@dataclass(frozen=True)
class AnnotationRecord:
    query_id: str
    gallery_id: str
    probe_index: int
    verdict: str
    annotator: str
    timestamp: str

    def __post_init__(self) -> None:
        if self.verdict not in VERDICTS:
            raise ValueError(f"verdict must be one of {VERDICTS}, got {self.verdict!r}")


def load_annotations(path: str | Path) -> list[AnnotationRecord]:
    """Parse annotation lines: probe\\tquery\\tgallery\\tverdict\\tannotator\\ttimestamp."""
    p = Path(path)
    out: list[AnnotationRecord] = []
    seen: set[tuple[str, str, str]] = set()
    with p.open("r", encoding="utf-8", newline="\n") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            fields = line.split("\t")
            if len(fields) != 6:
                raise MalformedManifest(f"{p}:{lineno}: expected 6 fields")
            try:
                rec = AnnotationRecord(
                    query_id=fields[1],
                    gallery_id=fields[2],
                    probe_index=int(fields[0]),
                    verdict=fields[3],
                    annotator=fields[4],
                    timestamp=fields[5],
                )
            except ValueError as exc:
                raise MalformedManifest(f"{p}:{lineno}: {exc}") from exc
            key = (rec.query_id, rec.gallery_id, rec.annotator)
            if key in seen:
                raise DuplicateVerdict(f"{p}:{lineno}: second verdict for {key}")
            seen.add(key)
            out.append(rec)
    return out


def save_annotations(records: Sequence[AnnotationRecord], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8", newline="\n") as fh:
        for r in records:
            fh.write(
                f"{r.probe_index}\t{r.query_id}\t{r.gallery_id}\t{r.verdict}"
                f"\t{r.annotator}\t{r.timestamp}\n"
            )


@dataclass(frozen=True)
class CurvePoint:
    probe_index: int
    match_fraction: float
    total: int


def quality_curve(
    annotations: Sequence[AnnotationRecord], probes: Sequence[int]
) -> list[CurvePoint]:
    """Match fraction per probe; probes with no annotations are omitted."""
    probe_set = set(probes)
    matches: dict[int, int] = {}
    totals: dict[int, int] = {}
    for rec in annotations:
        if rec.probe_index not in probe_set:
            raise UnknownProbe(f"annotation at probe {rec.probe_index} not in {sorted(probe_set)}")
        totals[rec.probe_index] = totals.get(rec.probe_index, 0) + 1
        if rec.verdict == VERDICT_MATCH:
            matches[rec.probe_index] = matches.get(rec.probe_index, 0) + 1
    return [
        CurvePoint(p, matches.get(p, 0) / totals[p], totals[p])
        for p in probes
        if p in totals
    ]
