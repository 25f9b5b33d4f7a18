"""Pair formation, ranked manifests with quality tiers, and probe sampling.

Each query contributes at most one pair: its best-scoring gallery image.
Sorting all pairs by fused score and cutting rank prefixes yields nested
quality tiers (high within medium within low; the remainder stays
unreleased). Probe sampling draws pairs near chosen rank positions for human
annotation.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .channels import ScoreTable
from .corpus import ImageRecord
from .errors import BadCutoffs, MalformedManifest

TIER_HIGH = "high"
TIER_MEDIUM = "medium"
TIER_LOW = "low"
TIER_UNRELEASED = "unreleased"
TIERS = (TIER_HIGH, TIER_MEDIUM, TIER_LOW, TIER_UNRELEASED)

DEFAULT_CUTOFFS = (10_000, 50_000, 300_000)

# half-width of the rank window pairs are drawn from around a probe index
PROBE_WINDOW = 100

DEFAULT_PROBES = (100, 2_000, 8_000, 32_000, 128_000, 512_000, 2_048_000)
DEFAULT_PER_PROBE = 200

SCORE_FMT = "{:.9g}"


@dataclass(frozen=True)
class PairRow:
    rank: int  # 1-based
    query_id: str
    gallery_id: str
    fused_score: float
    tier: str


@dataclass(frozen=True)
class PairManifest:
    rows: tuple[PairRow, ...]
    cutoffs: tuple[int, int, int]

    def __len__(self) -> int:
        return len(self.rows)

    def tier_rows(self, tier: str) -> list[PairRow]:
        if tier not in TIERS:
            raise ValueError(f"unknown tier {tier!r}")
        return [r for r in self.rows if r.tier == tier]

    def prefix(self, n: int) -> list[PairRow]:
        return list(self.rows[:n])


def form_pairs(fused: ScoreTable) -> list[tuple[str, str, float]]:
    """Best gallery per query (ties by ascending gallery_id), sorted by query."""
    if not fused.entries:
        raise ValueError("fused table is empty")
    best: dict[str, tuple[str, float]] = {}
    for (q, g), s in fused.entries.items():
        cur = best.get(q)
        if cur is None or s > cur[1] or (s == cur[1] and g < cur[0]):
            best[q] = (g, s)
    return [(q, g, s) for q, (g, s) in sorted(best.items())]


def _tier_for(rank: int, cutoffs: tuple[int, int, int]) -> str:
    if rank <= cutoffs[0]:
        return TIER_HIGH
    if rank <= cutoffs[1]:
        return TIER_MEDIUM
    if rank <= cutoffs[2]:
        return TIER_LOW
    return TIER_UNRELEASED


def build_manifest(
    pairs: Sequence[tuple[str, str, float]],
    cutoffs: tuple[int, int, int] = DEFAULT_CUTOFFS,
) -> PairManifest:
    """Rank pairs by score (ties by query_id) and label tier prefixes."""
    if not (0 < cutoffs[0] < cutoffs[1] < cutoffs[2]):
        raise BadCutoffs(f"cutoffs must be strictly increasing, got {cutoffs}")
    queries = [q for q, _, _ in pairs]
    if len(set(queries)) != len(queries):
        raise ValueError("a query appears in more than one pair")
    ordered = sorted(pairs, key=lambda p: (-p[2], p[0]))
    rows = tuple(
        PairRow(i + 1, q, g, s, _tier_for(i + 1, cutoffs))
        for i, (q, g, s) in enumerate(ordered)
    )
    return PairManifest(rows, tuple(cutoffs))


@dataclass
class SampleDraw:
    """Probe sampling result plus what had to be skipped or came up short."""

    samples: list[tuple[int, PairRow]]
    skipped_probes: list[int]
    short_probes: dict[int, int]  # probe -> available window size < per_probe


def draw_annotation_samples(
    manifest: PairManifest,
    probes: Sequence[int],
    per_probe: int,
    seed: int,
) -> SampleDraw:
    """Sample pairs without replacement from the rank window around each probe.

    The window is [probe - 100, probe + 100) clipped to valid ranks. Probes
    whose window is empty (beyond the manifest) are skipped and reported;
    windows smaller than per_probe are returned whole and flagged. Each probe
    draws from its own seed stream, so one probe's outcome never shifts
    another's.
    """
    if per_probe < 1:
        raise ValueError("per_probe must be >= 1")
    n = len(manifest)
    samples: list[tuple[int, PairRow]] = []
    skipped: list[int] = []
    short: dict[int, int] = {}
    for probe in probes:
        lo = max(1, probe - PROBE_WINDOW)
        hi = min(n + 1, probe + PROBE_WINDOW)
        if lo >= hi:
            skipped.append(probe)
            continue
        window = hi - lo
        take = min(per_probe, window)
        if take < per_probe:
            short[probe] = window
        rng = np.random.default_rng([seed, probe])
        picks = rng.choice(window, size=take, replace=False)
        for off in np.sort(picks):
            samples.append((probe, manifest.rows[lo - 1 + int(off)]))
    return SampleDraw(samples, skipped, short)


# --- file formats ---------------------------------------------------------------


def write_manifest(
    manifest: PairManifest, path: str | Path, meta: Mapping[str, str] | None = None
) -> None:
    header = "#cutoffs=" + ",".join(str(c) for c in manifest.cutoffs)
    if meta:
        header += "".join(f"\t{k}={meta[k]}" for k in sorted(meta))
    with Path(path).open("w", encoding="utf-8", newline="\n") as fh:
        fh.write(header + "\n")
        for r in manifest.rows:
            fh.write(
                f"{r.rank}\t{r.query_id}\t{r.gallery_id}"
                f"\t{SCORE_FMT.format(r.fused_score)}\t{r.tier}\n"
            )


def read_manifest(path: str | Path) -> PairManifest:
    p = Path(path)
    with p.open("r", encoding="utf-8", newline="\n") as fh:
        header = fh.readline().rstrip("\n")
        if not header.startswith("#cutoffs="):
            raise MalformedManifest(f"{p}: missing manifest header")
        cut_field = header[1:].split("\t")[0].partition("=")[2]
        cutoffs = tuple(int(c) for c in cut_field.split(","))
        if len(cutoffs) != 3:
            raise MalformedManifest(f"{p}: expected 3 cutoffs")
        rows: list[PairRow] = []
        for lineno, line in enumerate(fh, start=2):
            line = line.rstrip("\n")
            if not line:
                continue
            fields = line.split("\t")
            if len(fields) != 5:
                raise MalformedManifest(f"{p}:{lineno}: expected 5 fields")
            row = PairRow(int(fields[0]), fields[1], fields[2], float(fields[3]), fields[4])
            if row.tier not in TIERS:
                raise MalformedManifest(f"{p}:{lineno}: unknown tier {row.tier!r}")
            if row.rank != len(rows) + 1:
                raise MalformedManifest(f"{p}:{lineno}: rank {row.rank} out of order")
            rows.append(row)
    return PairManifest(tuple(rows), cutoffs)  # type: ignore[arg-type]


def write_annotation_tasks(
    draw: SampleDraw,
    queries: Mapping[str, ImageRecord],
    gallery: Mapping[str, ImageRecord],
    path: str | Path,
) -> None:
    """Emit the task lines the review tool presents to the annotator."""
    with Path(path).open("w", encoding="utf-8", newline="\n") as fh:
        for probe, row in draw.samples:
            q = queries[row.query_id]
            g = gallery[row.gallery_id]
            fh.write(
                f"{probe}\t{row.query_id}\t{row.gallery_id}"
                f"\t{q.image_uri}\t{g.image_uri}\n"
            )


def read_annotation_tasks(path: str | Path) -> list[tuple[int, str, str, str, str]]:
    p = Path(path)
    out = []
    with p.open("r", encoding="utf-8", newline="\n") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            fields = line.split("\t")
            if len(fields) != 5:
                raise MalformedManifest(f"{p}:{lineno}: expected 5 fields")
            out.append((int(fields[0]), fields[1], fields[2], fields[3], fields[4]))
    return out
