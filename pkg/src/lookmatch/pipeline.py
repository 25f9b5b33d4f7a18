"""End-to-end orchestration: score, calibrate, standardize, retrieve, fuse, curate.

Every stage writes its outputs before the next stage starts, so stage outputs
double as checkpoints (`resume=True` reuses them). Re-running with identical
config and inputs reproduces every artifact byte for byte, regardless of the
worker count.
"""

from __future__ import annotations

import logging
from contextlib import contextmanager
from pathlib import Path

from .blocks import EmbeddingBlock, read_block
from .channels import (
    CHANNEL_BB2I,
    CHANNEL_FI2I,
    CHANNEL_I2I,
    CHANNEL_T2I,
    ScoreTable,
    aggregate_i2i,
    read_table,
    score_bb2i,
    score_fi2i,
    score_t2i,
    write_table,
)
from .config import RunConfig
from .corpus import ImageRecord, load_corpus
from .curation import build_manifest, form_pairs, write_manifest
from .errors import ConfigError, LookmatchError, MalformedKeys
from .fusion import MODE_SECOND_HIGHEST, fuse_mean, fuse_second_highest
from .retrieval import BrandFilter, CandidateList, prefilter, truncate_per_query, write_candidates
from .standardize import calibrate, read_stats, standardize, write_stats

log = logging.getLogger("lookmatch.pipeline")

CHANNELS = (CHANNEL_FI2I, CHANNEL_T2I, CHANNEL_BB2I, CHANNEL_I2I)


@contextmanager
def _stage(name: str):
    try:
        yield
    except LookmatchError as exc:
        raise type(exc)(f"[stage {name}] {exc}") from exc


def _check_block_keys(block: EmbeddingBlock, ids: set[str], label: str) -> None:
    for rec_id, _ in block.row_keys:
        if rec_id not in ids:
            raise MalformedKeys(f"{label}: row key {rec_id!r} not in corpus")


def _compute_channel_tables(
    blocks: dict[str, EmbeddingBlock],
    needed: set[str],
) -> dict[str, ScoreTable]:
    queries = blocks["query_image"]
    tables: dict[str, ScoreTable] = {}
    gallery_ids = None
    if "gallery_image" in blocks:
        gallery_ids = blocks["gallery_image"].ids()
    if CHANNEL_FI2I in needed or CHANNEL_I2I in needed:
        tables[CHANNEL_FI2I] = score_fi2i(queries, blocks["gallery_image"])
    if CHANNEL_T2I in needed:
        tables[CHANNEL_T2I] = score_t2i(queries, blocks["gallery_text"], gallery_ids)
    if CHANNEL_BB2I in needed or CHANNEL_I2I in needed:
        tables[CHANNEL_BB2I] = score_bb2i(queries, blocks["gallery_bbox"], gallery_ids)
    if CHANNEL_I2I in needed:
        tables[CHANNEL_I2I] = aggregate_i2i(tables[CHANNEL_FI2I], tables[CHANNEL_BB2I])
    return tables


def _prefilter_map(
    cfg: RunConfig,
    query_records: list[ImageRecord],
    gallery_records: list[ImageRecord],
) -> dict[str, set[str]] | None:
    if not cfg.brand_filter_enabled:
        return None
    filt = BrandFilter(threshold=cfg.brand_threshold)
    by_brand: dict[str, list[ImageRecord]] = {}
    for rec in query_records:
        by_brand.setdefault(filt.canon(rec.brand), []).append(rec)
    allowed: dict[str, set[str]] = {}
    for brand in sorted(by_brand):
        group = by_brand[brand]
        ids = prefilter(group[0], gallery_records, filt)
        for rec in group:
            allowed[rec.id] = ids
    return allowed


def _candidate_lists(table: ScoreTable, k: int) -> list[CandidateList]:
    per_query: dict[str, list[tuple[str, float]]] = {}
    for (q, g), s in table.entries.items():
        per_query.setdefault(q, []).append((g, s))
    out = []
    for q in sorted(per_query):
        cands = sorted(per_query[q], key=lambda e: (-e[1], e[0]))
        out.append(CandidateList(q, table.model, tuple(cands), k))
    return out


def run_pipeline(cfg: RunConfig, resume: bool = False) -> dict[str, Path]:
    """Execute every stage and return the artifact paths.

    Raises the first stage error annotated with the stage name; with
    ``resume=True`` stages whose outputs already exist are loaded back rather
    than recomputed.
    """
    cfg.validate()
    out_dir = Path(cfg.output_dir)
    (out_dir / "candidates").mkdir(parents=True, exist_ok=True)
    meta = cfg.meta()
    members = cfg.ensemble.members
    artifacts: dict[str, Path] = {}

    with _stage("load"):
        query_records = load_corpus(cfg.queries_manifest, "query")
        gallery_records = load_corpus(cfg.gallery_manifest, "gallery")
        query_ids = {r.id for r in query_records}
        gallery_ids = {r.id for r in gallery_records}
        blocks: dict[str, EmbeddingBlock] = {}
        for kind, path in cfg.blocks.items():
            block = read_block(path)
            if block.kind != kind:
                raise ConfigError(f"block {path} has kind {block.kind}, config says {kind}")
            _check_block_keys(
                block, query_ids if kind == "query_image" else gallery_ids, kind
            )
            blocks[kind] = block
        dims = {b.dim for b in blocks.values()}
        if len(dims) > 1:
            raise ConfigError(f"blocks disagree on dim: {sorted(dims)}")

    raw_paths = {m: out_dir / f"raw_{m}.tsv" for m in members}
    with _stage("score"):
        if resume and all(p.is_file() for p in raw_paths.values()):
            raw_tables = {m: read_table(p) for m, p in raw_paths.items()}
            log.info("score: reusing %d raw tables", len(raw_tables))
        else:
            needed = {m for m in members if m in CHANNELS}
            raw_tables = {
                m: t for m, t in _compute_channel_tables(blocks, needed).items()
                if m in members
            }
            for model, path in cfg.external_scores.items():
                if model in members:
                    raw_tables[model] = read_table(path)
            for m in members:
                raw_tables[m].meta = dict(meta)
                write_table(raw_tables[m], raw_paths[m])
            log.info("score: wrote %d raw tables", len(raw_tables))
    for m, p in raw_paths.items():
        artifacts[f"raw_{m}"] = p

    stats_paths = {m: out_dir / f"stats_{m}.tsv" for m in members}
    with _stage("calibrate"):
        if resume and all(p.is_file() for p in stats_paths.values()):
            stats = {m: read_stats(p) for m, p in stats_paths.items()}
        else:
            stats = {
                m: calibrate(raw_tables[m], cfg.calibration_sample, cfg.calibration_seed)
                for m in members
            }
            for m in members:
                write_stats(stats[m], stats_paths[m], meta)
        log.info("calibrate: %d models", len(stats))
    for m, p in stats_paths.items():
        artifacts[f"stats_{m}"] = p

    std_paths = {m: out_dir / f"std_{m}.tsv" for m in members}
    with _stage("standardize"):
        if resume and all(p.is_file() for p in std_paths.values()):
            std_tables = {m: read_table(p) for m, p in std_paths.items()}
        else:
            std_tables = {m: standardize(raw_tables[m], stats[m]) for m in members}
            for m in members:
                std_tables[m].meta = dict(meta)
                write_table(std_tables[m], std_paths[m])
        log.info("standardize: %d models", len(std_tables))
    for m, p in std_paths.items():
        artifacts[f"std_{m}"] = p

    cand_paths = {m: out_dir / "candidates" / f"{m}.tsv" for m in members}
    if cfg.ensemble.mode == MODE_SECOND_HIGHEST:
        with _stage("retrieve"):
            allowed = _prefilter_map(cfg, query_records, gallery_records)
            truncated = {
                m: truncate_per_query(std_tables[m], cfg.k, allowed) for m in members
            }
            for m in members:
                write_candidates(_candidate_lists(truncated[m], cfg.k), cand_paths[m], meta)
            log.info("retrieve: top-%d candidates per query, %d models", cfg.k, len(members))
        for m, p in cand_paths.items():
            artifacts[f"candidates_{m}"] = p
        fusion_inputs = [truncated[m] for m in members]
    else:
        fusion_inputs = [std_tables[m] for m in members]

    fused_path = out_dir / "fused.tsv"
    with _stage("fuse"):
        if cfg.ensemble.mode == MODE_SECOND_HIGHEST:
            fused = fuse_second_highest(fusion_inputs, cfg.ensemble)
        else:
            fused = fuse_mean(fusion_inputs, cfg.ensemble)
        fused.meta = dict(meta)
        write_table(fused, fused_path)
        log.info("fuse: %s over %d pairs", cfg.ensemble.mode, len(fused))
    artifacts["fused"] = fused_path

    manifest_path = out_dir / "manifest.tsv"
    with _stage("curate"):
        manifest = build_manifest(form_pairs(fused), cfg.cutoffs)
        write_manifest(manifest, manifest_path, meta)
        log.info("curate: %d pairs ranked", len(manifest))
    artifacts["manifest"] = manifest_path

    return artifacts
