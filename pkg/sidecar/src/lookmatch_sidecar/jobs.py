"""Task runners: describe, detect, and the three embedding jobs.

Every task reads corpus-format inputs and writes engine-format outputs
atomically. Mock mode needs no network and is bit-deterministic given
(seed, corpus); live mode drives a model endpoint through EndpointClient.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .blockio import write_block_atomic
from .corpusio import (
    Box,
    Description,
    read_boxes,
    read_descriptions,
    read_manifest,
    write_boxes,
    write_descriptions,
)
from .live import EndpointClient
from .mock import mock_box, mock_descriptions, mock_vector

ROLE_KINDS = {"query": "query_image", "gallery": "gallery_image"}

DEFAULT_DIM = 64
DEFAULT_MAX_WORDS = 16
DEFAULT_CONFIDENCE = 0.25


@dataclass
class SidecarJob:
    output: str
    seed: int = 0
    dim: int = DEFAULT_DIM
    mock: bool = True
    model: str = "mock"
    max_words: int = DEFAULT_MAX_WORDS
    confidence_threshold: float = DEFAULT_CONFIDENCE
    client: EndpointClient | None = field(default=None, repr=False)

    def meta(self) -> dict:
        return {
            "mode": "mock" if self.mock else "live",
            "model": self.model,
            "seed": self.seed,
        }

    def live_client(self) -> EndpointClient:
        if self.client is None:
            self.client = EndpointClient()
        return self.client


def _normalize(vec: np.ndarray) -> np.ndarray:
    v = np.asarray(vec, dtype=np.float64)
    norm = float(np.linalg.norm(v))
    if norm < 1e-12:
        raise ValueError("endpoint returned a zero vector")
    return (v / norm).astype(np.float32)


def run_describe(job: SidecarJob, corpus_path: str | Path) -> list[Description]:
    gallery = read_manifest(corpus_path, role="gallery")
    descriptions: list[Description] = []
    if job.mock:
        for rec in gallery:
            descriptions.extend(mock_descriptions(rec.id, job.seed, job.max_words))
    else:
        items = [{"id": rec.id, "uri": rec.image_uri} for rec in gallery]
        results = job.live_client().run("describe", job.model, items)
        for rec, result in zip(gallery, results):
            for index, text in enumerate(result["descriptions"]):
                words = str(text).split()
                descriptions.append(
                    Description(rec.id, index, " ".join(words[: job.max_words]))
                )
    write_descriptions(descriptions, job.output, job.meta())
    return descriptions


def run_detect(
    job: SidecarJob, corpus_path: str | Path, descriptions_path: str | Path
) -> list[Box]:
    gallery = {rec.id: rec for rec in read_manifest(corpus_path, role="gallery")}
    descriptions = read_descriptions(descriptions_path)
    for d in descriptions:
        if d.gallery_id not in gallery:
            raise ValueError(f"description references unknown gallery id {d.gallery_id!r}")
    boxes: list[Box] = []
    if job.mock:
        for d in descriptions:
            box = mock_box(d, job.seed)
            if box.confidence >= job.confidence_threshold:
                boxes.append(box)
    else:
        items = [
            {
                "id": d.gallery_id,
                "uri": gallery[d.gallery_id].image_uri,
                "description": d.text,
                "description_index": d.index,
            }
            for d in descriptions
        ]
        results = job.live_client().run("detect", job.model, items)
        for d, result in zip(descriptions, results):
            for x0, y0, x1, y1, confidence in result["boxes"]:
                if confidence >= job.confidence_threshold:
                    boxes.append(Box(d.gallery_id, d.index, x0, y0, x1, y1, confidence))
    write_boxes(boxes, job.output, job.meta())
    return boxes


def run_embed_images(job: SidecarJob, corpus_path: str | Path, role: str) -> int:
    if role not in ROLE_KINDS:
        raise ValueError(f"role must be query or gallery, got {role!r}")
    kind = ROLE_KINDS[role]
    records = read_manifest(corpus_path, role=role)
    keys = [(rec.id, None) for rec in records]
    if job.mock:
        rows = [mock_vector(kind, rec.id, None, job.seed, job.dim) for rec in records]
    else:
        items = [{"id": rec.id, "uri": rec.image_uri} for rec in records]
        results = job.live_client().run("embed_image", job.model, items)
        rows = [_normalize(r["vector"]) for r in results]
    matrix = np.stack(rows) if rows else np.empty((0, job.dim), np.float32)
    write_block_atomic(kind, matrix, keys, job.output)
    return len(keys)


def run_embed_texts(job: SidecarJob, descriptions_path: str | Path) -> int:
    descriptions = read_descriptions(descriptions_path)
    keys = [(d.gallery_id, d.index) for d in descriptions]
    if job.mock:
        rows = [
            mock_vector("gallery_text", d.gallery_id, d.index, job.seed, job.dim)
            for d in descriptions
        ]
    else:
        items = [{"id": d.gallery_id, "index": d.index, "text": d.text} for d in descriptions]
        results = job.live_client().run("embed_text", job.model, items)
        rows = [_normalize(r["vector"]) for r in results]
    matrix = np.stack(rows) if rows else np.empty((0, job.dim), np.float32)
    write_block_atomic("gallery_text", matrix, keys, job.output)
    return len(keys)


def run_embed_crops(
    job: SidecarJob, corpus_path: str | Path, boxes_path: str | Path
) -> int:
    gallery = {rec.id: rec for rec in read_manifest(corpus_path, role="gallery")}
    boxes = read_boxes(boxes_path)
    # ordinal = position of the box within its gallery image, in file order
    counters: dict[str, int] = {}
    keys = []
    for b in boxes:
        ordinal = counters.get(b.gallery_id, 0)
        counters[b.gallery_id] = ordinal + 1
        keys.append((b.gallery_id, ordinal))
    if job.mock:
        rows = [
            mock_vector("gallery_bbox", gid, ordinal, job.seed, job.dim)
            for gid, ordinal in keys
        ]
    else:
        items = [
            {
                "id": b.gallery_id,
                "uri": gallery[b.gallery_id].image_uri,
                "box": [b.x0, b.y0, b.x1, b.y1],
            }
            for b in boxes
        ]
        results = job.live_client().run("embed_crop", job.model, items)
        rows = [_normalize(r["vector"]) for r in results]
    matrix = np.stack(rows) if rows else np.empty((0, job.dim), np.float32)
    write_block_atomic("gallery_bbox", matrix, keys, job.output)
    return len(keys)


def run_mock_all(
    out_dir: str | Path,
    queries_manifest: str | Path,
    gallery_manifest: str | Path,
    seed: int,
    dim: int,
) -> dict[str, str]:
    """Every mock artifact the engine needs, in one pass."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "descriptions": str(out / "descriptions.tsv"),
        "boxes": str(out / "boxes.tsv"),
        "query_image": str(out / "query_image.blk"),
        "gallery_image": str(out / "gallery_image.blk"),
        "gallery_text": str(out / "gallery_text.blk"),
        "gallery_bbox": str(out / "gallery_bbox.blk"),
    }
    job = SidecarJob(output=paths["descriptions"], seed=seed, dim=dim, mock=True)
    run_describe(job, gallery_manifest)
    job.output = paths["boxes"]
    run_detect(job, gallery_manifest, paths["descriptions"])
    job.output = paths["query_image"]
    run_embed_images(job, queries_manifest, "query")
    job.output = paths["gallery_image"]
    run_embed_images(job, gallery_manifest, "gallery")
    job.output = paths["gallery_text"]
    run_embed_texts(job, paths["descriptions"])
    job.output = paths["gallery_bbox"]
    run_embed_crops(job, gallery_manifest, paths["boxes"])
    return paths
