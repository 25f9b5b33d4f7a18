"""Corpus manifest reading plus description/box file writing.

Formats match the retrieval engine's documented interfaces:
  manifest      id \\t role \\t brand \\t image_uri \\t source
  descriptions  gallery_id \\t index \\t text        (# lines are comments)
  boxes         gallery_id \\t description_index \\t x0 \\t y0 \\t x1 \\t y1 \\t confidence
"""

from __future__ import annotations

import os
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping


@dataclass(frozen=True)
class CorpusRecord:
    id: str
    role: str
    brand: str
    image_uri: str
    source: str


@dataclass(frozen=True)
class Description:
    gallery_id: str
    index: int
    text: str


@dataclass(frozen=True)
class Box:
    gallery_id: str
    description_index: int
    x0: float
    y0: float
    x1: float
    y1: float
    confidence: float


def read_manifest(path: str | Path, role: str | None = None) -> list[CorpusRecord]:
    out = []
    with Path(path).open("r", encoding="utf-8", newline="\n") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            fields = line.split("\t")
            if len(fields) != 5:
                raise ValueError(f"{path}:{lineno}: expected 5 fields")
            rec = CorpusRecord(*fields)
            if role is not None and rec.role != role:
                raise ValueError(
                    f"{path}:{lineno}: record role {rec.role!r}, expected {role!r}"
                )
            out.append(rec)
    return out


def _atomic_write_text(path: str | Path, text: str) -> None:
    path = Path(path)
    fd, tmp_name = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp_name, path)
    except BaseException:
        if os.path.exists(tmp_name):
            os.unlink(tmp_name)
        raise


def _header(task: str, meta: Mapping[str, object]) -> str:
    pairs = "\t".join(f"{k}={meta[k]}" for k in sorted(meta))
    return f"#task={task}" + (f"\t{pairs}" if pairs else "") + "\n"


def write_descriptions(
    descriptions: Iterable[Description], path: str | Path, meta: Mapping[str, object]
) -> None:
    body = "".join(
        f"{d.gallery_id}\t{d.index}\t{d.text}\n" for d in descriptions
    )
    _atomic_write_text(path, _header("describe", meta) + body)


def read_descriptions(path: str | Path) -> list[Description]:
    out = []
    with Path(path).open("r", encoding="utf-8", newline="\n") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            gallery_id, index, text = line.split("\t")
            out.append(Description(gallery_id, int(index), text))
    return out


def write_boxes(boxes: Iterable[Box], path: str | Path, meta: Mapping[str, object]) -> None:
    body = "".join(
        f"{b.gallery_id}\t{b.description_index}\t{b.x0:.9g}\t{b.y0:.9g}"
        f"\t{b.x1:.9g}\t{b.y1:.9g}\t{b.confidence:.9g}\n"
        for b in boxes
    )
    _atomic_write_text(path, _header("detect", meta) + body)


def read_boxes(path: str | Path) -> list[Box]:
    out = []
    with Path(path).open("r", encoding="utf-8", newline="\n") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            f = line.split("\t")
            out.append(
                Box(f[0], int(f[1]), float(f[2]), float(f[3]), float(f[4]),
                    float(f[5]), float(f[6]))
            )
    return out
