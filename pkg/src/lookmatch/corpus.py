"""Corpus records, manifests, and link validation.

A corpus manifest is UTF-8 text, one record per line, five tab-separated
fields in order: id, role, brand, image_uri, source. Tabs are not permitted
inside fields and lines end with ``\\n``. Loaded corpora are immutable and
safe to share across readers.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .errors import DuplicateId, MalformedManifest

ROLE_QUERY = "query"
ROLE_GALLERY = "gallery"
ROLES = (ROLE_QUERY, ROLE_GALLERY)

MANIFEST_FIELDS = 5


@dataclass(frozen=True)
class ImageRecord:
    """One corpus entry; role is fixed at ingestion."""

    id: str
    role: str
    brand: str
    image_uri: str
    source: str


@dataclass(frozen=True)
class GarmentDescription:
    """A short garment phrase attached to a gallery image."""

    gallery_id: str
    index: int
    text: str


@dataclass(frozen=True)
class BoundingBox:
    """Detected garment region, linked to the description that prompted it."""

    gallery_id: str
    description_index: int
    x0: float
    y0: float
    x1: float
    y1: float
    confidence: float

    def __post_init__(self) -> None:
        if not (self.x0 < self.x1 and self.y0 < self.y1):
            raise ValueError(f"degenerate box for {self.gallery_id}: "
                             f"({self.x0},{self.y0})-({self.x1},{self.y1})")
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence {self.confidence} outside [0,1]")


def load_corpus(manifest_path: str | Path, role: str) -> list[ImageRecord]:
    """Load all records of ``role`` from a manifest file.

    Raises MalformedManifest for any line that does not follow the format or
    does not carry the requested role, and DuplicateId when two records share
    an id.
    """
    if role not in ROLES:
        raise ValueError(f"unknown role {role!r}")
    path = Path(manifest_path)
    records: list[ImageRecord] = []
    seen: set[str] = set()
    with path.open("r", encoding="utf-8", newline="\n") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                raise MalformedManifest(f"{path}:{lineno}: empty line")
            fields = line.split("\t")
            if len(fields) != MANIFEST_FIELDS:
                raise MalformedManifest(
                    f"{path}:{lineno}: expected {MANIFEST_FIELDS} fields, got {len(fields)}"
                )
            rec_id, rec_role, brand, image_uri, source = fields
            if not rec_id:
                raise MalformedManifest(f"{path}:{lineno}: empty id")
            if rec_role not in ROLES:
                raise MalformedManifest(f"{path}:{lineno}: unknown role {rec_role!r}")
            if rec_role != role:
                raise MalformedManifest(
                    f"{path}:{lineno}: record role {rec_role!r} does not match requested {role!r}"
                )
            if rec_id in seen:
                raise DuplicateId(f"{path}:{lineno}: duplicate id {rec_id!r}")
            seen.add(rec_id)
            records.append(ImageRecord(rec_id, rec_role, brand, image_uri, source))
    return records


def save_corpus(records: Iterable[ImageRecord], manifest_path: str | Path) -> None:
    """Write records in manifest format (inverse of load_corpus)."""
    path = Path(manifest_path)
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        for rec in records:
            for field in (rec.id, rec.role, rec.brand, rec.image_uri, rec.source):
                if "\t" in field or "\n" in field:
                    raise MalformedManifest(
                        f"field {field!r} of record {rec.id!r} contains a separator"
                    )
            fh.write(f"{rec.id}\t{rec.role}\t{rec.brand}\t{rec.image_uri}\t{rec.source}\n")


# --- garment descriptions and bounding boxes --------------------------------
#
# Sidecar outputs use the same line-delimited tab-separated convention:
#   descriptions:  gallery_id <TAB> index <TAB> text
#   boxes:         gallery_id <TAB> description_index <TAB> x0 y0 x1 y1 <TAB>... <TAB> confidence


def load_descriptions(path: str | Path) -> list[GarmentDescription]:
    out: list[GarmentDescription] = []
    seen: set[tuple[str, int]] = set()
    p = Path(path)
    with p.open("r", encoding="utf-8", newline="\n") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            fields = line.split("\t")
            if len(fields) != 3:
                raise MalformedManifest(f"{p}:{lineno}: expected 3 fields")
            gallery_id, index_s, text = fields
            if not text:
                raise MalformedManifest(f"{p}:{lineno}: empty description text")
            try:
                index = int(index_s)
            except ValueError as exc:
                raise MalformedManifest(f"{p}:{lineno}: bad index {index_s!r}") from exc
            key = (gallery_id, index)
            if key in seen:
                raise DuplicateId(f"{p}:{lineno}: duplicate description {key}")
            seen.add(key)
            out.append(GarmentDescription(gallery_id, index, text))
    return out


def save_descriptions(descriptions: Iterable[GarmentDescription], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8", newline="\n") as fh:
        for d in descriptions:
            fh.write(f"{d.gallery_id}\t{d.index}\t{d.text}\n")


def load_boxes(path: str | Path) -> list[BoundingBox]:
    out: list[BoundingBox] = []
    p = Path(path)
    with p.open("r", encoding="utf-8", newline="\n") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            fields = line.split("\t")
            if len(fields) != 7:
                raise MalformedManifest(f"{p}:{lineno}: expected 7 fields")
            try:
                box = BoundingBox(
                    gallery_id=fields[0],
                    description_index=int(fields[1]),
                    x0=float(fields[2]),
                    y0=float(fields[3]),
                    x1=float(fields[4]),
                    y1=float(fields[5]),
                    confidence=float(fields[6]),
                )
            except ValueError as exc:
                raise MalformedManifest(f"{p}:{lineno}: {exc}") from exc
            out.append(box)
    return out


def save_boxes(boxes: Iterable[BoundingBox], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8", newline="\n") as fh:
        for b in boxes:
            fh.write(
                f"{b.gallery_id}\t{b.description_index}\t{b.x0:.9g}\t{b.y0:.9g}"
                f"\t{b.x1:.9g}\t{b.y1:.9g}\t{b.confidence:.9g}\n"
            )


# --- link validation ---------------------------------------------------------


@dataclass(frozen=True)
class LinkViolation:
    kind: str  # description_missing_gallery | box_missing_gallery | box_missing_description
    gallery_id: str
    index: int


@dataclass
class LinkReport:
    violations: list[LinkViolation]

    @property
    def ok(self) -> bool:
        return not self.violations

    def __len__(self) -> int:
        return len(self.violations)


def validate_links(
    descriptions: Sequence[GarmentDescription],
    boxes: Sequence[BoundingBox],
    gallery: Sequence[ImageRecord],
) -> LinkReport:
    """Report every description or box whose references do not resolve."""
    gallery_ids = {rec.id for rec in gallery}
    desc_keys = {(d.gallery_id, d.index) for d in descriptions}
    violations: list[LinkViolation] = []
    for d in descriptions:
        if d.gallery_id not in gallery_ids:
            violations.append(LinkViolation("description_missing_gallery", d.gallery_id, d.index))
    for b in boxes:
        if b.gallery_id not in gallery_ids:
            violations.append(LinkViolation("box_missing_gallery", b.gallery_id, b.description_index))
        elif (b.gallery_id, b.description_index) not in desc_keys:
            violations.append(
                LinkViolation("box_missing_description", b.gallery_id, b.description_index)
            )
    return LinkReport(violations)
