"""Bit-exact binary storage for unit-normalized embedding matrices.

On-disk layout, all integers little-endian:

    8 bytes   magic ``LMEMB\\x00\\x01\\x00``
    4 bytes   kind code (0=query_image, 1=gallery_image, 2=gallery_text, 3=gallery_bbox)
    4 bytes   dim
    8 bytes   rows
    rows*dim  float32 payload (row-major)
    ...       UTF-8 key section, one row key per line: ``id`` or ``id\\tordinal``

Vectors are normalized at ingest; loading verifies unit norms instead of
silently repairing them. Blocks are immutable after load and safe for
concurrent read-only use.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import (
    BadMagic,
    DimMismatch,
    IoFailure,
    MalformedKeys,
    NormViolation,
    ZeroVector,
)

MAGIC = b"LMEMB\x00\x01\x00"

KIND_QUERY_IMAGE = "query_image"
KIND_GALLERY_IMAGE = "gallery_image"
KIND_GALLERY_TEXT = "gallery_text"
KIND_GALLERY_BBOX = "gallery_bbox"

KIND_CODES = {
    KIND_QUERY_IMAGE: 0,
    KIND_GALLERY_IMAGE: 1,
    KIND_GALLERY_TEXT: 2,
    KIND_GALLERY_BBOX: 3,
}
CODE_KINDS = {v: k for k, v in KIND_CODES.items()}

# kinds whose rows carry a per-record ordinal in addition to the record id
ORDINAL_KINDS = (KIND_GALLERY_TEXT, KIND_GALLERY_BBOX)

NORM_TOL = 1e-4
ZERO_NORM = 1e-12

RowKey = tuple[str, "int | None"]


def normalize_rows(matrix: np.ndarray) -> np.ndarray:
    """Scale every row to unit Euclidean norm, preserving direction.

    Norms are computed in float64; the result keeps the input dtype.
    Raises ZeroVector if any row has norm below 1e-12.
    """
    m = np.asarray(matrix)
    if m.ndim != 2:
        raise ValueError("expected a 2-d matrix")
    norms = np.linalg.norm(m.astype(np.float64, copy=False), axis=1)
    bad = np.flatnonzero(norms < ZERO_NORM)
    if bad.size:
        raise ZeroVector(f"row {int(bad[0])} has norm {norms[bad[0]]:.3e}")
    out = m.astype(np.float64) / norms[:, None]
    return out.astype(m.dtype, copy=False) if m.dtype != np.float64 else out


def _check_norms(vectors: np.ndarray) -> None:
    norms = np.linalg.norm(vectors.astype(np.float64, copy=False), axis=1)
    bad = np.flatnonzero(np.abs(norms - 1.0) > NORM_TOL)
    if bad.size:
        row = int(bad[0])
        raise NormViolation(f"row {row} has norm {norms[row]:.6f} (tolerance {NORM_TOL})")


@dataclass(frozen=True)
class EmbeddingBlock:
    """Immutable matrix of unit vectors bound to corpus row keys."""

    kind: str
    vectors: np.ndarray
    row_keys: tuple[RowKey, ...] = field(default=())

    def __post_init__(self) -> None:
        if self.kind not in KIND_CODES:
            raise ValueError(f"unknown block kind {self.kind!r}")
        v = np.ascontiguousarray(self.vectors, dtype=np.float32)
        if v.ndim != 2:
            raise ValueError("vectors must be 2-d")
        object.__setattr__(self, "vectors", v)
        keys = tuple(self.row_keys)
        object.__setattr__(self, "row_keys", keys)
        if len(keys) != v.shape[0]:
            raise MalformedKeys(f"{len(keys)} row keys for {v.shape[0]} rows")
        wants_ordinal = self.kind in ORDINAL_KINDS
        seen: set[RowKey] = set()
        for i, (rec_id, ordinal) in enumerate(keys):
            if not rec_id:
                raise MalformedKeys(f"row {i}: empty record id")
            if wants_ordinal and (ordinal is None or ordinal < 0):
                raise MalformedKeys(f"row {i}: kind {self.kind} requires an ordinal")
            if not wants_ordinal and ordinal is not None:
                raise MalformedKeys(f"row {i}: kind {self.kind} takes no ordinal")
            if (rec_id, ordinal) in seen:
                raise MalformedKeys(f"row {i}: duplicate key ({rec_id!r}, {ordinal})")
            seen.add((rec_id, ordinal))
        _check_norms(v)

    @property
    def rows(self) -> int:
        return self.vectors.shape[0]

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    @classmethod
    def from_raw(
        cls, kind: str, matrix: np.ndarray, row_keys: Sequence[RowKey]
    ) -> "EmbeddingBlock":
        """Build a block from unnormalized vectors (normalization at ingest)."""
        return cls(kind, normalize_rows(np.asarray(matrix, dtype=np.float32)), tuple(row_keys))

    def ids(self) -> list[str]:
        return [k[0] for k in self.row_keys]


def write_block(block: EmbeddingBlock, path: str | Path) -> None:
    """Serialize a block; read_block(write_block(b)) is bit-exact on vectors."""
    header = MAGIC + struct.pack(
        "<IIQ", KIND_CODES[block.kind], block.dim, block.rows
    )
    key_lines = []
    for rec_id, ordinal in block.row_keys:
        if "\t" in rec_id or "\n" in rec_id:
            raise MalformedKeys(f"record id {rec_id!r} contains a separator")
        key_lines.append(rec_id if ordinal is None else f"{rec_id}\t{ordinal}")
    key_section = ("\n".join(key_lines) + "\n" if key_lines else "").encode("utf-8")
    try:
        with Path(path).open("wb") as fh:
            fh.write(header)
            fh.write(np.ascontiguousarray(block.vectors, dtype="<f4").tobytes())
            fh.write(key_section)
    except OSError as exc:
        raise IoFailure(f"writing {path}: {exc}") from exc


def read_block(path: str | Path) -> EmbeddingBlock:
    """Load and verify a block; violations raise instead of silent repair."""
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise IoFailure(f"reading {path}: {exc}") from exc
    if len(data) < len(MAGIC) + 16 or not data.startswith(MAGIC):
        raise BadMagic(f"{path}: not an embedding block")
    off = len(MAGIC)
    kind_code, dim, rows = struct.unpack_from("<IIQ", data, off)
    off += 16
    if kind_code not in CODE_KINDS:
        raise BadMagic(f"{path}: unknown kind code {kind_code}")
    if dim == 0:
        raise DimMismatch(f"{path}: declared dim is 0")
    payload_bytes = rows * dim * 4
    if len(data) - off < payload_bytes:
        raise DimMismatch(
            f"{path}: payload holds {len(data) - off} bytes, "
            f"header declares {payload_bytes}"
        )
    vectors = np.frombuffer(
        data, dtype="<f4", count=rows * dim, offset=off
    ).reshape(rows, dim).copy()
    off += payload_bytes
    key_text = data[off:].decode("utf-8")
    lines = key_text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if len(lines) != rows:
        raise MalformedKeys(f"{path}: {len(lines)} row keys for {rows} rows")
    kind = CODE_KINDS[kind_code]
    keys: list[RowKey] = []
    for i, line in enumerate(lines):
        if "\t" in line:
            rec_id, _, ordinal_s = line.partition("\t")
            try:
                keys.append((rec_id, int(ordinal_s)))
            except ValueError as exc:
                raise MalformedKeys(f"{path}: row {i}: bad ordinal {ordinal_s!r}") from exc
        else:
            keys.append((line, None))
    return EmbeddingBlock(kind, vectors, tuple(keys))


def check_block(path: str | Path) -> dict:
    """Validate a block file and return a summary (used by `embed-check`)."""
    block = read_block(path)
    return {
        "path": str(path),
        "kind": block.kind,
        "dim": block.dim,
        "rows": block.rows,
    }
