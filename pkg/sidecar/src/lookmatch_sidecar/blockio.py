"""Embedding block file writer (and reader for self-checks).

This sidecar talks to the retrieval engine only through files, so the binary
block format is reimplemented here rather than imported:

    8 bytes   magic LMEMB\\x00\\x01\\x00
    4 bytes   kind code LE (0=query_image, 1=gallery_image, 2=gallery_text, 3=gallery_bbox)
    4 bytes   dim LE
    8 bytes   rows LE
    rows*dim  little-endian float32 payload
    ...       UTF-8 key lines: `id` or `id\\tordinal`

All writes are atomic: temp file in the target directory, then rename.
"""

from __future__ import annotations

import os
import struct
import tempfile
from pathlib import Path
from typing import Sequence

import numpy as np

MAGIC = b"LMEMB\x00\x01\x00"

KIND_CODES = {
    "query_image": 0,
    "gallery_image": 1,
    "gallery_text": 2,
    "gallery_bbox": 3,
}
CODE_KINDS = {v: k for k, v in KIND_CODES.items()}

RowKey = tuple[str, "int | None"]


class BlockFormatError(Exception):
    pass


def write_block_atomic(
    kind: str, vectors: np.ndarray, row_keys: Sequence[RowKey], path: str | Path
) -> None:
    if kind not in KIND_CODES:
        raise BlockFormatError(f"unknown kind {kind!r}")
    vectors = np.ascontiguousarray(vectors, dtype="<f4")
    if vectors.ndim != 2:
        raise BlockFormatError("vectors must be 2-d")
    rows, dim = vectors.shape
    if rows != len(row_keys):
        raise BlockFormatError(f"{len(row_keys)} keys for {rows} rows")
    lines = []
    for rec_id, ordinal in row_keys:
        if "\t" in rec_id or "\n" in rec_id:
            raise BlockFormatError(f"id {rec_id!r} contains a separator")
        lines.append(rec_id if ordinal is None else f"{rec_id}\t{ordinal}")
    path = Path(path)
    fd, tmp_name = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(MAGIC)
            fh.write(struct.pack("<IIQ", KIND_CODES[kind], dim, rows))
            fh.write(vectors.tobytes())
            if lines:
                fh.write(("\n".join(lines) + "\n").encode("utf-8"))
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp_name, path)
    except BaseException:
        if os.path.exists(tmp_name):
            os.unlink(tmp_name)
        raise


def read_block(path: str | Path) -> tuple[str, np.ndarray, list[RowKey]]:
    """Parse a block back; used to self-check emitted files."""
    data = Path(path).read_bytes()
    if not data.startswith(MAGIC):
        raise BlockFormatError(f"{path}: bad magic")
    kind_code, dim, rows = struct.unpack_from("<IIQ", data, len(MAGIC))
    off = len(MAGIC) + 16
    need = rows * dim * 4
    if len(data) - off < need:
        raise BlockFormatError(f"{path}: truncated payload")
    vectors = np.frombuffer(data, dtype="<f4", count=rows * dim, offset=off)
    vectors = vectors.reshape(rows, dim).copy()
    key_lines = data[off + need:].decode("utf-8").split("\n")
    if key_lines and key_lines[-1] == "":
        key_lines.pop()
    if len(key_lines) != rows:
        raise BlockFormatError(f"{path}: {len(key_lines)} keys for {rows} rows")
    keys: list[RowKey] = []
    for line in key_lines:
        if "\t" in line:
            rec_id, _, ordinal = line.partition("\t")
            keys.append((rec_id, int(ordinal)))
        else:
            keys.append((line, None))
    return CODE_KINDS[kind_code], vectors, keys
