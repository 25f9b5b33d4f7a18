"""Deterministic mock backends: no model weights, bit-stable across machines.

Mock embedding protocol (kept in lockstep with the engine's fixture
generator; both sides freeze the same digests in their test suites):

    key      = seed as 8 little-endian bytes (blake2b key)
    message  = kind 0x1f id 0x1f ordinal 0x1f block_index
    values   = 32-byte digests as little-endian uint32 -> (u + 0.5)/2**32*2 - 1
    vector   = unit-normalized in float64, stored float32
"""

from __future__ import annotations

import hashlib

import numpy as np

from .corpusio import Box, Description

_BLOCK_BYTES = 32
_U32_PER_BLOCK = _BLOCK_BYTES // 4

# mock detector works on a nominal canvas; real detectors read the pixels
CANVAS_W = 768
CANVAS_H = 1024

COLORS = (
    "black", "ivory", "crimson", "navy", "sage", "ochre", "charcoal",
    "blush", "cobalt", "bone", "olive", "scarlet",
)
MATERIALS = (
    "wool", "silk", "denim", "leather", "cotton", "velvet", "linen",
    "satin", "tweed", "cashmere", "mesh", "suede",
)
GARMENTS = (
    "trench coat", "slip dress", "blazer", "pleated skirt", "turtleneck",
    "cargo pants", "bomber jacket", "button-down shirt", "knit sweater",
    "tailored trousers", "wrap top", "midi dress",
)


def _digest_ints(seed: int, *parts: str, n: int = 4) -> list[int]:
    key = (seed & 0xFFFFFFFFFFFFFFFF).to_bytes(8, "little")
    msg = "\x1f".join(parts).encode("utf-8")
    d = hashlib.blake2b(msg, key=key, digest_size=8 * n).digest()
    return [int.from_bytes(d[8 * i: 8 * (i + 1)], "little") for i in range(n)]


def mock_vector(kind: str, record_id: str, ordinal: int | None, seed: int, dim: int) -> np.ndarray:
    key = (seed & 0xFFFFFFFFFFFFFFFF).to_bytes(8, "little")
    ord_bytes = b"" if ordinal is None else str(ordinal).encode("ascii")
    base = kind.encode("ascii") + b"\x1f" + record_id.encode("utf-8") + b"\x1f" + ord_bytes
    n_blocks = -(-dim // _U32_PER_BLOCK)
    raw = b"".join(
        hashlib.blake2b(
            base + b"\x1f" + i.to_bytes(4, "little"), key=key, digest_size=_BLOCK_BYTES
        ).digest()
        for i in range(n_blocks)
    )
    u = np.frombuffer(raw, dtype="<u4")[:dim].astype(np.float64)
    x = (u + 0.5) / 2.0**32 * 2.0 - 1.0
    x /= np.linalg.norm(x)
    return x.astype(np.float32)


def mock_descriptions(gallery_id: str, seed: int, max_words: int) -> list[Description]:
    """0 to 3 seeded garment phrases for one gallery image."""
    count = _digest_ints(seed, "describe-count", gallery_id)[0] % 4
    out = []
    for index in range(count):
        c, m, g = _digest_ints(seed, "describe", gallery_id, str(index), n=3)
        phrase = f"{COLORS[c % len(COLORS)]} {MATERIALS[m % len(MATERIALS)]} {GARMENTS[g % len(GARMENTS)]}"
        words = phrase.split()
        out.append(Description(gallery_id, index, " ".join(words[:max_words])))
    return out


def mock_box(description: Description, seed: int) -> Box:
    """One seeded box per description, inside the nominal canvas."""
    u = _digest_ints(
        seed, "detect", description.gallery_id, str(description.index), n=5
    )
    x0 = u[0] % (CANVAS_W // 2)
    y0 = u[1] % (CANVAS_H // 2)
    x1 = x0 + 16 + u[2] % (CANVAS_W - x0 - 16)
    y1 = y0 + 16 + u[3] % (CANVAS_H - y0 - 16)
    confidence = 0.25 + (u[4] % 10_000) / 10_000 * 0.7499
    return Box(
        description.gallery_id, description.index,
        float(x0), float(y0), float(x1), float(y1), round(confidence, 4),
    )
