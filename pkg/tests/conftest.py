from __future__ import annotations

import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from lookmatch.blocks import (
    KIND_GALLERY_BBOX,
    KIND_GALLERY_IMAGE,
    KIND_GALLERY_TEXT,
    KIND_QUERY_IMAGE,
    EmbeddingBlock,
)
from lookmatch.channels import DENSE, ScoreTable


def unit_rows(n: int, dim: int, rng: np.random.Generator) -> np.ndarray:
    m = rng.normal(size=(n, dim))
    m /= np.linalg.norm(m, axis=1, keepdims=True)
    return m.astype(np.float32)


def make_block(kind: str, n: int, dim: int, rng: np.random.Generator, prefix: str = "r"):
    if kind in (KIND_GALLERY_TEXT, KIND_GALLERY_BBOX):
        keys = tuple((f"{prefix}{i:04d}", 0) for i in range(n))
    else:
        keys = tuple((f"{prefix}{i:04d}", None) for i in range(n))
    return EmbeddingBlock(kind, unit_rows(n, dim, rng), keys)


def random_dense_table(
    model: str, n_q: int, n_g: int, rng: np.random.Generator,
    lo: float = -1.0, hi: float = 1.0,
) -> ScoreTable:
    vals = rng.uniform(lo, hi, size=(n_q, n_g))
    entries = {
        (f"q{i:04d}", f"g{j:04d}"): float(vals[i, j])
        for i in range(n_q)
        for j in range(n_g)
    }
    return ScoreTable(model, entries, DENSE)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240811)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    rows = []
    for status in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(status, []):
            nodeid = getattr(rep, "nodeid", "")
            if "test_acceptance.py" in nodeid and getattr(rep, "when", "call") == "call":
                rows.append((nodeid.split("::")[-1], status == "passed"))
    if rows:
        terminalreporter.write_sep("=", "acceptance criteria")
        for name, ok in sorted(rows):
            terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}")


# re-export kinds for terseness in tests
QUERY_IMAGE = KIND_QUERY_IMAGE
GALLERY_IMAGE = KIND_GALLERY_IMAGE
GALLERY_TEXT = KIND_GALLERY_TEXT
GALLERY_BBOX = KIND_GALLERY_BBOX
