from __future__ import annotations

import hashlib

import numpy as np
import pytest

from lookmatch_sidecar.corpusio import Description
from lookmatch_sidecar.mock import (
    CANVAS_H,
    CANVAS_W,
    mock_box,
    mock_descriptions,
    mock_vector,
)

# the engine's fixture generator freezes these same digests; both sides must
# produce the exact bits for the shared protocol to hold
GOLDEN = [
    ("query_image", "q1", None, 7, 64,
     "b02668171a582e93b226b3a6fe258e58f5109cb39a0a453720babd59f7d57583"),
    ("gallery_image", "g000123", None, 7, 64,
     "07e950a55f3b897f9b4c3298f7938a13362ece9b44ebfa8794ca61e1e6566fe8"),
    ("gallery_text", "g000123", 2, 7, 64,
     "389f08a09d8fda633fcda9e94fe0e9b4a9466d2bc4e8c4298dfc437825f60925"),
    ("gallery_bbox", "g9", 0, 12345, 32,
     "cd5a3ffa4685611559e874a6b04f4b4ca139464c722c8cd259dc58b3b43bc2b5"),
]


@pytest.mark.parametrize("kind,rid,ordinal,seed,dim,digest", GOLDEN)
def test_mock_vector_golden_digest(kind, rid, ordinal, seed, dim, digest):
    v = mock_vector(kind, rid, ordinal, seed, dim)
    assert v.dtype == np.float32
    assert hashlib.sha256(v.tobytes()).hexdigest() == digest


def test_mock_vector_unit_norm_and_determinism():
    a = mock_vector("gallery_image", "g42", None, 3, 128)
    b = mock_vector("gallery_image", "g42", None, 3, 128)
    assert np.array_equal(a, b)
    assert abs(float(np.linalg.norm(a.astype(np.float64))) - 1.0) < 1e-6
    assert not np.array_equal(a, mock_vector("gallery_image", "g42", None, 4, 128))


def test_mock_descriptions_deterministic_and_capped():
    d1 = mock_descriptions("g7", seed=11, max_words=16)
    d2 = mock_descriptions("g7", seed=11, max_words=16)
    assert d1 == d2
    for d in d1:
        assert 0 < len(d.text.split()) <= 16
        assert d.gallery_id == "g7"
    counts = {len(mock_descriptions(f"g{i}", 11, 16)) for i in range(200)}
    assert counts == {0, 1, 2, 3}


def test_mock_box_inside_canvas():
    for i in range(100):
        d = Description(f"g{i}", 0, "sage wool blazer")
        b = mock_box(d, seed=5)
        assert 0 <= b.x0 < b.x1 <= CANVAS_W
        assert 0 <= b.y0 < b.y1 <= CANVAS_H
        assert 0.25 <= b.confidence < 1.0
    assert mock_box(Description("g1", 0, "x"), 5) == mock_box(Description("g1", 0, "y"), 5)
