"""Frozen digests of the mock embedding protocol.

The embedding sidecar implements the same keyed-hash scheme independently;
its test suite freezes these exact digests, so both implementations are held
to the same bits without importing each other.
"""

from __future__ import annotations

import hashlib

import pytest

from lookmatch.fixtures import mock_vector

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
    assert hashlib.sha256(v.tobytes()).hexdigest() == digest
