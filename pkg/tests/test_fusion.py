from __future__ import annotations

import itertools

import numpy as np
import pytest

from conftest import random_dense_table
from lookmatch.channels import DENSE, TRUNCATED, ScoreTable
from lookmatch.errors import DomainMismatch, EmptyIntersection, MissingMember
from lookmatch.fusion import (
    MODE_MEAN_DENSE,
    MODE_SECOND_HIGHEST,
    EnsembleSpec,
    fuse_mean,
    fuse_second_highest,
    rank_correlation_inputs,
    read_spec,
    write_spec,
)
from oracles import second_highest


def mean_spec(members):
    return EnsembleSpec("ens", tuple(members), MODE_MEAN_DENSE)


def sh_spec(members, min_support=2):
    return EnsembleSpec("ens", tuple(members), MODE_SECOND_HIGHEST, min_support)


def test_spec_validation():
    with pytest.raises(ValueError):
        EnsembleSpec("e", (), MODE_MEAN_DENSE)
    with pytest.raises(ValueError):
        EnsembleSpec("e", ("a", "a"), MODE_MEAN_DENSE)
    with pytest.raises(ValueError):
        EnsembleSpec("e", ("a",), "geometric")
    with pytest.raises(ValueError):
        EnsembleSpec("e", ("a", "b"), MODE_SECOND_HIGHEST, min_support=1)


def test_fuse_mean_two_members_cancel():
    t1 = ScoreTable("a", {("q", "g"): 1.0}, DENSE)
    t2 = ScoreTable("b", {("q", "g"): -1.0}, DENSE)
    out = fuse_mean([t1, t2], mean_spec(["a", "b"]))
    assert out.entries[("q", "g")] == 0.0
    assert out.model == "ens"


def test_fuse_mean_single_member_is_identity(rng):
    t = random_dense_table("a", 3, 4, rng)
    out = fuse_mean([t], mean_spec(["a"]))
    assert out.entries == t.entries


def test_fuse_mean_matches_oracle(rng):
    tables = [random_dense_table(m, 6, 9, rng) for m in "abcd"]
    out = fuse_mean(tables, mean_spec("abcd"))
    for k in tables[0].entries:
        expected = sum(t.entries[k] for t in tables) / 4
        assert out.entries[k] == pytest.approx(expected, abs=1e-12)


def test_fuse_mean_symmetric_in_member_order(rng):
    tables = {m: random_dense_table(m, 4, 5, rng) for m in "abc"}
    results = []
    for perm in itertools.permutations("abc"):
        out = fuse_mean([tables[m] for m in perm], mean_spec(perm))
        results.append(out.entries)
    for other in results[1:]:
        assert other == results[0]  # exact equality, not approx


def test_fuse_mean_missing_member(rng):
    t = random_dense_table("a", 2, 2, rng)
    with pytest.raises(MissingMember):
        fuse_mean([t], mean_spec(["a", "b"]))


def test_fuse_mean_domain_mismatch(rng):
    t1 = random_dense_table("a", 2, 2, rng)
    t2 = random_dense_table("b", 2, 3, rng)
    with pytest.raises(DomainMismatch):
        fuse_mean([t1, t2], mean_spec(["a", "b"]))


def test_second_highest_order_statistic():
    tables = [
        ScoreTable("a", {("q", "g"): 2.1}, TRUNCATED),
        ScoreTable("b", {("q", "g"): 0.5}, TRUNCATED),
        ScoreTable("c", {("q", "g"): 1.7}, TRUNCATED),
    ]
    out = fuse_second_highest(tables, sh_spec("abc"))
    assert out.entries[("q", "g")] == 1.7


def test_second_highest_drops_single_support():
    tables = [
        ScoreTable("a", {("q", "g1"): 2.0, ("q", "g2"): 1.0}, TRUNCATED),
        ScoreTable("b", {("q", "g2"): 0.5}, TRUNCATED),
    ]
    out = fuse_second_highest(tables, sh_spec("ab"))
    assert ("q", "g1") not in out.entries  # only one model scored it
    assert out.entries[("q", "g2")] == 0.5


def test_second_highest_tie_multiset():
    tables = [
        ScoreTable("a", {("q", "g"): 1.0}, TRUNCATED),
        ScoreTable("b", {("q", "g"): 1.0}, TRUNCATED),
    ]
    out = fuse_second_highest(tables, sh_spec("ab"))
    assert out.entries[("q", "g")] == 1.0


def test_second_highest_matches_enumeration_oracle(rng):
    members = ["a", "b", "c", "d"]
    pairs = [(f"q{i}", f"g{j}") for i in range(25) for j in range(40)]
    tables = {m: ScoreTable(m, {}, TRUNCATED) for m in members}
    per_pair: dict[tuple[str, str], list[float]] = {}
    for key in pairs:
        for m in members:
            if rng.random() < 0.55:
                v = float(rng.normal())
                tables[m].entries[key] = v
                per_pair.setdefault(key, []).append(v)
    out = fuse_second_highest(list(tables.values()), sh_spec(members))
    checked = 0
    for key, scores in per_pair.items():
        expected = second_highest(scores, 2)
        if expected is None:
            assert key not in out.entries
        else:
            assert out.entries[key] == expected
            checked += 1
    assert checked > 100


def test_second_highest_bounds_and_two_member_min(rng):
    members = ["a", "b", "c"]
    tables = {m: ScoreTable(m, {}, TRUNCATED) for m in members}
    for trial in range(200):
        k = (f"q{trial}", "g")
        present = [m for m in members if rng.random() < 0.7]
        for m in present:
            tables[m].entries[k] = float(rng.normal())
    out = fuse_second_highest(list(tables.values()), sh_spec(members))
    for k, fused in out.entries.items():
        scores = [t.entries[k] for t in tables.values() if k in t.entries]
        assert min(scores) <= fused <= max(scores)
        if len(scores) == 2:
            assert fused == min(scores)


def test_rank_correlation_inputs_dense_all(rng):
    t1 = random_dense_table("a", 5, 6, rng)
    t2 = random_dense_table("b", 5, 6, rng)
    keys, vectors = rank_correlation_inputs([t1, t2], sample=None, seed=0)
    assert len(keys) == 30
    assert all(len(v) == 30 for v in vectors)
    assert vectors[0][0] == t1.entries[keys[0]]


def test_rank_correlation_inputs_disjoint(rng):
    t1 = ScoreTable("a", {("q1", "g1"): 0.5}, TRUNCATED)
    t2 = ScoreTable("b", {("q2", "g2"): 0.5}, TRUNCATED)
    with pytest.raises(EmptyIntersection):
        rank_correlation_inputs([t1, t2], sample=None, seed=0)


def test_rank_correlation_inputs_seeded_sample_repeats(rng):
    t1 = random_dense_table("a", 20, 50, rng)
    t2 = random_dense_table("b", 20, 50, rng)
    k1, v1 = rank_correlation_inputs([t1, t2], sample=100, seed=9)
    k2, v2 = rank_correlation_inputs([t1, t2], sample=100, seed=9)
    assert k1 == k2
    assert all(np.array_equal(a, b) for a, b in zip(v1, v2))
    k3, _ = rank_correlation_inputs([t1, t2], sample=100, seed=10)
    assert k1 != k3


def test_spec_file_round_trip(tmp_path):
    spec = EnsembleSpec("total", ("i2i", "t2i", "ext_a", "ext_b"), MODE_SECOND_HIGHEST, 2)
    p = tmp_path / "spec.txt"
    write_spec(spec, p)
    assert read_spec(p) == spec
