from __future__ import annotations

import re

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_dense_table
from lookmatch.channels import DENSE, TRUNCATED, ScoreTable
from lookmatch.errors import (
    ConstantVector,
    DuplicateVerdict,
    EmptyIntersection,
    LengthMismatch,
    MissingQuery,
    UnknownProbe,
)
from lookmatch.evaluation import (
    AnnotationRecord,
    GroundTruth,
    correlation_matrix,
    format_correlation_heatmap,
    load_annotations,
    load_ground_truth,
    quality_curve,
    ranking_from_table,
    recall_at_k,
    save_annotations,
    save_ground_truth,
    spearman,
)
from oracles import recall_counting, spearman_bruteforce


# --- recall@K -----------------------------------------------------------------


def test_recall_all_rank_one():
    ranking = {f"q{i}": [f"g{i}", "gx"] for i in range(5)}
    truth = GroundTruth(frozenset((f"q{i}", f"g{i}") for i in range(5)))
    assert recall_at_k(ranking, truth, 1) == 1.0


def test_recall_planted_at_rank_seven():
    ranking = {
        f"q{i}": [f"junk{j}" for j in range(6)] + [f"g{i}"] + ["junk9"]
        for i in range(4)
    }
    truth = GroundTruth(frozenset((f"q{i}", f"g{i}") for i in range(4)))
    assert recall_at_k(ranking, truth, 5) == 0.0
    assert recall_at_k(ranking, truth, 10) == 1.0


def test_recall_matches_membership_oracle(rng):
    n_q, n_g = 200, 40
    ranking = {}
    truth_pairs = set()
    for i in range(n_q):
        order = list(rng.permutation(n_g))
        ranking[f"q{i:03d}"] = [f"g{j:02d}" for j in order]
        # one or two true matches per query at seeded ranks
        for _ in range(int(rng.integers(1, 3))):
            truth_pairs.add((f"q{i:03d}", f"g{int(rng.integers(0, n_g)):02d}"))
    truth = GroundTruth(frozenset(truth_pairs))
    for k in (1, 3, 10, 40):
        assert recall_at_k(ranking, truth, k) == recall_counting(ranking, truth_pairs, k)


def test_recall_missing_query():
    truth = GroundTruth(frozenset({("q0", "g0")}))
    with pytest.raises(MissingQuery):
        recall_at_k({"other": ["g0"]}, truth, 1)


def test_recall_monotone_in_k(rng):
    for _ in range(100):
        n_g = int(rng.integers(3, 30))
        order = [f"g{j}" for j in rng.permutation(n_g)]
        ranking = {"q0": order}
        truth = GroundTruth(frozenset({("q0", f"g{int(rng.integers(0, n_g))}")}))
        values = [recall_at_k(ranking, truth, k) for k in range(1, n_g + 1)]
        assert values == sorted(values)
        assert values[-1] == 1.0


def test_ranking_from_table_orders_by_score_then_id():
    table = ScoreTable(
        "m",
        {("q", "g2"): 0.5, ("q", "g1"): 0.5, ("q", "g3"): 0.9},
        TRUNCATED,
    )
    assert ranking_from_table(table) == {"q": ["g3", "g1", "g2"]}


# --- spearman -------------------------------------------------------------------


def test_spearman_increasing_transform_is_one(rng):
    x = rng.normal(size=40)
    y = np.exp(2.0 * x) + 5
    assert spearman(x, y) == pytest.approx(1.0, abs=1e-12)


def test_spearman_reversal_is_minus_one(rng):
    x = rng.normal(size=25)
    assert spearman(x, -x) == pytest.approx(-1.0, abs=1e-12)


def test_spearman_with_ties_matches_bruteforce(rng):
    for _ in range(100):
        n = 10
        x = rng.integers(0, 4, size=n).astype(float)
        y = rng.integers(0, 4, size=n).astype(float)
        if len(set(x)) < 2 or len(set(y)) < 2:
            continue
        expected = spearman_bruteforce(list(x), list(y))
        assert spearman(x, y) == pytest.approx(expected, abs=1e-12)


def test_spearman_errors():
    with pytest.raises(LengthMismatch):
        spearman(np.arange(4), np.arange(5))
    with pytest.raises(ConstantVector):
        spearman(np.ones(6), np.arange(6))


def test_spearman_invariant_under_monotone_transform(rng):
    x = rng.normal(size=30)
    y = rng.normal(size=30)
    base = spearman(x, y)
    assert spearman(np.tanh(x), y) == pytest.approx(base, abs=1e-12)
    assert spearman(x, 3 * y + 10) == pytest.approx(base, abs=1e-12)


# --- correlation matrix -----------------------------------------------------------


def test_identical_tables_correlate_fully(rng):
    t1 = random_dense_table("a", 6, 7, rng)
    t2 = ScoreTable("b", dict(t1.entries), DENSE)
    mat = correlation_matrix([t1, t2], sample=None, seed=0)
    assert mat[0, 1] == pytest.approx(1.0, abs=1e-12)


def test_matrix_symmetric_unit_diagonal(rng):
    tables = [random_dense_table(m, 8, 9, rng) for m in "abcd"]
    mat = correlation_matrix(tables, sample=None, seed=0)
    assert np.array_equal(mat, mat.T)
    assert np.all(np.diag(mat) == 1.0)


def test_matrix_empty_intersection():
    t1 = ScoreTable("a", {("q1", "g1"): 0.1}, TRUNCATED)
    t2 = ScoreTable("b", {("q2", "g1"): 0.1}, TRUNCATED)
    with pytest.raises(EmptyIntersection):
        correlation_matrix([t1, t2], sample=None, seed=0)


def test_heatmap_renders_two_decimal_cells(rng):
    tables = [random_dense_table(m, 10, 10, rng) for m in ("i2i", "t2i", "ext_a", "ext_b")]
    mat = correlation_matrix(tables, sample=None, seed=1)
    text = format_correlation_heatmap([t.model for t in tables], mat)
    lines = text.strip("\n").split("\n")
    assert len(lines) == 5  # header + 4 rows
    for line in lines[1:]:
        cells = re.findall(r"-?\d+\.\d\d(?=\s|$)", line)
        assert len(cells) == 4
    # diagonal renders as 1.00
    assert "1.00" in lines[1]


# --- annotations and the quality curve ----------------------------------------------


def ann(q, g, probe, verdict, annotator="alice", ts="2024-05-01T10:00:00Z"):
    return AnnotationRecord(q, g, probe, verdict, annotator, ts)


def test_quality_curve_paper_point():
    records = [
        ann(f"q{i}", f"g{i}", 100, "match" if i < 142 else "no_match")
        for i in range(200)
    ]
    points = quality_curve(records, probes=[100])
    assert len(points) == 1
    assert points[0].probe_index == 100
    assert points[0].match_fraction == pytest.approx(0.71)
    assert points[0].total == 200


def test_quality_curve_zero_matches():
    records = [ann(f"q{i}", "g", 2000, "no_match") for i in range(10)]
    points = quality_curve(records, probes=[100, 2000])
    assert points == [type(points[0])(2000, 0.0, 10)]


def test_quality_curve_matches_counting_oracle(rng):
    probes = [100, 2000, 8000]
    records = []
    expected = {p: [0, 0] for p in probes}
    for i in range(300):
        p = probes[int(rng.integers(0, 3))]
        verdict = "match" if rng.random() < 0.4 else "no_match"
        records.append(ann(f"q{i}", f"g{i}", p, verdict))
        expected[p][1] += 1
        if verdict == "match":
            expected[p][0] += 1
    points = quality_curve(records, probes)
    for pt in points:
        m, t = expected[pt.probe_index]
        assert pt.total == t
        assert pt.match_fraction == m / t


def test_quality_curve_unknown_probe():
    with pytest.raises(UnknownProbe):
        quality_curve([ann("q", "g", 777, "match")], probes=[100])


def test_verdict_validation():
    with pytest.raises(ValueError):
        ann("q", "g", 100, "maybe")


def test_annotation_file_round_trip(tmp_path):
    records = [
        ann("q1", "g1", 100, "match"),
        ann("q2", "g2", 100, "no_match", annotator="bob"),
    ]
    p = tmp_path / "ann.tsv"
    save_annotations(records, p)
    assert load_annotations(p) == records


def test_duplicate_verdict_rejected(tmp_path):
    records = [ann("q1", "g1", 100, "match"), ann("q1", "g1", 100, "no_match")]
    p = tmp_path / "dup.tsv"
    save_annotations(records, p)
    with pytest.raises(DuplicateVerdict):
        load_annotations(p)


def test_ground_truth_round_trip(tmp_path):
    truth = GroundTruth(frozenset({("q1", "g3"), ("q1", "g4"), ("q2", "g1")}))
    p = tmp_path / "truth.tsv"
    save_ground_truth(truth, p)
    assert load_ground_truth(p) == truth


@settings(max_examples=40, deadline=None)
@given(
    st.lists(st.integers(0, 5), min_size=3, max_size=25),
    st.integers(0, 2**31 - 1),
)
def test_spearman_bounded_property(xs, seed):
    r = np.random.default_rng(seed)
    x = np.array(xs, dtype=float)
    y = r.normal(size=len(xs))
    if len(set(xs)) < 2:
        return
    rho = spearman(x, y)
    assert -1 - 1e-12 <= rho <= 1 + 1e-12
