"""Combining standardized per-model score tables into ensemble scores.

Two fusion modes exist because dense benchmarking and large-scale curation
see different inputs:

  mean_dense              arithmetic mean over members, all tables dense over
                          the same pairs (benchmark mode)
  second_highest_truncated per-pair second-largest available member score over
                          truncated candidate tables; pairs scored by fewer
                          than min_support members are dropped (curation mode)

The second-highest rule exists because truncated candidate lists rarely agree
on which pairs they score, so a plain mean is undefined; requiring at least
two member scores makes the fused value a corroborated one.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .channels import DENSE, TRUNCATED, ScoreTable
from .errors import DomainMismatch, EmptyIntersection, MalformedManifest, MissingMember

MODE_MEAN_DENSE = "mean_dense"
MODE_SECOND_HIGHEST = "second_highest_truncated"
MODES = (MODE_MEAN_DENSE, MODE_SECOND_HIGHEST)


@dataclass(frozen=True)
class EnsembleSpec:
    name: str
    members: tuple[str, ...]
    mode: str
    min_support: int = 2

    def __post_init__(self) -> None:
        if not self.name:
            raise ValueError("ensemble name must be non-empty")
        if not self.members:
            raise ValueError("ensemble needs at least one member")
        if len(set(self.members)) != len(self.members):
            raise ValueError("duplicate ensemble members")
        if self.mode not in MODES:
            raise ValueError(f"unknown fusion mode {self.mode!r}")
        if self.mode == MODE_SECOND_HIGHEST and self.min_support < 2:
            raise ValueError("min_support must be >= 2 in truncated mode")
        object.__setattr__(self, "members", tuple(self.members))


def _member_tables(
    tables: Sequence[ScoreTable], spec: EnsembleSpec
) -> list[ScoreTable]:
    by_model = {}
    for t in tables:
        if t.model in by_model:
            raise ValueError(f"two tables for model {t.model!r}")
        by_model[t.model] = t
    missing = [m for m in spec.members if m not in by_model]
    if missing:
        raise MissingMember(f"no table for ensemble member(s) {missing}")
    extra = set(by_model) - set(spec.members)
    if extra:
        raise ValueError(f"tables present for non-members {sorted(extra)}")
    return [by_model[m] for m in spec.members]


def fuse_mean(tables: Sequence[ScoreTable], spec: EnsembleSpec) -> ScoreTable:
    """Arithmetic mean of member scores over a shared dense domain.

    Member scores are sorted by value before summing, so the result does not
    depend on member order even at the last floating-point ulp.
    """
    if spec.mode != MODE_MEAN_DENSE:
        raise ValueError(f"spec mode is {spec.mode!r}, expected {MODE_MEAN_DENSE!r}")
    members = _member_tables(tables, spec)
    ref_keys = set(members[0].entries)
    for t in members:
        if t.completeness != DENSE:
            raise ValueError(f"member table {t.model!r} is not dense")
        if set(t.entries) != ref_keys:
            raise DomainMismatch(
                f"member {t.model!r} covers a different (query, gallery) domain"
            )
    keys = sorted(ref_keys)
    stack = np.array(
        [[t.entries[k] for k in keys] for t in members], dtype=np.float64
    )
    stack.sort(axis=0)
    fused = stack.sum(axis=0) / len(members)
    return ScoreTable(spec.name, dict(zip(keys, fused.tolist())), DENSE)


def fuse_second_highest(
    tables: Sequence[ScoreTable], spec: EnsembleSpec
) -> ScoreTable:
    """Second-largest available member score per pair, multiset semantics.

    Pairs scored by fewer than ``spec.min_support`` members are omitted. With
    exactly two scores present the result is their minimum.
    """
    if spec.mode != MODE_SECOND_HIGHEST:
        raise ValueError(f"spec mode is {spec.mode!r}, expected {MODE_SECOND_HIGHEST!r}")
    members = _member_tables(tables, spec)
    support: dict[tuple[str, str], list[float]] = {}
    for t in members:
        for key, s in t.entries.items():
            support.setdefault(key, []).append(s)
    entries: dict[tuple[str, str], float] = {}
    for key, scores in support.items():
        if len(scores) >= spec.min_support:
            scores.sort(reverse=True)
            entries[key] = scores[1]
    return ScoreTable(spec.name, entries, TRUNCATED)


def rank_correlation_inputs(
    tables: Sequence[ScoreTable], sample: int | None, seed: int
) -> tuple[list[tuple[str, str]], list[np.ndarray]]:
    """Aligned score vectors over pairs scored by every table.

    A seeded without-replacement subsample of the common pairs keeps the
    comparison affordable on dense tables; ``sample`` of None or <= 0 keeps
    every common pair.
    """
    if len(tables) < 2:
        raise ValueError("need at least two tables")
    common = set(tables[0].entries)
    for t in tables[1:]:
        common &= set(t.entries)
    if not common:
        raise EmptyIntersection("no pair is scored by every table")
    keys = sorted(common)
    if sample is not None and 0 < sample < len(keys):
        rng = np.random.default_rng(seed)
        idx = np.sort(rng.choice(len(keys), size=sample, replace=False))
        keys = [keys[i] for i in idx]
    vectors = [
        np.array([t.entries[k] for k in keys], dtype=np.float64) for t in tables
    ]
    return keys, vectors


# --- ensemble spec file ------------------------------------------------------
#
# key=value lines; `member=` repeats in order:
#   name=total
#   mode=second_highest_truncated
#   min_support=2
#   member=i2i
#   member=t2i


def write_spec(spec: EnsembleSpec, path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"name={spec.name}\n")
        fh.write(f"mode={spec.mode}\n")
        fh.write(f"min_support={spec.min_support}\n")
        for m in spec.members:
            fh.write(f"member={m}\n")


def read_spec(path: str | Path) -> EnsembleSpec:
    p = Path(path)
    name = None
    mode = None
    min_support = 2
    members: list[str] = []
    with p.open("r", encoding="utf-8", newline="\n") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise MalformedManifest(f"{p}:{lineno}: expected key=value")
            if key == "name":
                name = value
            elif key == "mode":
                mode = value
            elif key == "min_support":
                min_support = int(value)
            elif key == "member":
                members.append(value)
            else:
                raise MalformedManifest(f"{p}:{lineno}: unknown key {key!r}")
    if name is None or mode is None:
        raise MalformedManifest(f"{p}: spec must declare name and mode")
    return EnsembleSpec(name, tuple(members), mode, min_support)
