"""Per-model z-score standardization with seeded calibration subsampling.

Raw similarity distributions differ across models, so scores are transformed
to (s - mu) / sigma before any cross-model combination. mu and sigma are
estimated once per model on a uniformly drawn without-replacement subsample of
the raw scores; the draw is seeded and the seed is recorded alongside the
stats so calibration is reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .channels import ScoreTable
from .errors import DegenerateDistribution, MalformedManifest, ModelMismatch

SIGMA_FLOOR = 1e-12
STATS_FMT = "{:.12g}"

DEFAULT_SAMPLE_SIZE = 100_000


@dataclass(frozen=True)
class CalibrationStats:
    model: str
    mu: float
    sigma: float
    sample_size: int
    seed: int

    def __post_init__(self) -> None:
        if self.sigma <= 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        if self.sample_size < 2:
            raise ValueError(f"sample_size must be >= 2, got {self.sample_size}")


def calibrate(table: ScoreTable, sample_size: int, seed: int) -> CalibrationStats:
    """Estimate mean and stddev (n-1 divisor) on a seeded score subsample.

    The subsample is drawn uniformly without replacement from the table's
    entries in canonical key order, so the draw depends only on (entry keys,
    seed), never on the scores themselves.
    """
    if sample_size < 2:
        raise ValueError(f"sample_size must be >= 2, got {sample_size}")
    n = len(table)
    if n < 2:
        raise ValueError(f"need at least 2 entries to calibrate, got {n}")
    scores = table.values_array()
    m = min(sample_size, n)
    if m < n:
        rng = np.random.default_rng(seed)
        idx = rng.choice(n, size=m, replace=False)
        sample = scores[idx]
    else:
        sample = scores
    mu = float(np.mean(sample))
    sigma = float(np.std(sample, ddof=1))
    if sigma < SIGMA_FLOOR:
        raise DegenerateDistribution(
            f"model {table.model!r}: sampled scores are constant (sigma={sigma:.3e})"
        )
    return CalibrationStats(table.model, mu, sigma, m, seed)


def standardize(table: ScoreTable, stats: CalibrationStats) -> ScoreTable:
    """Apply s' = (s - mu) / sigma to every entry; entry set unchanged."""
    if stats.model != table.model:
        raise ModelMismatch(
            f"stats are for {stats.model!r}, table is {table.model!r}"
        )
    inv = 1.0 / stats.sigma
    entries = {k: (s - stats.mu) * inv for k, s in table.entries.items()}
    return ScoreTable(table.model, entries, table.completeness, dict(table.meta))


def write_stats(stats: CalibrationStats, path: str | Path, meta: dict | None = None) -> None:
    with Path(path).open("w", encoding="utf-8", newline="\n") as fh:
        if meta:
            fh.write("#" + "\t".join(f"{k}={meta[k]}" for k in sorted(meta)) + "\n")
        fh.write(
            f"{stats.model}\t{STATS_FMT.format(stats.mu)}\t{STATS_FMT.format(stats.sigma)}"
            f"\t{stats.sample_size}\t{stats.seed}\n"
        )


def read_stats(path: str | Path) -> CalibrationStats:
    p = Path(path)
    with p.open("r", encoding="utf-8", newline="\n") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            fields = line.split("\t")
            if len(fields) != 5:
                raise MalformedManifest(f"{p}: expected 5 stats fields")
            return CalibrationStats(
                model=fields[0],
                mu=float(fields[1]),
                sigma=float(fields[2]),
                sample_size=int(fields[3]),
                seed=int(fields[4]),
            )
    raise MalformedManifest(f"{p}: no stats record found")
