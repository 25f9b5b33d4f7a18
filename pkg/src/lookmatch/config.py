"""Run configuration: a JSON file naming every input, parameter, and seed.

The config hash (over the canonical JSON) and all seeds are embedded in the
header of every artifact the pipeline writes, so any output file names the
exact run that produced it.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

from .curation import DEFAULT_CUTOFFS, DEFAULT_PER_PROBE, DEFAULT_PROBES
from .errors import ConfigError
from .fusion import EnsembleSpec
from .retrieval import DEFAULT_BRAND_THRESHOLD, DEFAULT_K
from .standardize import DEFAULT_SAMPLE_SIZE

BLOCK_KEYS = ("query_image", "gallery_image", "gallery_text", "gallery_bbox")


@dataclass
class RunConfig:
    queries_manifest: str
    gallery_manifest: str
    blocks: dict[str, str]
    ensemble: EnsembleSpec
    output_dir: str
    external_scores: dict[str, str] = field(default_factory=dict)
    brand_threshold: float = DEFAULT_BRAND_THRESHOLD
    brand_filter_enabled: bool = True
    k: int = DEFAULT_K
    cutoffs: tuple[int, int, int] = DEFAULT_CUTOFFS
    probes: tuple[int, ...] = DEFAULT_PROBES
    per_probe: int = DEFAULT_PER_PROBE
    calibration_sample: int = DEFAULT_SAMPLE_SIZE
    calibration_seed: int = 0
    sampling_seed: int = 0
    workers: int = 1
    raw: dict = field(default_factory=dict, repr=False)

    def config_hash(self) -> str:
        """Hash of the semantic inputs and parameters.

        output_dir and workers are excluded: where artifacts land and how many
        threads computed them must not change what the artifacts say they are.
        """
        payload = self.to_dict()
        payload.pop("output_dir")
        payload.pop("workers")
        canon = json.dumps(payload, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode("utf-8")).hexdigest()[:12]

    def to_dict(self) -> dict:
        return {
            "queries_manifest": self.queries_manifest,
            "gallery_manifest": self.gallery_manifest,
            "blocks": dict(self.blocks),
            "external_scores": dict(self.external_scores),
            "ensemble": {
                "name": self.ensemble.name,
                "members": list(self.ensemble.members),
                "mode": self.ensemble.mode,
                "min_support": self.ensemble.min_support,
            },
            "brand_threshold": self.brand_threshold,
            "brand_filter_enabled": self.brand_filter_enabled,
            "k": self.k,
            "cutoffs": list(self.cutoffs),
            "probes": list(self.probes),
            "per_probe": self.per_probe,
            "calibration_sample": self.calibration_sample,
            "seeds": {"calibration": self.calibration_seed, "sampling": self.sampling_seed},
            "output_dir": self.output_dir,
            "workers": self.workers,
        }

    def meta(self) -> dict[str, str]:
        """Provenance pairs embedded in every artifact header."""
        return {
            "config": self.config_hash(),
            "seed_calibration": str(self.calibration_seed),
            "seed_sampling": str(self.sampling_seed),
        }

    def validate(self) -> None:
        """Check referenced paths and member wiring before any compute."""
        for label, path in [
            ("queries_manifest", self.queries_manifest),
            ("gallery_manifest", self.gallery_manifest),
            *((f"blocks.{k}", v) for k, v in self.blocks.items()),
            *((f"external_scores.{m}", v) for m, v in self.external_scores.items()),
        ]:
            if not Path(path).is_file():
                raise ConfigError(f"{label}: no such file: {path}")
        unknown = set(self.blocks) - set(BLOCK_KEYS)
        if unknown:
            raise ConfigError(f"unknown block keys {sorted(unknown)}")
        channels = {"fi2i", "t2i", "bb2i", "i2i"}
        for member in self.ensemble.members:
            if member in channels:
                continue
            if member not in self.external_scores:
                raise ConfigError(
                    f"ensemble member {member!r} is neither a channel nor an external score table"
                )
        if self.k < 1:
            raise ConfigError("k must be >= 1")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")


def load_config(path: str | Path) -> RunConfig:
    p = Path(path)
    try:
        raw = json.loads(p.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config {p}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {p} is not valid JSON: {exc}") from exc
    try:
        ens = raw["ensemble"]
        spec = EnsembleSpec(
            name=ens["name"],
            members=tuple(ens["members"]),
            mode=ens["mode"],
            min_support=int(ens.get("min_support", 2)),
        )
        seeds = raw.get("seeds", {})
        cfg = RunConfig(
            queries_manifest=raw["queries_manifest"],
            gallery_manifest=raw["gallery_manifest"],
            blocks=dict(raw["blocks"]),
            ensemble=spec,
            output_dir=raw["output_dir"],
            external_scores=dict(raw.get("external_scores", {})),
            brand_threshold=float(raw.get("brand_threshold", DEFAULT_BRAND_THRESHOLD)),
            brand_filter_enabled=bool(raw.get("brand_filter_enabled", True)),
            k=int(raw.get("k", DEFAULT_K)),
            cutoffs=tuple(raw.get("cutoffs", DEFAULT_CUTOFFS)),
            probes=tuple(raw.get("probes", DEFAULT_PROBES)),
            per_probe=int(raw.get("per_probe", DEFAULT_PER_PROBE)),
            calibration_sample=int(raw.get("calibration_sample", DEFAULT_SAMPLE_SIZE)),
            calibration_seed=int(seeds.get("calibration", 0)),
            sampling_seed=int(seeds.get("sampling", 0)),
            workers=int(raw.get("workers", 1)),
            raw=raw,
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"config {p}: {exc}") from exc
    if len(cfg.cutoffs) != 3:
        raise ConfigError("cutoffs must have exactly 3 values")
    return cfg


def save_config(cfg: RunConfig, path: str | Path) -> None:
    Path(path).write_text(
        json.dumps(cfg.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
