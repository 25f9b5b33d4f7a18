"""Garment-lookbook pair mining and retrieval evaluation."""

__version__ = "0.1.0"

from .blocks import EmbeddingBlock, normalize_rows, read_block, write_block
from .channels import ScoreTable, aggregate_i2i, score_bb2i, score_fi2i, score_t2i
from .corpus import BoundingBox, GarmentDescription, ImageRecord, load_corpus, validate_links
from .curation import PairManifest, build_manifest, draw_annotation_samples, form_pairs
from .evaluation import GroundTruth, quality_curve, recall_at_k, spearman
from .fusion import EnsembleSpec, fuse_mean, fuse_second_highest
from .retrieval import BrandFilter, CandidateList, brand_similarity, prefilter, topk
from .standardize import CalibrationStats, calibrate, standardize

__all__ = [
    "BoundingBox",
    "BrandFilter",
    "CalibrationStats",
    "CandidateList",
    "EmbeddingBlock",
    "EnsembleSpec",
    "GarmentDescription",
    "GroundTruth",
    "ImageRecord",
    "PairManifest",
    "ScoreTable",
    "aggregate_i2i",
    "brand_similarity",
    "build_manifest",
    "calibrate",
    "draw_annotation_samples",
    "form_pairs",
    "fuse_mean",
    "fuse_second_highest",
    "load_corpus",
    "normalize_rows",
    "prefilter",
    "quality_curve",
    "read_block",
    "recall_at_k",
    "score_bb2i",
    "score_fi2i",
    "score_t2i",
    "spearman",
    "standardize",
    "topk",
    "validate_links",
    "write_block",
]
