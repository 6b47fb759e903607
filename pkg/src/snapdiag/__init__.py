"""Cross-modal plant-disease image retrieval over precomputed embeddings."""

from .core import (
    CandidateDisease,
    GalleryRecord,
    RankedHit,
    aggregate_candidates,
    cosine_similarity,
    normalize,
)
from .evaluate import EvalConfig, EvalReport, LabeledQuery, average_precision, evaluate, top_k_hit
from .index import IndexSnapshot, QuerySpec, build_snapshot, search, search_batch
from .store import ingest_raw, load_gallery, write_gallery
from .synth import generate_gallery

__all__ = [
    "CandidateDisease",
    "EvalConfig",
    "EvalReport",
    "GalleryRecord",
    "IndexSnapshot",
    "LabeledQuery",
    "QuerySpec",
    "RankedHit",
    "aggregate_candidates",
    "average_precision",
    "build_snapshot",
    "cosine_similarity",
    "evaluate",
    "generate_gallery",
    "ingest_raw",
    "load_gallery",
    "normalize",
    "search",
    "search_batch",
    "top_k_hit",
    "write_gallery",
]
