"""Domain types and the similarity math everything else builds on.

An embedding vector is a 1-D float32 numpy array of unit L2 norm. Vectors
are normalized once at ingestion, so query-time similarity is a plain dot
product. All types here are immutable and safe to share between threads.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import DegenerateVector, DimensionMismatch

DEFAULT_DIM = 512

#: Tolerance on the L2 norm of stored vectors (normalized in float32,
#: which keeps unit norms within ~1e-7).
NORM_TOLERANCE = 1e-6

#: Norm below which a raw embedding is considered unusable.
DEGENERATE_NORM = 1e-12

MODALITIES = ("image", "text")


@dataclass(frozen=True)
class GalleryRecord:
    """One stored gallery item; ``row`` indexes into the vector block."""

    id: str
    class_label: str
    modality: str
    row: int
    uri: str
    caption: str | None = None

    def __post_init__(self) -> None:
        if not self.class_label:
            raise ValueError(f"record {self.id!r}: class_label must be non-empty")
        if self.modality not in MODALITIES:
            raise ValueError(
                f"record {self.id!r}: modality must be one of {MODALITIES}, got {self.modality!r}"
            )
        if self.row < 0:
            raise ValueError(f"record {self.id!r}: row must be non-negative")


@dataclass(frozen=True)
class RankedHit:
    """A single retrieval result: gallery record reference plus score."""

    record_id: str
    class_label: str
    score: float
    rank: int


@dataclass(frozen=True)
class CandidateDisease:
    """Per-class suggestion aggregated from a ranked hit list."""

    class_label: str
    score: float
    support: int


def normalize(raw: Sequence[float] | np.ndarray, dim: int | None = None) -> np.ndarray:
    """L2-normalize ``raw`` into a unit float32 vector.

    Args:
        raw: the embedding components; must all be finite.
        dim: expected length; when given, a mismatch raises DimensionMismatch.

    Returns:
        float32 array of the same direction with L2 norm 1 (within 1e-6).

    Raises:
        DimensionMismatch: len(raw) != dim.
        DegenerateVector: the norm is below 1e-12, or a component is not finite.
    """
    vec = np.asarray(raw, dtype=np.float64)
    if vec.ndim != 1:
        raise DimensionMismatch(dim if dim is not None else 1, vec.ndim, "expected a 1-D vector")
    if dim is not None and vec.shape[0] != dim:
        raise DimensionMismatch(dim, vec.shape[0])
    if not np.all(np.isfinite(vec)):
        raise DegenerateVector("vector contains NaN or Inf components")
    norm = float(np.linalg.norm(vec))
    if norm < DEGENERATE_NORM:
        raise DegenerateVector(f"vector norm {norm:.3e} is below {DEGENERATE_NORM:.0e}")
    return (vec / norm).astype(np.float32)


def cosine_similarity(a: np.ndarray, b: np.ndarray) -> float:
    """Dot product of two unit vectors, accumulated in 64-bit floats."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise DimensionMismatch(a.shape[-1], b.shape[-1])
    return float(np.dot(a.astype(np.float64), b.astype(np.float64)))


def aggregate_candidates(hits: Iterable[RankedHit]) -> list[CandidateDisease]:
    """Collapse a ranked hit list into per-class disease suggestions.

    Each distinct class among the hits yields one candidate whose score is
    the best (maximum) hit score of that class and whose support is the
    number of hits of that class. Candidates are sorted by score descending,
    ties broken by class label ascending.
    """
    best: dict[str, float] = {}
    support: dict[str, int] = {}
    for hit in hits:
        support[hit.class_label] = support.get(hit.class_label, 0) + 1
        prev = best.get(hit.class_label, -math.inf)
        if hit.score > prev:
            best[hit.class_label] = hit.score
    candidates = [
        CandidateDisease(class_label=label, score=best[label], support=support[label])
        for label in best
    ]
    candidates.sort(key=lambda c: (-c.score, c.class_label))
    return candidates
