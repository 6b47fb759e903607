"""Retrieval quality metrics: Top-k accuracy and mean average precision.

A labeled query set is ranked against a gallery snapshot and scored with
the standard interpolation-free IR definition of average precision over the
full ranking (optionally truncated at a cutoff), normalized by the number
of relevant gallery items. Metric reductions use exactly-rounded sums so a
report is identical under any query ordering.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .core import RankedHit
from .errors import (
    DimensionMismatch,
    EmptyGallery,
    EmptyQuerySet,
    InvalidRelevance,
    UnknownQueryId,
)
from .index import IndexSnapshot, QuerySpec, search

LEAVE_ONE_OUT = "leave_one_out"
HELD_OUT = "held_out"


@dataclass(frozen=True)
class EvalConfig:
    """Evaluation protocol knobs."""

    k_values: tuple[int, ...] = (1, 5, 10)
    protocol: str = LEAVE_ONE_OUT
    ap_cutoff: int | None = None
    modality_filter: str | None = None

    def __post_init__(self) -> None:
        ks = tuple(int(k) for k in self.k_values)
        object.__setattr__(self, "k_values", ks)
        if not ks or any(k <= 0 for k in ks) or list(ks) != sorted(set(ks)):
            raise ValueError(f"k_values must be positive and strictly increasing, got {ks}")
        if self.protocol not in (LEAVE_ONE_OUT, HELD_OUT):
            raise ValueError(f"unknown protocol {self.protocol!r}")
        if self.ap_cutoff is not None and self.ap_cutoff <= 0:
            raise ValueError(f"ap_cutoff must be positive, got {self.ap_cutoff}")


@dataclass(frozen=True)
class LabeledQuery:
    """One evaluation query: an embedding plus its ground-truth class."""

    vector: np.ndarray
    class_label: str
    id: str | None = None
    modality: str | None = None


@dataclass(frozen=True)
class EvalReport:
    """Aggregated retrieval metrics over a query set (percent units)."""

    top_k_accuracy: dict[int, float]
    mean_ap: float
    per_class_ap: dict[str, float]
    query_count: int
    gallery_count: int
    skipped_queries: int = 0
    query_modalities: dict[str, int] = field(default_factory=dict)
    protocol: str = LEAVE_ONE_OUT

    def to_dict(self) -> dict:
        """JSON-serializable form of the report."""
        return {
            "top_k_accuracy": {str(k): v for k, v in self.top_k_accuracy.items()},
            "mean_ap": self.mean_ap,
            "per_class_ap": dict(self.per_class_ap),
            "query_count": self.query_count,
            "gallery_count": self.gallery_count,
            "skipped_queries": self.skipped_queries,
            "query_modalities": dict(self.query_modalities),
            "protocol": self.protocol,
        }

    def format_table(self) -> str:
        """Fixed-column text table, one metric row, stable for scripting."""
        ks = sorted(self.top_k_accuracy)
        headers = [f"Top-{k}" for k in ks] + ["mAP"]
        values = [f"{self.top_k_accuracy[k]:.2f}" for k in ks] + [f"{self.mean_ap:.2f}"]
        width = max(8, *(len(h) + 2 for h in headers))
        lines = [
            f"queries={self.query_count} gallery={self.gallery_count} "
            f"skipped={self.skipped_queries} protocol={self.protocol}",
            "".join(h.ljust(width) for h in headers).rstrip(),
            "".join(v.ljust(width) for v in values).rstrip(),
        ]
        return "\n".join(lines)


def average_precision(relevance: Sequence[int], total_relevant: int) -> float:
    """Interpolation-free average precision of a ranked binary relevance list.

    AP = (1 / total_relevant) * sum over relevant positions i (1-based) of
    (relevant items in the first i positions / i).

    Args:
        relevance: 0/1 flags in ranked order.
        total_relevant: relevant items in the whole gallery; must be >= the
            number of 1s observed (equal when the ranking covers everything).
    """
    observed = sum(1 for r in relevance if r)
    if total_relevant < 1 or total_relevant < observed:
        raise InvalidRelevance(
            f"total_relevant={total_relevant} but {observed} relevant items observed"
        )
    seen = 0
    terms = []
    for i, rel in enumerate(relevance, start=1):
        if rel:
            seen += 1
            terms.append(seen / i)
    return math.fsum(terms) / total_relevant


def top_k_hit(hits: Sequence[RankedHit], query_class: str, k: int) -> bool:
    """True iff any of the first min(k, len(hits)) hits matches the class."""
    return any(hit.class_label == query_class for hit in hits[:k])


def queries_from_snapshot(snapshot: IndexSnapshot) -> list[LabeledQuery]:
    """Turn every gallery record into a labeled query (leave-one-out input)."""
    return [
        LabeledQuery(
            vector=snapshot.vectors[record.row],
            class_label=record.class_label,
            id=record.id,
            modality=record.modality,
        )
        for record in snapshot.records
    ]


def _filtered_class_counts(
    snapshot: IndexSnapshot, modality_filter: str | None
) -> dict[str, int]:
    counts: dict[str, int] = {}
    for record in snapshot.records:
        if modality_filter is not None and record.modality != modality_filter:
            continue
        counts[record.class_label] = counts.get(record.class_label, 0) + 1
    return counts


def evaluate(
    snapshot: IndexSnapshot,
    queries: Sequence[LabeledQuery],
    config: EvalConfig = EvalConfig(),
) -> EvalReport:
    """Score a labeled query set against a gallery.

    Under leave_one_out every query id must exist in the gallery and is
    excluded from its own candidate list. Queries whose class has zero
    relevant candidates are skipped (AP is undefined there) and counted in
    the report. The report is deterministic for fixed inputs regardless of
    query order.
    """
    if snapshot.count == 0:
        raise EmptyGallery("cannot evaluate against an empty gallery")
    if not queries:
        raise EmptyQuerySet("no queries to evaluate")

    for i, query in enumerate(queries):
        vec = np.asarray(query.vector)
        if vec.ndim != 1 or vec.shape[0] != snapshot.dim:
            actual = vec.shape[0] if vec.ndim == 1 else -1
            raise DimensionMismatch(snapshot.dim, actual, f"query {i}")
        if config.protocol == LEAVE_ONE_OUT:
            if query.id is None or not snapshot.has_id(query.id):
                raise UnknownQueryId(
                    f"query {i} (id={query.id!r}) is not a gallery record"
                )

    class_counts = _filtered_class_counts(snapshot, config.modality_filter)
    leave_one_out = config.protocol == LEAVE_ONE_OUT

    hit_counts = {k: 0 for k in config.k_values}
    ap_terms: list[float] = []
    per_class_terms: dict[str, list[float]] = {}
    modality_counts: dict[str, int] = {}
    scored = 0
    skipped = 0

    for query in queries:
        modality = query.modality or "unknown"
        modality_counts[modality] = modality_counts.get(modality, 0) + 1

        total_relevant = class_counts.get(query.class_label, 0)
        if leave_one_out:
            own = snapshot.record_by_id(query.id)  # validated above
            own_in_candidates = (
                config.modality_filter is None or own.modality == config.modality_filter
            )
            if own_in_candidates and own.class_label == query.class_label:
                total_relevant -= 1
        if total_relevant <= 0:
            skipped += 1
            continue

        spec = QuerySpec(
            vector=query.vector,
            k=snapshot.count,
            exclude_id=query.id if leave_one_out else None,
            modality_filter=config.modality_filter,
        )
        hits = search(snapshot, spec)
        for k in config.k_values:
            if top_k_hit(hits, query.class_label, k):
                hit_counts[k] += 1
        ranking = hits if config.ap_cutoff is None else hits[: config.ap_cutoff]
        relevance = [1 if h.class_label == query.class_label else 0 for h in ranking]
        ap = average_precision(relevance, total_relevant)
        ap_terms.append(ap)
        per_class_terms.setdefault(query.class_label, []).append(ap)
        scored += 1

    if scored == 0:
        raise EmptyQuerySet(
            f"all {len(queries)} queries were skipped (no relevant gallery items)"
        )

    top_k_accuracy = {k: 100.0 * hit_counts[k] / scored for k in config.k_values}
    mean_ap = 100.0 * math.fsum(ap_terms) / scored
    per_class_ap = {
        label: 100.0 * math.fsum(terms) / len(terms)
        for label, terms in sorted(per_class_terms.items())
    }
    return EvalReport(
        top_k_accuracy=top_k_accuracy,
        mean_ap=mean_ap,
        per_class_ap=per_class_ap,
        query_count=scored,
        gallery_count=snapshot.count,
        skipped_queries=skipped,
        query_modalities=dict(sorted(modality_counts.items())),
        protocol=config.protocol,
    )
