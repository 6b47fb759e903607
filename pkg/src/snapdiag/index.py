"""Exact brute-force top-k cosine retrieval over an immutable gallery snapshot.

Scoring ranks the query against every stored row (no approximate index).
Storage is float32; score accumulation happens in float64 so results are
stable across summation orders. Ties are broken by ascending record id,
which makes every search deterministic.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import NORM_TOLERANCE, GalleryRecord, RankedHit
from .errors import DimensionMismatch, DuplicateId, InvariantViolation, NormViolation


class IndexSnapshot:
    """Validated, immutable in-memory gallery: metadata plus vector block.

    Construct via :func:`build_snapshot`. Snapshots are safe to share across
    threads; updates happen by building a replacement snapshot.
    """

    def __init__(self, records: Sequence[GalleryRecord], vectors: np.ndarray):
        self._records: tuple[GalleryRecord, ...] = tuple(records)
        vectors = np.ascontiguousarray(vectors, dtype=np.float32)
        vectors.setflags(write=False)
        self._vectors = vectors
        # float64 working copy: keeps per-query scoring allocation-free and
        # the accumulation 64-bit.
        self._vectors64 = vectors.astype(np.float64)
        self._vectors64.setflags(write=False)
        self._ids = np.array([r.id for r in self._records], dtype=np.str_)
        self._classes = np.array([r.class_label for r in self._records], dtype=np.str_)
        self._modalities = np.array([r.modality for r in self._records], dtype=np.str_)
        self._row_by_id = {r.id: r.row for r in self._records}

    @property
    def dim(self) -> int:
        return int(self._vectors.shape[1])

    @property
    def count(self) -> int:
        return int(self._vectors.shape[0])

    @property
    def vectors(self) -> np.ndarray:
        """Read-only float32 block of shape (count, dim)."""
        return self._vectors

    @property
    def records(self) -> tuple[GalleryRecord, ...]:
        return self._records

    def record_by_id(self, record_id: str) -> GalleryRecord | None:
        row = self._row_by_id.get(record_id)
        return None if row is None else self._records[row]

    def has_id(self, record_id: str) -> bool:
        return record_id in self._row_by_id

    def class_counts(self) -> dict[str, int]:
        """Distinct class labels with record counts, sorted by label."""
        counts: dict[str, int] = {}
        for r in self._records:
            counts[r.class_label] = counts.get(r.class_label, 0) + 1
        return dict(sorted(counts.items()))


@dataclass(frozen=True)
class QuerySpec:
    """One search request against a snapshot."""

    vector: np.ndarray
    k: int
    exclude_id: str | None = None
    class_filter: frozenset[str] | None = None
    modality_filter: str | None = None

    def __post_init__(self) -> None:
        if self.k < 0:
            raise ValueError(f"k must be >= 0, got {self.k}")
        if self.class_filter is not None and not isinstance(self.class_filter, frozenset):
            object.__setattr__(self, "class_filter", frozenset(self.class_filter))


def build_snapshot(records: Sequence[GalleryRecord], vectors: np.ndarray) -> IndexSnapshot:
    """Validate records and vector rows eagerly and return a snapshot.

    Args:
        records: gallery metadata, ordered so ``records[i].row == i``.
        vectors: 2-D float array of shape (len(records), dim), unit-norm rows.

    Raises:
        InvariantViolation: records/rows misaligned or the block is not 2-D.
        DuplicateId: two records share an id.
        NormViolation: a row's L2 norm is outside 1 +/- 1e-6.
        DimensionMismatch: rows of inconsistent width (non-rectangular input).
    """
    try:
        block = np.ascontiguousarray(vectors, dtype=np.float32)
    except ValueError as exc:
        raise DimensionMismatch(0, -1, f"vector block is not rectangular ({exc})") from exc
    if block.ndim != 2:
        raise InvariantViolation(
            f"vector block must be 2-D (count x dim), got shape {block.shape}"
        )
    if len(records) != block.shape[0]:
        raise InvariantViolation(
            f"{len(records)} records but {block.shape[0]} vector rows"
        )
    seen: set[str] = set()
    for position, record in enumerate(records):
        if record.row != position:
            raise InvariantViolation(
                f"record {record.id!r} has row {record.row}, expected {position}"
            )
        if record.id in seen:
            raise DuplicateId(f"duplicate record id {record.id!r}")
        seen.add(record.id)
    if block.shape[0]:
        norms = np.linalg.norm(block.astype(np.float64), axis=1)
        bad = ~(np.abs(norms - 1.0) <= NORM_TOLERANCE)
        if bad.any():
            row = int(np.flatnonzero(bad)[0])
            raise NormViolation(
                f"row {row} (id {records[row].id!r}) has norm {norms[row]:.8f}, "
                f"outside 1 +/- {NORM_TOLERANCE:.0e}"
            )
    return IndexSnapshot(records, block)


def _eligible_mask(snapshot: IndexSnapshot, query: QuerySpec) -> np.ndarray:
    mask = np.ones(snapshot.count, dtype=bool)
    if query.modality_filter is not None:
        mask &= snapshot._modalities == query.modality_filter
    if query.class_filter is not None:
        mask &= np.isin(snapshot._classes, sorted(query.class_filter))
    if query.exclude_id is not None:
        row = snapshot._row_by_id.get(query.exclude_id)
        if row is not None:
            mask[row] = False
    return mask


def _top_rows(scores: np.ndarray, ids: np.ndarray, rows: np.ndarray, k: int) -> np.ndarray:
    """Rows of the k best scores, ordered by (score desc, id asc).

    Bounded selection: argpartition picks a top-k candidate set, then ties at
    the boundary score are resolved by ascending id so the result is exactly
    the (score desc, id asc) prefix of the full ordering.
    """
    if k >= scores.size:
        order = np.lexsort((ids, -scores))
        return rows[order]
    part = np.argpartition(-scores, k - 1)[:k]
    boundary = scores[part].min()
    above = np.flatnonzero(scores > boundary)
    need = k - above.size
    at = np.flatnonzero(scores == boundary)
    if need < at.size:
        at = at[np.argsort(ids[at], kind="stable")[:need]]
    sel = np.concatenate([above, at])
    order = np.lexsort((ids[sel], -scores[sel]))
    return rows[sel[order]]


def search(snapshot: IndexSnapshot, query: QuerySpec) -> list[RankedHit]:
    """Exact top-k hits for one query, scored against every eligible row.

    Returns min(k, eligible-count) hits sorted by score descending, ties by
    record id ascending, ranks 1..k. Scores are full-precision float64 dot
    products of the stored float32 rows with the query.
    """
    q = np.asarray(query.vector, dtype=np.float64)
    if q.ndim != 1 or q.shape[0] != snapshot.dim:
        actual = q.shape[0] if q.ndim == 1 else -1
        raise DimensionMismatch(snapshot.dim, actual, "query vector")
    if snapshot.count == 0 or query.k == 0:
        return []
    scores = snapshot._vectors64 @ q
    mask = _eligible_mask(snapshot, query)
    rows = np.flatnonzero(mask)
    if rows.size == 0:
        return []
    k = min(query.k, rows.size)
    top = _top_rows(scores[rows], snapshot._ids[rows], rows, k)
    return [
        RankedHit(
            record_id=snapshot._records[row].id,
            class_label=snapshot._records[row].class_label,
            score=float(scores[row]),
            rank=rank,
        )
        for rank, row in enumerate(top, start=1)
    ]


def search_batch(
    snapshot: IndexSnapshot, queries: Sequence[QuerySpec]
) -> list[list[RankedHit]]:
    """Run many searches; output order matches input order.

    Dimension problems are reported with the offending query index before
    any search runs.
    """
    for i, query in enumerate(queries):
        q = np.asarray(query.vector)
        if q.ndim != 1 or q.shape[0] != snapshot.dim:
            actual = q.shape[0] if q.ndim == 1 else -1
            raise DimensionMismatch(snapshot.dim, actual, f"query {i}")
    return [search(snapshot, query) for query in queries]
