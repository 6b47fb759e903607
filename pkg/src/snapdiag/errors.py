"""Exception types shared across the retrieval engine.

Every failure mode the library can signal has a dedicated class so callers
(CLI exit codes, HTTP handlers) can map them without string matching.
"""
from __future__ import annotations


class SnapdiagError(Exception):
    """Base class for all errors raised by this package."""


class InvariantViolation(SnapdiagError):
    """A data invariant was violated (bad dimensions, norms, ids, rows)."""


class DimensionMismatch(InvariantViolation):
    """Vector length does not match the expected dimensionality."""

    def __init__(self, expected: int, actual: int, context: str = ""):
        self.expected = expected
        self.actual = actual
        prefix = f"{context}: " if context else ""
        super().__init__(f"{prefix}expected dim {expected}, got {actual}")


class DegenerateVector(SnapdiagError):
    """A vector with (near-)zero norm has no direction and cannot be used."""


class NormViolation(InvariantViolation):
    """A stored vector is outside the unit-norm tolerance."""


class DuplicateId(InvariantViolation):
    """Two gallery records share the same id."""


class ManifestGap(InvariantViolation):
    """Manifest rows are not exactly the set 0..count-1."""


class GalleryFormatError(SnapdiagError):
    """The on-disk gallery files are malformed."""


class BadMagic(GalleryFormatError):
    """vectors.bin does not start with the expected magic bytes."""


class TruncatedFile(GalleryFormatError):
    """vectors.bin size disagrees with its header."""


class IoFailure(SnapdiagError):
    """An underlying filesystem operation failed."""


class MissingVector(SnapdiagError):
    """A manifest id has no raw vector during ingestion."""


class DuplicateVector(SnapdiagError):
    """The same id appears more than once in a raw vector source."""


class InvalidRelevance(SnapdiagError):
    """total_relevant is inconsistent with the observed relevance sequence."""


class EmptyGallery(SnapdiagError):
    """Evaluation requires a non-empty gallery."""


class EmptyQuerySet(SnapdiagError):
    """Evaluation requires at least one query."""


class UnknownQueryId(SnapdiagError):
    """Leave-one-out query id is absent from the gallery."""


class EmbedderUnavailable(SnapdiagError):
    """The embedder sidecar could not be reached (retriable)."""

    retriable = True


class EmbedderProtocolError(SnapdiagError):
    """The embedder responded with an unusable payload."""

    retriable = False
