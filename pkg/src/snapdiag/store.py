"""On-disk gallery format: JSONL manifest plus a raw binary vector block.

Layout of ``vectors.bin`` (all little-endian, byte-level layout is normative):

    bytes 0..7    magic "PWVEC001" (ASCII)
    bytes 8..11   dim, unsigned 32-bit
    bytes 12..19  count, unsigned 64-bit
    bytes 20..    count * dim IEEE-754 float32, row-major, pre-normalized

``manifest.jsonl`` holds one UTF-8 JSON object per line with keys
id / row / class / modality / uri / caption, ordered by row. Normalization
happens at ingestion, never at load: loading validates and is O(bytes).
"""
from __future__ import annotations

import json
import struct
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .core import DEFAULT_DIM, GalleryRecord, normalize
from .errors import (
    BadMagic,
    DegenerateVector,
    DimensionMismatch,
    DuplicateId,
    DuplicateVector,
    GalleryFormatError,
    IoFailure,
    ManifestGap,
    MissingVector,
    TruncatedFile,
)
from .index import IndexSnapshot, build_snapshot

MAGIC = b"PWVEC001"
HEADER = struct.Struct("<8sIQ")  # magic, dim, count
MANIFEST_NAME = "manifest.jsonl"
VECTORS_NAME = "vectors.bin"


def _record_to_entry(record: GalleryRecord) -> dict:
    return {
        "id": record.id,
        "row": record.row,
        "class": record.class_label,
        "modality": record.modality,
        "uri": record.uri,
        "caption": record.caption,
    }


def _entry_to_record(entry: dict, line_no: int) -> GalleryRecord:
    try:
        return GalleryRecord(
            id=str(entry["id"]),
            class_label=str(entry["class"]),
            modality=str(entry["modality"]),
            row=int(entry["row"]),
            uri=str(entry["uri"]),
            caption=None if entry.get("caption") is None else str(entry["caption"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise GalleryFormatError(f"manifest line {line_no}: {exc}") from exc


def write_gallery(
    records: Sequence[GalleryRecord], vectors: np.ndarray, gallery_dir: str | Path
) -> None:
    """Write a validated gallery to ``gallery_dir``.

    Validation runs before anything is written, so a failed call leaves no
    partially written pair behind. A subsequent load round-trips
    bit-identically.
    """
    snapshot = build_snapshot(records, vectors)
    gallery_dir = Path(gallery_dir)
    try:
        gallery_dir.mkdir(parents=True, exist_ok=True)
        with open(gallery_dir / MANIFEST_NAME, "w", encoding="utf-8") as fh:
            for record in snapshot.records:
                fh.write(json.dumps(_record_to_entry(record), ensure_ascii=False))
                fh.write("\n")
        with open(gallery_dir / VECTORS_NAME, "wb") as fh:
            fh.write(HEADER.pack(MAGIC, snapshot.dim, snapshot.count))
            fh.write(np.ascontiguousarray(snapshot.vectors, dtype="<f4").tobytes())
    except OSError as exc:
        raise IoFailure(f"writing gallery to {gallery_dir}: {exc}") from exc


def read_vector_block(path: str | Path) -> np.ndarray:
    """Read and validate a vectors.bin file into a (count, dim) float32 array."""
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise IoFailure(f"reading {path}: {exc}") from exc
    if len(data) < HEADER.size or data[:8] != MAGIC:
        raise BadMagic(
            f"{path}: expected magic {MAGIC!r}, got {data[:8]!r}"
        )
    _, dim, count = HEADER.unpack_from(data)
    expected = HEADER.size + 4 * count * dim
    if len(data) != expected:
        raise TruncatedFile(
            f"{path}: header says {count} x {dim} ({expected} bytes), file has {len(data)} bytes"
        )
    block = np.frombuffer(data, dtype="<f4", offset=HEADER.size).reshape(count, dim)
    return np.ascontiguousarray(block, dtype=np.float32)


def load_gallery(gallery_dir: str | Path) -> IndexSnapshot:
    """Load and validate a gallery directory into an immutable snapshot.

    The vector header governs dim and count; manifest rows must be exactly
    the permutation 0..count-1. Loading never mutates the files.
    """
    gallery_dir = Path(gallery_dir)
    block = read_vector_block(gallery_dir / VECTORS_NAME)
    count = block.shape[0]

    manifest_path = gallery_dir / MANIFEST_NAME
    try:
        lines = manifest_path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise IoFailure(f"reading {manifest_path}: {exc}") from exc

    by_row: dict[int, GalleryRecord] = {}
    for line_no, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            entry = json.loads(line)
        except json.JSONDecodeError as exc:
            raise GalleryFormatError(f"manifest line {line_no}: invalid JSON ({exc})") from exc
        record = _entry_to_record(entry, line_no)
        if record.row in by_row:
            raise ManifestGap(f"row {record.row} appears more than once in manifest")
        by_row[record.row] = record
    if sorted(by_row) != list(range(count)):
        raise ManifestGap(
            f"manifest rows are not exactly 0..{count - 1} "
            f"(got {len(by_row)} entries for {count} vector rows)"
        )
    records = [by_row[row] for row in range(count)]
    return build_snapshot(records, block)


def ingest_raw(
    manifest_path: str | Path,
    raw_vectors: Iterable[tuple[str, Sequence[float]]],
    out_dir: str | Path,
) -> dict:
    """Normalize externally produced embeddings and write a gallery.

    Args:
        manifest_path: JSONL with id / class / modality / uri / caption per
            line; rows are assigned by line order (any ``row`` key is ignored).
        raw_vectors: (id, components) pairs, one per manifest id, uniform
            length. Vectors are L2-normalized before writing.
        out_dir: destination gallery directory.

    Returns:
        A validation report: count, dim, per-class counts, and the number of
        raw vectors that matched no manifest id.

    Raises:
        DuplicateVector: an id appears twice in ``raw_vectors``.
        MissingVector: a manifest id has no raw vector.
        DegenerateVector: a raw vector has (near-)zero norm; names the id.
        DimensionMismatch: raw vectors of inconsistent length.
    """
    manifest_path = Path(manifest_path)
    try:
        lines = manifest_path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise IoFailure(f"reading {manifest_path}: {exc}") from exc

    entries = []
    seen_ids: set[str] = set()
    for line_no, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            entry = json.loads(line)
        except json.JSONDecodeError as exc:
            raise GalleryFormatError(f"manifest line {line_no}: invalid JSON ({exc})") from exc
        if "id" not in entry:
            raise GalleryFormatError(f"manifest line {line_no}: missing 'id'")
        if entry["id"] in seen_ids:
            raise DuplicateId(f"duplicate manifest id {entry['id']!r}")
        seen_ids.add(entry["id"])
        entries.append((line_no, entry))

    vectors_by_id: dict[str, np.ndarray] = {}
    dim: int | None = None
    for vec_id, components in raw_vectors:
        if vec_id in vectors_by_id:
            raise DuplicateVector(f"raw vector id {vec_id!r} appears more than once")
        arr = np.asarray(components, dtype=np.float64)
        if dim is None:
            dim = int(arr.shape[0]) if arr.ndim == 1 else -1
        if arr.ndim != 1 or arr.shape[0] != dim:
            actual = arr.shape[0] if arr.ndim == 1 else -1
            raise DimensionMismatch(dim, actual, f"raw vector {vec_id!r}")
        vectors_by_id[vec_id] = arr

    records: list[GalleryRecord] = []
    normalized: list[np.ndarray] = []
    class_counts: dict[str, int] = {}
    for row, (line_no, entry) in enumerate(entries):
        record = _entry_to_record({**entry, "row": row}, line_no)
        raw = vectors_by_id.pop(record.id, None)
        if raw is None:
            raise MissingVector(f"no raw vector for manifest id {record.id!r}")
        try:
            normalized.append(normalize(raw))
        except DegenerateVector as exc:
            raise DegenerateVector(f"id {record.id!r}: {exc}") from exc
        records.append(record)
        class_counts[record.class_label] = class_counts.get(record.class_label, 0) + 1

    if dim is None:
        dim = DEFAULT_DIM
    block = (
        np.stack(normalized) if normalized else np.zeros((0, dim), dtype=np.float32)
    )
    write_gallery(records, block, out_dir)
    return {
        "gallery_dir": str(out_dir),
        "count": len(records),
        "dim": int(block.shape[1]),
        "classes": dict(sorted(class_counts.items())),
        "unmatched_vectors": len(vectors_by_id),
    }
