"""Tests for the on-disk gallery format and raw-embedding ingestion."""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import pytest

from snapdiag import load_gallery, write_gallery
from snapdiag.errors import (
    BadMagic,
    DegenerateVector,
    DimensionMismatch,
    DuplicateVector,
    GalleryFormatError,
    IoFailure,
    ManifestGap,
    MissingVector,
    TruncatedFile,
)
from snapdiag.store import (
    HEADER,
    MAGIC,
    MANIFEST_NAME,
    VECTORS_NAME,
    ingest_raw,
    read_vector_block,
)

from conftest import make_records, unit_rows

GOLDEN_DIR = Path(__file__).parent / "data" / "golden_gallery"


@pytest.fixture()
def written_gallery(tmp_path):
    rng = np.random.default_rng(11)
    records = make_records([f"class{i % 4}" for i in range(10)])
    block = unit_rows(rng.standard_normal((10, 6)))
    gallery_dir = tmp_path / "gallery"
    write_gallery(records, block, gallery_dir)
    return gallery_dir, records, block


class TestRoundTrip:
    def test_load_returns_written_data(self, written_gallery):
        gallery_dir, records, block = written_gallery
        snap = load_gallery(gallery_dir)
        assert snap.records == tuple(records)
        assert np.array_equal(snap.vectors, block)

    def test_rewrite_is_byte_identical(self, written_gallery, tmp_path):
        gallery_dir, _, _ = written_gallery
        snap = load_gallery(gallery_dir)
        second = tmp_path / "copy"
        write_gallery(snap.records, snap.vectors, second)
        for name in (MANIFEST_NAME, VECTORS_NAME):
            assert (second / name).read_bytes() == (gallery_dir / name).read_bytes()

    def test_file_size_formula(self, written_gallery):
        gallery_dir, _, block = written_gallery
        size = (gallery_dir / VECTORS_NAME).stat().st_size
        assert size == 20 + 4 * block.shape[0] * block.shape[1]

    def test_header_fields(self, written_gallery):
        gallery_dir, _, block = written_gallery
        head = (gallery_dir / VECTORS_NAME).read_bytes()[:20]
        magic, dim, count = HEADER.unpack(head)
        assert magic == b"PWVEC001"
        assert (count, dim) == block.shape

    def test_empty_gallery_is_header_only(self, tmp_path):
        gallery_dir = tmp_path / "empty"
        write_gallery([], np.zeros((0, 8), dtype=np.float32), gallery_dir)
        assert (gallery_dir / VECTORS_NAME).stat().st_size == 20
        snap = load_gallery(gallery_dir)
        assert snap.count == 0 and snap.dim == 8


class TestGoldenFixture:
    def test_is_36_bytes(self):
        assert (GOLDEN_DIR / VECTORS_NAME).stat().st_size == 36

    def test_loads_expected_components(self):
        snap = load_gallery(GOLDEN_DIR)
        assert snap.count == 1 and snap.dim == 4
        expected = np.array([0.6, 0.8, 0.0, 0.0], dtype=np.float32)
        assert np.array_equal(snap.vectors[0], expected)
        record = snap.records[0]
        assert record.id == "golden-0"
        assert record.class_label == "leaf-spot"
        assert record.modality == "image"

    def test_every_single_byte_header_corruption_is_detected(self, tmp_path):
        original = (GOLDEN_DIR / VECTORS_NAME).read_bytes()
        target = tmp_path / VECTORS_NAME
        for offset in range(20):
            for bit in range(8):
                corrupt = bytearray(original)
                corrupt[offset] ^= 1 << bit
                target.write_bytes(bytes(corrupt))
                with pytest.raises((BadMagic, TruncatedFile)):
                    read_vector_block(target)


class TestReadVectorBlock:
    def test_bad_magic(self, tmp_path):
        path = tmp_path / VECTORS_NAME
        path.write_bytes(b"NOTMAGIC" + HEADER.pack(MAGIC, 1, 0)[8:])
        with pytest.raises(BadMagic):
            read_vector_block(path)

    def test_short_file(self, tmp_path):
        path = tmp_path / VECTORS_NAME
        path.write_bytes(b"PWVEC0")
        with pytest.raises(BadMagic):
            read_vector_block(path)

    def test_truncated_payload(self, written_gallery):
        gallery_dir, _, _ = written_gallery
        path = gallery_dir / VECTORS_NAME
        data = path.read_bytes()
        path.write_bytes(data[:-4])
        with pytest.raises(TruncatedFile):
            read_vector_block(path)

    def test_trailing_garbage(self, written_gallery):
        gallery_dir, _, _ = written_gallery
        path = gallery_dir / VECTORS_NAME
        path.write_bytes(path.read_bytes() + b"\x00")
        with pytest.raises(TruncatedFile):
            read_vector_block(path)

    def test_count_overstates_rows(self, tmp_path):
        # header claims 10 rows, payload holds 9
        path = tmp_path / VECTORS_NAME
        payload = np.arange(9 * 4, dtype="<f4").tobytes()
        path.write_bytes(HEADER.pack(MAGIC, 4, 10) + payload)
        with pytest.raises(TruncatedFile):
            read_vector_block(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(IoFailure):
            read_vector_block(tmp_path / "absent.bin")


class TestLoadGalleryManifest:
    def test_missing_manifest_row(self, written_gallery):
        gallery_dir, _, _ = written_gallery
        path = gallery_dir / MANIFEST_NAME
        lines = path.read_text().splitlines()
        path.write_text("\n".join(lines[:-1]) + "\n")
        with pytest.raises(ManifestGap):
            load_gallery(gallery_dir)

    def test_duplicate_manifest_row(self, written_gallery):
        gallery_dir, _, _ = written_gallery
        path = gallery_dir / MANIFEST_NAME
        lines = path.read_text().splitlines()
        lines[-1] = lines[0]
        path.write_text("\n".join(lines) + "\n")
        with pytest.raises(ManifestGap):
            load_gallery(gallery_dir)

    def test_manifest_row_out_of_range(self, written_gallery):
        gallery_dir, _, _ = written_gallery
        path = gallery_dir / MANIFEST_NAME
        lines = path.read_text().splitlines()
        entry = json.loads(lines[-1])
        entry["row"] = 99
        lines[-1] = json.dumps(entry)
        path.write_text("\n".join(lines) + "\n")
        with pytest.raises(ManifestGap):
            load_gallery(gallery_dir)

    def test_invalid_json_line(self, written_gallery):
        gallery_dir, _, _ = written_gallery
        path = gallery_dir / MANIFEST_NAME
        path.write_text(path.read_text() + "{not json\n")
        with pytest.raises(GalleryFormatError):
            load_gallery(gallery_dir)

    def test_manifest_order_on_disk_is_row_order(self, written_gallery):
        # loading tolerates shuffled manifest lines as long as rows cover 0..n-1
        gallery_dir, records, _ = written_gallery
        path = gallery_dir / MANIFEST_NAME
        lines = path.read_text().splitlines()
        path.write_text("\n".join(reversed(lines)) + "\n")
        snap = load_gallery(gallery_dir)
        assert snap.records == tuple(records)


def _write_manifest(path: Path, entries) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for entry in entries:
            fh.write(json.dumps(entry) + "\n")


def _basic_manifest(path: Path, ids) -> None:
    _write_manifest(
        path,
        [
            {"id": i, "class": f"c{n % 2}", "modality": "image", "uri": f"file:///{i}.jpg"}
            for n, i in enumerate(ids)
        ],
    )


class TestIngestRaw:
    def test_normalizes_and_reports(self, tmp_path):
        manifest = tmp_path / "raw.jsonl"
        _basic_manifest(manifest, ["a", "b"])
        report = ingest_raw(
            manifest, [("a", [3.0, 4.0]), ("b", [0.0, 2.0])], tmp_path / "out"
        )
        assert report["count"] == 2 and report["dim"] == 2
        assert report["classes"] == {"c0": 1, "c1": 1}
        assert report["unmatched_vectors"] == 0
        snap = load_gallery(tmp_path / "out")
        assert np.allclose(snap.vectors[0], [0.6, 0.8], atol=1e-7)
        assert snap.record_by_id("b").row == 1

    def test_row_follows_manifest_line_order(self, tmp_path):
        manifest = tmp_path / "raw.jsonl"
        _write_manifest(
            manifest,
            [
                {"id": "z", "row": 7, "class": "c", "modality": "image", "uri": ""},
                {"id": "a", "row": 3, "class": "c", "modality": "image", "uri": ""},
            ],
        )
        ingest_raw(manifest, [("a", [0, 1]), ("z", [1, 0])], tmp_path / "out")
        snap = load_gallery(tmp_path / "out")
        assert [r.id for r in snap.records] == ["z", "a"]

    def test_missing_vector(self, tmp_path):
        manifest = tmp_path / "raw.jsonl"
        _basic_manifest(manifest, ["a", "b"])
        with pytest.raises(MissingVector):
            ingest_raw(manifest, [("a", [1.0, 0.0])], tmp_path / "out")

    def test_duplicate_vector_id(self, tmp_path):
        manifest = tmp_path / "raw.jsonl"
        _basic_manifest(manifest, ["a"])
        with pytest.raises(DuplicateVector):
            ingest_raw(
                manifest, [("a", [1.0, 0.0]), ("a", [0.0, 1.0])], tmp_path / "out"
            )

    def test_zero_vector_names_id(self, tmp_path):
        manifest = tmp_path / "raw.jsonl"
        _basic_manifest(manifest, ["a"])
        with pytest.raises(DegenerateVector, match="'a'"):
            ingest_raw(manifest, [("a", [0.0, 0.0])], tmp_path / "out")

    def test_ragged_vectors(self, tmp_path):
        manifest = tmp_path / "raw.jsonl"
        _basic_manifest(manifest, ["a", "b"])
        with pytest.raises(DimensionMismatch):
            ingest_raw(
                manifest, [("a", [1.0, 0.0]), ("b", [1.0, 0.0, 0.0])], tmp_path / "out"
            )

    def test_unmatched_extras_counted(self, tmp_path):
        manifest = tmp_path / "raw.jsonl"
        _basic_manifest(manifest, ["a"])
        report = ingest_raw(
            manifest, [("a", [1.0, 0.0]), ("stray", [0.0, 1.0])], tmp_path / "out"
        )
        assert report["unmatched_vectors"] == 1

    def test_empty_manifest(self, tmp_path):
        manifest = tmp_path / "raw.jsonl"
        manifest.write_text("")
        report = ingest_raw(manifest, [], tmp_path / "out")
        assert report["count"] == 0
        assert (tmp_path / "out" / VECTORS_NAME).stat().st_size == 20
