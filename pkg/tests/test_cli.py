"""Command-line tests: subcommand behavior and exit-code contract."""
from __future__ import annotations

import json

import numpy as np
import pytest

from snapdiag.cli import main
from snapdiag.service import EmbedderClient
from snapdiag.store import VECTORS_NAME

from stub_embedder import make_stub_transport, make_unreachable_transport, stub_vector


def run_cli(*args):
    return main([str(a) for a in args])


def synth_gallery(tmp_path, name="gallery", **kw):
    out = tmp_path / name
    args = {"classes": 3, "per_class": 4, "dim": 16, "noise": 0.0, "seed": 5, **kw}
    code = run_cli(
        "synth",
        "--classes", args["classes"],
        "--per-class", args["per_class"],
        "--dim", args["dim"],
        "--noise", args["noise"],
        "--seed", args["seed"],
        "--out", out,
    )
    assert code == 0
    return out


@pytest.fixture()
def stub_factory(monkeypatch):
    """Route every CLI-constructed embedder client through the protocol stub."""

    def install(dim, transport=None):
        transport = transport or make_stub_transport(dim)

        def factory(base_url, timeout=10.0):
            return EmbedderClient(base_url, timeout=timeout, transport=transport)

        monkeypatch.setattr("snapdiag.cli.EmbedderClient", factory)

    return install


class TestSynth:
    def test_creates_gallery(self, tmp_path, capsys):
        out = synth_gallery(tmp_path)
        assert (out / VECTORS_NAME).is_file()
        assert "count=12" in capsys.readouterr().out

    def test_same_seed_is_byte_identical(self, tmp_path):
        a = synth_gallery(tmp_path, "a", seed=9)
        b = synth_gallery(tmp_path, "b", seed=9)
        assert (a / VECTORS_NAME).read_bytes() == (b / VECTORS_NAME).read_bytes()

    def test_bad_counts_are_usage_errors(self, tmp_path):
        code = run_cli(
            "synth", "--classes", 0, "--per-class", 1, "--out", tmp_path / "g"
        )
        assert code == 64


class TestValidate:
    def test_valid_gallery(self, tmp_path, capsys):
        out = synth_gallery(tmp_path)
        capsys.readouterr()
        assert run_cli("validate", out) == 0
        summary = json.loads(capsys.readouterr().out)
        assert summary["count"] == 12 and summary["dim"] == 16
        assert summary["classes"] == {"class-00": 4, "class-01": 4, "class-02": 4}

    def test_corrupt_vectors_exit_2(self, tmp_path, capsys):
        out = synth_gallery(tmp_path)
        (out / VECTORS_NAME).write_bytes(b"JUNKJUNK" + b"\x00" * 16)
        assert run_cli("validate", out) == 2

    def test_missing_gallery_exit_1(self, tmp_path):
        assert run_cli("validate", tmp_path / "absent") == 1


class TestIngest:
    def _write_inputs(self, tmp_path, vectors):
        manifest = tmp_path / "manifest.jsonl"
        raw = tmp_path / "raw.jsonl"
        with open(manifest, "w") as fh:
            for vec_id in vectors:
                fh.write(json.dumps({
                    "id": vec_id, "class": "c0", "modality": "image",
                    "uri": f"file:///{vec_id}.jpg",
                }) + "\n")
        with open(raw, "w") as fh:
            for vec_id, values in vectors.items():
                fh.write(json.dumps({"id": vec_id, "vector": values}) + "\n")
        return manifest, raw

    def test_success(self, tmp_path, capsys):
        manifest, raw = self._write_inputs(
            tmp_path, {"x": [3.0, 4.0], "y": [0.0, 5.0]}
        )
        assert run_cli("ingest", manifest, raw, tmp_path / "out") == 0
        report = json.loads(capsys.readouterr().out)
        assert report["count"] == 2 and report["dim"] == 2
        assert run_cli("validate", tmp_path / "out") == 0

    def test_zero_vector_exit_2_names_id(self, tmp_path, capsys):
        manifest, raw = self._write_inputs(tmp_path, {"dead": [0.0, 0.0]})
        assert run_cli("ingest", manifest, raw, tmp_path / "out") == 2
        assert "dead" in capsys.readouterr().err

    def test_missing_manifest_exit_1(self, tmp_path):
        _, raw = self._write_inputs(tmp_path, {"x": [1.0, 0.0]})
        assert run_cli("ingest", tmp_path / "ghost.jsonl", raw, tmp_path / "out") == 1

    def test_missing_raw_file_exit_1(self, tmp_path):
        manifest, _ = self._write_inputs(tmp_path, {"x": [1.0, 0.0]})
        assert run_cli("ingest", manifest, tmp_path / "ghost.jsonl", tmp_path / "out") == 1


class TestQuery:
    def test_vector_self_match(self, tmp_path, capsys):
        gallery = synth_gallery(tmp_path)
        from snapdiag import load_gallery

        snap = load_gallery(gallery)
        vector_file = tmp_path / "q.json"
        vector_file.write_text(json.dumps([float(x) for x in snap.vectors[0]]))
        capsys.readouterr()
        assert run_cli("query", gallery, "--vector", vector_file, "--k", 3) == 0
        out = capsys.readouterr().out
        first_hit = out.splitlines()[1].split()
        assert first_hit[0] == "1"
        assert first_hit[1] == snap.records[0].id
        assert first_hit[-1] == "1.0000"
        assert "candidates:" in out

    def test_requires_exactly_one_mode(self, tmp_path):
        gallery = synth_gallery(tmp_path)
        assert run_cli("query", gallery) == 64
        assert (
            run_cli("query", gallery, "--vector", "v.json", "--text", "spots") == 64
        )

    def test_text_without_embedder_is_usage_error(self, tmp_path):
        gallery = synth_gallery(tmp_path)
        assert run_cli("query", gallery, "--text", "yellow spots") == 64

    def test_wrong_dim_vector_exit_2(self, tmp_path):
        gallery = synth_gallery(tmp_path)
        vector_file = tmp_path / "q.json"
        vector_file.write_text("[1.0, 0.0]")
        assert run_cli("query", gallery, "--vector", vector_file) == 2

    def test_text_query_matches_vector_query(self, tmp_path, capsys, stub_factory):
        gallery = synth_gallery(tmp_path)
        stub_factory(16)
        capsys.readouterr()
        assert run_cli(
            "query", gallery, "--text", "rust spores", "--embedder", "http://stub"
        ) == 0
        text_output = capsys.readouterr().out

        vector_file = tmp_path / "q.json"
        vector = stub_vector("rust spores".encode(), 16)
        vector_file.write_text(json.dumps([float(x) for x in vector]))
        assert run_cli("query", gallery, "--vector", vector_file) == 0
        assert capsys.readouterr().out == text_output

    def test_image_query_matches_vector_query(self, tmp_path, capsys, stub_factory):
        gallery = synth_gallery(tmp_path)
        stub_factory(16)
        photo = tmp_path / "photo.jpg"
        photo.write_bytes(b"\xff\xd8\xff\xe0leafy-bytes")
        capsys.readouterr()
        assert run_cli(
            "query", gallery, "--image", photo, "--embedder", "http://stub"
        ) == 0
        image_output = capsys.readouterr().out

        vector_file = tmp_path / "q.json"
        vector = stub_vector(photo.read_bytes(), 16)
        vector_file.write_text(json.dumps([float(x) for x in vector]))
        assert run_cli("query", gallery, "--vector", vector_file) == 0
        assert capsys.readouterr().out == image_output

    def test_embedder_down_exit_2(self, tmp_path, stub_factory):
        gallery = synth_gallery(tmp_path)
        stub_factory(16, transport=make_unreachable_transport())
        code = run_cli(
            "query", gallery, "--text", "spots", "--embedder", "http://stub"
        )
        assert code == 2


class TestEvaluate:
    def test_leave_one_out_on_separable_gallery(self, tmp_path, capsys):
        gallery = synth_gallery(tmp_path)  # noise 0: classes perfectly separable
        out_file = tmp_path / "report.json"
        capsys.readouterr()
        assert run_cli("evaluate", gallery, "--out", out_file) == 0
        output = capsys.readouterr().out
        lines = output.splitlines()
        assert lines[0].startswith("queries=12 gallery=12 skipped=0")
        assert lines[1].split() == ["Top-1", "Top-5", "Top-10", "mAP"]
        assert lines[2].split() == ["100.00", "100.00", "100.00", "100.00"]
        report = json.loads(out_file.read_text())
        assert report["mean_ap"] == 100.0
        assert report["protocol"] == "leave_one_out"

    def test_held_out_defaults_with_queries(self, tmp_path, capsys):
        gallery = synth_gallery(tmp_path, "g")
        queries = synth_gallery(tmp_path, "q", noise=0.01, seed=6)
        assert run_cli("evaluate", gallery, "--queries", queries) == 0
        assert "protocol=held_out" in capsys.readouterr().out

    def test_held_out_without_queries_is_usage_error(self, tmp_path):
        gallery = synth_gallery(tmp_path)
        assert run_cli("evaluate", gallery, "--protocol", "held_out") == 64

    def test_single_class_gallery_reports_without_skips(self, tmp_path, capsys):
        gallery = synth_gallery(tmp_path, classes=1, per_class=5)
        capsys.readouterr()
        assert run_cli("evaluate", gallery, "--k", "1") == 0
        output = capsys.readouterr().out
        assert "skipped=0" in output
        assert output.splitlines()[1].split() == ["Top-1", "mAP"]

    def test_empty_gallery_exit_2(self, tmp_path):
        from snapdiag import write_gallery

        out = tmp_path / "empty"
        write_gallery([], np.zeros((0, 4), dtype=np.float32), out)
        assert run_cli("evaluate", out) == 2

    def test_bad_k_list_is_usage_error(self, tmp_path):
        gallery = synth_gallery(tmp_path)
        assert run_cli("evaluate", gallery, "--k", "five") == 64
        assert run_cli("evaluate", gallery, "--k", "0") == 64
        assert run_cli("evaluate", gallery, "--k", "5,1") == 64


class TestExitCodes:
    def test_help_exits_zero(self):
        assert run_cli("--help") == 0

    def test_unknown_subcommand_is_usage_error(self):
        assert run_cli("frobnicate") == 64

    def test_missing_required_argument_is_usage_error(self):
        assert run_cli("validate") == 64

    def test_serve_with_inconsistent_k_is_usage_error(self, tmp_path):
        gallery = synth_gallery(tmp_path)
        code = run_cli(
            "serve", "--gallery", gallery, "--default-k", 10, "--max-k", 5
        )
        assert code == 64
