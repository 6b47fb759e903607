"""Operator command line: ingest, validate, serve, query, evaluate, synth.

Exit codes: 0 success, 1 environment/IO problem, 2 validation or data
problem, 64 usage error. All tables are line-oriented and stable so they
can be scripted against.
"""
from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from .core import aggregate_candidates, normalize
from .errors import GalleryFormatError, IoFailure, SnapdiagError
from .evaluate import (
    HELD_OUT,
    LEAVE_ONE_OUT,
    EvalConfig,
    evaluate,
    queries_from_snapshot,
)
from .index import QuerySpec, search
from .service import EmbedderClient, embed_remote, load_config, serve
from .store import ingest_raw, load_gallery, write_gallery
from .synth import generate_gallery

EXIT_OK = 0
EXIT_ENV = 1
EXIT_DATA = 2
EXIT_USAGE = 64


@click.group()
def cli() -> None:
    """Cross-modal disease-image retrieval toolkit."""


def _iter_raw_vectors(path: Path):
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                entry = json.loads(line)
                yield str(entry["id"]), entry["vector"]
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise GalleryFormatError(f"{path} line {line_no}: {exc}") from exc


@cli.command()
@click.argument("manifest", type=click.Path(path_type=Path))
@click.argument("raw", type=click.Path(path_type=Path))
@click.argument("out", type=click.Path(path_type=Path))
def ingest(manifest: Path, raw: Path, out: Path) -> None:
    """Normalize raw embeddings (JSONL of {"id", "vector"}) into a gallery."""
    if not raw.is_file():
        raise IoFailure(f"raw vector file not found: {raw}")
    report = ingest_raw(manifest, _iter_raw_vectors(raw), out)
    click.echo(json.dumps(report, indent=2, sort_keys=True))


@cli.command()
@click.argument("gallery", type=click.Path(path_type=Path))
def validate(gallery: Path) -> None:
    """Load a gallery directory and print its validation summary."""
    snapshot = load_gallery(gallery)
    summary = {
        "gallery_dir": str(gallery),
        "count": snapshot.count,
        "dim": snapshot.dim,
        "classes": snapshot.class_counts(),
    }
    click.echo(json.dumps(summary, indent=2, sort_keys=True))


@cli.command(name="serve")
@click.option("--gallery", type=click.Path(path_type=Path), help="Gallery directory.")
@click.option("--listen", default=None, help="host:port to bind (default 127.0.0.1:8000).")
@click.option("--config", "config_file", type=click.Path(path_type=Path), default=None,
              help="JSON config file mirroring the service settings.")
@click.option("--embedder-url", default=None, help="Base URL of the embedder sidecar.")
@click.option("--default-k", type=int, default=None)
@click.option("--max-k", type=int, default=None)
@click.option("--timeout", "request_timeout", type=float, default=None,
              help="Embedder request timeout in seconds.")
@click.option("--max-upload-bytes", type=int, default=None)
@click.option("--static-dir", type=click.Path(path_type=Path), default=None,
              help="Serve a built web UI from this directory at /.")
def serve_cmd(gallery, listen, config_file, embedder_url, default_k, max_k,
              request_timeout, max_upload_bytes, static_dir) -> None:
    """Run the retrieval HTTP service over a gallery."""
    try:
        config = load_config(
            config_file=config_file,
            gallery_dir=gallery,
            listen_address=listen,
            embedder_url=embedder_url,
            default_k=default_k,
            max_k=max_k,
            request_timeout=request_timeout,
            max_upload_bytes=max_upload_bytes,
            static_dir=static_dir,
        )
    except ValueError as exc:
        raise click.UsageError(str(exc)) from exc
    serve(config)


def _load_query_vector(path: Path) -> list[float]:
    payload = json.loads(path.read_text(encoding="utf-8"))
    if isinstance(payload, dict):
        payload = payload.get("vector")
    if not isinstance(payload, list):
        raise GalleryFormatError(f"{path}: expected a JSON array or an object with 'vector'")
    return payload


def _print_hits(hits, candidates) -> None:
    click.echo(f"{'rank':>4}  {'id':<24} {'class':<20} score")
    for hit in hits:
        click.echo(f"{hit.rank:>4}  {hit.record_id:<24} {hit.class_label:<20} {hit.score:.4f}")
    click.echo("candidates:")
    for cand in candidates:
        click.echo(f"  {cand.class_label:<20} {cand.score:.4f} support={cand.support}")


@cli.command()
@click.argument("gallery", type=click.Path(path_type=Path))
@click.option("--vector", "vector_file", type=click.Path(path_type=Path), default=None,
              help="JSON file holding the query vector.")
@click.option("--text", default=None, help="Textual symptom query (needs --embedder).")
@click.option("--image", "image_file", type=click.Path(path_type=Path), default=None,
              help="Image file query (needs --embedder).")
@click.option("--k", type=int, default=10, show_default=True)
@click.option("--embedder", "embedder_url", default=None, help="Embedder sidecar base URL.")
def query(gallery: Path, vector_file, text, image_file, k, embedder_url) -> None:
    """Run one ad-hoc query against a gallery and print the ranked hits."""
    modes = [m for m in (vector_file, text, image_file) if m is not None]
    if len(modes) != 1:
        raise click.UsageError("exactly one of --vector, --text, --image is required")
    if (text is not None or image_file is not None) and not embedder_url:
        raise click.UsageError("--text and --image require --embedder URL")

    snapshot = load_gallery(gallery)
    if vector_file is not None:
        unit = normalize(_load_query_vector(vector_file), snapshot.dim)
    else:
        client = EmbedderClient(embedder_url)
        try:
            if text is not None:
                unit = embed_remote(client, "text", text.strip(), snapshot.dim)
            else:
                data = Path(image_file).read_bytes()
                content_type = "image/png" if data[:8].startswith(b"\x89PNG") else "image/jpeg"
                unit = embed_remote(client, "image", data, snapshot.dim, content_type)
        finally:
            client.close()

    hits = search(snapshot, QuerySpec(vector=unit, k=k))
    _print_hits(hits, aggregate_candidates(hits))


@cli.command(name="evaluate")
@click.argument("gallery", type=click.Path(path_type=Path))
@click.option("--queries", "queries_dir", type=click.Path(path_type=Path), default=None,
              help="Query-set gallery directory; omitted = leave-one-out over GALLERY.")
@click.option("--k", "k_spec", default="1,5,10", show_default=True,
              help="Comma-separated k values for Top-k accuracy.")
@click.option("--protocol", type=click.Choice([LEAVE_ONE_OUT, HELD_OUT]), default=None,
              help="Default: leave_one_out without --queries, held_out with it.")
@click.option("--ap-cutoff", type=int, default=None,
              help="Truncate the ranking for AP at this depth (default full).")
@click.option("--modality", "modality_filter", type=click.Choice(["image", "text"]),
              default=None, help="Restrict gallery candidates to one modality.")
@click.option("--out", "out_file", type=click.Path(path_type=Path), default=None,
              help="Also write the report as JSON to this path.")
def evaluate_cmd(gallery, queries_dir, k_spec, protocol, ap_cutoff, modality_filter, out_file):
    """Compute Top-k accuracy and mAP for a gallery (and optional query set)."""
    try:
        k_values = tuple(int(part) for part in k_spec.split(",") if part.strip())
    except ValueError as exc:
        raise click.UsageError(f"bad --k list {k_spec!r}: {exc}") from exc
    if protocol is None:
        protocol = HELD_OUT if queries_dir is not None else LEAVE_ONE_OUT
    if protocol == HELD_OUT and queries_dir is None:
        raise click.UsageError("--protocol held_out requires --queries")

    snapshot = load_gallery(gallery)
    if queries_dir is not None:
        queries = queries_from_snapshot(load_gallery(queries_dir))
    else:
        queries = queries_from_snapshot(snapshot)

    try:
        config = EvalConfig(
            k_values=k_values,
            protocol=protocol,
            ap_cutoff=ap_cutoff,
            modality_filter=modality_filter,
        )
    except ValueError as exc:
        raise click.UsageError(str(exc)) from exc
    report = evaluate(snapshot, queries, config)
    click.echo(report.format_table())
    if out_file is not None:
        Path(out_file).write_text(
            json.dumps(report.to_dict(), indent=2, sort_keys=True), encoding="utf-8"
        )


@cli.command()
@click.option("--classes", type=int, required=True)
@click.option("--per-class", type=int, required=True)
@click.option("--dim", type=int, default=512, show_default=True)
@click.option("--noise", type=float, default=0.05, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", "out_dir", type=click.Path(path_type=Path), required=True)
def synth(classes, per_class, dim, noise, seed, out_dir) -> None:
    """Generate a reproducible clustered synthetic gallery."""
    try:
        records, vectors = generate_gallery(classes, per_class, dim, noise, seed)
    except ValueError as exc:
        raise click.UsageError(str(exc)) from exc
    write_gallery(records, vectors, out_dir)
    click.echo(
        f"gallery_dir={out_dir} count={len(records)} classes={classes} dim={dim} "
        f"noise={noise} seed={seed}"
    )


def main(argv: list[str] | None = None) -> int:
    """Run the CLI, mapping failures to the documented exit codes."""
    try:
        cli.main(args=argv, standalone_mode=False)
    except click.exceptions.Exit as exc:
        return int(exc.exit_code)
    except click.UsageError as exc:
        click.echo(f"usage error: {exc.format_message()}", err=True)
        return EXIT_USAGE
    except click.ClickException as exc:
        exc.show()
        return EXIT_DATA
    except click.Abort:
        return EXIT_ENV
    except IoFailure as exc:
        click.echo(f"error: {exc}", err=True)
        return EXIT_ENV
    except SnapdiagError as exc:
        click.echo(f"error: {exc}", err=True)
        return EXIT_DATA
    except OSError as exc:
        click.echo(f"error: {exc}", err=True)
        return EXIT_ENV
    return EXIT_OK


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
