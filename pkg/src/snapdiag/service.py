"""HTTP retrieval service: vector, text, and image queries over one gallery.

The gallery snapshot is loaded once at startup and shared read-only by all
request handlers; an admin reload swaps in a freshly loaded snapshot
atomically while in-flight queries finish on the old one. Raw text/image
queries are embedded by an external sidecar spoken to over a fixed HTTP
protocol; the engine itself stays model-free.
"""
from __future__ import annotations

import json
import math
import os
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping

import httpx
import numpy as np
from fastapi import FastAPI, File, Request, UploadFile
from fastapi.exceptions import RequestValidationError
from fastapi.responses import FileResponse, JSONResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from .core import aggregate_candidates, normalize
from .errors import (
    DegenerateVector,
    DimensionMismatch,
    EmbedderProtocolError,
    EmbedderUnavailable,
    SnapdiagError,
)
from .index import IndexSnapshot, QuerySpec, search
from .store import load_gallery

ENV_PREFIX = "SNAPDIAG_"
ALLOWED_IMAGE_TYPES = ("image/jpeg", "image/png")


@dataclass(frozen=True)
class ServiceConfig:
    """Runtime configuration for the retrieval service."""

    gallery_dir: Path
    host: str = "127.0.0.1"
    port: int = 8000
    default_k: int = 10
    max_k: int = 100
    embedder_url: str | None = None
    request_timeout: float = 10.0
    max_upload_bytes: int = 10 * 1024 * 1024
    static_dir: Path | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "gallery_dir", Path(self.gallery_dir))
        if self.static_dir is not None:
            object.__setattr__(self, "static_dir", Path(self.static_dir))
        if not (1 <= self.default_k <= self.max_k):
            raise ValueError(
                f"need 1 <= default_k <= max_k, got default_k={self.default_k} max_k={self.max_k}"
            )
        if self.max_upload_bytes < 1:
            raise ValueError("max_upload_bytes must be positive")

    @property
    def listen_address(self) -> str:
        return f"{self.host}:{self.port}"


def _parse_listen(value: str) -> tuple[str, int]:
    host, _, port = value.rpartition(":")
    if not host or not port.isdigit():
        raise ValueError(f"listen address must be host:port, got {value!r}")
    return host, int(port)


def load_config(
    config_file: str | Path | None = None,
    env: Mapping[str, str] = os.environ,
    **overrides,
) -> ServiceConfig:
    """Resolve a ServiceConfig from file, SNAPDIAG_* environment, and flags.

    Precedence (lowest to highest): built-in defaults, config file, environment
    variables, explicit overrides. Overrides with value None are ignored.
    """
    values: dict = {}
    if config_file is not None:
        raw = json.loads(Path(config_file).read_text(encoding="utf-8"))
        values.update(raw)

    env_fields = {
        "GALLERY_DIR": "gallery_dir",
        "LISTEN_ADDRESS": "listen_address",
        "DEFAULT_K": "default_k",
        "MAX_K": "max_k",
        "EMBEDDER_URL": "embedder_url",
        "REQUEST_TIMEOUT": "request_timeout",
        "MAX_UPLOAD_BYTES": "max_upload_bytes",
        "STATIC_DIR": "static_dir",
    }
    for suffix, field_name in env_fields.items():
        raw_value = env.get(ENV_PREFIX + suffix)
        if raw_value is not None:
            values[field_name] = raw_value

    values.update({k: v for k, v in overrides.items() if v is not None})

    if "listen_address" in values:
        host, port = _parse_listen(str(values.pop("listen_address")))
        values["host"] = host
        values["port"] = port
    for int_field in ("port", "default_k", "max_k", "max_upload_bytes"):
        if int_field in values:
            values[int_field] = int(values[int_field])
    if "request_timeout" in values:
        values["request_timeout"] = float(values["request_timeout"])
    if "gallery_dir" not in values:
        raise ValueError("gallery_dir is required (flag, config file, or SNAPDIAG_GALLERY_DIR)")
    return ServiceConfig(**values)


class EmbedderClient:
    """HTTP client for the embedder sidecar protocol.

    A custom httpx transport can be injected to replay the protocol against
    an in-process stub in tests.
    """

    def __init__(
        self,
        base_url: str,
        timeout: float = 10.0,
        transport: httpx.BaseTransport | None = None,
    ):
        self._client = httpx.Client(
            base_url=base_url, timeout=timeout, transport=transport
        )

    def close(self) -> None:
        self._client.close()

    def embed(self, kind: str, payload: bytes | str, content_type: str | None = None) -> dict:
        """POST to /embed/text or /embed/image and return the decoded body."""
        try:
            if kind == "text":
                response = self._client.post("/embed/text", json={"text": payload})
            elif kind == "image":
                response = self._client.post(
                    "/embed/image",
                    files={"file": ("query", payload, content_type or "application/octet-stream")},
                )
            else:
                raise ValueError(f"unknown embed kind {kind!r}")
        except httpx.HTTPError as exc:
            raise EmbedderUnavailable(f"embedder request failed: {exc}") from exc
        if response.status_code != 200:
            raise EmbedderProtocolError(
                f"embedder returned HTTP {response.status_code}: {response.text[:200]}"
            )
        try:
            return response.json()
        except ValueError as exc:
            raise EmbedderProtocolError(f"embedder returned non-JSON body: {exc}") from exc


def embed_remote(
    client: EmbedderClient,
    kind: str,
    payload: bytes | str,
    expected_dim: int,
    content_type: str | None = None,
) -> np.ndarray:
    """Embed text or image bytes via the sidecar and validate the result.

    The response must be {"vector": [...], "dim": D, "model": str} with
    D == expected_dim and finite components; the vector is defensively
    re-normalized before use.
    """
    body = client.embed(kind, payload, content_type)
    if not isinstance(body, dict) or "vector" not in body or "dim" not in body:
        raise EmbedderProtocolError(f"embedder response missing vector/dim: {body!r:.200}")
    vector = body["vector"]
    dim = body["dim"]
    if not isinstance(vector, list) or dim != expected_dim or len(vector) != expected_dim:
        raise EmbedderProtocolError(
            f"embedder returned dim {dim} (vector length {len(vector) if isinstance(vector, list) else '?'}), "
            f"gallery needs {expected_dim}"
        )
    if not all(isinstance(x, (int, float)) and math.isfinite(x) for x in vector):
        raise EmbedderProtocolError("embedder returned non-finite vector components")
    try:
        return normalize(vector, expected_dim)
    except DegenerateVector as exc:
        raise EmbedderProtocolError(f"embedder returned a zero-norm vector: {exc}") from exc


class RetrievalEngine:
    """Shared service state: config, current snapshot, embedder client."""

    def __init__(self, config: ServiceConfig, embedder_client: EmbedderClient | None = None):
        self.config = config
        self._snapshot = load_gallery(config.gallery_dir)
        self._reload_lock = threading.Lock()
        if embedder_client is not None:
            self.embedder = embedder_client
        elif config.embedder_url:
            self.embedder = EmbedderClient(config.embedder_url, timeout=config.request_timeout)
        else:
            self.embedder = None

    @property
    def snapshot(self) -> IndexSnapshot:
        return self._snapshot

    def reload(self) -> IndexSnapshot:
        """Atomically replace the snapshot from the gallery directory."""
        with self._reload_lock:
            fresh = load_gallery(self.config.gallery_dir)
            self._snapshot = fresh
            return fresh

    def execute_unit_query(
        self,
        unit_vector: np.ndarray,
        k: int | None,
        class_filter: list[str] | None = None,
        embed_ms: float | None = None,
    ) -> dict:
        """Search with an already-normalized vector and shape the response."""
        snapshot = self._snapshot
        if k is None:
            k = self.config.default_k
        spec = QuerySpec(
            vector=unit_vector,
            k=k,
            class_filter=frozenset(class_filter) if class_filter else None,
        )
        start = time.perf_counter()
        hits = search(snapshot, spec)
        search_ms = (time.perf_counter() - start) * 1000.0
        candidates = aggregate_candidates(hits)
        results = []
        for hit in hits:
            record = snapshot.record_by_id(hit.record_id)
            results.append(
                {
                    "id": hit.record_id,
                    "class": hit.class_label,
                    "score": round(hit.score, 4),
                    "uri": record.uri,
                    "rank": hit.rank,
                    "caption": record.caption,
                }
            )
        timing = {"search_ms": round(search_ms, 3)}
        if embed_ms is not None:
            timing["embed_ms"] = round(embed_ms, 3)
        return {
            "results": results,
            "candidates": [
                {"class": c.class_label, "score": round(c.score, 4), "support": c.support}
                for c in candidates
            ],
            "timing": timing,
            "gallery_count": snapshot.count,
        }


class VectorQueryBody(BaseModel):
    vector: list[float]
    k: int | None = None
    class_filter: list[str] | None = None


class TextQueryBody(BaseModel):
    text: str
    k: int | None = None


def _error(status: int, code: str, message: str, retriable: bool = False) -> JSONResponse:
    return JSONResponse(
        status_code=status,
        content={"error": code, "message": message, "retriable": retriable},
    )


def create_app(
    config: ServiceConfig, embedder_client: EmbedderClient | None = None
) -> FastAPI:
    """Build the service app; loading the gallery happens here, eagerly."""
    engine = RetrievalEngine(config, embedder_client)
    app = FastAPI(title="snapdiag retrieval service")
    app.state.engine = engine

    @app.exception_handler(RequestValidationError)
    async def handle_validation(request: Request, exc: RequestValidationError):
        return _error(400, "bad_request", str(exc.errors()[:3]))

    @app.exception_handler(DimensionMismatch)
    async def handle_dim(request: Request, exc: DimensionMismatch):
        return _error(400, "dimension_mismatch", str(exc))

    @app.exception_handler(DegenerateVector)
    async def handle_degenerate(request: Request, exc: DegenerateVector):
        return _error(422, "degenerate_vector", str(exc))

    @app.exception_handler(EmbedderUnavailable)
    async def handle_embedder_down(request: Request, exc: EmbedderUnavailable):
        return _error(503, "embedder_unavailable", str(exc), retriable=True)

    @app.exception_handler(EmbedderProtocolError)
    async def handle_embedder_protocol(request: Request, exc: EmbedderProtocolError):
        return _error(502, "embedder_protocol_error", str(exc))

    @app.exception_handler(SnapdiagError)
    async def handle_domain(request: Request, exc: SnapdiagError):
        return _error(500, "internal_error", str(exc))

    def _check_k(k: int | None) -> JSONResponse | None:
        if k is None:
            return None
        if k < 0:
            return _error(400, "bad_request", f"k must be >= 0, got {k}")
        if k > config.max_k:
            return _error(400, "k_too_large", f"k={k} exceeds max_k={config.max_k}")
        return None

    @app.get("/api/health")
    def health():
        snapshot = engine.snapshot
        return {
            "status": "ok",
            "gallery_size": snapshot.count,
            "dim": snapshot.dim,
            "default_k": config.default_k,
            "max_k": config.max_k,
        }

    @app.get("/api/classes")
    def classes():
        counts = engine.snapshot.class_counts()
        return {"classes": [{"label": label, "count": n} for label, n in counts.items()]}

    @app.post("/api/query/vector")
    def query_vector(body: VectorQueryBody):
        bad_k = _check_k(body.k)
        if bad_k is not None:
            return bad_k
        snapshot = engine.snapshot
        if len(body.vector) != snapshot.dim:
            raise DimensionMismatch(snapshot.dim, len(body.vector), "query vector")
        unit = normalize(body.vector, snapshot.dim)
        return engine.execute_unit_query(unit, body.k, body.class_filter)

    def _require_embedder() -> EmbedderClient:
        if engine.embedder is None:
            raise EmbedderUnavailable("no embedder configured (set embedder_url)")
        return engine.embedder

    @app.post("/api/query/text")
    def query_text(body: TextQueryBody):
        bad_k = _check_k(body.k)
        if bad_k is not None:
            return bad_k
        text = body.text.strip()
        if not text:
            return _error(400, "empty_text", "text must be non-empty")
        client = _require_embedder()
        start = time.perf_counter()
        unit = embed_remote(client, "text", text, engine.snapshot.dim)
        embed_ms = (time.perf_counter() - start) * 1000.0
        return engine.execute_unit_query(unit, body.k, embed_ms=embed_ms)

    @app.post("/api/query/image")
    def query_image(file: UploadFile = File(...), k: int | None = None):
        bad_k = _check_k(k)
        if bad_k is not None:
            return bad_k
        if file.content_type not in ALLOWED_IMAGE_TYPES:
            return _error(
                415,
                "unsupported_media_type",
                f"content type {file.content_type!r} not in {list(ALLOWED_IMAGE_TYPES)}",
            )
        data = file.file.read(config.max_upload_bytes + 1)
        if len(data) > config.max_upload_bytes:
            return _error(
                413,
                "payload_too_large",
                f"upload exceeds max_upload_bytes={config.max_upload_bytes}",
            )
        client = _require_embedder()
        start = time.perf_counter()
        unit = embed_remote(client, "image", data, engine.snapshot.dim, file.content_type)
        embed_ms = (time.perf_counter() - start) * 1000.0
        return engine.execute_unit_query(unit, k, embed_ms=embed_ms)

    @app.get("/api/image/{record_id}")
    def image_asset(record_id: str):
        record = engine.snapshot.record_by_id(record_id)
        if record is None:
            return _error(404, "not_found", f"no record with id {record_id!r}")
        uri = record.uri
        if uri.startswith("file://"):
            uri = uri[len("file://"):]
        path = Path(uri)
        if not path.is_absolute():
            path = engine.config.gallery_dir / path
        if not path.is_file():
            return _error(404, "not_found", f"no local asset for record {record_id!r}")
        return FileResponse(path)

    @app.post("/api/admin/reload")
    def admin_reload():
        try:
            fresh = engine.reload()
        except SnapdiagError as exc:
            return _error(500, "reload_failed", str(exc))
        return {"status": "ok", "gallery_size": fresh.count}

    if config.static_dir is not None:
        app.mount("/", StaticFiles(directory=config.static_dir, html=True), name="ui")

    return app


def serve(config: ServiceConfig) -> None:
    """Run the service until interrupted. Fails fast on an unloadable gallery."""
    import uvicorn

    app = create_app(config)
    uvicorn.run(app, host=config.host, port=config.port, log_level="info")
