"""The embedder HTTP protocol: /embed/text, /embed/image, /health."""
from __future__ import annotations

from dataclasses import dataclass

from fastapi import FastAPI, File, UploadFile
from fastapi.responses import JSONResponse

from .encoders import ModelEncoder, StubEncoder, UndecodableImage

MODES = ("stub", "model")


@dataclass(frozen=True)
class EmbedderConfig:
    mode: str = "stub"
    dim: int = 512
    model_name: str = "openai/clip-vit-base-patch32"
    projection_head: str | None = None
    host: str = "127.0.0.1"
    port: int = 8800

    def __post_init__(self) -> None:
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.dim < 1:
            raise ValueError(f"dim must be positive, got {self.dim}")


def build_encoder(config: EmbedderConfig):
    if config.mode == "stub":
        return StubEncoder(config.dim)
    return ModelEncoder(config.model_name, config.dim, config.projection_head)


def _error(status: int, code: str, message: str) -> JSONResponse:
    return JSONResponse(status_code=status, content={"error": code, "message": message})


def create_app(config: EmbedderConfig) -> FastAPI:
    encoder = build_encoder(config)
    app = FastAPI(title="snapdiag embedder")

    def _respond(vector: list[float]) -> dict:
        return {"vector": vector, "dim": config.dim, "model": encoder.name}

    @app.get("/health")
    def health():
        return {"status": "ok", "mode": config.mode, "dim": config.dim, "model": encoder.name}

    @app.post("/embed/text")
    def embed_text(body: dict):
        text = body.get("text") if isinstance(body, dict) else None
        if not isinstance(text, str) or not text.strip():
            return _error(400, "empty_text", "body must be {\"text\": non-empty string}")
        return _respond(encoder.embed_text(text))

    @app.post("/embed/image")
    def embed_image(file: UploadFile = File(...)):
        data = file.file.read()
        try:
            return _respond(encoder.embed_image(data))
        except UndecodableImage as exc:
            return _error(415, "undecodable_image", str(exc))

    return app


def serve(config: EmbedderConfig) -> None:
    import uvicorn

    app = create_app(config)
    uvicorn.run(app, host=config.host, port=config.port, log_level="info")
