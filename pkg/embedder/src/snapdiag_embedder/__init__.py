"""Embedding sidecar for the snapdiag retrieval service."""
from .encoders import (
    ModelEncoder,
    StubEncoder,
    UndecodableImage,
    apply_projection,
    load_projection,
    sniff_image_format,
)
from .service import EmbedderConfig, build_encoder, create_app, serve

__all__ = [
    "EmbedderConfig",
    "ModelEncoder",
    "StubEncoder",
    "UndecodableImage",
    "apply_projection",
    "build_encoder",
    "create_app",
    "load_projection",
    "serve",
    "sniff_image_format",
]
