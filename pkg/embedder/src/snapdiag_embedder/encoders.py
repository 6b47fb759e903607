"""Text/image encoders behind one interface.

Two implementations: a stub that derives a deterministic unit vector from a
content hash (no model dependencies, instant startup), and a real encoder
that wraps a pretrained CLIP-style model with an optional projection head.
Both guarantee: output length == dim, all components finite, L2 norm within
1e-3 of 1.
"""
from __future__ import annotations

import hashlib
import io
from pathlib import Path

import numpy as np

JPEG_MAGIC = b"\xff\xd8\xff"
PNG_MAGIC = b"\x89PNG\r\n\x1a\n"


class UndecodableImage(ValueError):
    """Payload is not a decodable JPEG or PNG."""


def sniff_image_format(data: bytes) -> str:
    """Return 'jpeg' or 'png' from the payload's magic bytes.

    Raises UndecodableImage for anything else, including truncated headers.
    """
    if data.startswith(JPEG_MAGIC):
        return "jpeg"
    if data.startswith(PNG_MAGIC):
        return "png"
    raise UndecodableImage("payload is neither JPEG nor PNG")


def _unit(vector: np.ndarray) -> list[float]:
    vector = np.asarray(vector, dtype=np.float64).reshape(-1)
    norm = float(np.linalg.norm(vector))
    if not np.isfinite(norm) or norm < 1e-12:
        raise ValueError("encoder produced a degenerate vector")
    return [float(x) for x in vector / norm]


class StubEncoder:
    """Content-hash encoder: identical input bytes, identical unit vector.

    The hash seeds a named PRNG, so vectors are stable across processes and
    platforms — good enough to exercise the full retrieval pipeline without
    any model weights.
    """

    name = "stub"

    def __init__(self, dim: int):
        self.dim = dim

    def _from_bytes(self, payload: bytes) -> list[float]:
        seed = int.from_bytes(hashlib.sha256(payload).digest()[:8], "big")
        rng = np.random.default_rng(seed)
        return _unit(rng.standard_normal(self.dim))

    def embed_text(self, text: str) -> list[float]:
        return self._from_bytes(text.encode("utf-8"))

    def embed_image(self, data: bytes) -> list[float]:
        sniff_image_format(data)
        return self._from_bytes(data)


def load_projection(path: str | Path) -> list[tuple[np.ndarray, np.ndarray]]:
    """Load an MLP projection head from an .npz of w0,b0,w1,b1,...

    Layers are applied in index order as x @ w + b with ReLU between layers
    and none after the last.
    """
    archive = np.load(Path(path))
    layers = []
    for i in range(len(archive.files) // 2):
        layers.append((archive[f"w{i}"], archive[f"b{i}"]))
    if not layers:
        raise ValueError(f"{path}: no w0/b0 arrays found")
    return layers


def apply_projection(features: np.ndarray, layers) -> np.ndarray:
    x = np.asarray(features, dtype=np.float64)
    for i, (w, b) in enumerate(layers):
        x = x @ w + b
        if i < len(layers) - 1:
            x = np.maximum(x, 0.0)
    return x


class ModelEncoder:
    """Pretrained CLIP-style encoder plus optional projection head.

    Heavy dependencies (torch, transformers, pillow) are imported on first
    construction so stub deployments never pay for them. Weights load once
    and are used read-only.
    """

    def __init__(self, model_name: str, dim: int, projection_head: str | Path | None = None):
        try:
            import torch  # noqa: F401
            from PIL import Image  # noqa: F401
            from transformers import CLIPModel, CLIPProcessor
        except ImportError as exc:
            raise RuntimeError(
                "model mode needs the optional dependencies: "
                "pip install 'snapdiag-embedder[model]'"
            ) from exc
        self.name = model_name
        self.dim = dim
        self._model = CLIPModel.from_pretrained(model_name)
        self._model.eval()
        self._processor = CLIPProcessor.from_pretrained(model_name)
        self._projection = load_projection(projection_head) if projection_head else None

    def _finish(self, features: np.ndarray) -> list[float]:
        if self._projection is not None:
            features = apply_projection(features, self._projection)
        if features.shape[-1] != self.dim:
            raise ValueError(
                f"encoder produced dim {features.shape[-1]}, configured dim is {self.dim}"
                + ("" if self._projection else " (a projection head may be required)")
            )
        return _unit(features)

    def embed_text(self, text: str) -> list[float]:
        import torch

        inputs = self._processor(text=[text], return_tensors="pt", padding=True, truncation=True)
        with torch.no_grad():
            features = self._model.get_text_features(**inputs)
        return self._finish(features[0].numpy())

    def embed_image(self, data: bytes) -> list[float]:
        import torch
        from PIL import Image, UnidentifiedImageError

        sniff_image_format(data)
        try:
            image = Image.open(io.BytesIO(data)).convert("RGB")
        except (UnidentifiedImageError, OSError) as exc:
            raise UndecodableImage(str(exc)) from exc
        inputs = self._processor(images=image, return_tensors="pt")
        with torch.no_grad():
            features = self._model.get_image_features(**inputs)
        return self._finish(features[0].numpy())
