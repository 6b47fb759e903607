"""Seeded synthetic gallery generation for tests and desk-scale benchmarks.

Class means are unit vectors drawn from a PCG64 generator (numpy
``default_rng``); each item is ``normalize(mean + noise * gaussian)``. The
same seed and parameters reproduce the gallery bit-for-bit.
"""
from __future__ import annotations

import numpy as np

from .core import GalleryRecord, normalize


def generate_gallery(
    classes: int,
    per_class: int,
    dim: int,
    noise: float,
    seed: int,
) -> tuple[list[GalleryRecord], np.ndarray]:
    """Build records and a unit-norm vector block for a clustered gallery.

    Args:
        classes: number of disease classes (>= 1).
        per_class: items per class (>= 1).
        dim: embedding dimensionality.
        noise: gaussian perturbation scale; 0 makes same-class items identical.
        seed: PCG64 seed; fixes the output bytes.
    """
    if classes < 1 or per_class < 1:
        raise ValueError("classes and per_class must be >= 1")
    if dim < 1:
        raise ValueError("dim must be >= 1")
    if noise < 0:
        raise ValueError("noise must be >= 0")
    rng = np.random.default_rng(seed)
    label_width = max(2, len(str(classes - 1)))
    records: list[GalleryRecord] = []
    rows = np.empty((classes * per_class, dim), dtype=np.float32)
    row = 0
    for c in range(classes):
        label = f"class-{c:0{label_width}d}"
        mean = normalize(rng.standard_normal(dim))
        for i in range(per_class):
            vec = mean.astype(np.float64) + noise * rng.standard_normal(dim)
            rows[row] = normalize(vec)
            records.append(
                GalleryRecord(
                    id=f"{label}-{i:04d}",
                    class_label=label,
                    modality="image",
                    row=row,
                    uri=f"synthetic://{label}/{i:04d}.jpg",
                    caption=None,
                )
            )
            row += 1
    return records, rows
