"""Shared fixtures and the naive search reference used as an oracle."""
from __future__ import annotations

import numpy as np
import pytest

from snapdiag import GalleryRecord, build_snapshot, normalize


def make_records(classes, modality="image"):
    """Records from a list of class labels; ids are r0, r1, ..."""
    return [
        GalleryRecord(
            id=f"r{i}",
            class_label=label,
            modality=modality,
            row=i,
            uri=f"synthetic://{label}/{i}.jpg",
        )
        for i, label in enumerate(classes)
    ]


def unit_rows(raw_rows):
    """Stack raw vectors into a float32 unit-norm block."""
    return np.stack([normalize(row) for row in raw_rows])


def naive_search(block, ids, query, k, eligible=None):
    """Reference ranking: per-row 64-bit dots, sorted by (-score, id).

    Intentionally independent of the engine: scores one row at a time and
    sorts the whole candidate list.
    """
    query64 = np.asarray(query, dtype=np.float64)
    scored = []
    for i in range(block.shape[0]):
        if eligible is not None and not eligible[i]:
            continue
        score = float(np.dot(block[i].astype(np.float64), query64))
        scored.append((ids[i], score))
    scored.sort(key=lambda pair: (-pair[1], pair[0]))
    return scored[:k]


@pytest.fixture
def toy_snapshot():
    """Three image records: a=[1,0], b=[0,1], c=normalize([1,1])."""
    records = make_records(["classX", "classY", "classX"])
    block = unit_rows([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
    snapshot = build_snapshot(records, block)
    return snapshot
