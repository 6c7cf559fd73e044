"""Bridges generated datasets on disk to model-ready arrays.

Images load as float32 NHWC with a single channel. With a preprocess mode
the channel is a binarized ink mask (ink = 1.0); without one it is raw
grayscale scaled to [0, 1].
"""

from __future__ import annotations

import os

import numpy as np

from .imageio import MANIFEST_NAME, RgbImage, load_manifest, read_image
from .improc import to_gray
from .segment import PREPROCESS_MODES, binarize


def load_split(
    dataset_dir, split: str, preprocess: str | None = None
) -> tuple[np.ndarray, list[str]]:
    """All images of one split, stacked (n, H, W, 1), plus their labels in
    manifest order."""
    if preprocess is not None and preprocess not in PREPROCESS_MODES:
        raise ValueError(f"bad preprocess {preprocess!r}, expected one of {PREPROCESS_MODES}")
    manifest = load_manifest(os.path.join(dataset_dir, MANIFEST_NAME))
    records = manifest.by_split(split)
    if not records:
        raise ValueError(f"{dataset_dir}: no records in split {split!r}")
    planes = []
    labels = []
    for rec in records:
        img = read_image(os.path.join(dataset_dir, rec.file))
        if preprocess is not None:
            plane = binarize(img, preprocess).ink.astype(np.float32)
        else:
            gray = to_gray(img) if isinstance(img, RgbImage) else img
            plane = gray.data.astype(np.float32) / 255.0
        if planes and plane.shape != planes[0].shape:
            raise ValueError(
                f"{rec.file} is {plane.shape}, but earlier images are {planes[0].shape}"
            )
        planes.append(plane)
        labels.append(rec.label)
    return np.stack(planes)[..., None], labels


def cells_to_batch(cells) -> np.ndarray:
    """Normalized glyph cells (ink = 255) to a model batch (n, cell, cell, 1)."""
    return np.stack([c.data for c in cells]).astype(np.float32)[..., None] / 255.0
