"""Character segmentation: split a binary CAPTCHA into per-glyph ROIs by
column-run analysis, and normalize ROIs to fixed-size classifier cells.

A maximal run of columns containing ink defines a span; the tight row range
of the ink inside that span gives the vertical bounds. ROIs whose bounding
box is smaller than `min_area` square pixels are dropped as noise. Returned
ROIs are ordered left to right and never overlap in columns, so on clean
renders the i-th ROI corresponds to the i-th label character.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .imageio import BinaryImage, GrayImage, RgbImage
from .improc import otsu, railway_preprocess, remove_strikethrough, resize, to_gray

PREPROCESS_MODES = ("otsu", "jam", "railway")


@dataclass
class Roi:
    """One segmented region; bounds are inclusive image coordinates."""

    col_start: int
    col_end: int
    row_start: int
    row_end: int
    pixels: BinaryImage

    @property
    def width(self) -> int:
        return self.col_end - self.col_start + 1

    @property
    def height(self) -> int:
        return self.row_end - self.row_start + 1

    @property
    def area(self) -> int:
        return self.width * self.height


def extract_rois(img: BinaryImage, min_area: int = 4, pad: int = 0) -> list[Roi]:
    """Column-run segmentation. `pad` grows each box outward (clipped at the
    image edge) without affecting the noise-area test."""
    if min_area < 1:
        raise ValueError(f"min_area must be >= 1, got {min_area}")
    if pad < 0:
        raise ValueError(f"pad must be >= 0, got {pad}")
    ink = img.ink
    cols = ink.any(axis=0)
    rois: list[Roi] = []
    x = 0
    w = img.width
    while x < w:
        if not cols[x]:
            x += 1
            continue
        start = x
        while x < w and cols[x]:
            x += 1
        end = x - 1
        rows = np.flatnonzero(ink[:, start : end + 1].any(axis=1))
        top, bot = int(rows[0]), int(rows[-1])
        if (end - start + 1) * (bot - top + 1) < min_area:
            continue
        c0 = max(0, start - pad)
        c1 = min(w - 1, end + pad)
        r0 = max(0, top - pad)
        r1 = min(img.height - 1, bot + pad)
        crop = BinaryImage(ink[r0 : r1 + 1, c0 : c1 + 1].copy())
        rois.append(Roi(c0, c1, r0, r1, crop))
    return rois


def normalize_mask(mask: BinaryImage, cell: int) -> GrayImage:
    """Pad a mask to square (centered; odd remainder goes right/bottom), then
    nearest-resize to cell x cell. Output is uint8 with ink 255 on 0."""
    if cell < 1:
        raise ValueError(f"cell must be >= 1, got {cell}")
    h, w = mask.ink.shape
    side = max(h, w)
    top = (side - h) // 2
    left = (side - w) // 2
    square = np.zeros((side, side), dtype=bool)
    square[top : top + h, left : left + w] = mask.ink
    resized = resize(BinaryImage(square), cell, cell, "nearest")
    return resized.to_gray(ink_value=255, bg_value=0)


def normalize_roi(roi: Roi, cell: int) -> GrayImage:
    return normalize_mask(roi.pixels, cell)


def binarize(img: GrayImage | RgbImage, preprocess: str) -> BinaryImage:
    """Apply one of the named cleanup pipelines, yielding canonical ink=True.

    "otsu" assumes dark glyphs on a light ground; a constant image has no
    Otsu threshold and maps to an empty mask rather than an error, so blank
    inputs segment to zero ROIs.
    """
    if preprocess not in PREPROCESS_MODES:
        raise ValueError(f"bad preprocess {preprocess!r}, expected one of {PREPROCESS_MODES}")
    if preprocess == "railway":
        return railway_preprocess(img)
    gray = to_gray(img) if isinstance(img, RgbImage) else img
    if preprocess == "jam":
        return remove_strikethrough(gray)
    try:
        return otsu(gray, polarity="ink-below").binary
    except ValueError:
        return BinaryImage(np.zeros(gray.data.shape, dtype=bool))


def segment_pipeline(
    img: GrayImage | RgbImage, preprocess: str, cell: int, min_area: int = 4
) -> list[GrayImage]:
    """binarize -> extract_rois -> normalize, returning classifier cells."""
    rois = extract_rois(binarize(img, preprocess), min_area=min_area)
    return [normalize_roi(r, cell) for r in rois]
