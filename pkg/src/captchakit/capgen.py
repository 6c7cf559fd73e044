"""Synthetic CAPTCHA rendering and dataset generation.

Three styles share one renderer:

- "clean": dark glyphs on white, jitter only.
- "jam": bright glyphs on black with a one-pixel strike line through the
  text band (the line blurs away during preprocessing; glyph cores do not).
- "railway": dark glyphs on a white RGB canvas with colored dot speckle and
  circle outlines.

Noise is painted under the glyphs so it never punches holes in strokes; the
strike line goes on top, as a real strikethrough would. Glyphs are placed
left to right with at least `spacing` empty columns between tight boxes,
which is what makes column-run segmentation recover one ROI per character.
Every random decision comes from the caller's Rng, so a seed pins the output
byte for byte.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, replace

import numpy as np

from .font import GlyphFont, default_font
from .imageio import (
    DatasetManifest,
    GrayImage,
    ManifestRecord,
    RgbImage,
    write_manifest,
    write_pgm,
    write_ppm,
)
from .rng import Rng
from .segment import normalize_mask
from .imageio import BinaryImage

STYLES = ("clean", "jam", "railway")


@dataclass
class GenStyle:
    """Rendering knobs for one dataset. All jitter fields may be zero, in
    which case rendering is a pure function of the label."""

    name: str
    charset: str
    length: int
    canvas_w: int = 0  # 0 = sized from length at render time
    canvas_h: int = 0
    cell_scale: int = 2
    margin: int = 6
    spacing: int = 4
    spacing_jitter: int = 2
    dy_jitter: int = 2
    max_rotation_deg: float = 8.0
    max_shear: float = 0.08
    dot_count: int = 0
    circle_count: int = 0
    strike: bool = False
    strike_jitter: int = 3

    def __post_init__(self):
        if self.name not in STYLES:
            raise ValueError(f"bad style {self.name!r}, expected one of {STYLES}")
        if self.length < 1:
            raise ValueError(f"length must be >= 1, got {self.length}")
        if not self.charset:
            raise ValueError("charset must not be empty")
        if len(set(self.charset)) != len(self.charset):
            raise ValueError("charset has repeated characters")
        if self.cell_scale < 1 or self.spacing < 1 or self.margin < 0:
            raise ValueError("cell_scale and spacing must be >= 1, margin >= 0")

    @classmethod
    def preset(cls, name: str, length: int, charset: str | None = None) -> "GenStyle":
        if name == "clean":
            return cls(name, charset or "0123456789ABCDEFGHIJKLMNOPQRSTUVWXYZ", length)
        if name == "jam":
            return cls(
                name,
                charset or "0123456789",
                length,
                canvas_w=32 * length,
                canvas_h=40,
                strike=True,
            )
        if name == "railway":
            # Rotation is capped lower than the other styles: erosion in the
            # railway cleanup is unforgiving to shear-staircased diagonals.
            return cls(
                name,
                charset or "0123456789ABCDEFGHIJKLMNOPQRSTUVWXYZ",
                length,
                canvas_w=32 * length,
                canvas_h=32,
                margin=4,
                max_rotation_deg=6.0,
                max_shear=0.06,
                dot_count=40,
                circle_count=2,
            )
        raise ValueError(f"bad style {name!r}, expected one of {STYLES}")


def balanced_labels(charset: str, length: int, count: int, rng: Rng) -> list[str]:
    """Draw `count` labels whose pooled characters are as uniform as possible:
    per-character counts across all emitted labels differ by at most one.

    The pool holds exactly count*length characters (floor division plus one
    extra for a randomly chosen subset of charset positions), is shuffled,
    and is cut into consecutive length-sized labels.
    """
    if not charset or len(set(charset)) != len(charset):
        raise ValueError("charset must be non-empty with unique characters")
    if length < 1:
        raise ValueError(f"length must be >= 1, got {length}")
    if count < 0:
        raise ValueError(f"count must be >= 0, got {count}")
    total = count * length
    base, rem = divmod(total, len(charset))
    counts = [base] * len(charset)
    for idx in rng.sample(range(len(charset)), rem):
        counts[idx] += 1
    pool = [ch for ch, c in zip(charset, counts) for _ in range(c)]
    rng.shuffle(pool)
    return ["".join(pool[i * length : (i + 1) * length]) for i in range(count)]


def _shear_rows(mask: np.ndarray, factor: float) -> np.ndarray:
    """Shift each row horizontally by round(factor * (row - center))."""
    if factor == 0.0:
        return mask
    h, w = mask.shape
    cy = (h - 1) / 2.0
    shifts = [round(factor * (r - cy)) for r in range(h)]
    lo, hi = min(shifts), max(shifts)
    out = np.zeros((h, w + hi - lo), dtype=bool)
    for r, s in enumerate(shifts):
        out[r, s - lo : s - lo + w] = mask[r]
    return out


def _shear_cols(mask: np.ndarray, factor: float) -> np.ndarray:
    return _shear_rows(mask.T, factor).T


def _tight_crop(mask: np.ndarray) -> np.ndarray:
    rows = np.flatnonzero(mask.any(axis=1))
    cols = np.flatnonzero(mask.any(axis=0))
    return mask[rows[0] : rows[-1] + 1, cols[0] : cols[-1] + 1]


def _glyph_mask(ch: str, style: GenStyle, rng: Rng, font: GlyphFont) -> np.ndarray:
    """Scaled, rotated and sheared glyph bitmap, tight-cropped.

    Rotation is the classic three-shear decomposition; with 2 px strokes the
    integer row/column shifts keep strokes intact. Draws happen even for
    zero-jitter styles so the rng stream position stays style-independent.
    """
    theta = math.radians(rng.uniform(-style.max_rotation_deg, style.max_rotation_deg))
    shear = rng.uniform(-style.max_shear, style.max_shear)
    mask = np.kron(font.glyph(ch), np.ones((style.cell_scale, style.cell_scale), dtype=bool))
    if theta != 0.0:
        a = -math.tan(theta / 2.0)
        mask = _shear_rows(mask, a)
        mask = _shear_cols(mask, math.sin(theta))
        mask = _shear_rows(mask, a)
    mask = _shear_rows(mask, shear)
    return _tight_crop(mask)


def _auto_canvas(style: GenStyle, font: GlyphFont) -> tuple[int, int]:
    w = style.canvas_w
    h = style.canvas_h
    gw = font.cell_w * style.cell_scale
    gh = font.cell_h * style.cell_scale
    if w == 0:
        w = 2 * style.margin + style.length * (gw + 6) + (style.length - 1) * style.spacing
    if h == 0:
        h = gh + 2 * style.margin + 2 * style.dy_jitter
    return w, h


def render_captcha(label: str, style: GenStyle, rng: Rng, font: GlyphFont | None = None):
    """Render one CAPTCHA; returns GrayImage (clean/jam) or RgbImage (railway).

    Raises ValueError for characters without glyphs or if the glyph row does
    not fit the canvas.
    """
    font = font or default_font()
    if len(label) != style.length:
        raise ValueError(f"label {label!r} has length {len(label)}, style wants {style.length}")
    for ch in label:
        if ch not in font.bitmaps:
            raise ValueError(f"no glyph for character {ch!r}")
    width, height = _auto_canvas(style, font)

    masks = [_glyph_mask(ch, style, rng, font) for ch in label]
    dys = [rng.randint(-style.dy_jitter, style.dy_jitter) for _ in label]
    gaps = [
        style.spacing + rng.next_below(style.spacing_jitter + 1) for _ in range(len(label) - 1)
    ]
    total = sum(m.shape[1] for m in masks) + sum(gaps) + 2 * style.margin
    if total > width:
        gaps = [style.spacing] * (len(label) - 1)
        total = sum(m.shape[1] for m in masks) + sum(gaps) + 2 * style.margin
        if total > width:
            raise ValueError(f"glyphs need {total} columns, canvas is {width} wide")

    placements = []
    x = style.margin
    for i, mask in enumerate(masks):
        gh, gw = mask.shape
        if gh > height:
            raise ValueError(f"glyph is {gh} rows tall, canvas is {height}")
        y = (height - gh) // 2 + dys[i]
        y = min(max(y, 0), height - gh)
        placements.append((x, y, mask))
        x += gw + (gaps[i] if i < len(gaps) else 0)

    rgb = style.name == "railway"
    bg = 0 if style.name == "jam" else 255
    ink = 255 - bg
    if rgb:
        canvas = np.full((height, width, 3), bg, dtype=np.uint8)
    else:
        canvas = np.full((height, width), bg, dtype=np.uint8)

    for _ in range(style.dot_count):
        dx = rng.next_below(width)
        dy = rng.next_below(height)
        if rgb:
            canvas[dy, dx] = (rng.next_below(256), rng.next_below(256), rng.next_below(256))
        else:
            canvas[dy, dx] = rng.next_below(256)

    for _ in range(style.circle_count):
        cx = rng.next_below(width)
        cy = rng.next_below(height)
        r = rng.randint(4, max(5, min(width, height) // 3))
        color = (rng.next_below(256), rng.next_below(256), rng.next_below(256))
        steps = max(16, int(2 * math.pi * r) * 2)
        for s in range(steps):
            ang = 2 * math.pi * s / steps
            px = round(cx + r * math.cos(ang))
            py = round(cy + r * math.sin(ang))
            if 0 <= px < width and 0 <= py < height:
                canvas[py, px] = color if rgb else color[0]

    for x0, y0, mask in placements:
        region = canvas[y0 : y0 + mask.shape[0], x0 : x0 + mask.shape[1]]
        region[mask] = ink

    if style.strike:
        tops = [y for _, y, _ in placements]
        bots = [y + m.shape[0] for _, y, m in placements]
        band_mid = (min(tops) + max(bots)) // 2
        row = band_mid + rng.randint(-style.strike_jitter, style.strike_jitter)
        row = min(max(row, 0), height - 1)
        canvas[row, :] = ink

    return RgbImage(canvas) if rgb else GrayImage(canvas)


def split_sizes(count: int, fractions: tuple[float, float, float]) -> tuple[int, int, int]:
    """Largest-remainder apportionment of count into train/val/test."""
    if len(fractions) != 3 or any(f < 0 for f in fractions):
        raise ValueError("fractions must be three non-negative numbers")
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise ValueError(f"fractions must sum to 1, got {sum(fractions)}")
    targets = [count * f for f in fractions]
    sizes = [math.floor(t) for t in targets]
    order = sorted(range(3), key=lambda i: (-(targets[i] - sizes[i]), i))
    for i in range(count - sum(sizes)):
        sizes[order[i]] += 1
    return tuple(sizes)


def generate_dataset(
    style: GenStyle,
    count: int,
    fractions: tuple[float, float, float],
    seed: int,
    out_dir,
    font: GlyphFont | None = None,
) -> DatasetManifest:
    """Render `count` captchas with balanced labels, assign splits by
    largest-remainder sizing with a shuffled assignment, write images and
    manifest under out_dir. Deterministic in (style, count, fractions, seed).
    """
    font = font or default_font()
    rng = Rng(seed)
    labels = balanced_labels(style.charset, style.length, count, rng)
    n_train, n_val, n_test = split_sizes(count, fractions)
    assignment = ["train"] * n_train + ["val"] * n_val + ["test"] * n_test
    rng.shuffle(assignment)

    img_dir = os.path.join(out_dir, "images")
    os.makedirs(img_dir, exist_ok=True)
    ext = "ppm" if style.name == "railway" else "pgm"
    records = []
    for i, label in enumerate(labels):
        img = render_captcha(label, style, rng.derive(i), font)
        rel = f"images/{i:06d}_{label}.{ext}"
        path = os.path.join(out_dir, rel)
        if ext == "ppm":
            write_ppm(img, path)
        else:
            write_pgm(img, path)
        records.append(ManifestRecord(rel, label, assignment[i]))
    manifest = DatasetManifest(records)
    write_manifest(manifest, os.path.join(out_dir, "manifest.jsonl"))
    return manifest


def generate_cells(
    charset: str,
    per_class: int,
    cell: int,
    seed: int,
    font: GlyphFont | None = None,
    max_rotation_deg: float = 8.0,
    max_shear: float = 0.08,
) -> tuple[list[GrayImage], list[str]]:
    """Jittered single-character cells (ink 255 on 0), per_class of each,
    shuffled. The character-classifier analogue of generate_dataset."""
    font = font or default_font()
    rng = Rng(seed)
    labels = [ch for ch in charset for _ in range(per_class)]
    rng.shuffle(labels)
    style = GenStyle(
        "clean", charset, 1, max_rotation_deg=max_rotation_deg, max_shear=max_shear
    )
    if max_rotation_deg == 0 and max_shear == 0:
        style = replace(style, spacing_jitter=0, dy_jitter=0)
    cells = []
    for i, ch in enumerate(labels):
        mask = _glyph_mask(ch, style, rng.derive(i), font)
        cells.append(normalize_mask(BinaryImage(mask), cell))
    return cells, labels
