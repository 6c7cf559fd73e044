"""Embedded bitmap font for the generator: A-Z and 0-9 on an 8x12 cell.

Strokes are two pixels thick everywhere, by design: at the generator's 2x
scale a stroke becomes 4 px, which survives a full-3x3 erode/dilate pass and
keeps its core above the bright threshold after a sigma=1 blur. Thin-stroke
glyphs fail both cleanup pipelines. Shape invariants the rest of the toolkit
relies on (tested, not just asserted here):

- every ink pixel belongs to at least one 2x2 all-ink square;
- within the tight bounding box, every column and every row has ink, so a
  rendered glyph never splits into multiple segments;
- all glyphs fill the full 8x12 cell in their tight box.

Lookalike pairs that share a skeleton (0/O, 1/I, 5/S, 8/B, D/O) carry
distinguishing marks: 0 has a center dot, B and D have flat-cut right edges,
S has inset corners.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

CHARSET = "0123456789ABCDEFGHIJKLMNOPQRSTUVWXYZ"

_GLYPHS = {
    "0": [
        "########",
        "########",
        "##....##",
        "##....##",
        "##....##",
        "##.##.##",
        "##.##.##",
        "##....##",
        "##....##",
        "##....##",
        "########",
        "########",
    ],
    "1": [
        ".###....",
        ".###....",
        "..##....",
        "..##....",
        "..##....",
        "..##....",
        "..##....",
        "..##....",
        "..##....",
        "..##....",
        "########",
        "########",
    ],
    "2": [
        "########",
        "########",
        "......##",
        "......##",
        "......##",
        "########",
        "########",
        "##......",
        "##......",
        "##......",
        "########",
        "########",
    ],
    "3": [
        "########",
        "########",
        "......##",
        "......##",
        "..######",
        "..######",
        "......##",
        "......##",
        "......##",
        "......##",
        "########",
        "########",
    ],
    "4": [
        "##....##",
        "##....##",
        "##....##",
        "##....##",
        "########",
        "########",
        "......##",
        "......##",
        "......##",
        "......##",
        "......##",
        "......##",
    ],
    "5": [
        "########",
        "########",
        "##......",
        "##......",
        "########",
        "########",
        "......##",
        "......##",
        "......##",
        "......##",
        "########",
        "########",
    ],
    "6": [
        "########",
        "########",
        "##......",
        "##......",
        "########",
        "########",
        "##....##",
        "##....##",
        "##....##",
        "##....##",
        "########",
        "########",
    ],
    "7": [
        "########",
        "########",
        "......##",
        "......##",
        "......##",
        "......##",
        "......##",
        "......##",
        "......##",
        "......##",
        "......##",
        "......##",
    ],
    "8": [
        "########",
        "########",
        "##....##",
        "##....##",
        "########",
        "########",
        "##....##",
        "##....##",
        "##....##",
        "##....##",
        "########",
        "########",
    ],
    "9": [
        "########",
        "########",
        "##....##",
        "##....##",
        "########",
        "########",
        "......##",
        "......##",
        "......##",
        "......##",
        "########",
        "########",
    ],
    "A": [
        "########",
        "########",
        "##....##",
        "##....##",
        "########",
        "########",
        "##....##",
        "##....##",
        "##....##",
        "##....##",
        "##....##",
        "##....##",
    ],
    "B": [
        "#######.",
        "#######.",
        "##....##",
        "##....##",
        "#######.",
        "#######.",
        "##....##",
        "##....##",
        "##....##",
        "##....##",
        "#######.",
        "#######.",
    ],
    "C": [
        "########",
        "########",
        "##......",
        "##......",
        "##......",
        "##......",
        "##......",
        "##......",
        "##......",
        "##......",
        "########",
        "########",
    ],
    "D": [
        "#######.",
        "#######.",
        "##....##",
        "##....##",
        "##....##",
        "##....##",
        "##....##",
        "##....##",
        "##....##",
        "##....##",
        "#######.",
        "#######.",
    ],
    "E": [
        "########",
        "########",
        "##......",
        "##......",
        "######..",
        "######..",
        "##......",
        "##......",
        "##......",
        "##......",
        "########",
        "########",
    ],
    "F": [
        "########",
        "########",
        "##......",
        "##......",
        "######..",
        "######..",
        "##......",
        "##......",
        "##......",
        "##......",
        "##......",
        "##......",
    ],
    "G": [
        "########",
        "########",
        "##......",
        "##......",
        "##......",
        "##......",
        "##..####",
        "##..####",
        "##....##",
        "##....##",
        "########",
        "########",
    ],
    "H": [
        "##....##",
        "##....##",
        "##....##",
        "##....##",
        "########",
        "########",
        "##....##",
        "##....##",
        "##....##",
        "##....##",
        "##....##",
        "##....##",
    ],
    "I": [
        "########",
        "########",
        "...##...",
        "...##...",
        "...##...",
        "...##...",
        "...##...",
        "...##...",
        "...##...",
        "...##...",
        "########",
        "########",
    ],
    "J": [
        "########",
        "########",
        "....##..",
        "....##..",
        "....##..",
        "....##..",
        "....##..",
        "....##..",
        "##..##..",
        "##..##..",
        "######..",
        "######..",
    ],
    "K": [
        "##....##",
        "##....##",
        "##..####",
        "##..##..",
        "######..",
        "####....",
        "####....",
        "######..",
        "##..##..",
        "##..####",
        "##....##",
        "##....##",
    ],
    "L": [
        "##......",
        "##......",
        "##......",
        "##......",
        "##......",
        "##......",
        "##......",
        "##......",
        "##......",
        "##......",
        "########",
        "########",
    ],
    "M": [
        "##....##",
        "##....##",
        "###..###",
        "###..###",
        "##.##.##",
        "##.##.##",
        "##.##.##",
        "##.##.##",
        "##....##",
        "##....##",
        "##....##",
        "##....##",
    ],
    "N": [
        "####..##",
        "####..##",
        "####..##",
        "##.##.##",
        "##.##.##",
        "##.##.##",
        "##..####",
        "##..####",
        "##..####",
        "##...###",
        "##...###",
        "##...###",
    ],
    "O": [
        "########",
        "########",
        "##....##",
        "##....##",
        "##....##",
        "##....##",
        "##....##",
        "##....##",
        "##....##",
        "##....##",
        "########",
        "########",
    ],
    "P": [
        "########",
        "########",
        "##....##",
        "##....##",
        "########",
        "########",
        "##......",
        "##......",
        "##......",
        "##......",
        "##......",
        "##......",
    ],
    "Q": [
        "######..",
        "######..",
        "##..##..",
        "##..##..",
        "##..##..",
        "##..##..",
        "##..##..",
        "##..##..",
        "##..####",
        "##..####",
        "########",
        "########",
    ],
    "R": [
        "########",
        "########",
        "##....##",
        "##....##",
        "########",
        "########",
        "##.##...",
        "##.##...",
        "##..##..",
        "##..##..",
        "##...###",
        "##...###",
    ],
    "S": [
        ".#######",
        ".#######",
        "##......",
        "##......",
        ".######.",
        ".######.",
        "......##",
        "......##",
        "......##",
        "......##",
        "#######.",
        "#######.",
    ],
    "T": [
        "########",
        "########",
        "...##...",
        "...##...",
        "...##...",
        "...##...",
        "...##...",
        "...##...",
        "...##...",
        "...##...",
        "...##...",
        "...##...",
    ],
    "U": [
        "##....##",
        "##....##",
        "##....##",
        "##....##",
        "##....##",
        "##....##",
        "##....##",
        "##....##",
        "##....##",
        "##....##",
        "########",
        "########",
    ],
    "V": [
        "##....##",
        "##....##",
        "##....##",
        "##....##",
        ".##..##.",
        ".##..##.",
        ".##..##.",
        ".##..##.",
        "..####..",
        "..####..",
        "...##...",
        "...##...",
    ],
    "W": [
        "##....##",
        "##....##",
        "##....##",
        "##....##",
        "##.##.##",
        "##.##.##",
        "##.##.##",
        "##.##.##",
        "###..###",
        "###..###",
        "##....##",
        "##....##",
    ],
    "X": [
        "##....##",
        "##....##",
        "###..###",
        ".##..##.",
        "..####..",
        "..####..",
        "..####..",
        "..####..",
        ".##..##.",
        "###..###",
        "##....##",
        "##....##",
    ],
    "Y": [
        "##....##",
        "##....##",
        ".##..##.",
        ".##..##.",
        "..####..",
        "..####..",
        "...##...",
        "...##...",
        "...##...",
        "...##...",
        "...##...",
        "...##...",
    ],
    "Z": [
        "########",
        "########",
        ".....##.",
        ".....##.",
        "....##..",
        "....##..",
        "..##....",
        "..##....",
        ".##.....",
        ".##.....",
        "########",
        "########",
    ],
}


@dataclass
class GlyphFont:
    """Fixed-cell bitmap font. `bitmaps[ch]` is a (cell_h, cell_w) bool array."""

    charset: str
    cell_w: int
    cell_h: int
    bitmaps: dict[str, np.ndarray]

    def __post_init__(self):
        if len(set(self.charset)) != len(self.charset):
            raise ValueError("charset has repeated characters")
        for ch in self.charset:
            bm = self.bitmaps.get(ch)
            if bm is None:
                raise ValueError(f"charset character {ch!r} has no glyph")
            if bm.shape != (self.cell_h, self.cell_w):
                raise ValueError(
                    f"glyph {ch!r} is {bm.shape}, expected ({self.cell_h}, {self.cell_w})"
                )

    def glyph(self, ch: str) -> np.ndarray:
        bm = self.bitmaps.get(ch)
        if bm is None:
            raise ValueError(f"no glyph for character {ch!r}")
        return bm


def _parse(rows: list[str]) -> np.ndarray:
    return np.array([[c == "#" for c in row] for row in rows], dtype=bool)


def default_font() -> GlyphFont:
    bitmaps = {ch: _parse(rows) for ch, rows in _GLYPHS.items()}
    return GlyphFont(charset=CHARSET, cell_w=8, cell_h=12, bitmaps=bitmaps)
