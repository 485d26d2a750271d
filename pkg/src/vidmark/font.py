"""Embedded 5x7 bitmap font (digits, lowercase letters, space).

Glyphs are stored as five 7-bit columns, LSB = top row. Text is
rasterized at the base size and scaled to the requested pixel height
with nearest-neighbor index mapping, so rendering is platform-free and
byte-deterministic.
"""

from __future__ import annotations

import numpy as np

GLYPH_W = 5
GLYPH_H = 7
GLYPH_GAP = 1  # columns between glyphs at base scale

_COLUMNS = {
    "0": (0x3E, 0x51, 0x49, 0x45, 0x3E),
    "1": (0x00, 0x42, 0x7F, 0x40, 0x00),
    "2": (0x42, 0x61, 0x51, 0x49, 0x46),
    "3": (0x21, 0x41, 0x45, 0x4B, 0x31),
    "4": (0x18, 0x14, 0x12, 0x7F, 0x10),
    "5": (0x27, 0x45, 0x45, 0x45, 0x39),
    "6": (0x3C, 0x4A, 0x49, 0x49, 0x30),
    "7": (0x01, 0x71, 0x09, 0x05, 0x03),
    "8": (0x36, 0x49, 0x49, 0x49, 0x36),
    "9": (0x06, 0x49, 0x49, 0x29, 0x1E),
    "a": (0x20, 0x54, 0x54, 0x54, 0x78),
    "b": (0x7F, 0x48, 0x44, 0x44, 0x38),
    "c": (0x38, 0x44, 0x44, 0x44, 0x20),
    "d": (0x38, 0x44, 0x44, 0x48, 0x7F),
    "e": (0x38, 0x54, 0x54, 0x54, 0x18),
    "f": (0x08, 0x7E, 0x09, 0x01, 0x02),
    "g": (0x0C, 0x52, 0x52, 0x52, 0x3E),
    "h": (0x7F, 0x08, 0x04, 0x04, 0x78),
    "i": (0x00, 0x44, 0x7D, 0x40, 0x00),
    "j": (0x20, 0x40, 0x44, 0x3D, 0x00),
    "k": (0x7F, 0x10, 0x28, 0x44, 0x00),
    "l": (0x00, 0x41, 0x7F, 0x40, 0x00),
    "m": (0x7C, 0x04, 0x18, 0x04, 0x78),
    "n": (0x7C, 0x08, 0x04, 0x04, 0x78),
    "o": (0x38, 0x44, 0x44, 0x44, 0x38),
    "p": (0x7C, 0x14, 0x14, 0x14, 0x08),
    "q": (0x08, 0x14, 0x14, 0x18, 0x7C),
    "r": (0x7C, 0x08, 0x04, 0x04, 0x08),
    "s": (0x48, 0x54, 0x54, 0x54, 0x20),
    "t": (0x04, 0x3F, 0x44, 0x40, 0x20),
    "u": (0x3C, 0x40, 0x40, 0x20, 0x7C),
    "v": (0x1C, 0x20, 0x40, 0x20, 0x1C),
    "w": (0x3C, 0x40, 0x30, 0x40, 0x3C),
    "x": (0x44, 0x28, 0x10, 0x28, 0x44),
    "y": (0x0C, 0x50, 0x50, 0x50, 0x3C),
    "z": (0x44, 0x64, 0x54, 0x4C, 0x44),
    " ": (0x00, 0x00, 0x00, 0x00, 0x00),
}

_FALLBACK = "?"
_COLUMNS[_FALLBACK] = (0x02, 0x01, 0x51, 0x09, 0x06)


def glyph_bitmap(ch: str) -> np.ndarray:
    cols = _COLUMNS.get(ch, _COLUMNS[_FALLBACK])
    out = np.zeros((GLYPH_H, GLYPH_W), dtype=bool)
    for x, col in enumerate(cols):
        for y in range(GLYPH_H):
            out[y, x] = bool((col >> y) & 1)
    return out


def text_bitmap(text: str) -> np.ndarray:
    """Base-size (7 rows) bitmap of a text run with 1-column gaps."""
    if not text:
        raise ValueError("empty text")
    width = len(text) * (GLYPH_W + GLYPH_GAP) - GLYPH_GAP
    out = np.zeros((GLYPH_H, width), dtype=bool)
    x = 0
    for ch in text:
        out[:, x:x + GLYPH_W] = glyph_bitmap(ch)
        x += GLYPH_W + GLYPH_GAP
    return out


def scale_bitmap(bitmap: np.ndarray, height: int) -> np.ndarray:
    """Nearest-neighbor scale to an exact pixel height."""
    if height < 1:
        raise ValueError("font height must be >= 1")
    src_h, src_w = bitmap.shape
    width = max(1, round(src_w * height / src_h))
    rows = (np.arange(height) * src_h) // height
    cols = (np.arange(width) * src_w) // width
    return bitmap[np.ix_(rows, cols)]


def render_text_bitmap(text: str, height: int) -> np.ndarray:
    return scale_bitmap(text_bitmap(text), height)


def text_size(text: str, height: int) -> tuple[int, int]:
    """(width, height) in pixels of the rendered text."""
    bm = render_text_bitmap(text, height)
    return (bm.shape[1], bm.shape[0])
