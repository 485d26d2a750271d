"""Marker rendering: translucent mask fills, contour bands, tag texts,
and the persistent frame-index numeral.

Order is strict and global per frame: all fills, then all contours,
then all tag texts, then the frame index. Compositing is
out = round_half_up((1 - alpha) * in + alpha * color) per channel, so
identical inputs give byte-identical output on every platform.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import DataFormatError
from .font import render_text_bitmap, text_size
from .masks import FrameMarkers, InstanceMask

RGB = tuple[int, int, int]

BLACK: RGB = (0, 0, 0)
WHITE: RGB = (255, 255, 255)
RED: RGB = (255, 0, 0)
YELLOW: RGB = (255, 255, 0)
BLUE: RGB = (0, 0, 255)
GREEN: RGB = (0, 128, 0)

DEFAULT_PALETTE: tuple[RGB, ...] = (RED, YELLOW, BLUE, GREEN)

INDEX_POSITIONS = ("top-left", "top-right", "center", "bottom-left",
                   "bottom-right", "find-region")


@dataclass(frozen=True)
class StyleConfig:
    """Global rendering style; defaults follow the tuned configuration
    (fill 0.3, contour opacity 1.0 width 3, RGB palette, black index
    numeral of height 38 at the bottom-right)."""

    alpha: float = 0.3
    beta: float = 1.0
    contour_width: int = 3  # 0 disables contours
    palette: tuple[RGB, ...] = DEFAULT_PALETTE
    contour_palette: tuple[RGB, ...] | None = None
    font_height: int = 16
    text_color: RGB = WHITE
    text_offset: tuple[int, int] = (2, 2)
    index_position: str = "bottom-right"
    index_font_height: int = 38
    index_color: RGB = BLACK
    index_margin: int = 4
    draw_index: bool = True

    def __post_init__(self):
        if not (0.0 <= self.alpha <= 1.0 and 0.0 <= self.beta <= 1.0):
            raise ValueError("opacities must be in [0,1]")
        if not self.palette:
            raise ValueError("palette must be non-empty")
        if self.contour_width < 0:
            raise ValueError("contour width must be >= 0")
        if self.font_height < 1 or self.index_font_height < 1:
            raise ValueError("font heights must be >= 1")
        if self.index_position not in INDEX_POSITIONS:
            raise ValueError(f"unknown index position {self.index_position!r}")

    def color_for(self, ordinal: int) -> RGB:
        return self.palette[(ordinal - 1) % len(self.palette)]

    def contour_color_for(self, ordinal: int) -> RGB:
        palette = self.contour_palette or self.palette
        return palette[(ordinal - 1) % len(palette)]

    def with_overrides(self, **kwargs) -> "StyleConfig":
        return replace(self, **kwargs)


def _check_dims(canvas: np.ndarray, region: InstanceMask):
    if canvas.shape[:2] != (region.height, region.width):
        raise DataFormatError(
            f"region dims {(region.height, region.width)} != frame dims "
            f"{canvas.shape[:2]}")


def composite(canvas: np.ndarray, where: np.ndarray, color: RGB,
              alpha: float) -> np.ndarray:
    """Blend color over canvas at masked pixels, round-half-up."""
    out = canvas.copy()
    if alpha == 0.0 or not where.any():
        return out
    mixed = (1.0 - alpha) * canvas[where].astype(np.float64) \
        + alpha * np.asarray(color, dtype=np.float64)
    out[where] = np.floor(mixed + 0.5).astype(np.uint8)
    return out


def overlay_mask(canvas: np.ndarray, region: InstanceMask, color: RGB,
                 alpha: float) -> np.ndarray:
    _check_dims(canvas, region)
    return composite(canvas, region.bitmap(), color, alpha)


def _shift_or(bitmap: np.ndarray, radius: int, combine) -> np.ndarray:
    """Morphology by shifted copies; outside-image cells are background."""
    h, w = bitmap.shape
    padded = np.zeros((h + 2 * radius, w + 2 * radius), dtype=bool)
    padded[radius:radius + h, radius:radius + w] = bitmap
    out = None
    for dy in range(-radius, radius + 1):
        for dx in range(-radius, radius + 1):
            view = padded[radius + dy:radius + dy + h,
                          radius + dx:radius + dx + w]
            out = view.copy() if out is None else combine(out, view)
    return out


def dilate(bitmap: np.ndarray, radius: int) -> np.ndarray:
    if radius == 0:
        return bitmap.copy()
    return _shift_or(bitmap, radius, np.logical_or)


def erode(bitmap: np.ndarray, radius: int) -> np.ndarray:
    if radius == 0:
        return bitmap.copy()
    return _shift_or(bitmap, radius, np.logical_and)


def contour_band(region: InstanceMask, width: int) -> InstanceMask:
    """Boundary band: dilation minus erosion with a square element of
    radius ceil(width/2)."""
    if width < 1:
        raise ValueError("contour width must be >= 1")
    radius = (width + 1) // 2
    bitmap = region.bitmap()
    band = dilate(bitmap, radius) & ~erode(bitmap, radius)
    return InstanceMask.from_bitmap(band)


def overlay_contour(canvas: np.ndarray, region: InstanceMask, color: RGB,
                    beta: float, width: int) -> np.ndarray:
    _check_dims(canvas, region)
    return composite(canvas, contour_band(region, width).bitmap(), color, beta)


def draw_text(canvas: np.ndarray, text: str, anchor: tuple[int, int],
              font_height: int, color: RGB) -> np.ndarray:
    """Opaque bitmap-font text at anchor (x, y), silently clipped."""
    if not text:
        raise ValueError("empty text")
    bitmap = render_text_bitmap(text, font_height)
    th, tw = bitmap.shape
    h, w = canvas.shape[:2]
    x0, y0 = anchor
    src_x0 = max(0, -x0)
    src_y0 = max(0, -y0)
    dst_x0 = max(0, x0)
    dst_y0 = max(0, y0)
    dst_x1 = min(w, x0 + tw)
    dst_y1 = min(h, y0 + th)
    out = canvas.copy()
    if dst_x1 <= dst_x0 or dst_y1 <= dst_y0:
        return out
    patch = bitmap[src_y0:src_y0 + (dst_y1 - dst_y0),
                   src_x0:src_x0 + (dst_x1 - dst_x0)]
    region = out[dst_y0:dst_y1, dst_x0:dst_x1]
    region[patch] = np.asarray(color, dtype=np.uint8)
    return out


def text_anchor(region: InstanceMask, offset: tuple[int, int]
                ) -> tuple[int, int] | None:
    """Top-left corner of the region bounding box plus offset, clamped
    in-frame. None for empty regions (text suppressed)."""
    bitmap = region.bitmap()
    ys, xs = np.nonzero(bitmap)
    if ys.size == 0:
        return None
    x = int(xs.min()) + offset[0]
    y = int(ys.min()) + offset[1]
    x = min(max(x, 0), region.width - 1)
    y = min(max(y, 0), region.height - 1)
    return (x, y)


def glyph_box(text: str, anchor: tuple[int, int], font_height: int,
              frame_w: int, frame_h: int) -> np.ndarray | None:
    """Boolean frame-size map of the pixels a text run would set."""
    bitmap = render_text_bitmap(text, font_height)
    out = np.zeros((frame_h, frame_w), dtype=bool)
    th, tw = bitmap.shape
    x0, y0 = anchor
    dst_x0, dst_y0 = max(0, x0), max(0, y0)
    dst_x1, dst_y1 = min(frame_w, x0 + tw), min(frame_h, y0 + th)
    if dst_x1 <= dst_x0 or dst_y1 <= dst_y0:
        return out
    out[dst_y0:dst_y1, dst_x0:dst_x1] = bitmap[
        max(0, -y0):max(0, -y0) + (dst_y1 - dst_y0),
        max(0, -x0):max(0, -x0) + (dst_x1 - dst_x0)]
    return out


def _find_region_anchor(frame: np.ndarray, markers: FrameMarkers,
                        text_w: int, text_h: int) -> tuple[int, int]:
    """Center of the lowest-mean-variance cell of a 3x3 grid that does
    not intersect any semantic mask (all cells considered if none is
    mask-free). Ties break in row-major order."""
    h, w = frame.shape[:2]
    occupied = np.zeros((h, w), dtype=bool)
    for marker in markers.semantic:
        if (marker.region.height, marker.region.width) == (h, w):
            occupied |= marker.region.bitmap()
    ys = [0, h // 3, 2 * h // 3, h]
    xs = [0, w // 3, 2 * w // 3, w]
    cells = []
    for gy in range(3):
        for gx in range(3):
            sl = (slice(ys[gy], ys[gy + 1]), slice(xs[gx], xs[gx + 1]))
            block = frame[sl].astype(np.float64)
            variance = float(block.var(axis=(0, 1)).mean()) if block.size else 0.0
            cells.append((variance, gy, gx, bool(occupied[sl].any())))
    free = [c for c in cells if not c[3]]
    pool = free if free else cells
    variance, gy, gx, _ = min(pool, key=lambda c: (c[0], c[1], c[2]))
    cx = (xs[gx] + xs[gx + 1]) // 2
    cy = (ys[gy] + ys[gy + 1]) // 2
    return (cx - text_w // 2, cy - text_h // 2)


def index_anchor(position: str, frame_w: int, frame_h: int,
                 text_w: int, text_h: int, margin: int = 4,
                 frame: np.ndarray | None = None,
                 markers: FrameMarkers | None = None) -> tuple[int, int]:
    """Deterministic anchor of the frame-index text for each placement."""
    if position == "top-left":
        anchor = (margin, margin)
    elif position == "top-right":
        anchor = (frame_w - text_w - margin, margin)
    elif position == "center":
        anchor = ((frame_w - text_w) // 2, (frame_h - text_h) // 2)
    elif position == "bottom-left":
        anchor = (margin, frame_h - text_h - margin)
    elif position == "bottom-right":
        anchor = (frame_w - text_w - margin, frame_h - text_h - margin)
    elif position == "find-region":
        if frame is None:
            raise ValueError("find-region placement needs the frame content")
        anchor = _find_region_anchor(
            frame, markers or FrameMarkers(1), text_w, text_h)
    else:
        raise ValueError(f"unknown index position {position!r}")
    x = min(max(anchor[0], 0), max(frame_w - text_w, 0))
    y = min(max(anchor[1], 0), max(frame_h - text_h, 0))
    return (x, y)


def render_frame(frame: np.ndarray, markers: FrameMarkers, t: int,
                 style: StyleConfig) -> np.ndarray:
    """Marked frame: fills, contours, tag texts, then the index text."""
    canvas = np.asarray(frame, dtype=np.uint8).copy()
    h, w = canvas.shape[:2]
    ordered = list(zip(markers.ordinals(), markers.semantic))

    for ordinal, marker in ordered:
        canvas = overlay_mask(canvas, marker.region,
                              style.color_for(ordinal), style.alpha)
    if style.contour_width > 0:
        for ordinal, marker in ordered:
            canvas = overlay_contour(canvas, marker.region,
                                     style.contour_color_for(ordinal),
                                     style.beta, style.contour_width)
    for _, marker in ordered:
        anchor = text_anchor(marker.region, style.text_offset)
        if anchor is not None:
            canvas = draw_text(canvas, marker.tag, anchor,
                               style.font_height, style.text_color)
    if style.draw_index:
        if t < 1:
            raise ValueError("frame index is 1-based")
        digits = str(t)
        tw, th = text_size(digits, style.index_font_height)
        anchor = index_anchor(style.index_position, w, h, tw, th,
                              style.index_margin, frame=frame,
                              markers=markers)
        canvas = draw_text(canvas, digits, anchor, style.index_font_height,
                           style.index_color)
    return canvas


def markerize_video(frames, markers_per_frame, style: StyleConfig
                    ) -> list[np.ndarray]:
    """Element-wise render_frame with 1-based frame indices."""
    out = []
    for i, frame in enumerate(frames, start=1):
        markers = markers_per_frame.get(i) if hasattr(markers_per_frame, "get") \
            else markers_per_frame[i - 1]
        if markers is None:
            markers = FrameMarkers(i)
        out.append(render_frame(frame, markers, i, style))
    return out
