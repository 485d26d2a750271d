"""Frame interchange: numbered lossless image directories and an
optional raw-RGB stream with a 16-byte header (magic, width, height,
frame count, all little-endian u32 after the 4-byte magic)."""

from __future__ import annotations

import io
import re
import struct
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import DataFormatError

STREAM_MAGIC = b"VMRK"
_FRAME_FILE_RE = re.compile(r"(\d+)")


def encode_png(frame: np.ndarray) -> bytes:
    buf = io.BytesIO()
    Image.fromarray(np.asarray(frame, dtype=np.uint8), mode="RGB").save(
        buf, format="PNG")
    return buf.getvalue()


def decode_png(data: bytes) -> np.ndarray:
    with Image.open(io.BytesIO(data)) as img:
        return np.asarray(img.convert("RGB"), dtype=np.uint8)


def read_frame(path: str | Path) -> np.ndarray:
    with Image.open(path) as img:
        return np.asarray(img.convert("RGB"), dtype=np.uint8)


def write_frame(path: str | Path, frame: np.ndarray) -> None:
    Image.fromarray(np.asarray(frame, dtype=np.uint8), mode="RGB").save(path)


def list_frame_files(directory: str | Path) -> list[Path]:
    """Image files in a numbered directory, sorted by their number."""
    directory = Path(directory)
    if not directory.is_dir():
        raise DataFormatError(f"frame directory not found: {directory}")
    files = []
    for p in directory.iterdir():
        if p.suffix.lower() not in (".png", ".bmp", ".ppm", ".tiff", ".jpg",
                                    ".jpeg"):
            continue
        m = _FRAME_FILE_RE.search(p.stem)
        if m is None:
            continue
        files.append((int(m.group(1)), p))
    files.sort(key=lambda t: (t[0], t[1].name))
    return [p for _, p in files]


def frame_filename(index: int) -> str:
    return f"frame_{index:06d}.png"


def write_frame_dir(directory: str | Path, frames) -> list[Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for i, frame in enumerate(frames, start=1):
        p = directory / frame_filename(i)
        write_frame(p, frame)
        paths.append(p)
    return paths


def write_rgb_stream(fh, frames: list[np.ndarray]) -> None:
    if not frames:
        raise DataFormatError("empty frame stream")
    h, w = frames[0].shape[:2]
    fh.write(STREAM_MAGIC)
    fh.write(struct.pack("<III", w, h, len(frames)))
    for frame in frames:
        arr = np.asarray(frame, dtype=np.uint8)
        if arr.shape[:2] != (h, w):
            raise DataFormatError("stream frames must share dimensions")
        fh.write(arr.tobytes(order="C"))


def read_rgb_stream(fh) -> list[np.ndarray]:
    header = fh.read(16)
    if len(header) != 16 or header[:4] != STREAM_MAGIC:
        raise DataFormatError("bad raw-RGB stream header")
    w, h, count = struct.unpack("<III", header[4:])
    frames = []
    frame_bytes = w * h * 3
    for i in range(count):
        data = fh.read(frame_bytes)
        if len(data) != frame_bytes:
            raise DataFormatError(f"stream truncated at frame {i + 1}")
        frames.append(
            np.frombuffer(data, dtype=np.uint8).reshape(h, w, 3).copy())
    return frames
