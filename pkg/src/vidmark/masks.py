"""Instance masks and the query-to-mask bridge.

Binary regions travel as row-major uncompressed run-length counts
(background first, alternating), one JSON record per line:

    {"video_id": ..., "frame_index": ..., "tag": ..., "height": ...,
     "width": ..., "rle_counts": [...], "score": ...}

All masks a backend reports for a tag are retained (recall-first): no
confidence pruning, no top-K, no dedup of identical regions.
"""

from __future__ import annotations

import base64
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import BackendError, DataFormatError


def rle_encode(bitmap: np.ndarray) -> list[int]:
    """Row-major RLE of a binary bitmap; first count is background."""
    flat = np.asarray(bitmap, dtype=bool).ravel(order="C")
    if flat.size == 0:
        return []
    changes = np.flatnonzero(flat[1:] != flat[:-1]) + 1
    bounds = np.concatenate(([0], changes, [flat.size]))
    counts = np.diff(bounds).tolist()
    if flat[0]:
        counts.insert(0, 0)
    return [int(c) for c in counts]


def rle_decode(counts: list[int], height: int, width: int) -> np.ndarray:
    """Inverse of rle_encode. Validates the run structure."""
    total = height * width
    if any((not isinstance(c, int)) or c < 0 for c in counts):
        raise DataFormatError(f"rle counts must be non-negative ints: {counts!r}")
    if any(c == 0 for c in counts[1:]):
        raise DataFormatError("zero-length run after the first count")
    if sum(counts) != total:
        raise DataFormatError(
            f"rle counts sum {sum(counts)} != height*width {total}")
    flat = np.zeros(total, dtype=bool)
    pos = 0
    value = False
    for c in counts:
        if value:
            flat[pos:pos + c] = True
        pos += c
        value = not value
    return flat.reshape(height, width)


@dataclass
class InstanceMask:
    """One grounded binary region over an H x W frame."""

    height: int
    width: int
    rle_counts: list[int]
    score: float | None = None
    _bitmap: np.ndarray | None = field(default=None, repr=False, compare=False)

    @classmethod
    def from_bitmap(cls, bitmap: np.ndarray, score: float | None = None
                    ) -> "InstanceMask":
        bitmap = np.asarray(bitmap, dtype=bool)
        if bitmap.ndim != 2:
            raise DataFormatError("mask bitmap must be 2-D")
        m = cls(height=bitmap.shape[0], width=bitmap.shape[1],
                rle_counts=rle_encode(bitmap), score=score)
        m._bitmap = bitmap
        return m

    def bitmap(self) -> np.ndarray:
        if self._bitmap is None:
            self._bitmap = rle_decode(self.rle_counts, self.height, self.width)
        return self._bitmap

    @property
    def area(self) -> int:
        return int(sum(self.rle_counts[1::2]))

    def validate(self):
        if self.height < 1 or self.width < 1:
            raise DataFormatError("mask dimensions must be positive")
        if self.score is not None and not (0.0 <= self.score <= 1.0):
            raise DataFormatError(f"mask score {self.score} outside [0,1]")
        rle_decode(self.rle_counts, self.height, self.width)


@dataclass
class Marker:
    """A region paired with its short overlay text."""

    region: InstanceMask
    tag: str

    def __post_init__(self):
        if not self.tag:
            raise DataFormatError("marker tag must be non-empty")


@dataclass
class FrameMarkers:
    """Semantic markers of one frame; ordinals key the palette."""

    frame_index: int
    semantic: list[Marker] = field(default_factory=list)

    def ordinals(self) -> list[int]:
        return list(range(1, len(self.semantic) + 1))

    def dims(self) -> tuple[int, int] | None:
        if not self.semantic:
            return None
        r = self.semantic[0].region
        return (r.height, r.width)


def assemble_semantic_markers(
    masks_by_tag: dict[str, list[InstanceMask]],
    frame_index: int = 1,
) -> FrameMarkers:
    """Union of per-tag masks in tag order, backend order within a tag."""
    markers: list[Marker] = []
    dims = None
    for tag, masks in masks_by_tag.items():
        for mask in masks:
            if dims is None:
                dims = (mask.height, mask.width)
            elif dims != (mask.height, mask.width):
                raise DataFormatError(
                    f"mixed mask dimensions: {dims} vs "
                    f"{(mask.height, mask.width)} for tag {tag!r}")
            markers.append(Marker(region=mask, tag=tag))
    return FrameMarkers(frame_index=frame_index, semantic=markers)


# --- wire format ----------------------------------------------------------

_REQUIRED_RECORD_FIELDS = ("video_id", "frame_index", "tag", "height",
                           "width", "rle_counts")


def mask_record_to_json(video_id: str, frame_index: int, tag: str,
                        mask: InstanceMask) -> dict:
    return {
        "video_id": video_id,
        "frame_index": frame_index,
        "tag": tag,
        "height": mask.height,
        "width": mask.width,
        "rle_counts": mask.rle_counts,
        "score": mask.score,
    }


def _parse_mask_record(obj: dict, where: str) -> tuple[str, int, str, InstanceMask]:
    for key in _REQUIRED_RECORD_FIELDS:
        if key not in obj:
            raise DataFormatError(f"{where}: missing field {key!r}")
    try:
        mask = InstanceMask(
            height=int(obj["height"]),
            width=int(obj["width"]),
            rle_counts=[int(c) for c in obj["rle_counts"]],
            score=None if obj.get("score") is None else float(obj["score"]),
        )
        mask.validate()
        frame_index = int(obj["frame_index"])
        if frame_index < 1:
            raise DataFormatError("frame_index must be >= 1")
    except DataFormatError as exc:
        raise DataFormatError(f"{where}: {exc}") from exc
    return str(obj["video_id"]), frame_index, str(obj["tag"]), mask


def write_mask_records(path: str | Path, records) -> None:
    """records: iterable of (video_id, frame_index, tag, InstanceMask)."""
    with open(path, "w", encoding="utf-8") as fh:
        for video_id, frame_index, tag, mask in records:
            fh.write(json.dumps(
                mask_record_to_json(video_id, frame_index, tag, mask),
                sort_keys=True) + "\n")


def load_mask_records(path: str | Path):
    """Yield (video_id, frame_index, tag, InstanceMask) in file order."""
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataFormatError(
                    f"{path}:{lineno}: invalid JSON: {exc}") from exc
            yield _parse_mask_record(obj, f"{path}:{lineno}")


def load_precomputed_masks(path: str | Path, video_id: str
                           ) -> dict[int, FrameMarkers]:
    """Per-frame marker sets for one video, in file record order."""
    frames: dict[int, FrameMarkers] = {}
    for vid, frame_index, tag, mask in load_mask_records(path):
        if vid != video_id:
            continue
        fm = frames.setdefault(frame_index, FrameMarkers(frame_index))
        fm.semantic.append(Marker(region=mask, tag=tag))
    return frames


def select_markers_for_tags(
    frames: dict[int, FrameMarkers],
    tags,
) -> dict[int, FrameMarkers]:
    """Restrict precomputed markers to a query's tags, in tag order."""
    out: dict[int, FrameMarkers] = {}
    wanted = list(tags)
    for frame_index, fm in frames.items():
        by_tag: dict[str, list[InstanceMask]] = {t: [] for t in wanted}
        for marker in fm.semantic:
            if marker.tag in by_tag:
                by_tag[marker.tag].append(marker.region)
        out[frame_index] = assemble_semantic_markers(by_tag, frame_index)
    return out


# --- live segmentation backend -------------------------------------------

@dataclass
class SegmentationEndpoint:
    """HTTP open-vocabulary segmentation backend.

    POST {url}/segment with {"image_b64", "width", "height", "tag"};
    the reply is {"masks": [mask records]}.
    """

    url: str
    api_key: str | None = None
    timeout: float = 120.0
    retries: int = 2

    def segment(self, image_png: bytes, width: int, height: int, tag: str,
                video_id: str | None = None, frame_index: int | None = None
                ) -> list[InstanceMask]:
        import httpx

        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        body = {
            "image_b64": base64.b64encode(image_png).decode("ascii"),
            "width": width,
            "height": height,
            "tag": tag,
        }
        # routing context for fixture-mode backends
        if video_id is not None:
            body["video_id"] = video_id
        if frame_index is not None:
            body["frame_index"] = frame_index
        last_exc = None
        for _ in range(self.retries + 1):
            try:
                resp = httpx.post(f"{self.url.rstrip('/')}/segment",
                                  json=body, headers=headers,
                                  timeout=self.timeout)
                resp.raise_for_status()
                payload = resp.json()
                break
            except Exception as exc:  # noqa: BLE001
                last_exc = exc
        else:
            raise BackendError(
                f"segmentation endpoint {self.url} failed: {last_exc}")
        masks = []
        for i, obj in enumerate(payload.get("masks", [])):
            obj = dict(obj)
            obj.setdefault("video_id", "")
            obj.setdefault("frame_index", 1)
            obj.setdefault("tag", tag)
            _, _, _, mask = _parse_mask_record(obj, f"reply mask {i}")
            masks.append(mask)
        return masks


def ground_tag(frame: np.ndarray, tag: str, seg: SegmentationEndpoint,
               video_id: str | None = None, frame_index: int | None = None
               ) -> list[InstanceMask]:
    """All instance masks the backend reports for one tag on one frame.

    Recall-first: every mask is kept, duplicates included. Masks whose
    dimensions disagree with the frame are a data error.
    """
    from .frameio import encode_png

    height, width = frame.shape[:2]
    masks = seg.segment(encode_png(frame), width, height, tag,
                        video_id=video_id, frame_index=frame_index)
    for mask in masks:
        if (mask.height, mask.width) != (height, width):
            raise DataFormatError(
                f"mask dims {(mask.height, mask.width)} != frame dims "
                f"{(height, width)} for tag {tag!r}")
    return masks
