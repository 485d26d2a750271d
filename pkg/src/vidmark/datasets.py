"""Dataset import and frame sampling."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .errors import DataFormatError
from .grounding import TemporalSpan


@dataclass
class DatasetItem:
    item_id: str
    video_id: str
    query: str
    gold_span: TemporalSpan | None = None  # seconds (moment retrieval)
    gold_clips: tuple[tuple[int, float], ...] | None = None  # highlights
    duration_s: float | None = None


def import_charades_sta(path: str | Path) -> list[DatasetItem]:
    """Lines of the form "video start end##sentence", seconds as reals.

    Item ids are "<video>#<line>" so repeated (video, query) pairs stay
    distinct. Malformed lines raise with their line number.
    """
    items = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            head, sep, sentence = line.partition("##")
            if not sep or not sentence.strip():
                raise DataFormatError(
                    f"{path}:{lineno}: expected 'video start end##sentence'")
            parts = head.split()
            if len(parts) != 3:
                raise DataFormatError(
                    f"{path}:{lineno}: expected 'video start end' before ##, "
                    f"got {head!r}")
            video_id = parts[0]
            try:
                start, end = float(parts[1]), float(parts[2])
            except ValueError as exc:
                raise DataFormatError(
                    f"{path}:{lineno}: non-numeric span: {exc}") from exc
            if end < start:
                start, end = end, start
            items.append(DatasetItem(
                item_id=f"{video_id}#{lineno}",
                video_id=video_id,
                query=sentence.strip(),
                gold_span=TemporalSpan(start, end, "second"),
            ))
    if not items:
        raise DataFormatError(f"{path}: no items")
    return items


def load_canonical_mr(path: str | Path) -> list[DatasetItem]:
    """Canonical NDJSON records {item_id, video_id, query, span_start_s,
    span_end_s} with optional duration_s."""
    from .metrics import load_mr_records

    items = []
    for item_id, rec in sorted(load_mr_records(path).items()):
        start, end = float(rec["span_start_s"]), float(rec["span_end_s"])
        if end < start:
            start, end = end, start
        items.append(DatasetItem(
            item_id=item_id,
            video_id=str(rec["video_id"]),
            query=str(rec["query"]),
            gold_span=TemporalSpan(start, end, "second"),
            duration_s=(float(rec["duration_s"])
                        if rec.get("duration_s") is not None else None),
        ))
    return items


def load_canonical_hd(path: str | Path, queries_path: str | Path | None = None
                      ) -> list[DatasetItem]:
    """HD gold {item_id, clips: [...]} plus an optional sidecar mapping
    item_id -> {video_id, query, duration_s}."""
    from .metrics import load_hd_records

    meta = {}
    if queries_path is not None:
        with open(queries_path, encoding="utf-8") as fh:
            meta = json.load(fh)
    items = []
    for item_id, clips in sorted(load_hd_records(path).items()):
        info = meta.get(item_id, {})
        items.append(DatasetItem(
            item_id=item_id,
            video_id=str(info.get("video_id", item_id)),
            query=str(info.get("query", "")),
            gold_clips=tuple(clips),
            duration_s=(float(info["duration_s"])
                        if info.get("duration_s") is not None else None),
        ))
    return items


# --- frame sampling ---------------------------------------------------------


@dataclass(frozen=True)
class SamplingMap:
    """Sampled frame index (1..N) -> source timestamp in seconds."""

    timestamps: tuple[float, ...]

    def __post_init__(self):
        if not self.timestamps:
            raise ValueError("empty sampling map")
        if any(b <= a for a, b in zip(self.timestamps, self.timestamps[1:])):
            raise ValueError("timestamps must be strictly increasing")

    def __len__(self):
        return len(self.timestamps)

    def timestamp(self, frame_index: int) -> float:
        if not 1 <= frame_index <= len(self.timestamps):
            raise ValueError(f"frame index {frame_index} outside "
                             f"[1, {len(self.timestamps)}]")
        return self.timestamps[frame_index - 1]

    def source_frame(self, frame_index: int, fps: float, total: int) -> int:
        """1-based source frame holding the sampled timestamp."""
        t = self.timestamp(frame_index)
        return min(max(int(t * fps) + 1, 1), total)


def sample_frames(duration_s: float, n: int) -> SamplingMap:
    """Stratified-midpoint uniform sampling: t_k = (k - 0.5) * D / N."""
    if duration_s <= 0:
        raise ValueError("duration must be positive")
    if n < 1:
        raise ValueError("frame count must be >= 1")
    return SamplingMap(tuple((k - 0.5) * duration_s / n
                             for k in range(1, n + 1)))


def frames_to_seconds(span: TemporalSpan, mapping: SamplingMap
                      ) -> TemporalSpan:
    """Frame-denominated span -> timestamps of its endpoint frames."""
    if span.unit != "frame":
        raise ValueError("span is not frame-denominated")
    start = mapping.timestamp(int(span.start))
    end = mapping.timestamp(int(span.end))
    return TemporalSpan(start=start, end=end, unit="second")


def clip_index_for_time(t: float, clip_seconds: float) -> int:
    if clip_seconds <= 0:
        raise ValueError("clip length must be positive")
    return max(int(t // clip_seconds), 0)
