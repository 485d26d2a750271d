"""Synthetic demo/test workspace: tiny deterministic videos, gold
spans aligned to the sampling grid, precomputed masks, and a scripted
reply oracle. Everything the pipeline needs to run hermetically.

    python3 -m vidmark.synth OUT_DIR [N_ITEMS]
"""

from __future__ import annotations

import json
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import frameio
from .datasets import sample_frames
from .grounding import format_mr_answer, TemporalSpan
from .masks import InstanceMask, write_mask_records
from .metrics import write_mr_records
from .tags import extract_tags_rule_based

QUERY_TEMPLATES = [
    "A man walks across the room.",
    "A dog is running in the yard.",
    "A woman is dancing in the kitchen.",
    "Two men are talking together.",
    "A cat jumps onto the table.",
]


@dataclass
class SyntheticItem:
    item_id: str
    video_id: str
    query: str
    tag: str
    frame_span: tuple[int, int]  # gold expressed in sampled-frame indices
    gold_start_s: float
    gold_end_s: float


def _frame_content(item_idx: int, frame_idx: int, h: int, w: int,
                   rect: tuple[int, int, int, int]) -> np.ndarray:
    base = (37 * item_idx + 11 * frame_idx) % 200
    col = ((np.arange(w) * 3 + base) % 256).astype(np.uint8)
    frame = np.stack([
        np.tile(col, (h, 1)),
        np.full((h, w), (base + 60) % 256, dtype=np.uint8),
        np.tile(col[::-1], (h, 1)),
    ], axis=-1)
    y0, x0, y1, x1 = rect
    frame[y0:y1, x0:x1] = (210, 120, 40)
    return frame


def _rect_for(frame_idx: int, n_frames: int, h: int, w: int
              ) -> tuple[int, int, int, int]:
    rw, rh = max(4, w // 6), max(4, h // 4)
    span = max(1, w - rw - 2)
    x0 = 1 + (frame_idx - 1) * span // max(1, n_frames - 1)
    y0 = h // 3
    return (y0, x0, y0 + rh, x0 + rw)


def make_synthetic_dataset(
    root: str | Path,
    n_items: int = 20,
    n_frames: int = 16,
    frame_hw: tuple[int, int] = (48, 64),
    fps: float = 1.0,
) -> list[SyntheticItem]:
    """Create frames/, gold.ndjson and masks.ndjson under root.

    Source videos have exactly n_frames frames at the given fps, so a
    run configured with the same n_frames samples them one-to-one, and
    gold spans (chosen on the sampling grid) convert back exactly.
    """
    root = Path(root)
    h, w = frame_hw
    duration = n_frames / fps
    mapping = sample_frames(duration, n_frames)
    items: list[SyntheticItem] = []
    gold_records = []
    mask_records = []
    margin = max(2, n_frames // 8)
    for i in range(n_items):
        video_id = f"vid{i:03d}"
        query = QUERY_TEMPLATES[i % len(QUERY_TEMPLATES)]
        tag = extract_tags_rule_based(query).tags[0]
        a = margin + (i % max(1, n_frames // 2 - margin))
        b = min(n_frames - margin, a + 2 + (i % max(1, n_frames // 3)))
        if b <= a:
            b = a + 1
        item = SyntheticItem(
            item_id=f"{video_id}#1",
            video_id=video_id,
            query=query,
            tag=tag,
            frame_span=(a, b),
            gold_start_s=mapping.timestamp(a),
            gold_end_s=mapping.timestamp(b),
        )
        items.append(item)
        gold_records.append({
            "item_id": item.item_id,
            "video_id": video_id,
            "query": query,
            "span_start_s": item.gold_start_s,
            "span_end_s": item.gold_end_s,
            "duration_s": duration,
        })
        video_dir = root / "frames" / video_id
        frames = []
        for k in range(1, n_frames + 1):
            rect = _rect_for(k, n_frames, h, w)
            frames.append(_frame_content(i, k, h, w, rect))
            bitmap = np.zeros((h, w), dtype=bool)
            y0, x0, y1, x1 = rect
            bitmap[y0:y1, x0:x1] = True
            mask_records.append(
                (video_id, k, tag,
                 InstanceMask.from_bitmap(bitmap, score=0.9)))
        frameio.write_frame_dir(video_dir, frames)
    write_mr_records(root / "gold.ndjson", gold_records)
    write_mask_records(root / "masks.ndjson", mask_records)
    return items


def write_verbatim_oracle(items: list[SyntheticItem], path: str | Path
                          ) -> None:
    oracle = {it.item_id: format_mr_answer(
        TemporalSpan(it.frame_span[0], it.frame_span[1], "frame"))
        for it in items}
    Path(path).write_text(json.dumps(oracle, sort_keys=True, indent=2),
                          encoding="utf-8")


def write_shifted_oracle(items: list[SyntheticItem], path: str | Path,
                         offset: int) -> None:
    oracle = {it.item_id: format_mr_answer(
        TemporalSpan(it.frame_span[0] + offset, it.frame_span[1] + offset,
                     "frame"))
        for it in items}
    Path(path).write_text(json.dumps(oracle, sort_keys=True, indent=2),
                          encoding="utf-8")


def write_demo_config(root: str | Path, n_frames: int = 16) -> Path:
    root = Path(root)
    config = {
        "dataset": str(root / "gold.ndjson"),
        "dataset_format": "canonical",
        "frame_root": str(root / "frames"),
        "task": "moment_retrieval",
        "fps": 1.0,
        "n_frames": n_frames,
        "masks_file": str(root / "masks.ndjson"),
        "mock_oracle": str(root / "oracle.json"),
        "output_root": str(root / "runs"),
        "run_name": "demo",
        "concurrency": 2,
    }
    path = root / "config.yaml"
    import yaml

    path.write_text(yaml.safe_dump(config, sort_keys=True),
                    encoding="utf-8")
    return path


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    if not argv:
        print("usage: python3 -m vidmark.synth OUT_DIR [N_ITEMS]",
              file=sys.stderr)
        return 2
    out = Path(argv[0])
    n_items = int(argv[1]) if len(argv) > 1 else 20
    items = make_synthetic_dataset(out, n_items=n_items)
    write_verbatim_oracle(items, out / "oracle.json")
    config = write_demo_config(out)
    print(f"wrote {n_items} items under {out}")
    print(f"run: vidmark run --config {config}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
