"""End-to-end orchestration: items -> tags -> masks -> rendering ->
Vid-LLM read-out -> scoring, with a resumable journal and ablation
sweeps over the rendering style."""

from __future__ import annotations

import colorsys
import json
import re
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from . import datasets, frameio, masks as masklib, metrics, render, tags as taglib
from .config import RunConfig
from .datasets import DatasetItem, SamplingMap
from .errors import AnswerParseError, BackendError, ConfigError, DataFormatError
from .grounding import (
    GroundingRequest,
    HighlightPrediction,
    MockVidLLM,
    TemporalSpan,
    VidLLMEndpoint,
    build_hd_prompt,
    build_mr_prompt,
    parse_hd_answer,
    parse_mr_answer,
)

PROGRESS_FILE = "progress.ndjson"
ITEMS_FILE = "items.ndjson"
PREDICTIONS_FILE = "predictions.ndjson"
REPORT_JSON = "report.json"
REPORT_TXT = "report.txt"


@dataclass
class RunContext:
    config: RunConfig
    items: list[DatasetItem]
    durations: dict[str, float]
    fps_map: dict[str, float]
    vidllm: object
    lm: taglib.LanguageModelEndpoint | None
    seg: masklib.SegmentationEndpoint | None
    mask_cache: dict
    lock: threading.Lock


def _load_json_map(path: str | None) -> dict:
    if not path:
        return {}
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def load_items(config: RunConfig) -> list[DatasetItem]:
    fmt = config.dataset_format
    if fmt == "charades":
        items = datasets.import_charades_sta(config.dataset)
    elif fmt == "canonical":
        items = datasets.load_canonical_mr(config.dataset)
    else:
        items = datasets.load_canonical_hd(config.dataset,
                                           config.hd_meta_file)
    return sorted(items, key=lambda it: it.item_id)


def build_context(config: RunConfig) -> RunContext:
    items = load_items(config)
    durations = {str(k): float(v)
                 for k, v in _load_json_map(config.durations_file).items()}
    fps_map = {str(k): float(v)
               for k, v in _load_json_map(config.fps_file).items()}
    if config.mock_oracle:
        vidllm = MockVidLLM(config.mock_oracle,
                            perturb_frames=config.mock_perturb_frames,
                            seed=config.seed)
    else:
        vidllm = VidLLMEndpoint(config.vidllm_endpoint,
                                model=config.vidllm_model,
                                api_key=config.api_key(),
                                retries=config.retries)
    lm = None
    if config.tagger == "lm":
        lm = taglib.LanguageModelEndpoint(config.lm_endpoint,
                                          model=config.lm_model,
                                          api_key=config.api_key())
    seg = None
    if config.seg_endpoint:
        seg = masklib.SegmentationEndpoint(config.seg_endpoint,
                                           api_key=config.api_key(),
                                           retries=config.retries)
    return RunContext(config=config, items=items, durations=durations,
                      fps_map=fps_map, vidllm=vidllm, lm=lm, seg=seg,
                      mask_cache={}, lock=threading.Lock())


def _video_fps(ctx: RunContext, video_id: str) -> float:
    return ctx.fps_map.get(video_id, ctx.config.fps)


def _video_duration(ctx: RunContext, item: DatasetItem, total_frames: int
                    ) -> float:
    if item.video_id in ctx.durations:
        return ctx.durations[item.video_id]
    if item.duration_s is not None:
        return item.duration_s
    fps = _video_fps(ctx, item.video_id)
    if total_frames < 1 or fps <= 0:
        raise DataFormatError(
            f"cannot derive duration for video {item.video_id}")
    return total_frames / fps


def _extract_tags(ctx: RunContext, query: str) -> taglib.TagList | None:
    config = ctx.config
    if config.tag_strategy == "none":
        return None
    if config.tagger == "lm":
        try:
            return taglib.extract_tags_via_lm(query, config.k_max, ctx.lm)
        except BackendError:
            if not config.lm_fallback_to_rules:
                raise
    return taglib.extract_tags_rule_based(query, config.k_max,
                                          strategy=config.tag_strategy)


def _precomputed_markers(ctx: RunContext, video_id: str
                         ) -> dict[int, masklib.FrameMarkers]:
    with ctx.lock:
        if video_id not in ctx.mask_cache:
            ctx.mask_cache[video_id] = masklib.load_precomputed_masks(
                ctx.config.masks_file, video_id)
        return ctx.mask_cache[video_id]


def _markers_for_item(ctx: RunContext, item: DatasetItem,
                      tag_list: taglib.TagList | None,
                      frames: list, mapping: SamplingMap
                      ) -> dict[int, masklib.FrameMarkers]:
    n = len(mapping)
    if tag_list is None:
        return {k: masklib.FrameMarkers(k) for k in range(1, n + 1)}
    if ctx.config.masks_file:
        per_video = _precomputed_markers(ctx, item.video_id)
        selected = masklib.select_markers_for_tags(per_video, list(tag_list))
        return {k: selected.get(k, masklib.FrameMarkers(k))
                for k in range(1, n + 1)}
    out = {}
    for k in range(1, n + 1):
        by_tag = {tag: masklib.ground_tag(frames[k - 1], tag, ctx.seg,
                                          video_id=item.video_id,
                                          frame_index=k)
                  for tag in tag_list}
        out[k] = masklib.assemble_semantic_markers(by_tag, k)
    return out


def _load_sampled_frames(ctx: RunContext, item: DatasetItem,
                         mapping: SamplingMap):
    video_dir = Path(ctx.config.frame_root) / item.video_id
    files = frameio.list_frame_files(video_dir)
    if not files:
        raise DataFormatError(f"no frames for video {item.video_id} in "
                              f"{video_dir}")
    fps = _video_fps(ctx, item.video_id)
    frames = []
    for k in range(1, len(mapping) + 1):
        src = mapping.source_frame(k, fps, len(files))
        frames.append(frameio.read_frame(files[src - 1]))
    return frames, len(files)


def process_item(ctx: RunContext, item: DatasetItem) -> dict:
    """One item through the full operator chain; never raises on
    model-side failures (they are recorded and scored)."""
    config = ctx.config
    record: dict = {
        "item_id": item.item_id,
        "video_id": item.video_id,
        "query": item.query,
    }
    video_dir = Path(config.frame_root) / item.video_id
    files = frameio.list_frame_files(video_dir)
    duration = _video_duration(ctx, item, len(files))
    mapping = datasets.sample_frames(duration, config.n_frames)
    frames, _ = _load_sampled_frames(ctx, item, mapping)

    tag_list = _extract_tags(ctx, item.query)
    record["tags"] = list(tag_list) if tag_list else []

    markers = _markers_for_item(ctx, item, tag_list, frames, mapping)
    record["n_markers"] = sum(len(m.semantic) for m in markers.values())

    style = config.style.to_style()
    marked = [render.render_frame(frames[k - 1], markers[k], k, style)
              for k in range(1, len(frames) + 1)]
    if config.save_marked_frames:
        out_dir = config.run_dir() / "marked" / item.item_id
        frameio.write_frame_dir(out_dir, marked)

    if config.task == "moment_retrieval":
        prompt = build_mr_prompt(item.query)
    else:
        template = config.hd_prompt_template or None
        prompt = (build_hd_prompt(item.query, template) if template
                  else build_hd_prompt(item.query))
    request = GroundingRequest(
        frames=[frameio.encode_png(f) for f in marked],
        prompt=prompt,
        task=config.task,
        item_id=item.item_id,
    )
    try:
        raw = ctx.vidllm.complete(request)
        record["raw_reply"] = raw
    except BackendError as exc:
        record["raw_reply"] = None
        record["error"] = str(exc)
        raw = None

    if config.task == "moment_retrieval":
        record.update(span_start_s=None, span_end_s=None, iou=None)
        if raw is not None:
            try:
                frame_span = parse_mr_answer(raw, len(mapping))
                second_span = datasets.frames_to_seconds(frame_span, mapping)
                record["pred_frames"] = [int(frame_span.start),
                                         int(frame_span.end)]
                record["span_start_s"] = second_span.start
                record["span_end_s"] = second_span.end
                if item.gold_span is not None:
                    record["iou"] = metrics.temporal_iou(second_span,
                                                         item.gold_span)
            except AnswerParseError:
                record["error"] = "unparsable reply"
    else:
        clips: list[tuple[int, float]] = []
        if raw is not None:
            pred = parse_hd_answer(raw, len(mapping))
            seen = set()
            for frame_idx0, score in pred.entries:
                t = mapping.timestamp(frame_idx0 + 1)
                clip = datasets.clip_index_for_time(t, config.clip_seconds)
                if clip in seen:
                    continue
                seen.add(clip)
                clips.append((clip, score))
        record["clips"] = clips
    return record


# --- journal and report -----------------------------------------------------


def _read_journal(path: Path) -> dict[str, dict]:
    done = {}
    if path.exists():
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                rec = json.loads(line)
                done[rec["item_id"]] = rec
    return done


def _record_to_eval_item(config: RunConfig, item: DatasetItem, rec: dict
                         ) -> metrics.EvalItem:
    if config.task == "moment_retrieval":
        pred = None
        if rec.get("span_start_s") is not None:
            pred = TemporalSpan(rec["span_start_s"], rec["span_end_s"],
                                "second")
        return metrics.EvalItem(item_id=item.item_id,
                                gold_span=item.gold_span, pred_span=pred,
                                parse_error=pred is None)
    entries = tuple((int(i), float(s)) for i, s in rec.get("clips", []))
    return metrics.EvalItem(item_id=item.item_id,
                            gold_clips=item.gold_clips,
                            pred_highlight=HighlightPrediction(entries))


def build_report(config: RunConfig, items: list[DatasetItem],
                 records: dict[str, dict]) -> metrics.EvalReport:
    eval_items = [_record_to_eval_item(config, item, records[item.item_id])
                  for item in items]
    if config.task == "moment_retrieval":
        return metrics.moment_retrieval_report(eval_items)
    return metrics.highlight_report(
        eval_items, relevance_threshold=config.relevance_threshold)


def _report_header(config: RunConfig) -> dict:
    header = config.model_dump()
    header.pop("limit", None)
    return {"config": header}


def _finalize(config: RunConfig, items: list[DatasetItem],
              records: dict[str, dict]) -> metrics.EvalReport:
    run_dir = config.run_dir()
    ordered = [records[item.item_id] for item in items]
    with open(run_dir / ITEMS_FILE, "w", encoding="utf-8") as fh:
        for rec in ordered:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")
    if config.task == "moment_retrieval":
        with open(run_dir / PREDICTIONS_FILE, "w", encoding="utf-8") as fh:
            for rec in ordered:
                fh.write(json.dumps({
                    "item_id": rec["item_id"],
                    "video_id": rec["video_id"],
                    "query": rec["query"],
                    "span_start_s": rec.get("span_start_s"),
                    "span_end_s": rec.get("span_end_s"),
                }, sort_keys=True) + "\n")
    else:
        with open(run_dir / PREDICTIONS_FILE, "w", encoding="utf-8") as fh:
            for rec in ordered:
                fh.write(json.dumps({
                    "item_id": rec["item_id"],
                    "clips": rec.get("clips", []),
                }, sort_keys=True) + "\n")
    report = build_report(config, items, records)
    (run_dir / REPORT_JSON).write_text(
        metrics.report_to_json(report, _report_header(config)),
        encoding="utf-8")
    (run_dir / REPORT_TXT).write_text(
        metrics.report_table(report, label=config.run_name),
        encoding="utf-8")
    return report


def run_pipeline(config: RunConfig) -> metrics.EvalReport | None:
    """Execute the full chain for every item.

    Per-item failures are recorded and scored, never fatal. Completed
    items found in the journal are skipped, so an interrupted run
    resumes where it stopped. Returns the report, or None when a
    config.limit stopped the run before all items were processed.
    """
    ctx = build_context(config)
    run_dir = config.run_dir()
    run_dir.mkdir(parents=True, exist_ok=True)
    journal_path = run_dir / PROGRESS_FILE
    records = _read_journal(journal_path)
    pending = [it for it in ctx.items if it.item_id not in records]
    if config.limit is not None:
        pending = pending[:config.limit]

    write_lock = threading.Lock()

    def worker(item: DatasetItem) -> tuple[str, dict]:
        try:
            rec = process_item(ctx, item)
        except (DataFormatError, BackendError, ConfigError, OSError) as exc:
            rec = {"item_id": item.item_id, "video_id": item.video_id,
                   "query": item.query, "tags": [], "n_markers": 0,
                   "raw_reply": None, "error": str(exc)}
            if config.task == "moment_retrieval":
                rec.update(span_start_s=None, span_end_s=None, iou=None)
            else:
                rec["clips"] = []
        with write_lock:
            with open(journal_path, "a", encoding="utf-8") as fh:
                fh.write(json.dumps(rec, sort_keys=True) + "\n")
                fh.flush()
        return item.item_id, rec

    if pending:
        with ThreadPoolExecutor(max_workers=config.concurrency) as pool:
            for item_id, rec in pool.map(worker, pending):
                records[item_id] = rec

    if any(it.item_id not in records for it in ctx.items):
        return None
    return _finalize(config, ctx.items, records)


# --- previews ----------------------------------------------------------------


def emit_preview(config: RunConfig, item_id: str, k: int) -> list[Path]:
    """Write k evenly spaced marked frames of one item."""
    if k < 1:
        raise ConfigError("preview count must be >= 1")
    ctx = build_context(config)
    matching = [it for it in ctx.items if it.item_id == item_id]
    if not matching:
        raise DataFormatError(f"unknown item id {item_id!r}")
    item = matching[0]
    video_dir = Path(config.frame_root) / item.video_id
    files = frameio.list_frame_files(video_dir)
    duration = _video_duration(ctx, item, len(files))
    mapping = datasets.sample_frames(duration, config.n_frames)
    frames, _ = _load_sampled_frames(ctx, item, mapping)
    tag_list = _extract_tags(ctx, item.query)
    markers = _markers_for_item(ctx, item, tag_list, frames, mapping)
    style = config.style.to_style()
    n = len(frames)
    picks = sorted({max(1, min(n, round((j - 0.5) * n / k)))
                    for j in range(1, k + 1)})
    out_dir = config.run_dir() / "previews" / item.item_id
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for idx in picks:
        marked = render.render_frame(frames[idx - 1], markers[idx], idx, style)
        path = out_dir / frameio.frame_filename(idx)
        frameio.write_frame(path, marked)
        paths.append(path)
    return paths


# --- ablation grids -----------------------------------------------------------


def _hsv_palette(s: float, v: float) -> list[list[int]]:
    hues = [0.0, 1 / 6, 2 / 3, 1 / 3]  # red, yellow, blue, green
    out = []
    for h in hues:
        r, g, b = colorsys.hsv_to_rgb(h, s, v)
        out.append([round(r * 255), round(g * 255), round(b * 255)])
    return out


def mask_ablation_grid() -> list[dict]:
    rows = [{"key": "No mask", "semantic": False, "style": {}}]
    for alpha in (0.2, 0.3, 0.5):
        rows.append({
            "key": f"Mask fill (palette), alpha={alpha}",
            "semantic": True,
            "style": {"alpha": alpha, "contour_width": 0},
        })
    rows.append({
        "key": "Mask fill (all-red), alpha=0.3",
        "semantic": True,
        "style": {"alpha": 0.3, "contour_width": 0,
                  "palette": [[255, 0, 0]]},
    })
    for w in (2, 3, 5):
        rows.append({
            "key": f"Mask + contour (palette), w={w}",
            "semantic": True,
            "style": {"alpha": 0.3, "beta": 1.0, "contour_width": w},
        })
    return rows


INDEX_POSITION_LABELS = {
    "top-left": "Top Left",
    "top-right": "Top Right",
    "center": "Center",
    "bottom-left": "Bottom Left",
    "bottom-right": "Bottom Right",
    "find-region": "Find region",
}

INDEX_COLOR_VALUES = {
    "Black": [0, 0, 0],
    "Red": [255, 0, 0],
    "Blue": [0, 0, 255],
}


def index_ablation_grid() -> list[dict]:
    rows = []
    for position, label in INDEX_POSITION_LABELS.items():
        rows.append({
            "key": f"Position / 40 / Black / {label}",
            "semantic": True,
            "style": {"index_font_height": 40, "index_color": [0, 0, 0],
                      "index_position": position},
        })
    for size in (20, 30, 38, 40):
        rows.append({
            "key": f"Size / {size} / Black / Bottom Right",
            "semantic": True,
            "style": {"index_font_height": size, "index_color": [0, 0, 0],
                      "index_position": "bottom-right"},
        })
    for color, rgb in INDEX_COLOR_VALUES.items():
        rows.append({
            "key": f"Color / 38 / {color} / Bottom Right",
            "semantic": True,
            "style": {"index_font_height": 38, "index_color": rgb,
                      "index_position": "bottom-right"},
        })
    return rows


def palette_ablation_grid() -> list[dict]:
    base = {"alpha": 0.3, "beta": 1.0, "contour_width": 3}
    return [
        {"key": "RGB palette", "semantic": True,
         "style": {**base, "palette": [[255, 0, 0], [255, 255, 0],
                                       [0, 0, 255], [0, 128, 0]]}},
        {"key": "HSV palette (high S/V)", "semantic": True,
         "style": {**base, "palette": _hsv_palette(1.0, 1.0)}},
        {"key": "HSV palette (low S/V)", "semantic": True,
         "style": {**base, "palette": _hsv_palette(0.4, 0.6)}},
    ]


def tag_ablation_grid() -> list[dict]:
    return [
        {"key": "No nouns", "tag_strategy": "none", "style": {}},
        {"key": "All nouns", "tag_strategy": "all", "style": {}},
        {"key": "Single noun", "tag_strategy": "single", "style": {}},
        {"key": "Subject nouns (ours)", "tag_strategy": "subject",
         "style": {}},
    ]


ABLATION_GRIDS = {
    "mask": mask_ablation_grid,
    "index": index_ablation_grid,
    "palette": palette_ablation_grid,
    "tags": tag_ablation_grid,
}


def _slug(key: str) -> str:
    return re.sub(r"[^a-z0-9]+", "-", key.lower()).strip("-")


def run_ablation(config: RunConfig, grid_name: str
                 ) -> list[tuple[str, metrics.EvalReport]]:
    """Run the pipeline once per grid row; rows keyed like the study
    tables. Emits ablation_<grid>.json and .txt under the run dir."""
    if grid_name not in ABLATION_GRIDS:
        raise ConfigError(f"unknown ablation grid {grid_name!r}; choose "
                          f"from {sorted(ABLATION_GRIDS)}")
    rows = ABLATION_GRIDS[grid_name]()
    results = []
    for row in rows:
        overrides = dict(
            run_name=f"{config.run_name}-{grid_name}-{_slug(row['key'])}",
            limit=None,
        )
        if row.get("tag_strategy"):
            overrides["tag_strategy"] = row["tag_strategy"]
        elif not row.get("semantic", True):
            overrides["tag_strategy"] = "none"
        style = type(config.style)(
            **{**config.style.model_dump(), **row["style"]})
        sub = config.model_copy(update={**overrides, "style": style})
        report = run_pipeline(sub)
        results.append((row["key"], report))
    out_dir = config.run_dir()
    out_dir.mkdir(parents=True, exist_ok=True)
    payload = {
        "grid": grid_name,
        "rows": [{"key": key, **report.to_dict()}
                 for key, report in results],
    }
    (out_dir / f"ablation_{grid_name}.json").write_text(
        json.dumps(payload, sort_keys=True, indent=2) + "\n",
        encoding="utf-8")
    (out_dir / f"ablation_{grid_name}.txt").write_text(
        metrics.ablation_table(results), encoding="utf-8")
    return results
