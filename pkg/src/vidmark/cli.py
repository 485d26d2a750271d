"""Command-line interface.

Single-shot commands (tag, eval) can delegate to a running service via
--server; batch commands (run, ablate, preview) drive the core package
directly since frames and artifacts live on the local filesystem.

Exit codes: 0 success, 2 config error, 3 data error, 4 backend
unreachable.
"""

from __future__ import annotations

import functools
import json
import sys
from pathlib import Path

import click

from . import frameio, metrics as metriclib
from .config import API_KEY_ENV, StyleModel, load_run_config
from .errors import AnswerParseError, ConfigError, VidmarkError
from .grounding import (
    GroundingRequest,
    MockVidLLM,
    VidLLMEndpoint,
    build_hd_prompt,
    build_mr_prompt,
    parse_hd_answer,
    parse_mr_answer,
)
from .masks import (
    SegmentationEndpoint,
    load_precomputed_masks,
    select_markers_for_tags,
    write_mask_records,
)
from .pipeline import ABLATION_GRIDS, emit_preview, run_ablation, run_pipeline
from .render import render_frame
from .tags import (
    LanguageModelEndpoint,
    extract_tags_rule_based,
    extract_tags_via_lm,
)


def handle_errors(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except VidmarkError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(exc.exit_code)
        except FileNotFoundError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(3)
    return wrapper


def _api_key() -> str | None:
    import os

    return os.environ.get(API_KEY_ENV)


def _post(server: str, path: str, payload: dict) -> dict:
    import httpx

    resp = httpx.post(server.rstrip("/") + path, json=payload, timeout=300.0)
    resp.raise_for_status()
    return resp.json()


@click.group()
def main():
    """Query-conditioned video markerization and VTG evaluation."""


@main.command()
@click.option("--query", required=True, help="Natural-language event query.")
@click.option("--k-max", default=3, show_default=True)
@click.option("--strategy", default="subject", show_default=True,
              type=click.Choice(["subject", "single", "all"]))
@click.option("--mode", default="rules", show_default=True,
              type=click.Choice(["rules", "lm"]))
@click.option("--lm-endpoint", default=None, help="Chat endpoint for mode=lm.")
@click.option("--server", default=None, help="Delegate to a vidmark service.")
@handle_errors
def tag(query, k_max, strategy, mode, lm_endpoint, server):
    """Extract normalized subject tags from a query."""
    if server:
        reply = _post(server, "/tags/extract",
                      {"query": query, "k_max": k_max, "strategy": strategy})
        tags = reply["tags"]
    elif mode == "lm":
        if not lm_endpoint:
            raise ConfigError("--mode lm needs --lm-endpoint")
        lm = LanguageModelEndpoint(lm_endpoint, api_key=_api_key())
        tags = list(extract_tags_via_lm(query, k_max, lm))
    else:
        try:
            tags = list(extract_tags_rule_based(query, k_max,
                                                strategy=strategy))
        except ValueError as exc:
            raise ConfigError(str(exc))
    click.echo(", ".join(tags))


@main.command()
@click.option("--frames", "frames_dir", required=True,
              type=click.Path(exists=True, file_okay=False))
@click.option("--tags", "tags_csv", default=None,
              help="Comma-separated tags; default: extracted from --query.")
@click.option("--query", default=None)
@click.option("--seg-endpoint", required=True)
@click.option("--video-id", required=True)
@click.option("--out", required=True, type=click.Path(dir_okay=False))
@handle_errors
def ground(frames_dir, tags_csv, query, seg_endpoint, video_id, out):
    """Ground tags to per-frame masks via a segmentation endpoint."""
    from .masks import ground_tag

    if tags_csv:
        tag_list = [t.strip() for t in tags_csv.split(",") if t.strip()]
    elif query:
        tag_list = list(extract_tags_rule_based(query))
    else:
        raise ConfigError("provide --tags or --query")
    seg = SegmentationEndpoint(seg_endpoint, api_key=_api_key())
    files = frameio.list_frame_files(frames_dir)
    records = []
    for k, path in enumerate(files, start=1):
        frame = frameio.read_frame(path)
        for t in tag_list:
            for mask in ground_tag(frame, t, seg, video_id=video_id,
                                   frame_index=k):
                records.append((video_id, k, t, mask))
    write_mask_records(out, records)
    click.echo(f"wrote {len(records)} mask records to {out}")


@main.command()
@click.option("--frames", "frames_dir", required=True,
              type=click.Path(exists=True, file_okay=False))
@click.option("--masks", "masks_file", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--video-id", required=True)
@click.option("--query", default=None,
              help="Restrict markers to this query's tags.")
@click.option("--out", "out_dir", default=None,
              type=click.Path(file_okay=False))
@click.option("--stream-out", default=None, type=click.Path(dir_okay=False),
              help="Also write a raw-RGB stream file.")
@click.option("--alpha", default=0.3, show_default=True)
@click.option("--beta", default=1.0, show_default=True)
@click.option("--contour-width", default=3, show_default=True)
@click.option("--index-position", default="bottom-right", show_default=True)
@click.option("--index-size", default=38, show_default=True)
@click.option("--no-index", is_flag=True, default=False)
@handle_errors
def render(frames_dir, masks_file, video_id, query, out_dir, stream_out,
           alpha, beta, contour_width, index_position, index_size, no_index):
    """Render marked frames from precomputed masks."""
    if not out_dir and not stream_out:
        raise ConfigError("provide --out and/or --stream-out")
    style = StyleModel(alpha=alpha, beta=beta, contour_width=contour_width,
                       index_position=index_position,
                       index_font_height=index_size,
                       draw_index=not no_index).to_style()
    per_frame = load_precomputed_masks(masks_file, video_id)
    if query:
        per_frame = select_markers_for_tags(
            per_frame, list(extract_tags_rule_based(query)))
    files = frameio.list_frame_files(frames_dir)
    marked = []
    from .masks import FrameMarkers

    for k, path in enumerate(files, start=1):
        frame = frameio.read_frame(path)
        markers = per_frame.get(k, FrameMarkers(k))
        marked.append(render_frame(frame, markers, k, style))
    if out_dir:
        frameio.write_frame_dir(out_dir, marked)
        click.echo(f"wrote {len(marked)} marked frames to {out_dir}")
    if stream_out:
        with open(stream_out, "wb") as fh:
            frameio.write_rgb_stream(fh, marked)
        click.echo(f"wrote raw-RGB stream to {stream_out}")


@main.command()
@click.option("--frames", "frames_dir", required=True,
              type=click.Path(exists=True, file_okay=False))
@click.option("--query", required=True)
@click.option("--task", default="moment_retrieval", show_default=True,
              type=click.Choice(["moment_retrieval", "highlight_detection"]))
@click.option("--endpoint", default=None, help="Vid-LLM endpoint URL.")
@click.option("--mock-oracle", default=None,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--item-id", default=None)
@handle_errors
def infer(frames_dir, query, task, endpoint, mock_oracle, item_id):
    """Submit marked frames plus a prompt to a Vid-LLM and parse."""
    if (endpoint is None) == (mock_oracle is None):
        raise ConfigError("provide exactly one of --endpoint/--mock-oracle")
    files = frameio.list_frame_files(frames_dir)
    if not files:
        raise ConfigError(f"no frames in {frames_dir}")
    prompt = (build_mr_prompt(query) if task == "moment_retrieval"
              else build_hd_prompt(query))
    request = GroundingRequest(
        frames=[Path(p) for p in files], prompt=prompt, task=task,
        item_id=item_id)
    llm = (MockVidLLM(mock_oracle) if mock_oracle
           else VidLLMEndpoint(endpoint, api_key=_api_key()))
    raw = llm.complete(request)
    result = {"raw": raw}
    if task == "moment_retrieval":
        try:
            span = parse_mr_answer(raw, len(files))
            result["span_frames"] = [int(span.start), int(span.end)]
        except AnswerParseError:
            result["span_frames"] = None
    else:
        result["entries"] = list(parse_hd_answer(raw, len(files)).entries)
    click.echo(json.dumps(result, sort_keys=True))


@main.command("eval")
@click.option("--task", default="moment_retrieval", show_default=True,
              type=click.Choice(["moment_retrieval", "highlight_detection"]))
@click.option("--gold", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--pred", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--relevance-threshold", default=3.0, show_default=True)
@click.option("--out", "out_dir", default=None,
              type=click.Path(file_okay=False))
@click.option("--server", default=None, help="Delegate to a vidmark service.")
@handle_errors
def eval_cmd(task, gold, pred, relevance_threshold, out_dir, server):
    """Score prediction records against gold records."""
    if task == "moment_retrieval":
        gold_recs = metriclib.load_mr_records(gold)
        pred_recs = metriclib.load_mr_records(pred)
        if server:
            items = []
            for item_id in sorted(gold_recs):
                g = gold_recs[item_id]
                p = pred_recs.get(item_id)
                pspan = None
                if p and p.get("span_start_s") is not None:
                    pspan = (p["span_start_s"], p["span_end_s"])
                items.append({"item_id": item_id,
                              "gold": (g["span_start_s"], g["span_end_s"]),
                              "pred": pspan})
            payload = _post(server, "/metrics/moment", {"items": items})
            click.echo(json.dumps(payload, sort_keys=True, indent=2))
            return
        items = metriclib.pair_mr_items(gold_recs, pred_recs)
        report = metriclib.moment_retrieval_report(items)
    else:
        gold_recs = metriclib.load_hd_records(gold)
        pred_recs = metriclib.load_hd_records(pred)
        if server:
            items = [{"item_id": item_id,
                      "gold_clips": gold_recs[item_id],
                      "pred_clips": pred_recs.get(item_id, [])}
                     for item_id in sorted(gold_recs)]
            payload = _post(server, "/metrics/highlight",
                            {"items": items,
                             "relevance_threshold": relevance_threshold})
            click.echo(json.dumps(payload, sort_keys=True, indent=2))
            return
        items = metriclib.pair_hd_items(gold_recs, pred_recs)
        report = metriclib.highlight_report(
            items, relevance_threshold=relevance_threshold)
    click.echo(metriclib.report_table(report).rstrip())
    if out_dir:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.json").write_text(metriclib.report_to_json(report),
                                         encoding="utf-8")
        (out / "report.txt").write_text(metriclib.report_table(report),
                                        encoding="utf-8")
        click.echo(f"report written to {out}")


def _config_from_options(config_path, overrides):
    if config_path is None:
        raise ConfigError("--config is required")
    return load_run_config(config_path, overrides=list(overrides))


@main.command()
@click.option("--config", "config_path", required=True,
              type=click.Path(dir_okay=False))
@click.option("--set", "overrides", multiple=True, metavar="KEY=VALUE",
              help="Override any config field (dotted paths allowed).")
@handle_errors
def run(config_path, overrides):
    """Run the full pipeline per the config; resumable."""
    config = _config_from_options(config_path, overrides)
    report = run_pipeline(config)
    if report is None:
        click.echo("run stopped before all items completed (limit); "
                   "re-run to resume")
        return
    click.echo(metriclib.report_table(report, label=config.run_name).rstrip())
    click.echo(f"artifacts in {config.run_dir()}")


@main.command()
@click.option("--config", "config_path", required=True,
              type=click.Path(dir_okay=False))
@click.option("--grid", required=True,
              type=click.Choice(sorted(ABLATION_GRIDS)))
@click.option("--set", "overrides", multiple=True, metavar="KEY=VALUE")
@handle_errors
def ablate(config_path, grid, overrides):
    """Sweep a style/tagging grid; one pipeline run per row."""
    config = _config_from_options(config_path, overrides)
    results = run_ablation(config, grid)
    click.echo(metriclib.ablation_table(results).rstrip())
    click.echo(f"tables in {config.run_dir()}")


@main.command()
@click.option("--config", "config_path", required=True,
              type=click.Path(dir_okay=False))
@click.option("--item", "item_id", required=True)
@click.option("-k", "count", default=4, show_default=True)
@click.option("--set", "overrides", multiple=True, metavar="KEY=VALUE")
@handle_errors
def preview(config_path, item_id, count, overrides):
    """Write k evenly spaced marked frames for inspection."""
    config = _config_from_options(config_path, overrides)
    paths = emit_preview(config, item_id, count)
    for p in paths:
        click.echo(str(p))


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True)
@handle_errors
def serve(host, port):
    """Start the vidmark HTTP service."""
    import uvicorn

    from .service import app

    uvicorn.run(app, host=host, port=port)


if __name__ == "__main__":
    main()
