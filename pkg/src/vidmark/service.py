"""HTTP service exposing the toolkit's operators.

Stateless operators (tagging, parsing, rendering, scoring, mask codec)
are synchronous endpoints; full pipeline runs are submitted as
background jobs and polled by id. The CLI talks to this service for
single-shot operations and drives the core package directly for
file-heavy batch work.
"""

from __future__ import annotations

import base64
import threading
import uuid

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, Field

from . import metrics as metriclib
from .config import RunConfig, StyleModel
from .errors import AnswerParseError, DataFormatError, VidmarkError
from .frameio import decode_png, encode_png
from .grounding import (
    HighlightPrediction,
    TemporalSpan,
    build_mr_prompt,
    parse_hd_answer,
    parse_mr_answer,
)
from .masks import FrameMarkers, InstanceMask, Marker, rle_decode, rle_encode
from .pipeline import run_pipeline
from .render import render_frame
from .tags import extract_tags_rule_based, parse_lm_reply


class TagExtractRequest(BaseModel):
    query: str
    k_max: int = 3
    strategy: str = "subject"


class TagParseRequest(BaseModel):
    raw: str
    k_max: int = 3


class TagResponse(BaseModel):
    tags: list[str]


class PromptRequest(BaseModel):
    query: str


class PromptResponse(BaseModel):
    prompt: str


class MomentAnswerRequest(BaseModel):
    raw: str
    t_max: int


class MomentAnswerResponse(BaseModel):
    parsed: bool
    start: int | None = None
    end: int | None = None
    unit: str = "frame"


class HighlightAnswerRequest(BaseModel):
    raw: str
    n_clips: int


class HighlightAnswerResponse(BaseModel):
    entries: list[tuple[int, float]]


class MaskEncodeRequest(BaseModel):
    bitmap: list[list[int]]


class MaskRecordModel(BaseModel):
    tag: str = "region"
    height: int
    width: int
    rle_counts: list[int]
    score: float | None = None


class MaskDecodeResponse(BaseModel):
    bitmap: list[list[int]]


class RenderFrameRequest(BaseModel):
    frame_b64: str
    frame_index: int = 1
    markers: list[MaskRecordModel] = Field(default_factory=list)
    style: StyleModel = Field(default_factory=StyleModel)


class RenderFrameResponse(BaseModel):
    frame_b64: str


class MomentItemModel(BaseModel):
    item_id: str
    gold: tuple[float, float]
    pred: tuple[float, float] | None = None


class MomentEvalRequest(BaseModel):
    items: list[MomentItemModel]


class HighlightItemModel(BaseModel):
    item_id: str
    gold_clips: list[tuple[int, float]]
    pred_clips: list[tuple[int, float]] = Field(default_factory=list)


class HighlightEvalRequest(BaseModel):
    items: list[HighlightItemModel]
    relevance_threshold: float = 3.0


class RunSubmitResponse(BaseModel):
    run_id: str


class RunStatusResponse(BaseModel):
    state: str  # running | done | failed
    report: dict | None = None
    error: str | None = None


def create_app() -> FastAPI:
    app = FastAPI(title="vidmark", version="0.1.0")
    runs: dict[str, dict] = {}
    runs_lock = threading.Lock()

    @app.get("/health")
    def health():
        return {"status": "ok"}

    @app.post("/tags/extract", response_model=TagResponse)
    def tags_extract(req: TagExtractRequest):
        try:
            tags = extract_tags_rule_based(req.query, req.k_max,
                                           strategy=req.strategy)
        except ValueError as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        return TagResponse(tags=list(tags))

    @app.post("/tags/parse", response_model=TagResponse)
    def tags_parse(req: TagParseRequest):
        return TagResponse(tags=list(parse_lm_reply(req.raw, req.k_max)))

    @app.post("/prompts/moment", response_model=PromptResponse)
    def prompts_moment(req: PromptRequest):
        try:
            return PromptResponse(prompt=build_mr_prompt(req.query))
        except ValueError as exc:
            raise HTTPException(status_code=422, detail=str(exc))

    @app.post("/answers/moment", response_model=MomentAnswerResponse)
    def answers_moment(req: MomentAnswerRequest):
        try:
            span = parse_mr_answer(req.raw, req.t_max)
        except AnswerParseError:
            return MomentAnswerResponse(parsed=False)
        except ValueError as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        return MomentAnswerResponse(parsed=True, start=int(span.start),
                                    end=int(span.end))

    @app.post("/answers/highlight", response_model=HighlightAnswerResponse)
    def answers_highlight(req: HighlightAnswerRequest):
        try:
            pred = parse_hd_answer(req.raw, req.n_clips)
        except ValueError as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        return HighlightAnswerResponse(entries=list(pred.entries))

    @app.post("/masks/encode", response_model=MaskRecordModel)
    def masks_encode(req: MaskEncodeRequest):
        import numpy as np

        bitmap = np.asarray(req.bitmap, dtype=bool)
        if bitmap.ndim != 2:
            raise HTTPException(status_code=422, detail="bitmap must be 2-D")
        return MaskRecordModel(height=bitmap.shape[0], width=bitmap.shape[1],
                               rle_counts=rle_encode(bitmap))

    @app.post("/masks/decode", response_model=MaskDecodeResponse)
    def masks_decode(req: MaskRecordModel):
        try:
            bitmap = rle_decode(req.rle_counts, req.height, req.width)
        except DataFormatError as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        return MaskDecodeResponse(bitmap=bitmap.astype(int).tolist())

    @app.post("/render/frame", response_model=RenderFrameResponse)
    def render_frame_endpoint(req: RenderFrameRequest):
        try:
            frame = decode_png(base64.b64decode(req.frame_b64))
            markers = FrameMarkers(req.frame_index, [
                Marker(InstanceMask(m.height, m.width, m.rle_counts,
                                    m.score), m.tag)
                for m in req.markers
            ])
            marked = render_frame(frame, markers, req.frame_index,
                                  req.style.to_style())
        except (VidmarkError, ValueError) as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        return RenderFrameResponse(
            frame_b64=base64.b64encode(encode_png(marked)).decode("ascii"))

    @app.post("/metrics/moment")
    def metrics_moment(req: MomentEvalRequest):
        items = []
        for m in req.items:
            gold = TemporalSpan(min(m.gold), max(m.gold), "second")
            pred = (TemporalSpan(min(m.pred), max(m.pred), "second")
                    if m.pred is not None else None)
            items.append(metriclib.EvalItem(item_id=m.item_id,
                                            gold_span=gold, pred_span=pred,
                                            parse_error=pred is None))
        return metriclib.moment_retrieval_report(items).to_dict()

    @app.post("/metrics/highlight")
    def metrics_highlight(req: HighlightEvalRequest):
        items = [
            metriclib.EvalItem(
                item_id=m.item_id,
                gold_clips=tuple(m.gold_clips),
                pred_highlight=HighlightPrediction(tuple(m.pred_clips)))
            for m in req.items
        ]
        return metriclib.highlight_report(
            items, relevance_threshold=req.relevance_threshold).to_dict()

    @app.post("/runs", response_model=RunSubmitResponse)
    def submit_run(config: RunConfig):
        run_id = uuid.uuid4().hex[:12]
        with runs_lock:
            runs[run_id] = {"state": "running", "report": None, "error": None}

        def execute():
            try:
                report = run_pipeline(config)
                with runs_lock:
                    if report is None:
                        runs[run_id].update(state="failed",
                                            error="run stopped before all "
                                                  "items completed (limit)")
                    else:
                        runs[run_id].update(state="done",
                                            report=report.to_dict())
            except Exception as exc:  # noqa: BLE001 - reported to poller
                with runs_lock:
                    runs[run_id].update(state="failed", error=str(exc))

        threading.Thread(target=execute, daemon=True).start()
        return RunSubmitResponse(run_id=run_id)

    @app.get("/runs/{run_id}", response_model=RunStatusResponse)
    def run_status(run_id: str):
        with runs_lock:
            if run_id not in runs:
                raise HTTPException(status_code=404, detail="unknown run id")
            return RunStatusResponse(**runs[run_id])

    return app


app = create_app()
