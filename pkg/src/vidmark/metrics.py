"""Scoring: temporal IoU, Recall@theta, mIoU for moment retrieval;
mAP and HIT@1 for highlight detection."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import DataFormatError
from .grounding import HighlightPrediction, TemporalSpan

IOU_THRESHOLDS = (0.3, 0.5, 0.7)
DEFAULT_RELEVANCE_THRESHOLD = 3.0


def temporal_iou(a: TemporalSpan, b: TemporalSpan) -> float:
    """Interval IoU over real segments. Zero-length spans score 0
    against everything except their identical point (1)."""
    if a.unit != b.unit:
        raise ValueError(f"unit mismatch: {a.unit} vs {b.unit}")
    inter = min(a.end, b.end) - max(a.start, b.start)
    union = max(a.end, b.end) - min(a.start, b.start)
    if union <= 0:
        # both spans are points; identical iff starts coincide
        return 1.0 if a.start == b.start else 0.0
    return max(inter, 0.0) / union


@dataclass
class EvalItem:
    item_id: str
    gold_span: TemporalSpan | None = None
    pred_span: TemporalSpan | None = None  # None = parse error / missing
    gold_clips: tuple[tuple[int, float], ...] | None = None
    pred_highlight: HighlightPrediction | None = None
    parse_error: bool = False


@dataclass
class EvalReport:
    n_items: int
    n_parse_errors: int
    r_at: dict[float, float] = field(default_factory=dict)
    miou: float | None = None
    map: float | None = None
    hit_at_1: float | None = None
    n_skipped_no_relevant: int = 0

    def to_dict(self) -> dict:
        return {
            "n_items": self.n_items,
            "n_parse_errors": self.n_parse_errors,
            "r_at": {f"{t:g}": v for t, v in sorted(self.r_at.items())},
            "miou": self.miou,
            "map": self.map,
            "hit_at_1": self.hit_at_1,
            "n_skipped_no_relevant": self.n_skipped_no_relevant,
        }


def moment_retrieval_report(items: list[EvalItem],
                            thresholds=IOU_THRESHOLDS) -> EvalReport:
    """R@theta = fraction of items with IoU >= theta; mIoU = mean IoU;
    parse errors contribute IoU 0."""
    ious = []
    n_errors = 0
    for item in items:
        if item.gold_span is None:
            raise DataFormatError(f"item {item.item_id}: missing gold span")
        if item.pred_span is None:
            n_errors += 1
            ious.append(0.0)
        else:
            ious.append(temporal_iou(item.pred_span, item.gold_span))
    n = len(items)
    r_at = {t: (sum(1 for v in ious if v >= t) / n if n else 0.0)
            for t in thresholds}
    miou = sum(ious) / n if n else 0.0
    return EvalReport(n_items=n, n_parse_errors=n_errors, r_at=r_at,
                      miou=miou)


def rank_clips(gold_clips, prediction: HighlightPrediction | None
               ) -> list[int]:
    """Clip indices by predicted saliency desc, ties by index asc.
    Clips absent from the prediction rank below all predicted ones."""
    predicted = dict(prediction.entries) if prediction else {}
    universe = [idx for idx, _ in gold_clips]
    return sorted(
        universe,
        key=lambda idx: (-predicted[idx], idx) if idx in predicted
        else (float("inf"), idx))


def average_precision(relevance_in_rank_order: list[bool]) -> float | None:
    """Ranked AP: mean precision-at-k over the relevant positions.
    None when nothing is relevant."""
    n_rel = sum(relevance_in_rank_order)
    if n_rel == 0:
        return None
    hits = 0
    total = 0.0
    for k, rel in enumerate(relevance_in_rank_order, start=1):
        if rel:
            hits += 1
            total += hits / k
    return total / n_rel


def highlight_report(items: list[EvalItem],
                     relevance_threshold: float = DEFAULT_RELEVANCE_THRESHOLD,
                     count_no_relevant_for_hit: bool = False) -> EvalReport:
    """mAP and HIT@1 over per-item saliency rankings.

    A clip is relevant iff its gold saliency >= relevance_threshold.
    Items without any relevant clip are skipped for AP and, by
    default, for HIT@1 as well (flag flips them to counted misses).
    """
    aps = []
    hits = []
    n_errors = 0
    n_skipped = 0
    for item in items:
        if item.gold_clips is None:
            raise DataFormatError(f"item {item.item_id}: missing gold clips")
        if item.pred_highlight is None or not item.pred_highlight.entries:
            n_errors += 1
        relevant = {idx for idx, sal in item.gold_clips
                    if sal >= relevance_threshold}
        ranking = rank_clips(item.gold_clips, item.pred_highlight)
        if not relevant:
            n_skipped += 1
            if count_no_relevant_for_hit:
                hits.append(0.0)
            continue
        aps.append(average_precision([idx in relevant for idx in ranking]))
        hits.append(1.0 if ranking and ranking[0] in relevant else 0.0)
    return EvalReport(
        n_items=len(items),
        n_parse_errors=n_errors,
        map=sum(aps) / len(aps) if aps else 0.0,
        hit_at_1=sum(hits) / len(hits) if hits else 0.0,
        n_skipped_no_relevant=n_skipped,
    )


# --- record files -----------------------------------------------------------


def write_mr_records(path: str | Path, records: list[dict]) -> None:
    """records: {item_id, video_id, query, span_start_s, span_end_s}."""
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")


def load_mr_records(path: str | Path) -> dict[str, dict]:
    out: dict[str, dict] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataFormatError(
                    f"{path}:{lineno}: invalid JSON: {exc}") from exc
            for key in ("item_id", "video_id", "query", "span_start_s",
                        "span_end_s"):
                if key not in rec:
                    raise DataFormatError(
                        f"{path}:{lineno}: missing field {key!r}")
            out[str(rec["item_id"])] = rec
    return out


def load_hd_records(path: str | Path) -> dict[str, list[tuple[int, float]]]:
    """records: {item_id, clips: [[index, saliency], ...]}."""
    out: dict[str, list[tuple[int, float]]] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataFormatError(
                    f"{path}:{lineno}: invalid JSON: {exc}") from exc
            if "item_id" not in rec or "clips" not in rec:
                raise DataFormatError(
                    f"{path}:{lineno}: missing item_id/clips")
            clips = [(int(i), float(s)) for i, s in rec["clips"]]
            out[str(rec["item_id"])] = clips
    return out


def record_to_span(rec: dict) -> TemporalSpan | None:
    if rec.get("span_start_s") is None or rec.get("span_end_s") is None:
        return None
    start, end = float(rec["span_start_s"]), float(rec["span_end_s"])
    if end < start:
        start, end = end, start
    return TemporalSpan(start=start, end=end, unit="second")


def pair_mr_items(gold: dict[str, dict], pred: dict[str, dict]
                  ) -> list[EvalItem]:
    """Gold-driven pairing; missing or null predictions score as parse
    errors."""
    items = []
    for item_id in sorted(gold):
        gspan = record_to_span(gold[item_id])
        if gspan is None:
            raise DataFormatError(f"gold item {item_id} has null span")
        pspan = record_to_span(pred[item_id]) if item_id in pred else None
        items.append(EvalItem(item_id=item_id, gold_span=gspan,
                              pred_span=pspan, parse_error=pspan is None))
    return items


def pair_hd_items(gold: dict[str, list[tuple[int, float]]],
                  pred: dict[str, list[tuple[int, float]]]) -> list[EvalItem]:
    items = []
    for item_id in sorted(gold):
        entries = tuple(pred.get(item_id, []))
        items.append(EvalItem(
            item_id=item_id,
            gold_clips=tuple(gold[item_id]),
            pred_highlight=HighlightPrediction(entries),
        ))
    return items


# --- report emission ----------------------------------------------------------


def report_to_json(report: EvalReport, header: dict | None = None) -> str:
    payload = dict(header or {})
    payload.update(report.to_dict())
    return json.dumps(payload, sort_keys=True, indent=2) + "\n"


def _fmt(v: float | None) -> str:
    return "--" if v is None else f"{100.0 * v:.2f}"


def report_table(report: EvalReport, label: str = "run") -> str:
    """Aligned one-row table (values in percent)."""
    headers = ["Run", "R@0.3", "R@0.5", "R@0.7", "mIoU", "mAP", "HIT@1"]
    row = [
        label,
        _fmt(report.r_at.get(0.3)) if report.r_at else "--",
        _fmt(report.r_at.get(0.5)) if report.r_at else "--",
        _fmt(report.r_at.get(0.7)) if report.r_at else "--",
        _fmt(report.miou),
        _fmt(report.map),
        _fmt(report.hit_at_1),
    ]
    widths = [max(len(h), len(r)) for h, r in zip(headers, row)]
    fmt_row = "  ".join(f"{{:<{w}}}" for w in widths)
    return fmt_row.format(*headers) + "\n" + fmt_row.format(*row) + "\n"


def ablation_table(rows: list[tuple[str, EvalReport]]) -> str:
    headers = ["Config", "R@0.3", "R@0.5", "R@0.7", "mIoU", "mAP", "HIT@1"]
    cells = []
    for label, report in rows:
        cells.append([
            label,
            _fmt(report.r_at.get(0.3)) if report.r_at else "--",
            _fmt(report.r_at.get(0.5)) if report.r_at else "--",
            _fmt(report.r_at.get(0.7)) if report.r_at else "--",
            _fmt(report.miou),
            _fmt(report.map),
            _fmt(report.hit_at_1),
        ])
    widths = [max(len(headers[i]), *(len(r[i]) for r in cells)) if cells
              else len(headers[i]) for i in range(len(headers))]
    fmt_row = "  ".join(f"{{:<{w}}}" for w in widths)
    lines = [fmt_row.format(*headers)]
    lines += [fmt_row.format(*row) for row in cells]
    return "\n".join(lines) + "\n"
