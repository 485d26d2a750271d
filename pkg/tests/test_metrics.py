import itertools
import random

import numpy as np
import pytest

from vidmark.errors import DataFormatError
from vidmark.grounding import HighlightPrediction, TemporalSpan
from vidmark.metrics import (
    EvalItem,
    average_precision,
    highlight_report,
    load_hd_records,
    load_mr_records,
    moment_retrieval_report,
    pair_hd_items,
    pair_mr_items,
    rank_clips,
    report_table,
    temporal_iou,
    write_mr_records,
)


def span(s, e, unit="second"):
    return TemporalSpan(s, e, unit)


# --- temporal IoU -----------------------------------------------------------


def grid_iou_oracle(a, b, step=1e-4):
    """Counting oracle on a regular grid; exact when endpoints are
    multiples of step."""
    lo = min(a.start, b.start)
    hi = max(a.end, b.end)
    n = int(round((hi - lo) / step))
    if n == 0:
        return 1.0 if a.start == b.start else 0.0
    mids = lo + (np.arange(n) + 0.5) * step
    in_a = (mids >= a.start) & (mids < a.end)
    in_b = (mids >= b.start) & (mids < b.end)
    union = np.count_nonzero(in_a | in_b)
    if union == 0:
        return 1.0 if a.start == b.start else 0.0
    return np.count_nonzero(in_a & in_b) / union


def test_iou_known_values():
    assert temporal_iou(span(1, 5), span(1, 5)) == 1.0
    assert temporal_iou(span(0, 1), span(2, 3)) == 0.0
    assert abs(temporal_iou(span(2, 6), span(4, 8)) - 1 / 3) < 1e-12


def test_iou_zero_length_rules():
    assert temporal_iou(span(5, 5), span(5, 5)) == 1.0
    assert temporal_iou(span(5, 5), span(6, 6)) == 0.0
    assert temporal_iou(span(5, 5), span(4, 6)) == 0.0


def test_iou_unit_mismatch():
    with pytest.raises(ValueError):
        temporal_iou(span(1, 2, "frame"), span(1, 2, "second"))


def test_iou_against_grid_oracle():
    rng = random.Random(17)
    for _ in range(300):
        vals = sorted(rng.randint(0, 100000) for _ in range(4))
        rng.shuffle(vals)
        a = span(*sorted((vals[0] * 1e-4, vals[1] * 1e-4)))
        b = span(*sorted((vals[2] * 1e-4, vals[3] * 1e-4)))
        assert abs(temporal_iou(a, b) - grid_iou_oracle(a, b)) < 1e-6


def test_iou_symmetric_bounded_translation_invariant():
    rng = random.Random(23)
    for _ in range(200):
        a = span(*sorted(rng.uniform(0, 50) for _ in range(2)))
        b = span(*sorted(rng.uniform(0, 50) for _ in range(2)))
        v = temporal_iou(a, b)
        assert 0.0 <= v <= 1.0
        assert v == temporal_iou(b, a)
        d = rng.uniform(-10, 10)
        shifted = temporal_iou(span(a.start + 20 + d, a.end + 20 + d),
                               span(b.start + 20 + d, b.end + 20 + d))
        assert abs(v - temporal_iou(span(a.start + 20 + d, a.end + 20 + d),
                                    span(b.start + 20 + d, b.end + 20 + d))) \
            < 1e-12
        assert abs(v - shifted) < 1e-9


# --- moment retrieval report --------------------------------------------------


def mr_item(i, gold, pred):
    return EvalItem(item_id=f"i{i}", gold_span=gold, pred_span=pred)


def test_mr_report_worked_example():
    # IoUs 0.6 and 0.4
    items = [
        mr_item(1, span(0, 10), span(0, 6)),    # IoU 0.6
        mr_item(2, span(0, 10), span(0, 4)),    # IoU 0.4
    ]
    rep = moment_retrieval_report(items)
    assert rep.r_at[0.5] == 0.5
    assert abs(rep.miou - 0.5) < 1e-12
    assert rep.r_at[0.3] == 1.0
    assert rep.r_at[0.7] == 0.0


def test_mr_report_all_parse_errors():
    items = [mr_item(i, span(0, 5), None) for i in range(4)]
    rep = moment_retrieval_report(items)
    assert rep.miou == 0.0
    assert all(v == 0.0 for v in rep.r_at.values())
    assert rep.n_parse_errors == 4


def test_mr_report_single_perfect():
    rep = moment_retrieval_report([mr_item(1, span(2, 8), span(2, 8))])
    assert rep.r_at[0.3] == rep.r_at[0.5] == rep.r_at[0.7] == 1.0
    assert rep.miou == 1.0


def test_mr_recall_monotone_property():
    rng = random.Random(31)
    for _ in range(100):
        items = []
        for i in range(rng.randint(1, 20)):
            g = span(*sorted(rng.uniform(0, 30) for _ in range(2)))
            if rng.random() < 0.1:
                p = None
            else:
                p = span(*sorted(rng.uniform(0, 30) for _ in range(2)))
            items.append(mr_item(i, g, p))
        rep = moment_retrieval_report(items)
        assert rep.r_at[0.3] >= rep.r_at[0.5] >= rep.r_at[0.7]


def test_mr_translation_invariance_of_report():
    rng = random.Random(37)
    items, shifted = [], []
    for i in range(12):
        g = sorted(rng.uniform(0, 30) for _ in range(2))
        p = sorted(rng.uniform(0, 30) for _ in range(2))
        items.append(mr_item(i, span(*g), span(*p)))
        shifted.append(mr_item(i, span(g[0] + 7, g[1] + 7),
                               span(p[0] + 7, p[1] + 7)))
    a, b = moment_retrieval_report(items), moment_retrieval_report(shifted)
    assert abs(a.miou - b.miou) < 1e-9
    assert a.r_at == b.r_at


# --- highlight detection -------------------------------------------------------


def hd_item(i, gold_clips, entries):
    return EvalItem(item_id=f"h{i}", gold_clips=tuple(gold_clips),
                    pred_highlight=HighlightPrediction(tuple(entries)))


def test_ap_worked_example():
    # ranking [rel, irrel, rel] -> (1/1 + 2/3) / 2
    assert abs(average_precision([True, False, True]) - 5 / 6) < 1e-12
    assert average_precision([False, False]) is None
    assert average_precision([True, True, True]) == 1.0


def test_ap_exhaustive_definition_small():
    """AP equals brute-force mean of precision-at-k over relevant
    positions for every relevance layout of length <= 8."""
    for n in range(1, 9):
        for bits in itertools.product([False, True], repeat=n):
            got = average_precision(list(bits))
            rel_positions = [k for k, b in enumerate(bits, start=1) if b]
            if not rel_positions:
                assert got is None
                continue
            want = sum(
                sum(1 for j in rel_positions if j <= k) / k
                for k in rel_positions) / len(rel_positions)
            assert abs(got - want) < 1e-12


def test_rank_clips_ties_and_missing():
    gold = [(0, 0.0), (1, 0.0), (2, 0.0), (3, 0.0)]
    pred = HighlightPrediction(((2, 1.0), (0, 1.0)))
    # saliency ties break by index; unpredicted clips go last by index
    assert rank_clips(gold, pred) == [0, 2, 1, 3]
    assert rank_clips(gold, None) == [0, 1, 2, 3]


def test_highlight_report_perfect_and_hit():
    gold = [(0, 4.0), (1, 0.0), (2, 3.0)]
    rep = highlight_report([hd_item(1, gold, [(0, 3.0), (2, 2.0), (1, 1.0)])])
    assert rep.map == 1.0
    assert rep.hit_at_1 == 1.0


def test_highlight_report_worked_ap():
    gold = [(0, 4.0), (1, 0.0), (2, 3.0)]
    # ranking [rel, irrel, rel]
    rep = highlight_report([hd_item(1, gold, [(0, 3.0), (1, 2.0), (2, 1.0)])])
    assert abs(rep.map - 5 / 6) < 1e-12
    assert rep.hit_at_1 == 1.0


def test_highlight_report_skips_items_without_relevant():
    gold_none = [(0, 0.0), (1, 1.0)]
    gold_some = [(0, 4.0), (1, 0.0)]
    items = [hd_item(1, gold_none, [(0, 2.0)]),
             hd_item(2, gold_some, [(0, 2.0)])]
    rep = highlight_report(items)
    assert rep.n_skipped_no_relevant == 1
    assert rep.map == 1.0 and rep.hit_at_1 == 1.0
    rep = highlight_report(items, count_no_relevant_for_hit=True)
    assert rep.hit_at_1 == 0.5


def test_highlight_report_empty_prediction_counts_parse_error():
    gold = [(0, 4.0), (1, 0.0)]
    rep = highlight_report([hd_item(1, gold, [])])
    assert rep.n_parse_errors == 1
    # empty prediction ranks by index: clip 0 happens to be relevant
    assert rep.hit_at_1 == 1.0


# --- record files -----------------------------------------------------------


def test_mr_records_roundtrip_and_pairing(tmp_path):
    gold = [
        {"item_id": "a", "video_id": "v", "query": "q",
         "span_start_s": 1.0, "span_end_s": 5.0},
        {"item_id": "b", "video_id": "v", "query": "q2",
         "span_start_s": 2.0, "span_end_s": 4.0},
    ]
    pred = [
        {"item_id": "a", "video_id": "v", "query": "q",
         "span_start_s": 1.0, "span_end_s": 5.0},
        {"item_id": "b", "video_id": "v", "query": "q2",
         "span_start_s": None, "span_end_s": None},
    ]
    gp, pp = tmp_path / "gold.ndjson", tmp_path / "pred.ndjson"
    write_mr_records(gp, gold)
    write_mr_records(pp, pred)
    items = pair_mr_items(load_mr_records(gp), load_mr_records(pp))
    rep = moment_retrieval_report(items)
    assert rep.n_items == 2
    assert rep.n_parse_errors == 1
    assert abs(rep.miou - 0.5) < 1e-12


def test_mr_record_validation(tmp_path):
    p = tmp_path / "bad.ndjson"
    p.write_text('{"item_id": "a"}\n')
    with pytest.raises(DataFormatError):
        load_mr_records(p)
    p.write_text("not json\n")
    with pytest.raises(DataFormatError):
        load_mr_records(p)


def test_hd_records_and_pairing(tmp_path):
    p = tmp_path / "hd.ndjson"
    p.write_text('{"item_id": "a", "clips": [[0, 4.0], [1, 0.0]]}\n')
    gold = load_hd_records(p)
    items = pair_hd_items(gold, {"a": [(0, 1.0)]})
    rep = highlight_report(items)
    assert rep.map == 1.0


def test_report_table_layout():
    rep = moment_retrieval_report([mr_item(1, span(0, 4), span(0, 4))])
    table = report_table(rep, label="demo")
    lines = table.strip().split("\n")
    assert len(lines) == 2
    assert "R@0.3" in lines[0] and "HIT@1" in lines[0]
    assert "100.00" in lines[1]
