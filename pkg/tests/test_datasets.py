import pytest

from vidmark.datasets import (
    DatasetItem,
    SamplingMap,
    clip_index_for_time,
    frames_to_seconds,
    import_charades_sta,
    load_canonical_mr,
    sample_frames,
)
from vidmark.errors import DataFormatError
from vidmark.grounding import TemporalSpan
from vidmark.metrics import write_mr_records


def test_import_charades_sta(tmp_path):
    p = tmp_path / "charades.txt"
    p.write_text(
        "AO8RW 24.3 30.4##person sits on the floor.\n"
        "\n"
        "XYZ12 0.0 5.5##a dog runs around.\n")
    items = import_charades_sta(p)
    assert len(items) == 2
    assert items[0].video_id == "AO8RW"
    assert items[0].item_id == "AO8RW#1"
    assert items[0].query == "person sits on the floor."
    assert items[0].gold_span == TemporalSpan(24.3, 30.4, "second")
    assert items[1].item_id == "XYZ12#3"


def test_import_charades_malformed_reports_line(tmp_path):
    p = tmp_path / "charades.txt"
    p.write_text("AO8RW 24.3 30.4##ok.\nbroken line\n")
    with pytest.raises(DataFormatError) as err:
        import_charades_sta(p)
    assert ":2:" in str(err.value)

    p.write_text("AO8RW xx 30.4##ok.\n")
    with pytest.raises(DataFormatError):
        import_charades_sta(p)

    p.write_text("")
    with pytest.raises(DataFormatError):
        import_charades_sta(p)


def test_load_canonical_mr(tmp_path):
    p = tmp_path / "gold.ndjson"
    write_mr_records(p, [
        {"item_id": "b", "video_id": "v2", "query": "y",
         "span_start_s": 0.0, "span_end_s": 2.0, "duration_s": 10.0},
        {"item_id": "a", "video_id": "v1", "query": "x",
         "span_start_s": 1.0, "span_end_s": 3.0},
    ])
    items = load_canonical_mr(p)
    assert [i.item_id for i in items] == ["a", "b"]
    assert items[1].duration_s == 10.0
    assert items[0].duration_s is None


def test_sample_frames_midpoints():
    m = sample_frames(10.0, 5)
    assert m.timestamps == (1.0, 3.0, 5.0, 7.0, 9.0)


def test_sample_frames_identity_when_n_equals_total():
    # 8 frames at 1 fps: sampled frame k lands on source frame k
    m = sample_frames(8.0, 8)
    for k in range(1, 9):
        assert m.source_frame(k, fps=1.0, total=8) == k


def test_sample_frames_single_midpoint():
    m = sample_frames(12.0, 1)
    assert m.timestamps == (6.0,)


def test_sampling_map_invariants():
    with pytest.raises(ValueError):
        SamplingMap(())
    with pytest.raises(ValueError):
        SamplingMap((1.0, 1.0))
    with pytest.raises(ValueError):
        sample_frames(0.0, 4)
    with pytest.raises(ValueError):
        sample_frames(5.0, 0)


def test_frames_to_seconds_monotone():
    m = sample_frames(20.0, 10)
    prev_start = -1.0
    for a in range(1, 11):
        s = frames_to_seconds(TemporalSpan(a, 10, "frame"), m)
        assert s.start > prev_start
        prev_start = s.start
    s = frames_to_seconds(TemporalSpan(2, 5, "frame"), m)
    assert s.unit == "second"
    assert s.start == m.timestamp(2) and s.end == m.timestamp(5)
    with pytest.raises(ValueError):
        frames_to_seconds(TemporalSpan(1.0, 2.0, "second"), m)


def test_clip_index_for_time():
    assert clip_index_for_time(0.0, 2.0) == 0
    assert clip_index_for_time(1.99, 2.0) == 0
    assert clip_index_for_time(2.0, 2.0) == 1
    with pytest.raises(ValueError):
        clip_index_for_time(1.0, 0.0)


def test_dataset_item_defaults():
    it = DatasetItem(item_id="a", video_id="v", query="q")
    assert it.gold_span is None and it.gold_clips is None
