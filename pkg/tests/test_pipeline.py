import json

import pytest

from vidmark.config import RunConfig, load_run_config
from vidmark.errors import ConfigError
from vidmark.pipeline import (
    ABLATION_GRIDS,
    emit_preview,
    index_ablation_grid,
    mask_ablation_grid,
    palette_ablation_grid,
    run_ablation,
    run_pipeline,
    tag_ablation_grid,
)
from vidmark.synth import (
    make_synthetic_dataset,
    write_demo_config,
    write_shifted_oracle,
    write_verbatim_oracle,
)

N_FRAMES = 12


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    root = tmp_path_factory.mktemp("synth")
    items = make_synthetic_dataset(root, n_items=6, n_frames=N_FRAMES,
                                   frame_hw=(24, 32))
    write_verbatim_oracle(items, root / "oracle.json")
    return root, items


def base_config(root, **overrides) -> RunConfig:
    data = dict(
        dataset=str(root / "gold.ndjson"),
        dataset_format="canonical",
        frame_root=str(root / "frames"),
        task="moment_retrieval",
        fps=1.0,
        n_frames=N_FRAMES,
        masks_file=str(root / "masks.ndjson"),
        mock_oracle=str(root / "oracle.json"),
        output_root=str(root / "runs"),
        run_name="t",
        concurrency=2,
    )
    data.update(overrides)
    return RunConfig(**data)


def test_config_source_exclusivity(workspace):
    root, _ = workspace
    with pytest.raises(Exception):
        base_config(root, seg_endpoint="http://x", )  # two mask sources
    with pytest.raises(Exception):
        base_config(root, mock_oracle=None)  # no LLM source


def test_load_run_config_overrides(tmp_path, workspace):
    root, _ = workspace
    cfg_path = write_demo_config(root, n_frames=N_FRAMES)
    config = load_run_config(cfg_path, overrides=["run_name=abc",
                                                  "style.alpha=0.5",
                                                  "n_frames=8"])
    assert config.run_name == "abc"
    assert config.style.alpha == 0.5
    assert config.n_frames == 8
    with pytest.raises(ConfigError):
        load_run_config(cfg_path, overrides=["nonsense"])
    with pytest.raises(ConfigError):
        load_run_config(tmp_path / "missing.yaml")


def test_pipeline_verbatim_oracle_perfect(workspace):
    root, _ = workspace
    config = base_config(root, run_name="perfect")
    report = run_pipeline(config)
    assert report is not None
    assert report.miou == 1.0
    assert report.r_at[0.3] == report.r_at[0.5] == report.r_at[0.7] == 1.0
    assert report.n_parse_errors == 0
    run_dir = config.run_dir()
    assert (run_dir / "report.json").exists()
    assert (run_dir / "items.ndjson").exists()
    assert (run_dir / "predictions.ndjson").exists()
    items = [json.loads(l) for l in
             (run_dir / "items.ndjson").read_text().splitlines()]
    assert all(rec["tags"] for rec in items)
    assert all(rec["n_markers"] == N_FRAMES for rec in items)


def test_pipeline_shifted_oracle_miou(workspace):
    root, items = workspace
    offset = 1
    write_shifted_oracle(items, root / "oracle_shift.json", offset)
    config = base_config(root, run_name="shifted",
                         mock_oracle=str(root / "oracle_shift.json"))
    report = run_pipeline(config)
    # closed-form expectation from the sampling formula
    duration = N_FRAMES / 1.0
    step = duration / N_FRAMES
    expected = []
    for it in items:
        a, b = it.frame_span
        length = (b - a) * step
        shift = abs(offset) * step
        expected.append(max(length - shift, 0.0) / (length + shift))
    assert abs(report.miou - sum(expected) / len(expected)) < 1e-9


def test_pipeline_determinism_and_resume(workspace):
    root, _ = workspace

    def run(name, limit=None):
        config = base_config(root, run_name=name, limit=limit)
        return config, run_pipeline(config)

    config_a, rep_a = run("det-a")
    config_b, rep_b = run("det-b")
    bytes_a = (config_a.run_dir() / "report.json").read_bytes()
    bytes_b = (config_b.run_dir() / "report.json").read_bytes()
    assert bytes_a.replace(b"det-a", b"det-b") == bytes_b
    items_a = (config_a.run_dir() / "items.ndjson").read_bytes()
    items_b = (config_b.run_dir() / "items.ndjson").read_bytes()
    assert items_a == items_b

    # interrupted (limit) then resumed run matches the uninterrupted one
    config_c, rep_c = run("det-c", limit=2)
    assert rep_c is None
    assert not (config_c.run_dir() / "report.json").exists()
    config_c2, rep_c2 = run("det-c")
    assert rep_c2 is not None
    items_c = (config_c2.run_dir() / "items.ndjson").read_bytes()
    assert items_c == items_a
    report_c = (config_c2.run_dir() / "report.json").read_bytes()
    assert report_c.replace(b"det-c", b"det-a") == bytes_a


def test_pipeline_missing_oracle_reply_scored_not_fatal(workspace, tmp_path):
    root, items = workspace
    partial = {items[0].item_id: "From 2 to 5"}
    oracle = tmp_path / "partial.json"
    oracle.write_text(json.dumps(partial))
    config = base_config(root, run_name="partial",
                         output_root=str(tmp_path / "runs"),
                         mock_oracle=str(oracle))
    report = run_pipeline(config)
    assert report is not None
    assert report.n_parse_errors == len(items) - 1


def test_pipeline_unparsable_reply(workspace, tmp_path):
    root, items = workspace
    oracle = tmp_path / "garbled.json"
    oracle.write_text(json.dumps({it.item_id: "hmm, unclear"
                                  for it in items}))
    config = base_config(root, run_name="garbled",
                         output_root=str(tmp_path / "runs"),
                         mock_oracle=str(oracle))
    report = run_pipeline(config)
    assert report.miou == 0.0
    assert report.n_parse_errors == len(items)


def test_pipeline_highlight_task(workspace, tmp_path):
    root, items = workspace
    # clips are 2 s; frame k sits at (k - 0.5) s -> clip (k-1)//2
    oracle = {it.item_id: "2: 4, 5: 1" for it in items}
    opath = tmp_path / "hd_oracle.json"
    opath.write_text(json.dumps(oracle))
    gold = tmp_path / "hd_gold.ndjson"
    with open(gold, "w") as fh:
        for it in items:
            clips = [[c, 4.0 if c == 0 else 0.0] for c in range(6)]
            fh.write(json.dumps({"item_id": it.item_id, "clips": clips})
                     + "\n")
    meta = tmp_path / "hd_meta.json"
    meta.write_text(json.dumps({
        it.item_id: {"video_id": it.video_id, "query": it.query,
                     "duration_s": float(N_FRAMES)} for it in items}))
    config = base_config(
        root, run_name="hd", task="highlight_detection",
        dataset=str(gold), dataset_format="canonical_hd",
        hd_meta_file=str(meta), output_root=str(tmp_path / "runs"),
        mock_oracle=str(opath), clip_seconds=2.0)
    report = run_pipeline(config)
    assert report is not None
    # frame 2 -> t=1.5s -> clip 0 (relevant, highest score): perfect
    assert report.map == 1.0
    assert report.hit_at_1 == 1.0


def test_emit_preview(workspace):
    root, items = workspace
    config = base_config(root, run_name="prev")
    paths = emit_preview(config, items[0].item_id, 3)
    assert len(paths) == 3
    assert all(p.exists() for p in paths)
    with pytest.raises(Exception):
        emit_preview(config, "nope", 3)


def test_ablation_grid_row_keys():
    mask_keys = [r["key"] for r in mask_ablation_grid()]
    assert mask_keys == [
        "No mask",
        "Mask fill (palette), alpha=0.2",
        "Mask fill (palette), alpha=0.3",
        "Mask fill (palette), alpha=0.5",
        "Mask fill (all-red), alpha=0.3",
        "Mask + contour (palette), w=2",
        "Mask + contour (palette), w=3",
        "Mask + contour (palette), w=5",
    ]
    index_keys = [r["key"] for r in index_ablation_grid()]
    assert index_keys == [
        "Position / 40 / Black / Top Left",
        "Position / 40 / Black / Top Right",
        "Position / 40 / Black / Center",
        "Position / 40 / Black / Bottom Left",
        "Position / 40 / Black / Bottom Right",
        "Position / 40 / Black / Find region",
        "Size / 20 / Black / Bottom Right",
        "Size / 30 / Black / Bottom Right",
        "Size / 38 / Black / Bottom Right",
        "Size / 40 / Black / Bottom Right",
        "Color / 38 / Black / Bottom Right",
        "Color / 38 / Red / Bottom Right",
        "Color / 38 / Blue / Bottom Right",
    ]
    palette_keys = [r["key"] for r in palette_ablation_grid()]
    assert palette_keys == ["RGB palette", "HSV palette (high S/V)",
                            "HSV palette (low S/V)"]
    assert [r["key"] for r in tag_ablation_grid()] == [
        "No nouns", "All nouns", "Single noun", "Subject nouns (ours)"]
    assert set(ABLATION_GRIDS) == {"mask", "index", "palette", "tags"}


def test_palette_grid_concrete_colors():
    rows = palette_ablation_grid()
    assert rows[1]["style"]["palette"] == [[255, 0, 0], [255, 255, 0],
                                           [0, 0, 255], [0, 255, 0]]
    assert rows[2]["style"]["palette"] == [[153, 92, 92], [153, 153, 92],
                                           [92, 92, 153], [92, 153, 92]]


def test_run_ablation_palette(workspace, tmp_path):
    root, _ = workspace
    config = base_config(root, run_name="abl",
                         output_root=str(tmp_path / "runs"))
    results = run_ablation(config, "palette")
    assert [k for k, _ in results] == ["RGB palette",
                                       "HSV palette (high S/V)",
                                       "HSV palette (low S/V)"]
    assert all(rep is not None and rep.miou == 1.0 for _, rep in results)
    payload = json.loads(
        (config.run_dir() / "ablation_palette.json").read_text())
    assert [r["key"] for r in payload["rows"]] == [k for k, _ in results]
    assert (config.run_dir() / "ablation_palette.txt").exists()
    with pytest.raises(ConfigError):
        run_ablation(config, "bogus")
