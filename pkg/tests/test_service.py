import base64
import time

import numpy as np
from fastapi.testclient import TestClient

from vidmark.frameio import decode_png, encode_png
from vidmark.service import create_app
from vidmark.synth import make_synthetic_dataset, write_verbatim_oracle


def client():
    return TestClient(create_app())


def test_health():
    assert client().get("/health").json() == {"status": "ok"}


def test_tags_endpoints():
    c = client()
    r = c.post("/tags/extract", json={"query": "A man is holding a rope."})
    assert r.status_code == 200
    assert r.json() == {"tags": ["man"]}
    r = c.post("/tags/extract", json={"query": "   "})
    assert r.status_code == 422
    r = c.post("/tags/parse", json={"raw": " Dog , dog, cat", "k_max": 2})
    assert r.json() == {"tags": ["dog", "cat"]}


def test_prompt_and_answer_endpoints():
    c = client()
    r = c.post("/prompts/moment", json={"query": "a dog runs"})
    assert r.json()["prompt"].startswith(
        "During which frames can we see a dog runs?")
    r = c.post("/answers/moment", json={"raw": "From 3 to 99", "t_max": 10})
    assert r.json() == {"parsed": True, "start": 3, "end": 10,
                        "unit": "frame"}
    r = c.post("/answers/moment", json={"raw": "dunno", "t_max": 10})
    assert r.json()["parsed"] is False
    r = c.post("/answers/highlight", json={"raw": "1: 4, 2: 1", "n_clips": 4})
    assert r.json()["entries"] == [[0, 4.0], [1, 1.0]]


def test_mask_codec_endpoints():
    c = client()
    bitmap = [[0, 1], [1, 1]]
    r = c.post("/masks/encode", json={"bitmap": bitmap})
    body = r.json()
    assert body["rle_counts"] == [1, 3]
    r = c.post("/masks/decode", json=body)
    assert r.json()["bitmap"] == bitmap
    r = c.post("/masks/decode", json={"tag": "x", "height": 2, "width": 2,
                                      "rle_counts": [5]})
    assert r.status_code == 422


def test_render_endpoint_roundtrip():
    c = client()
    frame = np.full((16, 16, 3), 120, dtype=np.uint8)
    b64 = base64.b64encode(encode_png(frame)).decode("ascii")
    marker = {"tag": "dog", "height": 16, "width": 16,
              "rle_counts": [0, 16 * 16]}
    style = {"alpha": 1.0, "contour_width": 0, "draw_index": False,
             "font_height": 7, "text_offset": [99, 99]}
    r = c.post("/render/frame", json={"frame_b64": b64, "frame_index": 1,
                                      "markers": [marker], "style": style})
    assert r.status_code == 200
    out = decode_png(base64.b64decode(r.json()["frame_b64"]))
    # full-frame red fill at alpha 1; text clamped to bottom-right corner
    assert tuple(out[0, 0]) == (255, 0, 0)
    r = c.post("/render/frame", json={"frame_b64": b64,
                                      "markers": [dict(marker, height=8)]})
    assert r.status_code == 422


def test_metrics_endpoints():
    c = client()
    r = c.post("/metrics/moment", json={"items": [
        {"item_id": "a", "gold": [0, 10], "pred": [0, 6]},
        {"item_id": "b", "gold": [0, 10], "pred": None},
    ]})
    body = r.json()
    assert body["n_items"] == 2
    assert body["n_parse_errors"] == 1
    assert abs(body["miou"] - 0.3) < 1e-9
    r = c.post("/metrics/highlight", json={"items": [
        {"item_id": "a", "gold_clips": [[0, 4.0], [1, 0.0]],
         "pred_clips": [[0, 2.0]]},
    ]})
    assert r.json()["map"] == 1.0


def test_run_submission_lifecycle(tmp_path):
    root = tmp_path / "ws"
    items = make_synthetic_dataset(root, n_items=3, n_frames=8,
                                   frame_hw=(16, 20))
    write_verbatim_oracle(items, root / "oracle.json")
    config = {
        "dataset": str(root / "gold.ndjson"),
        "frame_root": str(root / "frames"),
        "masks_file": str(root / "masks.ndjson"),
        "mock_oracle": str(root / "oracle.json"),
        "output_root": str(root / "runs"),
        "n_frames": 8,
        "run_name": "svc",
    }
    c = client()
    r = c.post("/runs", json=config)
    assert r.status_code == 200
    run_id = r.json()["run_id"]
    for _ in range(100):
        status = c.get(f"/runs/{run_id}").json()
        if status["state"] != "running":
            break
        time.sleep(0.1)
    assert status["state"] == "done"
    assert status["report"]["miou"] == 1.0
    assert c.get("/runs/nope").status_code == 404
