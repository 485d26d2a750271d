"""Read-out stage: prompt construction, Vid-LLM endpoints, and answer
parsing for moment retrieval and highlight detection."""

from __future__ import annotations

import base64
import json
import re
import time
from dataclasses import dataclass, field
from pathlib import Path

from .errors import AnswerParseError, BackendError

MR_PROMPT_TEMPLATE = "During which frames can we see {query}?"
MR_FORMAT_INSTRUCTION = 'Answer with a span in the form "From x to y".'

# The highlight template is artifact-defined (0-4 saliency scale) and
# config-overridable.
HD_PROMPT_TEMPLATE = (
    "Which frames are the highlights for {query}? "
    "Answer as 'frame: score' pairs, scores 0-4."
)

_MR_ANSWER_RE = re.compile(r"from\s+(\d+)\s+to\s+(\d+)", re.IGNORECASE)
_HD_PAIR_RE = re.compile(r"(\d+)\s*[:=\-]\s*(\d+(?:\.\d+)?)")


@dataclass(frozen=True)
class TemporalSpan:
    """Half-open-by-convention event interval, frame- or second-based."""

    start: float
    end: float
    unit: str = "second"

    def __post_init__(self):
        if self.unit not in ("frame", "second"):
            raise ValueError(f"unknown span unit {self.unit!r}")
        if self.start < 0 or self.end < self.start:
            raise ValueError(f"bad span [{self.start}, {self.end}]")
        if self.unit == "frame":
            if self.start != int(self.start) or self.end != int(self.end):
                raise ValueError("frame spans must be integral")

    @property
    def length(self) -> float:
        return self.end - self.start


@dataclass(frozen=True)
class HighlightPrediction:
    """Ranked (clip_index, saliency) pairs; clip indices unique."""

    entries: tuple[tuple[int, float], ...] = ()

    def __post_init__(self):
        indices = [i for i, _ in self.entries]
        if len(set(indices)) != len(indices):
            raise ValueError("duplicate clip indices")
        if any(i < 0 for i in indices):
            raise ValueError("clip indices must be >= 0")


@dataclass
class GroundingRequest:
    frames: list  # PNG bytes or file paths of the marked frames
    prompt: str
    task: str = "moment_retrieval"
    item_id: str | None = None

    def __post_init__(self):
        if not self.frames:
            raise ValueError("a grounding request needs at least one frame")
        if self.task not in ("moment_retrieval", "highlight_detection"):
            raise ValueError(f"unknown task {self.task!r}")


def build_mr_prompt(query: str) -> str:
    text = query.strip()
    if not text:
        raise ValueError("empty query")
    return MR_PROMPT_TEMPLATE.format(query=query) + " " + MR_FORMAT_INSTRUCTION


def build_hd_prompt(query: str, template: str = HD_PROMPT_TEMPLATE) -> str:
    text = query.strip()
    if not text:
        raise ValueError("empty query")
    return template.format(query=query)


def parse_mr_answer(raw: str, t_max: int) -> TemporalSpan:
    """First "From x to y" pair, clamped into [1, t_max], swapped if
    reversed. Raises AnswerParseError when nothing matches."""
    if t_max < 1:
        raise ValueError("t_max must be >= 1")
    m = _MR_ANSWER_RE.search(raw)
    if m is None:
        raise AnswerParseError(raw)
    x, y = int(m.group(1)), int(m.group(2))
    x = min(max(x, 1), t_max)
    y = min(max(y, 1), t_max)
    if x > y:
        x, y = y, x
    return TemporalSpan(start=x, end=y, unit="frame")


def format_mr_answer(span: TemporalSpan) -> str:
    return f"From {int(span.start)} to {int(span.end)}"


def parse_hd_answer(raw: str, n_clips: int) -> HighlightPrediction:
    """(id, score) pairs from a delimited list. Ids are treated as
    1-based positions, clamped into [1, n_clips], first occurrence
    wins, and returned as 0-based clip indices. Unparsable replies give
    an empty prediction."""
    if n_clips < 1:
        raise ValueError("n_clips must be >= 1")
    entries: list[tuple[int, float]] = []
    seen: set[int] = set()
    for m in _HD_PAIR_RE.finditer(raw):
        idx = min(max(int(m.group(1)), 1), n_clips) - 1
        if idx in seen:
            continue
        seen.add(idx)
        entries.append((idx, float(m.group(2))))
    return HighlightPrediction(tuple(entries))


# --- endpoints --------------------------------------------------------------


@dataclass
class VidLLMEndpoint:
    """Chat-style multimodal HTTP endpoint.

    Frames go as data-URL image attachments in one user message; the
    reply text is read from choices[0].message.content. The item id is
    carried in the OpenAI-compatible "user" field so that fixture
    servers can script replies per item.
    """

    url: str
    model: str = "default"
    api_key: str | None = None
    timeout: float = 300.0
    retries: int = 2

    def complete(self, request: GroundingRequest) -> str:
        import httpx

        content = [{"type": "text", "text": request.prompt}]
        for frame in request.frames:
            data = frame if isinstance(frame, bytes) else Path(frame).read_bytes()
            b64 = base64.b64encode(data).decode("ascii")
            content.append({
                "type": "image_url",
                "image_url": {"url": f"data:image/png;base64,{b64}"},
            })
        body = {
            "model": self.model,
            "messages": [{"role": "user", "content": content}],
            "temperature": 0,
        }
        if request.item_id:
            body["user"] = request.item_id
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        last_exc = None
        for attempt in range(self.retries + 1):
            try:
                resp = httpx.post(self.url.rstrip("/") + "/chat/completions",
                                  json=body, headers=headers,
                                  timeout=self.timeout)
                resp.raise_for_status()
                payload = resp.json()
                return payload["choices"][0]["message"]["content"]
            except (KeyError, IndexError, TypeError) as exc:
                raise AnswerParseError(
                    "unexpected endpoint reply shape") from exc
            except Exception as exc:  # noqa: BLE001 - transport retry
                last_exc = exc
                if attempt < self.retries:
                    time.sleep(0.2 * (attempt + 1))
        raise BackendError(f"Vid-LLM endpoint {self.url} failed: {last_exc}")


@dataclass
class MockVidLLM:
    """Scripted endpoint reading item_id -> reply from a JSON oracle
    file; enables hermetic end-to-end runs.

    perturb_frames shifts any "From x to y" in the scripted reply by a
    seeded random offset (test/debug aid; the only randomness in the
    toolkit, driven by the run seed).
    """

    oracle_path: str | Path
    perturb_frames: int = 0
    seed: int = 0
    _oracle: dict = field(default=None, repr=False)

    def _load(self) -> dict:
        if self._oracle is None:
            with open(self.oracle_path, encoding="utf-8") as fh:
                self._oracle = json.load(fh)
        return self._oracle

    def complete(self, request: GroundingRequest) -> str:
        oracle = self._load()
        if request.item_id is None or request.item_id not in oracle:
            raise BackendError(
                f"mock oracle has no reply for item {request.item_id!r}")
        reply = oracle[request.item_id]
        if self.perturb_frames:
            import random

            rng = random.Random((self.seed, request.item_id).__repr__())
            delta = rng.randint(-self.perturb_frames, self.perturb_frames)

            def shift(m):
                return f"From {int(m.group(1)) + delta} to {int(m.group(2)) + delta}"

            reply = _MR_ANSWER_RE.sub(shift, reply, count=1)
        return reply


def ground(request: GroundingRequest, endpoint) -> str:
    """Raw textual reply of the model for one request."""
    return endpoint.complete(request)
