"""Run configuration: a declarative YAML file plus dotted-path flag
overrides. Endpoint credentials come from the VIDMARK_API_KEY
environment variable, never from the config file."""

from __future__ import annotations

import os
from pathlib import Path

import yaml
from pydantic import BaseModel, Field, ValidationError, field_validator, model_validator

from .errors import ConfigError
from .render import DEFAULT_PALETTE, INDEX_POSITIONS, StyleConfig

API_KEY_ENV = "VIDMARK_API_KEY"


class StyleModel(BaseModel):
    alpha: float = 0.3
    beta: float = 1.0
    contour_width: int = 3
    palette: list[tuple[int, int, int]] = Field(
        default_factory=lambda: list(DEFAULT_PALETTE))
    contour_palette: list[tuple[int, int, int]] | None = None
    font_height: int = 16
    text_color: tuple[int, int, int] = (255, 255, 255)
    text_offset: tuple[int, int] = (2, 2)
    index_position: str = "bottom-right"
    index_font_height: int = 38
    index_color: tuple[int, int, int] = (0, 0, 0)
    index_margin: int = 4
    draw_index: bool = True

    @field_validator("index_position")
    @classmethod
    def _check_position(cls, v):
        if v not in INDEX_POSITIONS:
            raise ValueError(f"index_position must be one of {INDEX_POSITIONS}")
        return v

    def to_style(self) -> StyleConfig:
        return StyleConfig(
            alpha=self.alpha,
            beta=self.beta,
            contour_width=self.contour_width,
            palette=tuple(tuple(c) for c in self.palette),
            contour_palette=(tuple(tuple(c) for c in self.contour_palette)
                             if self.contour_palette else None),
            font_height=self.font_height,
            text_color=tuple(self.text_color),
            text_offset=tuple(self.text_offset),
            index_position=self.index_position,
            index_font_height=self.index_font_height,
            index_color=tuple(self.index_color),
            index_margin=self.index_margin,
            draw_index=self.draw_index,
        )


class RunConfig(BaseModel):
    # dataset
    dataset: str
    dataset_format: str = "canonical"  # canonical | charades | canonical_hd
    frame_root: str
    task: str = "moment_retrieval"
    fps: float = 1.0
    fps_file: str | None = None
    durations_file: str | None = None
    hd_meta_file: str | None = None
    clip_seconds: float = 2.0
    relevance_threshold: float = 3.0

    # sampler
    n_frames: int = 64

    # tagger
    tagger: str = "rules"  # rules | lm
    tag_strategy: str = "subject"  # subject | single | all | none
    k_max: int = 3
    lm_endpoint: str | None = None
    lm_model: str = "default"
    lm_fallback_to_rules: bool = True

    # backends: exactly one mask source, exactly one LLM source
    seg_endpoint: str | None = None
    masks_file: str | None = None
    vidllm_endpoint: str | None = None
    vidllm_model: str = "default"
    mock_oracle: str | None = None
    mock_perturb_frames: int = 0
    hd_prompt_template: str | None = None

    # output
    output_root: str
    run_name: str = "run"
    save_marked_frames: bool = False

    # execution
    concurrency: int = 4
    retries: int = 2
    seed: int = 0
    limit: int | None = None

    style: StyleModel = Field(default_factory=StyleModel)

    @field_validator("task")
    @classmethod
    def _check_task(cls, v):
        if v not in ("moment_retrieval", "highlight_detection"):
            raise ValueError("task must be moment_retrieval or "
                             "highlight_detection")
        return v

    @field_validator("dataset_format")
    @classmethod
    def _check_format(cls, v):
        if v not in ("canonical", "charades", "canonical_hd"):
            raise ValueError("dataset_format must be canonical, charades or "
                             "canonical_hd")
        return v

    @field_validator("tagger")
    @classmethod
    def _check_tagger(cls, v):
        if v not in ("rules", "lm"):
            raise ValueError("tagger must be rules or lm")
        return v

    @field_validator("tag_strategy")
    @classmethod
    def _check_strategy(cls, v):
        if v not in ("subject", "single", "all", "none"):
            raise ValueError("tag_strategy must be subject, single, all or "
                             "none")
        return v

    @model_validator(mode="after")
    def _check_sources(self):
        if (self.seg_endpoint is None) == (self.masks_file is None):
            raise ValueError(
                "configure exactly one mask source: seg_endpoint or masks_file")
        if (self.vidllm_endpoint is None) == (self.mock_oracle is None):
            raise ValueError(
                "configure exactly one LLM source: vidllm_endpoint or "
                "mock_oracle")
        if self.n_frames < 1 or self.k_max < 1 or self.concurrency < 1:
            raise ValueError("n_frames, k_max and concurrency must be >= 1")
        if self.tagger == "lm" and not self.lm_endpoint:
            raise ValueError("tagger=lm needs lm_endpoint")
        return self

    def run_dir(self) -> Path:
        return Path(self.output_root) / self.run_name

    def api_key(self) -> str | None:
        return os.environ.get(API_KEY_ENV)


def _apply_override(data: dict, dotted: str, raw: str) -> None:
    keys = dotted.split(".")
    node = data
    for key in keys[:-1]:
        node = node.setdefault(key, {})
        if not isinstance(node, dict):
            raise ConfigError(f"cannot override through non-mapping {key!r}")
    node[keys[-1]] = yaml.safe_load(raw)


def load_run_config(path: str | Path | None = None,
                    overrides: list[str] | None = None,
                    base: dict | None = None) -> RunConfig:
    """Build a RunConfig from a YAML file and key=value overrides."""
    data: dict = dict(base or {})
    if path is not None:
        try:
            with open(path, encoding="utf-8") as fh:
                loaded = yaml.safe_load(fh)
        except FileNotFoundError as exc:
            raise ConfigError(f"config file not found: {path}") from exc
        except yaml.YAMLError as exc:
            raise ConfigError(f"invalid YAML in {path}: {exc}") from exc
        if loaded is None:
            loaded = {}
        if not isinstance(loaded, dict):
            raise ConfigError(f"config root must be a mapping: {path}")
        data.update(loaded)
    for item in overrides or []:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"override must be key=value, got {item!r}")
        _apply_override(data, key.strip(), value)
    try:
        return RunConfig(**data)
    except ValidationError as exc:
        raise ConfigError(str(exc)) from exc
