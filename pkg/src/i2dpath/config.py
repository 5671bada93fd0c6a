"""Scenario configuration schema (one JSON document)."""

from __future__ import annotations

import json
from typing import List, Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .designs import DESIGN_NAMES


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class DisplaySection(_Strict):
    width: int = Field(1440, gt=0)
    height: int = Field(2560, gt=0)
    t_sync_us: int = Field(16667, gt=0)
    scan_rate: float = Field(221e6, gt=0)
    t_out_us: int = Field(3500, gt=0)
    buffer_count: int = Field(3, ge=2)
    z_order: List[str] = []


class InputSection(_Strict):
    sample_rate_hz: float = Field(120.0, gt=0)
    hw_latency_mean_us: int = Field(28000, ge=0)
    hw_latency_sigma_us: float = Field(500.0, ge=0)
    dpi: float = Field(493.0, gt=0)
    speed_mm_s: float = Field(68.0, gt=0)
    speed_sigma_mm_s: float = Field(12.0, ge=0)
    trace_file: Optional[str] = None


class TAppSection(_Strict):
    kind: Literal["constant", "truncnormal", "lognormal", "sequence"] = "constant"
    mean_us: float = Field(5000.0, gt=0)
    sigma_us: float = Field(0.0, ge=0)
    values: List[int] = []
    overrides: List[Tuple[int, int]] = []


class AppSection(_Strict):
    id: str
    t_app: TAppSection = TAppSection()
    dirty_model: Literal["brush", "full_frame"] = "brush"
    brush_radius: int = Field(8, ge=0)
    outside_change_prob: float = Field(0.0, ge=0, le=1)
    path: Optional[str] = None


class PredictorSection(_Strict):
    mode: Literal["mean", "mean_plus_ksigma", "window_max"] = "mean"
    k: float = 1.0
    prior_us: int = Field(8000, gt=0)
    window: int = Field(32, ge=1, le=32)
    seed_values: List[int] = []
    bias_us: int = 0


class ParSection(_Strict):
    rect_w: int = Field(200, gt=0)
    rect_h: int = Field(200, gt=0)
    guard_us: int = Field(0, ge=0)
    detection: Literal["app_declared", "sampled"] = "app_declared"
    sample_fraction: float = Field(0.01, gt=0, le=1)
    false_negative_prob: float = Field(0.0, ge=0, le=1)


class PathSection(_Strict):
    name: str
    kind: Optional[Literal["legacy", "presto-jitt", "presto-jitt-par", "presto-jitt-jep", "vsync-off"]] = None
    offset_us: int = Field(0, ge=0)
    t_out_pred_us: int = Field(3500, gt=0)
    predictor: PredictorSection = PredictorSection()
    par: ParSection = ParSection()

    @model_validator(mode="after")
    def _kind(self):
        if self.kind is None:
            if self.name not in DESIGN_NAMES:
                raise ValueError(f"path {self.name!r} needs a kind (one of {', '.join(DESIGN_NAMES)})")
            self.kind = self.name
        return self


class BindingSection(_Strict):
    app_id: str
    path: str


class SwitchSection(_Strict):
    t_us: int = Field(ge=0)
    app_id: str
    path: str


class PredictionSection(_Strict):
    horizon_us: int = Field(0, ge=0)


class RunSection(_Strict):
    duration_s: float = Field(10.0, gt=0)
    master_seed: int = 0
    out_dir: str = "out"
    drain_us: int = Field(200000, ge=0)


class ScenarioConfig(_Strict):
    display: DisplaySection = DisplaySection()
    input: InputSection = InputSection()
    apps: List[AppSection] = [AppSection(id="app")]
    paths: List[PathSection] = []
    bindings: List[BindingSection] = []
    switches: List[SwitchSection] = []
    prediction: PredictionSection = PredictionSection()
    run: RunSection = RunSection()
    default_path: Optional[str] = "legacy"

    @model_validator(mode="after")
    def _refs(self):
        ids = [a.id for a in self.apps]
        if not ids:
            raise ValueError("at least one app is required")
        if len(set(ids)) != len(ids):
            raise ValueError("app ids must be unique")
        for item in list(self.bindings) + list(self.switches):
            if item.app_id not in ids:
                raise ValueError(f"unknown app_id {item.app_id!r}")
        return self


class ConfigError(ValueError):
    pass


def _format(err: ValidationError) -> str:
    lines = []
    for e in err.errors():
        loc = ".".join(str(p) for p in e["loc"]) or "<root>"
        lines.append(f"{loc}: {e['msg']}")
    return "; ".join(lines)


def parse_config(data) -> ScenarioConfig:
    try:
        return ScenarioConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigError(_format(e)) from None


def load_config(path) -> ScenarioConfig:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigError(f"cannot read config {path}: {e}") from None
    return parse_config(data)
