"""Experiment configuration: JSON documents, presets and validation."""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field, fields
from pathlib import Path

from .confidence import SyntheticConfidenceParams
from .errors import InvalidArgumentError, ParseError, ValidationError
from .paradigms import ControlMessageSizes
from .radio import ChannelParams
from .scenario import GridSpec
from .scheduler import FUSION_MFLOPS, FusionCostModel

PARADIGMS = ("lgcp", "vehicle", "edge")
FORMATS = ("csv", "json")

PRESETS = {
    "opv2v-like": {
        "grid": {"width_m": 280.0, "height_m": 80.0, "cell_w": 10.0, "cell_h": 6.0},
        "n_background": 10,
        "full_feature_bits": 2.16e6,
        "delta_g": [0.075],
        "n_cavs": [2, 3, 4, 5, 6, 7],
        "seeds": list(range(10)),
        "paradigms": list(PARADIGMS),
        "fusion_model": "coalign",
        "t_max_ms": 100.0,
    },
    "dense-30": {
        "grid": {"width_m": 280.0, "height_m": 80.0, "cell_w": 10.0, "cell_h": 6.0},
        "n_background": 30,
        "full_feature_bits": 2.16e6,
        "delta_g": [0.075],
        "n_cavs": [30],
        "seeds": list(range(50)),
        "paradigms": ["lgcp"],
        "fusion_model": "coalign",
        "t_max_ms": 100.0,
    },
}


@dataclass
class VerifySettings:
    n_instances: int = 200
    max_cavs: int = 6
    max_areas: int = 6
    max_packets: int = 8
    max_subchannels: int = 3
    n_schedule_instances: int = 200


@dataclass
class ExperimentConfig:
    grid: GridSpec = field(default_factory=GridSpec)
    n_background: int = 10
    lane_width: float | None = None
    scenario_path: str | None = None
    confidence_path: str | None = None
    channel: ChannelParams = field(default_factory=ChannelParams)
    fusion_model: str = "coalign"
    fusion_flops: float | None = None
    full_feature_bits: float = 2.16e6
    feature_bits: float | None = None
    messages: ControlMessageSizes = field(default_factory=ControlMessageSizes)
    confidence: SyntheticConfidenceParams = field(default_factory=SyntheticConfidenceParams)
    delta_g: list[float] = field(default_factory=lambda: [0.075])
    n_cavs: list[int] = field(default_factory=lambda: [2, 3, 4, 5, 6, 7])
    seeds: list[int] = field(default_factory=lambda: [0])
    paradigms: list[str] = field(default_factory=lambda: list(PARADIGMS))
    t_max_ms: float = 100.0
    slot_mode: str = "packet"
    priority: str = "static"
    vehicle_mode: str = "unicast"
    edge_compute_flops: float = 2e12
    out: str | None = None
    format: str = "csv"
    jobs: int = 1
    verify: VerifySettings = field(default_factory=VerifySettings)

    @property
    def t_max_s(self) -> float:
        return self.t_max_ms / 1000.0

    def fusion(self) -> FusionCostModel:
        if self.fusion_flops is not None:
            return FusionCostModel(self.fusion_flops, self.full_feature_bits)
        return FusionCostModel(FUSION_MFLOPS[self.fusion_model] * 1e6, self.full_feature_bits)

    def validate(self) -> "ExperimentConfig":
        if not self.seeds:
            raise ValidationError("seeds list is empty")
        if not self.delta_g:
            raise ValidationError("delta_g sweep list is empty")
        if not self.n_cavs and self.scenario_path is None:
            raise ValidationError("n_cavs sweep list is empty")
        if any(n < 1 for n in self.n_cavs):
            raise ValidationError(f"n_cavs entries must be >= 1, got {self.n_cavs}")
        if any(not 0 <= d <= 1 for d in self.delta_g):
            raise ValidationError(f"delta_g entries must lie in [0, 1], got {self.delta_g}")
        if not self.paradigms or any(p not in PARADIGMS for p in self.paradigms):
            raise ValidationError(f"paradigms must be a non-empty subset of {PARADIGMS}")
        if self.fusion_flops is None and self.fusion_model not in FUSION_MFLOPS:
            raise ValidationError(f"unknown fusion model preset {self.fusion_model!r}")
        if self.format not in FORMATS:
            raise ValidationError(f"format must be one of {FORMATS}")
        if self.slot_mode not in ("packet", "table"):
            raise ValidationError("slot_mode must be 'packet' or 'table'")
        if self.priority not in ("dynamic", "static"):
            raise ValidationError("priority must be 'dynamic' or 'static'")
        if self.vehicle_mode not in ("unicast", "broadcast"):
            raise ValidationError("vehicle_mode must be 'unicast' or 'broadcast'")
        if self.n_background < 0 or self.jobs < 1 or not self.t_max_ms > 0:
            raise ValidationError("n_background >= 0, jobs >= 1 and t_max_ms > 0 required")
        return self


def _build(cls, doc: dict, what: str):
    known = {f.name for f in fields(cls)}
    unknown = set(doc) - known
    if unknown:
        raise ValidationError(f"unknown {what} fields: {sorted(unknown)}")
    try:
        return cls(**doc)
    except (TypeError, InvalidArgumentError) as exc:
        raise ValidationError(f"{what}: {exc}") from exc


def _as_list(value):
    return list(value) if isinstance(value, (list, tuple)) else [value]


def config_from_dict(doc: dict) -> ExperimentConfig:
    doc = copy.deepcopy(doc)
    preset = doc.pop("preset", None)
    if preset is not None:
        if preset not in PRESETS:
            raise ValidationError(f"unknown preset {preset!r}; choose from {sorted(PRESETS)}")
        doc = {**copy.deepcopy(PRESETS[preset]), **doc}
    kwargs = {}
    nested = {"grid": GridSpec, "channel": ChannelParams, "messages": ControlMessageSizes,
              "confidence": SyntheticConfidenceParams, "verify": VerifySettings}
    for key, cls in nested.items():
        if key in doc:
            sub = doc.pop(key)
            if key == "grid" and "origin" in sub:
                sub["origin"] = tuple(sub["origin"])
            kwargs[key] = _build(cls, sub, key)
    for key in ("delta_g", "n_cavs", "seeds", "paradigms"):
        if key in doc:
            kwargs[key] = _as_list(doc.pop(key))
    fm = doc.pop("fusion_model", None)
    if isinstance(fm, dict):
        kwargs["fusion_flops"] = float(fm["flops"])
        kwargs["fusion_model"] = "custom"
    elif fm is not None:
        kwargs["fusion_model"] = fm
    kwargs.update(doc)
    return _build(ExperimentConfig, kwargs, "config").validate()


def load_config(path: str | Path | None, preset: str | None = None,
                overrides: dict | None = None) -> ExperimentConfig:
    doc: dict = {}
    if path is not None:
        try:
            doc = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ParseError(f"{path}: {exc}") from exc
        if not isinstance(doc, dict):
            raise ParseError(f"{path}: config must be a JSON object")
    if preset is not None:
        doc["preset"] = preset
    for key, value in (overrides or {}).items():
        if value is not None:
            doc[key] = value
    return config_from_dict(doc)
