"""Run configuration with defaults and range checks."""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

from .accessibility import DEFAULT_MIN_CLUSTER_POPULATION, TAU_EMS
from .density import DEFAULT_RADIUS, DEFAULT_ROUNDING, HECTARE
from .traveltime import CATEGORIES, DEFAULT_MAX_SNAP


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    """Pipeline parameters. ``alpha`` is seconds x ``unit_scale`` m^2 per
    intersection; ``tau`` and the curve grid are in seconds."""

    alpha: float = 15.0
    radius: float = DEFAULT_RADIUS
    unit_scale: float = HECTARE
    tau: float = TAU_EMS
    category: str = "overall"
    rounding_grid: float = DEFAULT_ROUNDING
    max_snap: float = DEFAULT_MAX_SNAP
    min_cluster_population: float = DEFAULT_MIN_CLUSTER_POPULATION
    alpha_scale: float = 0.5
    seed: int = 0
    curve_max: float = 900.0
    curve_step: float = 15.0
    intersection_classes: tuple = ("street", "highway")
    reverse: bool = False
    ignore_oneway: bool = False
    scenario: bool = False
    threads: int = 1
    crs: str = ""

    def __post_init__(self):
        def positive(name):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
                raise ConfigError(f"{name} must be a positive number (got {v!r})")

        def nonneg(name):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and math.isfinite(v) and v >= 0):
                raise ConfigError(f"{name} must be >= 0 (got {v!r})")

        for n in ("radius", "unit_scale", "rounding_grid", "max_snap", "curve_step"):
            positive(n)
        for n in ("alpha", "tau", "min_cluster_population", "curve_max"):
            nonneg(n)
        if not 0 < self.alpha_scale <= 1:
            raise ConfigError(f"alpha_scale must be in (0, 1] (got {self.alpha_scale!r})")
        if self.category not in CATEGORIES:
            raise ConfigError(f"category must be one of {CATEGORIES} (got {self.category!r})")
        if int(self.threads) < 1:
            raise ConfigError("threads must be >= 1")
        bad = set(self.intersection_classes) - {"street", "highway", "other"}
        if bad:
            raise ConfigError(f"unknown road classes {sorted(bad)}")

    @property
    def taus(self) -> tuple:
        n = int(math.floor(self.curve_max / self.curve_step + 1e-9))
        return tuple(float(k * self.curve_step) for k in range(n + 1))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["intersection_classes"] = list(self.intersection_classes)
        return d

    @classmethod
    def from_file(cls, path, **overrides) -> "RunConfig":
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"{path}: unknown config keys {sorted(unknown)}")
        if "intersection_classes" in data:
            data["intersection_classes"] = tuple(data["intersection_classes"])
        data.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**data)

    def with_(self, **kw) -> "RunConfig":
        return replace(self, **{k: v for k, v in kw.items() if v is not None})
