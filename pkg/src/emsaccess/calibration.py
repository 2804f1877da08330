"""Observed trip-duration statistics and actual/simulated ratio tables.

The ratio table is diagnostic only; nothing here rescales alpha.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from datetime import datetime, timezone
from typing import Optional

import numpy as np

log = logging.getLogger(__name__)

DEFAULT_PERCENTILES = (25.0, 50.0, 75.0, 97.5, 100.0)
MEAN = "mean"


class TripParseError(ValueError):
    pass


@dataclass(frozen=True)
class TripRecord:
    dispatch_time: datetime
    arrival_time: datetime
    severity: Optional[str] = None

    def __post_init__(self):
        if self.arrival_time < self.dispatch_time:
            raise TripParseError(
                f"arrival {self.arrival_time.isoformat()} precedes dispatch "
                f"{self.dispatch_time.isoformat()}")


def parse_timestamp(text: str, warnings: list = None) -> datetime:
    """ISO-8601 timestamp; naive values are taken as UTC (with a warning)."""
    ts = datetime.fromisoformat(text.strip().replace("Z", "+00:00"))
    if ts.tzinfo is None:
        if warnings is not None:
            warnings.append("naive timestamps assumed UTC")
        ts = ts.replace(tzinfo=timezone.utc)
    return ts


def trip_durations(records) -> np.ndarray:
    """Seconds from dispatch to arrival for each record."""
    records = list(records)
    if not records:
        raise ValueError("no trip records")
    return np.array([(r.arrival_time - r.dispatch_time).total_seconds() for r in records])


def percentile_summary(durations, percentiles=DEFAULT_PERCENTILES) -> dict:
    """Linear-interpolation percentiles (between closest ranks) plus the mean.

    Returns an ordered mapping ``{percentile: value, ..., "mean": value}``.
    """
    d = np.sort(np.asarray(durations, dtype=np.float64))
    if d.size == 0:
        raise ValueError("no durations")
    out = {}
    for p in percentiles:
        if not 0 <= p <= 100:
            raise ValueError(f"percentile {p} outside [0, 100]")
        out[float(p)] = float(np.percentile(d, p, method="linear"))
    out[MEAN] = math.fsum(d.tolist()) / d.size
    return out


@dataclass(frozen=True)
class RatioRow:
    percentile: object  # float or "mean"
    actual: float
    simulated: float
    ratio: float


@dataclass(frozen=True)
class RatioTable:
    rows: tuple

    def ratio(self, key) -> float:
        key = key if key == MEAN else float(key)
        for r in self.rows:
            if r.percentile == key:
                return r.ratio
        raise KeyError(key)


def ratio_table(actual: dict, simulated: dict) -> RatioTable:
    """Row-wise actual / simulated for matching percentile keys."""
    if list(actual) != list(simulated):
        raise ValueError(f"percentile rows differ: {list(actual)} vs {list(simulated)}")
    rows = []
    for k in actual:
        sim = float(simulated[k])
        if not sim > 0:
            raise ValueError(f"simulated value for {k!r} must be positive")
        rows.append(RatioRow(k, float(actual[k]), sim, float(actual[k]) / sim))
    return RatioTable(tuple(rows))
