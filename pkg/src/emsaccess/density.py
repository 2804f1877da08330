"""Intersection derivation and per-node intersection density."""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass

import numpy as np

from ._kernels import radius_counts
from .network import RoadNetwork

HECTARE = 1.0e4
DEFAULT_RADIUS = 800.0
DEFAULT_ROUNDING = 1.0


@dataclass(frozen=True)
class IntersectionSet:
    points: np.ndarray  # (k, 2), sorted lexicographically
    rounding_grid: float

    def __len__(self):
        return len(self.points)


@dataclass(frozen=True)
class DensityField:
    """Intersections per ``unit_scale`` square meters for every network node."""

    node_ids: tuple
    counts: np.ndarray
    values: np.ndarray
    radius: float
    unit_scale: float

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError("radius must be positive")

    def as_dict(self) -> dict:
        return dict(zip(self.node_ids, self.values.tolist()))

    def __getitem__(self, node_id):
        return float(self.values[self.node_ids.index(node_id)])


def quantize(xy, grid: float) -> np.ndarray:
    # half-up rounding; np.round is half-to-even
    return np.floor(np.asarray(xy, dtype=np.float64) / grid + 0.5) * grid


def derive_intersections(network: RoadNetwork, classes=("street", "highway"),
                         rounding_grid: float = DEFAULT_ROUNDING) -> IntersectionSet:
    """Approximate intersection map from segment endpoints.

    Endpoints of edges whose class is in ``classes`` are snapped to a square
    grid of side ``rounding_grid``; a snapped point is kept when at least two
    segment ends land on it, so dead ends drop out.
    """
    if rounding_grid <= 0:
        raise ValueError("rounding_grid must be positive")
    classes = set(classes)
    keep = np.array([e.road_class in classes for e in network.edges], dtype=bool)
    if not keep.any():
        return IntersectionSet(np.empty((0, 2)), float(rounding_grid))
    ends = np.concatenate([network.src[keep], network.dst[keep]])
    q = quantize(network.xy[ends], rounding_grid)
    tally = Counter(map(tuple, q.tolist()))
    pts = sorted(p for p, k in tally.items() if k >= 2)
    arr = np.array(pts, dtype=np.float64).reshape(-1, 2)
    return IntersectionSet(arr, float(rounding_grid))


def density_field(network: RoadNetwork, intersections: IntersectionSet,
                  radius: float = DEFAULT_RADIUS, unit_scale: float = HECTARE,
                  backend=None) -> DensityField:
    """Count intersections within ``radius`` of each node, divide by the disk
    area and express the result per ``unit_scale`` square meters."""
    if radius <= 0:
        raise ValueError("radius must be positive")
    if unit_scale <= 0:
        raise ValueError("unit_scale must be positive")
    counts = radius_counts(network.xy, intersections.points, radius, backend=backend)
    values = counts / (math.pi * radius * radius) * unit_scale
    counts.setflags(write=False)
    values.setflags(write=False)
    return DensityField(tuple(network.node_ids), counts, values, float(radius),
                        float(unit_scale))
