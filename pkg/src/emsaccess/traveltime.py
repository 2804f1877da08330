"""Edge travel times with intersection delay, facility snapping, and
nearest-facility travel-time fields."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Hashable, Optional

import numpy as np

from ._kernels import multi_source_dijkstra
from .density import DensityField
from .network import RoadNetwork

log = logging.getLogger(__name__)

FACILITY_KINDS = ("ems_station", "hospital")
CATEGORIES = FACILITY_KINDS + ("overall",)
DEFAULT_MAX_SNAP = 500.0


class UnreachableType:
    """Marker for nodes with no path from any facility of the category."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "UNREACHABLE"

    def __str__(self):
        return "unreachable"

    def __reduce__(self):
        return (UnreachableType, ())


UNREACHABLE = UnreachableType()


@dataclass(frozen=True)
class EdgeTimes:
    """Per-edge seconds aligned with ``edge_ids`` (network edge order)."""

    edge_ids: tuple
    baseline: np.ndarray
    delay: np.ndarray
    adjusted: np.ndarray
    alpha: Optional[float] = None

    def as_dict(self, which: str = "adjusted") -> dict:
        return dict(zip(self.edge_ids, getattr(self, which).tolist()))


def baseline_times(network: RoadNetwork) -> np.ndarray:
    """Free-flow seconds per edge: length / speed limit."""
    return network.lengths / network.speeds


def edge_delays(network: RoadNetwork, density: DensityField, alpha: float) -> np.ndarray:
    """``alpha`` times the mean endpoint density of each edge, in seconds."""
    if alpha < 0 or not math.isfinite(alpha):
        raise ValueError(f"alpha must be finite and >= 0 (got {alpha})")
    if tuple(density.node_ids) != tuple(network.node_ids):
        raise ValueError("density field node set does not match the network")
    dens = density.values
    return alpha * (dens[network.src] + dens[network.dst]) / 2.0


def adjusted_times(baseline, delays, edge_ids=None, alpha=None) -> EdgeTimes:
    """Combine baseline and delay into :class:`EdgeTimes`.

    Mappings (edge_id -> seconds) must share keys; arrays must share length
    and then ``edge_ids`` gives their order.
    """
    if isinstance(baseline, dict) or isinstance(delays, dict):
        if not (isinstance(baseline, dict) and isinstance(delays, dict)):
            raise TypeError("baseline and delays must both be mappings or both arrays")
        if baseline.keys() != delays.keys():
            missing = set(baseline) ^ set(delays)
            raise ValueError(f"edge key mismatch: {sorted(map(str, missing))[:5]}")
        edge_ids = tuple(baseline)
        base = np.array([baseline[k] for k in edge_ids], dtype=np.float64)
        dly = np.array([delays[k] for k in edge_ids], dtype=np.float64)
    else:
        base = np.asarray(baseline, dtype=np.float64)
        dly = np.asarray(delays, dtype=np.float64)
        if base.shape != dly.shape:
            raise ValueError(f"edge count mismatch: {base.shape} vs {dly.shape}")
        edge_ids = tuple(range(len(base))) if edge_ids is None else tuple(edge_ids)
        if len(edge_ids) != len(base):
            raise ValueError("edge_ids length does not match times")
    if np.any(base <= 0):
        raise ValueError("baseline times must be positive")
    if np.any(dly < 0):
        raise ValueError("delays must be non-negative")
    adj = base + dly
    for a in (base, dly, adj):
        a.setflags(write=False)
    return EdgeTimes(edge_ids, base, dly, adj, alpha)


def edge_times(network: RoadNetwork, density: DensityField, alpha: float) -> EdgeTimes:
    """Baseline, delay and adjusted times for every edge at one ``alpha``."""
    return adjusted_times(baseline_times(network), edge_delays(network, density, alpha),
                          edge_ids=network.edge_ids, alpha=float(alpha))


# ---------------------------------------------------------------------------
# facilities
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Facility:
    facility_id: Hashable
    kind: str
    x: float
    y: float
    snapped_node: Hashable = None
    snap_distance: float = 0.0


@dataclass(frozen=True)
class FacilitySet:
    facilities: tuple
    excluded: tuple = ()
    warnings: tuple = ()

    def of(self, category: str) -> list:
        if category not in CATEGORIES:
            raise ValueError(f"unknown facility category {category!r}")
        if category == "overall":
            return list(self.facilities)
        return [f for f in self.facilities if f.kind == category]


def snap_facilities(network: RoadNetwork, facilities, max_snap: float = DEFAULT_MAX_SNAP
                    ) -> FacilitySet:
    """Attach each facility to its nearest node.

    ``facilities`` is an iterable of (facility_id, kind, x, y) or
    :class:`Facility`. Ties go to the smallest node_id. Facilities further
    than ``max_snap`` meters from every node are excluded with a warning.
    """
    kept, dropped, warnings = [], [], []
    xy = network.xy
    ids = network.node_ids
    for raw in facilities:
        if isinstance(raw, Facility):
            fid, kind, x, y = raw.facility_id, raw.kind, raw.x, raw.y
        else:
            fid, kind, x, y = raw
        if kind not in FACILITY_KINDS:
            raise ValueError(f"facility {fid!r} has unknown kind {kind!r}")
        d2 = (xy[:, 0] - x) ** 2 + (xy[:, 1] - y) ** 2
        # argmin returns the first minimum, i.e. the smallest node_id
        i = int(np.argmin(d2))
        dist = math.sqrt(float(d2[i]))
        f = Facility(fid, kind, float(x), float(y), ids[i], dist)
        if dist > max_snap:
            msg = (f"facility {fid!r} excluded: nearest node {ids[i]!r} is "
                   f"{dist:.1f} m away (max {max_snap:g} m)")
            log.warning(msg)
            warnings.append(msg)
            dropped.append(f)
        else:
            kept.append(f)
    return FacilitySet(tuple(kept), tuple(dropped), tuple(warnings))


# ---------------------------------------------------------------------------
# fields
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TravelTimeField:
    """Seconds from the nearest category facility to every node.

    ``seconds`` holds ``inf`` for unreachable nodes; :meth:`time` and
    :meth:`as_dict` translate that into :data:`UNREACHABLE`.
    """

    category: str
    node_ids: tuple
    seconds: np.ndarray
    alpha: Optional[float] = None
    source_nodes: tuple = field(default=())

    @property
    def reachable(self) -> np.ndarray:
        return np.isfinite(self.seconds)

    def time(self, node_id):
        t = float(self.seconds[self.node_ids.index(node_id)])
        return t if math.isfinite(t) else UNREACHABLE

    def as_dict(self) -> dict:
        return {n: (t if math.isfinite(t) else UNREACHABLE)
                for n, t in zip(self.node_ids, self.seconds.tolist())}


def travel_time_field(network: RoadNetwork, times: EdgeTimes, facilities: FacilitySet,
                      category: str = "overall", *, reverse: bool = False,
                      ignore_oneway: bool = False, backend=None) -> TravelTimeField:
    """Multi-source shortest adjusted travel time to every node.

    Default direction is facility -> node (response direction). ``reverse``
    computes node -> facility times instead; on fully bidirectional networks
    the two coincide.
    """
    chosen = facilities.of(category)
    if not chosen:
        raise ValueError(f"no facilities in category {category!r}")
    w = np.asarray(times.adjusted, dtype=np.float64)
    if len(w) != network.n_edges:
        raise ValueError("edge times do not match the network")
    if not np.all(np.isfinite(w)) or np.any(w <= 0):
        raise ValueError("edge weights must be finite and positive")
    sources = sorted({network.index_of(f.snapped_node) for f in chosen})
    csr = network.csr(reverse=reverse, ignore_oneway=ignore_oneway)
    dist = multi_source_dijkstra(csr.indptr, csr.indices, csr.weights(w),
                                 np.array(sources, dtype=np.int64), network.n_nodes,
                                 backend=backend)
    dist.setflags(write=False)
    src_ids = tuple(network.node_ids[i] for i in sources)
    return TravelTimeField(category, tuple(network.node_ids), dist, times.alpha, src_ids)
