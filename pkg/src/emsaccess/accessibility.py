"""Benchmark threshold, coverage curves, vulnerable clusters and alpha scenarios."""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .density import DensityField
from .network import RoadNetwork
from .population import PopulationWeights
from .traveltime import UNREACHABLE, FacilitySet, TravelTimeField, edge_times, travel_time_field

TAU_EMS = 240.0
TAU_HOSPITAL = 330.0
DEFAULT_TAUS = tuple(float(t) for t in range(0, 901, 15))
DEFAULT_MIN_CLUSTER_POPULATION = 100.0


def is_accessible(time, tau: float) -> bool:
    """True iff ``time`` is a finite number of seconds no larger than ``tau``."""
    if tau < 0:
        raise ValueError("tau must be >= 0")
    if time is UNREACHABLE or time is None:
        return False
    t = float(time)
    return math.isfinite(t) and t <= tau


def accessible_mask(field_: TravelTimeField, tau: float) -> np.ndarray:
    if tau < 0:
        raise ValueError("tau must be >= 0")
    s = field_.seconds
    return np.isfinite(s) & (s <= tau)


def _check_aligned(field_: TravelTimeField, weights: PopulationWeights):
    if tuple(field_.node_ids) != tuple(weights.node_ids):
        raise ValueError("travel-time field and population weights cover different nodes")


@dataclass(frozen=True)
class CoverageCurve:
    category: str
    taus: tuple
    fractions: tuple
    total_population: float
    alpha: float = None

    @property
    def samples(self):
        return list(zip(self.taus, self.fractions))

    def at(self, tau: float) -> float:
        return self.fractions[self.taus.index(float(tau))]


def _covered(weights: np.ndarray, mask: np.ndarray) -> float:
    # fsum is correctly rounded, so a subset never sums above its superset
    return math.fsum(weights[mask].tolist())


def coverage_curve(field_: TravelTimeField, weights: PopulationWeights,
                   taus=DEFAULT_TAUS) -> CoverageCurve:
    """Population fraction within each benchmark time."""
    _check_aligned(field_, weights)
    taus = tuple(float(t) for t in taus)
    if any(b < a for a, b in zip(taus, taus[1:])):
        raise ValueError("taus must be sorted ascending")
    total = weights.total_assigned
    if not total > 0:
        raise ValueError("total assigned population is zero")
    w = np.asarray(weights.weights)
    fr = tuple(min(1.0, _covered(w, accessible_mask(field_, t)) / total) for t in taus)
    return CoverageCurve(field_.category, taus, fr, float(total), field_.alpha)


@dataclass(frozen=True)
class Cluster:
    cluster_id: int
    node_ids: tuple
    population: float
    max_time: object  # seconds or UNREACHABLE
    mean_time: object  # mean over reachable members; UNREACHABLE if none


@dataclass(frozen=True)
class VulnerabilityReport:
    tau: float
    clusters: tuple
    total_underserved: float
    accessible_population: float
    filtered_population: float
    total_population: float
    min_population: float
    all_components: tuple = field(default=(), repr=False)


def _components(network: RoadNetwork, nodes: np.ndarray):
    """Connected components (ignoring direction) of the subgraph induced by
    ``nodes``; each component is a sorted index array, ordered by first index."""
    n = network.n_nodes
    sel = np.zeros(n, dtype=bool)
    sel[nodes] = True
    keep = sel[network.src] & sel[network.dst]
    a = coo_matrix((np.ones(int(keep.sum())), (network.src[keep], network.dst[keep])),
                   shape=(n, n))
    _, labels = connected_components(a, directed=False)
    groups = {}
    for i in nodes.tolist():
        groups.setdefault(int(labels[i]), []).append(i)
    return sorted((np.array(g, dtype=np.int64) for g in groups.values()),
                  key=lambda g: int(g[0]))


def vulnerability_report(network: RoadNetwork, field_: TravelTimeField,
                         weights: PopulationWeights, tau: float = TAU_EMS,
                         min_population: float = DEFAULT_MIN_CLUSTER_POPULATION
                         ) -> VulnerabilityReport:
    """Group inaccessible nodes into road-connected clusters.

    Clusters below ``min_population`` are dropped from the listing but their
    population is kept in ``filtered_population``.
    """
    _check_aligned(field_, weights)
    if tau < 0:
        raise ValueError("tau must be >= 0")
    ok = accessible_mask(field_, tau)
    bad = np.flatnonzero(~ok)
    w = np.asarray(weights.weights)
    secs = field_.seconds
    ids = field_.node_ids

    comps = _components(network, bad) if len(bad) else []
    info = []
    for comp in comps:
        pop = math.fsum(w[comp].tolist())
        t = secs[comp]
        fin = t[np.isfinite(t)]
        max_t = float(t.max()) if len(fin) == len(t) else UNREACHABLE
        mean_t = math.fsum(fin.tolist()) / len(fin) if len(fin) else UNREACHABLE
        info.append((pop, comp, max_t, mean_t))
    info.sort(key=lambda r: (-r[0], int(r[1][0])))

    clusters, filtered = [], []
    for pop, comp, max_t, mean_t in info:
        if pop < min_population:
            filtered.append(pop)
            continue
        clusters.append(Cluster(len(clusters), tuple(ids[i] for i in comp.tolist()),
                                pop, max_t, mean_t))
    all_components = tuple(tuple(ids[i] for i in c.tolist()) for _, c, _, _ in info)
    return VulnerabilityReport(
        tau=float(tau),
        clusters=tuple(clusters),
        total_underserved=math.fsum(c.population for c in clusters),
        accessible_population=_covered(w, ok),
        filtered_population=math.fsum(filtered),
        total_population=float(weights.total_assigned),
        min_population=float(min_population),
        all_components=all_components,
    )


@dataclass(frozen=True)
class ScenarioResult:
    base_alpha: float
    scale: float
    before: CoverageCurve
    after: CoverageCurve

    @property
    def deltas(self):
        return tuple(a - b for a, b in zip(self.after.fractions, self.before.fractions))


def scenario_alpha_scale(base_alpha: float, scale: float, network: RoadNetwork,
                         density: DensityField, facilities: FacilitySet,
                         weights: PopulationWeights, category: str = "overall",
                         taus=DEFAULT_TAUS, *, reverse: bool = False,
                         ignore_oneway: bool = False, threads: int = 1,
                         backend=None) -> ScenarioResult:
    """Coverage curves at ``base_alpha`` and at ``base_alpha * scale``.

    Signal preemption is modelled purely as a reduction of the delay factor.
    """
    if not 0 < scale <= 1:
        raise ValueError("scale must be in (0, 1]")

    def run(alpha):
        times = edge_times(network, density, alpha)
        f = travel_time_field(network, times, facilities, category, reverse=reverse,
                              ignore_oneway=ignore_oneway, backend=backend)
        return coverage_curve(f, weights, taus)

    alphas = (float(base_alpha), float(base_alpha) * scale)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=2) as ex:
            before, after = ex.map(run, alphas)
    else:
        before, after = map(run, alphas)
    return ScenarioResult(float(base_alpha), float(scale), before, after)
