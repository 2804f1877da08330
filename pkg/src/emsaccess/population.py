"""Population weights per node from Voronoi cells overlaid on census tracts."""
from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass
from typing import Hashable, Optional

import numpy as np
import shapely
from shapely.geometry import MultiPoint, Polygon
from shapely.geometry.base import BaseGeometry
from shapely.geometry.polygon import orient

from .network import RoadNetwork

DEFAULT_BOUNDARY_BUFFER = 100.0
SQ_M_PER_SQ_MI = 1609.344 ** 2


class GeometryError(ValueError):
    pass


@dataclass(frozen=True)
class CensusTract:
    tract_id: Hashable
    polygon: BaseGeometry
    population: float
    area: Optional[float] = None  # livable area override, m^2

    def __post_init__(self):
        if self.population < 0 or not math.isfinite(self.population):
            raise GeometryError(f"tract {self.tract_id!r}: population must be >= 0")
        if self.area is not None and not self.area > 0:
            raise GeometryError(f"tract {self.tract_id!r}: area must be > 0")

    @property
    def livable_area(self) -> float:
        return float(self.area) if self.area is not None else float(self.polygon.area)


def effective_density(tract: CensusTract) -> float:
    """Persons per square meter of livable area."""
    area = tract.livable_area
    if not area > 0:
        raise GeometryError(f"tract {tract.tract_id!r} has zero area")
    return tract.population / area


@dataclass(frozen=True)
class VoronoiPartition:
    node_ids: tuple
    cells: tuple  # shapely Polygon/MultiPolygon per node (empty for outside nodes)
    boundary: BaseGeometry
    boundary_is_default: bool = False

    def cell(self, node_id):
        return self.cells[self.node_ids.index(node_id)]

    def areas(self) -> np.ndarray:
        return shapely.area(np.array(self.cells, dtype=object)).astype(np.float64)


@dataclass(frozen=True)
class PopulationWeights:
    node_ids: tuple
    weights: np.ndarray
    total_assigned: float
    unassigned: float = 0.0
    warnings: tuple = ()

    def as_dict(self) -> dict:
        return dict(zip(self.node_ids, self.weights.tolist()))


def default_boundary(network: RoadNetwork, buffer: float = DEFAULT_BOUNDARY_BUFFER):
    """Convex hull of the nodes buffered by ``buffer`` meters."""
    return MultiPoint([tuple(p) for p in network.xy.tolist()]).convex_hull.buffer(buffer)


def normalize_polygon(geom: BaseGeometry) -> BaseGeometry:
    """Orient shells counter-clockwise and holes clockwise."""
    if geom.geom_type == "Polygon":
        return orient(geom, 1.0)
    if geom.geom_type == "MultiPolygon":
        return shapely.MultiPolygon([orient(p, 1.0) for p in geom.geoms])
    raise GeometryError(f"expected polygonal geometry, got {geom.geom_type}")


def voronoi_partition(network: RoadNetwork, boundary: BaseGeometry = None
                      ) -> VoronoiPartition:
    """Voronoi cells of the node sites clipped to ``boundary``.

    Only nodes covered by the boundary act as sites; the rest get empty
    cells. Co-located nodes share one site and each receives the same cell.
    """
    is_default = boundary is None
    if is_default:
        boundary = default_boundary(network)
    if not boundary.is_valid or boundary.is_empty:
        raise GeometryError("study-area boundary is not a valid polygon")
    inside = shapely.covers(boundary, shapely.points(network.xy))
    if not inside.any():
        raise GeometryError("no network node lies inside the study-area boundary")

    site_of = {}
    sites = []
    for i in np.flatnonzero(inside):
        key = (float(network.xy[i, 0]), float(network.xy[i, 1]))
        if key not in site_of:
            site_of[key] = len(sites)
            sites.append(key)

    if len(sites) == 1:
        site_cells = [boundary]
    else:
        env = boundary.envelope.buffer(max(1.0, boundary.length))
        diagram = shapely.voronoi_polygons(MultiPoint(sites), extend_to=env, ordered=True)
        raw = list(diagram.geoms)
        if len(raw) != len(sites):
            raise GeometryError("voronoi diagram lost sites")
        site_cells = [shapely.make_valid(c).intersection(boundary) for c in raw]

    empty = Polygon()
    cells = []
    for i in range(network.n_nodes):
        if inside[i]:
            key = (float(network.xy[i, 0]), float(network.xy[i, 1]))
            cells.append(site_cells[site_of[key]])
        else:
            cells.append(empty)
    return VoronoiPartition(tuple(network.node_ids), tuple(cells), boundary, is_default)


def assign_population(partition: VoronoiPartition, tracts) -> PopulationWeights:
    """Sum over tracts of (cell-tract overlap area) x (tract effective density).

    Nodes sharing a site split that site's population equally. Tract area
    outside every cell is reported as the unassigned remainder.
    """
    # group nodes sharing a cell object (co-located sites)
    share = defaultdict(list)
    for i, c in enumerate(partition.cells):
        if not c.is_empty:
            share[id(c)].append(i)
    groups = list(share.values())
    geoms = np.array([partition.cells[g[0]] for g in groups], dtype=object)
    tree = shapely.STRtree(geoms)

    acc = np.zeros(len(groups))
    parts = [[] for _ in groups]
    unassigned = []
    warnings = []
    for t in tracts:
        poly = t.polygon
        if poly.is_empty or not poly.is_valid:
            reason = shapely.is_valid_reason(poly) if not poly.is_empty else "empty"
            raise GeometryError(f"tract {t.tract_id!r} has invalid geometry: {reason}")
        rho = effective_density(t)
        got = 0.0
        for g in tree.query(poly, predicate="intersects"):
            a = geoms[g].intersection(poly).area
            if a > 0:
                parts[g].append(a * rho)
                got += a * rho
        total = rho * poly.area
        rem = total - got
        if rem > 1e-6 * max(total, 1.0):
            unassigned.append(rem)
            warnings.append(f"tract {t.tract_id!r}: {rem:.6g} persons fall outside "
                            f"the study boundary")
    for g, p in enumerate(parts):
        acc[g] = math.fsum(p)

    w = np.zeros(len(partition.node_ids))
    for g, members in enumerate(groups):
        w[members] = acc[g] / len(members)
    w.setflags(write=False)
    return PopulationWeights(tuple(partition.node_ids), w, math.fsum(w.tolist()),
                             math.fsum(unassigned), tuple(warnings))

