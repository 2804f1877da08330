"""Road-network graph: records, validated construction, synthetic generators."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Hashable, Iterable, Optional

import numpy as np
from scipy.spatial import Delaunay, QhullError

MPH_TO_MPS = 0.44704
ROAD_CLASSES = ("street", "highway", "other")


class NetworkError(ValueError):
    """Raised when node/edge records fail validation."""


@dataclass(frozen=True)
class NodeRecord:
    node_id: Hashable
    x: float
    y: float


@dataclass(frozen=True)
class EdgeRecord:
    edge_id: Hashable
    source: Hashable
    target: Hashable
    length: Optional[float]
    speed_limit: float  # m/s
    road_class: str = "street"
    oneway: bool = False


@dataclass(frozen=True)
class CSR:
    """Compressed out-adjacency; ``arc_edge`` maps each arc back to its edge index."""

    indptr: np.ndarray
    indices: np.ndarray
    arc_edge: np.ndarray

    def weights(self, edge_values):
        return np.asarray(edge_values, dtype=np.float64)[self.arc_edge]


@dataclass(frozen=True, eq=False)
class RoadNetwork:
    """Immutable road multigraph.

    Nodes are stored sorted by ``node_id`` so that node index order equals
    identifier order; tie-breaks on "smallest node_id" reduce to index order.
    """

    nodes: tuple
    edges: tuple
    _index: dict = field(repr=False)
    xy: np.ndarray = field(repr=False)
    src: np.ndarray = field(repr=False)
    dst: np.ndarray = field(repr=False)
    lengths: np.ndarray = field(repr=False)
    speeds: np.ndarray = field(repr=False)
    oneway: np.ndarray = field(repr=False)

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def node_ids(self) -> list:
        return [n.node_id for n in self.nodes]

    @property
    def edge_ids(self) -> list:
        return [e.edge_id for e in self.edges]

    def index_of(self, node_id) -> int:
        return self._index[node_id]

    def bounds(self):
        lo = self.xy.min(axis=0)
        hi = self.xy.max(axis=0)
        return float(lo[0]), float(lo[1]), float(hi[0]), float(hi[1])

    @cached_property
    def adjacency(self) -> dict:
        """node_id -> list of (edge_id, neighbor_id) traversable from that node."""
        adj = {n.node_id: [] for n in self.nodes}
        for e in self.edges:
            adj[e.source].append((e.edge_id, e.target))
            if not e.oneway:
                adj[e.target].append((e.edge_id, e.source))
        return adj

    def csr(self, *, reverse: bool = False, ignore_oneway: bool = False) -> CSR:
        """Arc list in CSR form.

        ``reverse`` flips every arc (node->facility semantics on directed nets);
        ``ignore_oneway`` lets every edge be traversed both ways.
        """
        key = (reverse, ignore_oneway)
        cache = self.__dict__.setdefault("_csr_cache", {})
        if key in cache:
            return cache[key]
        m = self.n_edges
        eidx = np.arange(m, dtype=np.int64)
        both = np.ones(m, dtype=bool) if ignore_oneway else ~self.oneway
        tails = np.concatenate([self.src, self.dst[both]])
        heads = np.concatenate([self.dst, self.src[both]])
        arc_edge = np.concatenate([eidx, eidx[both]])
        if reverse:
            tails, heads = heads, tails
        order = np.lexsort((heads, tails))
        tails, heads, arc_edge = tails[order], heads[order], arc_edge[order]
        indptr = np.zeros(self.n_nodes + 1, dtype=np.int64)
        np.cumsum(np.bincount(tails, minlength=self.n_nodes), out=indptr[1:])
        out = CSR(indptr, heads.astype(np.int64), arc_edge.astype(np.int64))
        cache[key] = out
        return out

    def records(self):
        """(nodes, edges) with lengths filled in; feeding these back to
        :func:`build_network` reproduces this network."""
        return list(self.nodes), list(self.edges)


def _finite(v) -> bool:
    try:
        return math.isfinite(float(v))
    except (TypeError, ValueError):
        return False


def build_network(nodes: Iterable[NodeRecord], edges: Iterable[EdgeRecord]) -> RoadNetwork:
    """Validate records and freeze them into a :class:`RoadNetwork`.

    Edges without a length get the Euclidean distance between their endpoints.
    """
    nodes = list(nodes)
    edges = list(edges)
    if not nodes:
        raise NetworkError("network has no nodes")
    if not edges:
        raise NetworkError("network has no edges")

    index = {}
    for n in nodes:
        if n.node_id in index:
            raise NetworkError(f"duplicate node_id {n.node_id!r}")
        if not (_finite(n.x) and _finite(n.y)):
            raise NetworkError(f"node {n.node_id!r} has non-finite coordinates")
        index[n.node_id] = n
    try:
        ordered = sorted(nodes, key=lambda n: n.node_id)
    except TypeError as exc:
        raise NetworkError("node_ids must be mutually comparable (all int or all str)") from exc
    ordered = tuple(NodeRecord(n.node_id, float(n.x), float(n.y)) for n in ordered)
    pos = {n.node_id: i for i, n in enumerate(ordered)}

    seen_edges = set()
    fixed = []
    for e in edges:
        if e.edge_id in seen_edges:
            raise NetworkError(f"duplicate edge_id {e.edge_id!r}")
        seen_edges.add(e.edge_id)
        for end in (e.source, e.target):
            if end not in pos:
                raise NetworkError(f"edge {e.edge_id!r} references unknown node {end!r}")
        if e.source == e.target:
            raise NetworkError(f"edge {e.edge_id!r} is a self-loop on {e.source!r}")
        if e.road_class not in ROAD_CLASSES:
            raise NetworkError(f"edge {e.edge_id!r} has unknown road_class {e.road_class!r}")
        length = e.length
        if length is None:
            a, b = index[e.source], index[e.target]
            length = math.hypot(float(b.x) - float(a.x), float(b.y) - float(a.y))
            if length == 0.0:
                raise NetworkError(
                    f"edge {e.edge_id!r} has no length and coincident endpoints")
        if not _finite(length) or float(length) <= 0:
            raise NetworkError(f"edge {e.edge_id!r} has non-positive length {length!r}")
        if not _finite(e.speed_limit) or float(e.speed_limit) <= 0:
            raise NetworkError(f"edge {e.edge_id!r} has non-positive speed {e.speed_limit!r}")
        fixed.append(EdgeRecord(e.edge_id, e.source, e.target, float(length),
                                float(e.speed_limit), e.road_class, bool(e.oneway)))

    xy = np.array([[n.x, n.y] for n in ordered], dtype=np.float64)
    src = np.array([pos[e.source] for e in fixed], dtype=np.int64)
    dst = np.array([pos[e.target] for e in fixed], dtype=np.int64)
    arrays = dict(
        xy=xy, src=src, dst=dst,
        lengths=np.array([e.length for e in fixed]),
        speeds=np.array([e.speed_limit for e in fixed]),
        oneway=np.array([e.oneway for e in fixed], dtype=bool),
    )
    for a in arrays.values():
        a.setflags(write=False)
    return RoadNetwork(nodes=ordered, edges=tuple(fixed), _index=pos, **arrays)


def grid_node_id(row: int, col: int, cols: int) -> int:
    return row * cols + col


def generate_grid(rows: int, cols: int, spacing: float, speed_limit: float,
                  road_class: str = "street") -> RoadNetwork:
    """Regular lattice with bidirectional edges between 4-neighbours.

    Node ``row * cols + col`` sits at ``(col * spacing, row * spacing)``.
    """
    if rows < 2 or cols < 2:
        raise NetworkError(f"grid needs rows, cols >= 2 (got {rows}x{cols})")
    if spacing <= 0:
        raise NetworkError("grid spacing must be positive")
    nodes = [NodeRecord(grid_node_id(r, c, cols), c * spacing, r * spacing)
             for r in range(rows) for c in range(cols)]
    edges = []
    for r in range(rows):
        for c in range(cols):
            u = grid_node_id(r, c, cols)
            if c + 1 < cols:
                edges.append(EdgeRecord(f"h{r}_{c}", u, u + 1, float(spacing),
                                        speed_limit, road_class))
            if r + 1 < rows:
                edges.append(EdgeRecord(f"v{r}_{c}", u, u + cols, float(spacing),
                                        speed_limit, road_class))
    return build_network(nodes, edges)


def generate_random_planar(n: int, seed: int, bbox=(0.0, 0.0, 1000.0, 1000.0),
                           speed_limit: float = 25 * MPH_TO_MPS) -> RoadNetwork:
    """Seeded random street network wired by Delaunay triangulation.

    Points are uniform in ``bbox = (xmin, ymin, xmax, ymax)``. The Delaunay
    edge set is planar and connected; when the triangulation is degenerate
    (n == 2 or collinear points) the points are chained in sorted order.
    """
    if n < 2:
        raise NetworkError("random network needs n >= 2")
    rng = np.random.default_rng(seed)
    x0, y0, x1, y1 = bbox
    pts = np.column_stack([rng.uniform(x0, x1, n), rng.uniform(y0, y1, n)])
    pairs = set()
    try:
        if n < 3:
            raise QhullError("too few points")
        tri = Delaunay(pts)
        for simplex in tri.simplices:
            for a, b in ((0, 1), (1, 2), (0, 2)):
                u, v = sorted((int(simplex[a]), int(simplex[b])))
                pairs.add((u, v))
        # coplanar (dropped) points would be isolated; chain them in
        if len(tri.coplanar):
            raise QhullError("coplanar points")
    except QhullError:
        pairs = set()
        order = np.lexsort((pts[:, 1], pts[:, 0]))
        for a, b in zip(order[:-1], order[1:]):
            pairs.add(tuple(sorted((int(a), int(b)))))
    nodes = [NodeRecord(i, float(pts[i, 0]), float(pts[i, 1])) for i in range(n)]
    edges = [EdgeRecord(f"e{k}", u, v, None, speed_limit)
             for k, (u, v) in enumerate(sorted(pairs))]
    return build_network(nodes, edges)
