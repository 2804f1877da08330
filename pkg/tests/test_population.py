import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from shapely.geometry import Polygon, box
from shapely.ops import split
from shapely.geometry import LineString

from emsaccess.network import EdgeRecord, NodeRecord, build_network, generate_grid
from emsaccess.population import (SQ_M_PER_SQ_MI, CensusTract, GeometryError,
                                  assign_population, effective_density, voronoi_partition)

from oracles import mc_node_population

BOROUGHS = {  # area mi^2, population, printed density k/mi^2
    "Bronx": (42.2, 1.42e6, 33.65),
    "Brooklyn": (69.4, 2.57e6, 37.04),
    "Manhattan": (22.7, 1.63e6, 71.81),
    "Queens": (108.7, 2.27e6, 20.88),
    "Staten Island": (57.5, 0.47e6, 8.17),
}


def _net(points):
    nodes = [NodeRecord(i, float(x), float(y)) for i, (x, y) in enumerate(points)]
    edges = [EdgeRecord(f"e{i}", i, i + 1, 1.0, 1.0) for i in range(len(points) - 1)]
    if len(points) == 1:
        nodes.append(NodeRecord(1, 1e7, 1e7))
        edges = [EdgeRecord("e", 0, 1, 1.0, 1.0)]
    return build_network(nodes, edges)


@pytest.mark.parametrize("name", ["Bronx", "Manhattan"])
def test_borough_density(name):
    area, pop, printed = BOROUGHS[name]
    t = CensusTract(name, box(0, 0, 1, 1), pop, area * SQ_M_PER_SQ_MI)
    assert effective_density(t) * SQ_M_PER_SQ_MI / 1e3 == pytest.approx(printed, rel=5e-3)


def test_zero_population_density():
    assert effective_density(CensusTract("z", box(0, 0, 5, 5), 0.0)) == 0.0


def test_area_defaults_to_polygon_area():
    assert effective_density(CensusTract("t", box(0, 0, 10, 20), 400.0)) == 2.0


def test_two_symmetric_sites():
    part = voronoi_partition(_net([(0.25, 0.5), (0.75, 0.5)]), box(0, 0, 1, 1))
    np.testing.assert_allclose(part.areas(), [0.5, 0.5], rtol=1e-12)


def test_single_site_gets_boundary():
    b = box(0, 0, 3, 2)
    part = voronoi_partition(_net([(1, 1)]), b)
    assert part.cells[0].equals(b)
    assert part.cells[1].is_empty  # the far node lies outside


def test_grid_interior_cells_are_squares():
    net = generate_grid(5, 5, 100.0, 1.0)
    part = voronoi_partition(net, box(-50, -50, 450, 450))
    areas = part.areas()
    np.testing.assert_allclose(areas, 100.0 ** 2, rtol=1e-9)


def test_all_nodes_outside_rejected():
    with pytest.raises(GeometryError):
        voronoi_partition(_net([(10, 10), (20, 20)]), box(0, 0, 1, 1))


def test_full_containment():
    part = voronoi_partition(_net([(0.25, 0.5), (0.75, 0.5)]), box(0, 0, 1, 1))
    w = assign_population(part, [CensusTract("t", part.cells[0], 1000.0)])
    assert w.weights[0] == pytest.approx(1000.0, rel=1e-12)
    assert w.weights[1] == 0.0


def test_half_overlap():
    part = voronoi_partition(_net([(0.25, 0.5), (0.75, 0.5)]), box(0, 0, 1, 1))
    w = assign_population(part, [CensusTract("t", box(0, 0, 1, 1), 1000.0)])
    np.testing.assert_allclose(w.weights, [500.0, 500.0], rtol=1e-12)
    assert w.total_assigned == pytest.approx(1000.0)


def test_invalid_tract_names_id():
    bow = Polygon([(0, 0), (1, 1), (1, 0), (0, 1)])
    part = voronoi_partition(_net([(0.2, 0.2), (0.8, 0.8)]), box(0, 0, 1, 1))
    with pytest.raises(GeometryError, match="bowtie"):
        assign_population(part, [CensusTract("bowtie", bow, 10.0)])


def test_outside_remainder_reported():
    part = voronoi_partition(_net([(0.25, 0.5), (0.75, 0.5)]), box(0, 0, 1, 1))
    w = assign_population(part, [CensusTract("t", box(0.5, 0, 1.5, 1), 1000.0)])
    assert w.total_assigned == pytest.approx(500.0)
    assert w.unassigned == pytest.approx(500.0)
    assert len(w.warnings) == 1


def test_locality_zero_weight():
    part = voronoi_partition(_net([(0.25, 0.5), (0.75, 0.5)]), box(0, 0, 1, 1))
    w = assign_population(part, [CensusTract("t", box(0, 0, 0.3, 1), 10.0)])
    assert w.weights[1] == 0.0


def test_colocated_nodes_split_equally():
    pts = [(0.25, 0.5), (0.75, 0.5), (0.75, 0.5)]
    part = voronoi_partition(_net(pts), box(0, 0, 1, 1))
    w = assign_population(part, [CensusTract("t", box(0, 0, 1, 1), 1000.0)])
    np.testing.assert_allclose(w.weights, [500.0, 250.0, 250.0], rtol=1e-12)


def test_monte_carlo_overlay():
    rng = np.random.default_rng(5)
    sites = rng.uniform(100, 900, (4, 2))
    boundary = box(0, 0, 1000, 1000)
    shells = [
        [(50, 50), (600, 80), (500, 500), (80, 400)],
        [(550, 100), (950, 150), (900, 700), (600, 600)],
        [(100, 550), (900, 720), (950, 950), (60, 950)],
    ]
    hole = [(300, 700), (320, 850), (450, 820)]
    pops = [1500.0, 900.0, 2600.0]
    tracts = [CensusTract("a", Polygon(shells[0]), pops[0]),
              CensusTract("b", Polygon(shells[1]), pops[1]),
              CensusTract("c", Polygon(shells[2], [hole]), pops[2])]
    part = voronoi_partition(_net(sites), boundary)
    got = assign_population(part, tracts).weights
    oracle = mc_node_population(sites, [(shells[0], [], pops[0]), (shells[1], [], pops[1]),
                                        (shells[2], [hole], pops[2])], 1_000_000, seed=9)
    big = oracle > 0.05 * oracle.sum()
    np.testing.assert_allclose(got[big], oracle[big], rtol=0.01)
    assert np.all(np.abs(got - oracle) <= 0.01 * oracle.sum())


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000), st.integers(3, 40))
def test_conservation_and_partition_area(seed, n):
    rng = np.random.default_rng(seed)
    pts = rng.uniform(0, 1000, (n, 2))
    b = box(-100, -100, 1100, 1100)
    part = voronoi_partition(_net(pts), b)
    assert part.areas().sum() == pytest.approx(b.area, rel=1e-6)
    tracts = [CensusTract(f"t{i}", box(x, y, x + 300, y + 300), float(rng.integers(0, 5000)))
              for i, (x, y) in enumerate(rng.uniform(-100, 800, (5, 2)))]
    w = assign_population(part, tracts)
    assert np.all(w.weights >= 0)
    assert w.total_assigned == pytest.approx(sum(t.population for t in tracts), rel=1e-3)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.1, 0.9))
def test_refinement_stability(seed, frac):
    rng = np.random.default_rng(seed)
    pts = rng.uniform(0, 1000, (15, 2))
    part = voronoi_partition(_net(pts), box(0, 0, 1000, 1000))
    whole = box(100, 100, 900, 700)
    cut = 100 + frac * 800
    pieces = split(whole, LineString([(cut, 0), (cut, 1000)])).geoms
    rho = 3000.0 / whole.area
    a = assign_population(part, [CensusTract("w", whole, 3000.0)]).weights
    b = assign_population(part, [CensusTract(f"p{i}", p, rho * p.area)
                                 for i, p in enumerate(pieces)]).weights
    np.testing.assert_allclose(a, b, rtol=1e-9, atol=1e-9)


def test_default_boundary_is_buffered_hull():
    net = generate_grid(3, 3, 100.0, 1.0)
    part = voronoi_partition(net)
    assert part.boundary_is_default
    assert part.boundary.contains(box(-70, -70, 270, 270))
    assert not part.boundary.intersects(box(-102, 0, -101, 200))
    assert part.areas().sum() == pytest.approx(part.boundary.area, rel=1e-6)
