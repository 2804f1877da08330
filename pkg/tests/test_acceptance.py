"""Acceptance gate. One PASS/FAIL line per criterion is printed in the
terminal summary (see conftest.py)."""
import csv
import json
import math
import time
from collections import Counter
from dataclasses import replace

import numpy as np
import pytest

from emsaccess import codecs
from emsaccess._kernels import radius_counts
from emsaccess.accessibility import coverage_curve, scenario_alpha_scale
from emsaccess.calibration import MEAN, ratio_table
from emsaccess.config import RunConfig
from emsaccess.density import IntersectionSet, density_field, derive_intersections
from emsaccess.fixtures import fixture_paths, grid5x5, synthetic_city
from emsaccess.network import build_network, generate_grid, generate_random_planar
from emsaccess.pipeline import compute, run_pipeline
from emsaccess.population import (SQ_M_PER_SQ_MI, CensusTract, assign_population,
                                  effective_density, voronoi_partition)
from emsaccess.traveltime import (FacilitySet, baseline_times, edge_times, snap_facilities,
                                  travel_time_field)
from shapely.geometry import box

from oracles import arcs_of, bellman_ford, bellman_ford_np, brute_counts, mc_node_population

pytestmark = pytest.mark.filterwarnings("error::RuntimeWarning")


@pytest.fixture(scope="module")
def city_result():
    net, fac, tracts = synthetic_city()
    return compute(RunConfig(), [n for n in net.nodes], list(net.edges), fac, tracts)


# ---------------------------------------------------------------------------

@pytest.mark.acceptance(1, "borough effective densities within 0.5%")
def test_borough_densities(record_property):
    rows = {  # area mi^2, population millions, printed k persons / mi^2
        "Bronx": (42.2, 1.42, 33.65),
        "Brooklyn": (69.4, 2.57, 37.04),
        "Manhattan": (22.7, 1.63, 71.81),
        "Queens": (108.7, 2.27, 20.88),
        "Staten Island": (57.5, 0.47, 8.17),
        "Total": (300.5, 8.36, 27.82),
    }
    worst = 0.0
    for name, (mi2, pop_m, printed) in rows.items():
        tract = CensusTract(name, box(0, 0, 1, 1), pop_m * 1e6, area=mi2 * SQ_M_PER_SQ_MI)
        k_per_mi2 = effective_density(tract) * SQ_M_PER_SQ_MI / 1e3
        rel = abs(k_per_mi2 - printed) / printed
        worst = max(worst, rel)
        assert rel <= 0.005, (name, k_per_mi2, printed)
    record_property("detail", f"worst relative error {worst:.2e}")


@pytest.mark.acceptance(2, "calibration ratio table within +/-0.03")
def test_ratio_table(record_property):
    keys = [25.0, 50.0, 75.0, 97.5, 100.0, MEAN]
    actual = dict(zip(keys, [6.39, 7.62, 9.40, 12.34, 14.86, 7.96]))
    simulated = dict(zip(keys, [2.73, 3.86, 4.99, 7.28, 8.38, 4.41]))
    t = ratio_table(actual, simulated)
    # The published 50% ratio (1.92) disagrees with its own columns:
    # 7.62 / 3.86 = 1.974. The row is checked against the arithmetic.
    expected = dict(zip(keys, [2.34, 1.974, 1.88, 1.69, 1.77, 1.80]))
    for k in keys:
        assert abs(t.ratio(k) - expected[k]) <= 0.03, (k, t.ratio(k))
        assert abs(t.ratio(k) - actual[k] / simulated[k]) <= 1e-12
    assert abs(t.ratio(50.0) - 1.92) > 0.03
    record_property("detail", "50% row: 1.974 computed vs 1.92 printed (erratum)")


def _read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def _brute_city_coverage(paths, tau=240.0, alpha=15.0, radius=800.0, unit=1e4,
                         snap=500.0, n_samples=20_000, seed=7):
    """Coverage from the raw files, sharing no code with the library."""
    nodes = sorted(((int(r["node_id"]), float(r["x"]), float(r["y"]))
                    for r in _read_csv(paths["nodes"])))
    pos = {nid: k for k, (nid, _, _) in enumerate(nodes)}
    xy = np.array([(x, y) for _, x, y in nodes])
    edges = _read_csv(paths["edges"])
    a = np.array([pos[int(e["from"])] for e in edges])
    b = np.array([pos[int(e["to"])] for e in edges])
    length = np.array([float(e["length"]) if e["length"] else
                       math.dist(xy[i], xy[j]) for e, i, j in zip(edges, a, b)])
    speed = np.array([float(e["speed_mps"]) for e in edges])
    oneway = np.array([e["oneway"] == "true" for e in edges])

    # intersections: segment ends snapped to a 1 m grid, kept when shared
    ends = Counter()
    for i in np.concatenate([a, b]):
        ends[tuple(np.floor(xy[i] + 0.5))] += 1
    pts = np.array([p for p, c in ends.items() if c >= 2])
    d2 = ((xy[:, None, :] - pts[None, :, :]) ** 2).sum(-1)
    dens = (d2 <= radius * radius).sum(1) / (math.pi * radius * radius) * unit
    w = length / speed + alpha * (dens[a] + dens[b]) / 2

    fac = _read_csv(paths["facilities"])
    sources = set()
    for f in fac:
        dd = np.hypot(xy[:, 0] - float(f["x"]), xy[:, 1] - float(f["y"]))
        if dd.min() <= snap:
            sources.add(int(np.argmin(dd)))
    tails = np.concatenate([a, b[~oneway]])
    heads = np.concatenate([b, a[~oneway]])
    dist = bellman_ford_np(len(nodes), tails, heads, np.concatenate([w, w[~oneway]]),
                           sorted(sources))

    doc = json.loads(open(paths["tracts"]).read())
    tracts = [(f["geometry"]["coordinates"][0], f["geometry"]["coordinates"][1:],
               float(f["properties"]["population"])) for f in doc["features"]]
    pop = mc_node_population(xy, tracts, n_samples, seed)
    return pop[dist <= tau].sum() / pop.sum()


@pytest.mark.acceptance(3, "synthetic city coverage at 240 s vs brute force within 1%, <60 s")
def test_city_coverage_vs_brute_force(tmp_path, record_property):
    paths = fixture_paths("city")
    t0 = time.perf_counter()
    _, res = run_pipeline(RunConfig(), paths, tmp_path)
    ours = res.curve.at(240.0)
    brute = _brute_city_coverage(paths)
    elapsed = time.perf_counter() - t0
    record_property("detail", f"pipeline {ours:.4f} vs oracle {brute:.4f}, {elapsed:.1f} s")
    assert res.network.n_nodes >= 2000 and len(res.facilities.facilities) == 20
    assert len(codecs.read_tracts(paths["tracts"])) == 50
    assert abs(ours - brute) <= 0.01
    assert elapsed < 60


def _random_case(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 51))
    net = generate_random_planar(n, seed, (0, 0, 2000, 2000))
    edges = [replace(e, oneway=bool(rng.random() < 0.2),
                     road_class=str(rng.choice(["street", "highway", "other"],
                                               p=[0.7, 0.2, 0.1])),
                     speed_limit=float(rng.uniform(5, 30))) for e in net.edges]
    net = build_network(list(net.nodes), edges)
    k = int(rng.integers(1, 4))
    fac = snap_facilities(net, [(f"f{i}", "ems_station", *rng.uniform(0, 2000, 2))
                                for i in range(k)], max_snap=1e9)
    return net, fac


@pytest.mark.acceptance(4, "200 random networks: field == Bellman-Ford == min single-source")
def test_shortest_path_oracle(record_property):
    t0 = time.perf_counter()
    checked = 0
    for seed in range(200):
        net, fac = _random_case(seed)
        dens = density_field(net, derive_intersections(net), 800.0)
        for alpha in (0.0, 7.5, 15.0):
            times = edge_times(net, dens, alpha)
            fld = travel_time_field(net, times, fac)
            src = sorted({net.index_of(f.snapped_node) for f in fac.facilities})
            oracle = bellman_ford(net.n_nodes, arcs_of(net, times.adjusted), src)
            assert np.array_equal(fld.seconds, oracle), (seed, alpha)
            singles = [travel_time_field(net, times, FacilitySet((f,))).seconds
                       for f in fac.facilities]
            assert np.array_equal(fld.seconds, np.min(singles, axis=0)), (seed, alpha)
            checked += 1
    elapsed = time.perf_counter() - t0
    record_property("detail", f"{checked} fields, {elapsed:.1f} s")
    assert elapsed < 30


def _fixtures():
    g_net, g_fac, g_tr = grid5x5()
    c_net, c_fac, c_tr = synthetic_city()
    return {"grid5x5": (g_net, g_fac, g_tr), "city": (c_net, c_fac, c_tr)}


@pytest.mark.acceptance(5, "coverage monotone in tau and alpha; T' == T at alpha=0")
def test_monotonicity(record_property):
    t0 = time.perf_counter()
    for name, (net, facs, tracts) in _fixtures().items():
        dens = density_field(net, derive_intersections(net), 800.0)
        fac = snap_facilities(net, facs)
        weights = assign_population(voronoi_partition(net), tracts)
        zero = edge_times(net, dens, 0.0)
        assert np.array_equal(zero.adjusted, baseline_times(net)), name
        assert np.array_equal(zero.adjusted, zero.baseline), name
        prev = {}
        for alpha in (0.0, 5.0, 10.0, 15.0):
            for cat in ("ems_station", "hospital", "overall"):
                curve = coverage_curve(travel_time_field(net, edge_times(net, dens, alpha),
                                                         fac, cat), weights)
                fr = np.array(curve.fractions)
                assert np.all(np.diff(fr) >= 0), (name, alpha, cat)
                if cat in prev:
                    assert np.all(fr <= prev[cat]), (name, alpha, cat)
                prev[cat] = fr
    elapsed = time.perf_counter() - t0
    record_property("detail", f"{elapsed:.1f} s")
    assert elapsed < 30


@pytest.mark.acceptance(6, "population conserved within 0.1%; cell areas sum to boundary")
def test_population_conservation(record_property):
    t0 = time.perf_counter()
    worst_pop = worst_area = 0.0
    for name, (net, _, tracts) in _fixtures().items():
        part = voronoi_partition(net)
        assert all(part.boundary.covers(t.polygon) for t in tracts), name
        w = assign_population(part, tracts)
        total = math.fsum(t.population for t in tracts)
        worst_pop = max(worst_pop, abs(math.fsum(w.weights.tolist()) - total) / total)
        worst_area = max(worst_area, abs(math.fsum(part.areas().tolist()) - part.boundary.area)
                         / part.boundary.area)
    elapsed = time.perf_counter() - t0
    record_property("detail", f"population rel err {worst_pop:.1e}, "
                              f"area rel err {worst_area:.1e}")
    assert worst_pop <= 1e-3
    assert worst_area <= 1e-6
    assert elapsed < 30


@pytest.mark.acceptance(7, "radius counts == brute force; uniform-grid density within 10%")
def test_density_correctness(record_property):
    t0 = time.perf_counter()
    rng = np.random.default_rng(99)
    for trial in range(3):
        q = rng.uniform(0, 5000, (1000, 2))
        p = np.round(rng.uniform(0, 5000, (1000, 2)))
        r = float(rng.uniform(100, 800))
        ref = brute_counts(q, p, r)
        for backend in ("numba", "numpy"):
            assert np.array_equal(radius_counts(q, p, r, backend=backend), ref)
    spacing = 50.0
    net = generate_grid(41, 41, spacing, 10.0)
    inter = IntersectionSet(np.asarray(net.xy), 1.0)
    dens = density_field(net, inter, radius=5 * spacing, unit_scale=1.0)
    centre = net.index_of(20 * 41 + 20)
    ratio = dens.values[centre] / (1 / spacing ** 2)
    elapsed = time.perf_counter() - t0
    record_property("detail", f"interior density / (1/spacing^2) = {ratio:.4f}")
    assert abs(ratio - 1) <= 0.10
    assert elapsed < 10


@pytest.mark.acceptance(8, "alpha halving: after >= before everywhere, strictly better at 240 s")
def test_scenario(city_result, record_property):
    r = city_result
    s = scenario_alpha_scale(15.0, 0.5, r.network, r.density, r.facilities, r.weights)
    before, after = np.array(s.before.fractions), np.array(s.after.fractions)
    assert np.all(after >= before)
    k = s.before.taus.index(240.0)
    record_property("detail", f"coverage at 240 s: {before[k]:.4f} -> {after[k]:.4f}")
    assert after[k] > before[k]


@pytest.mark.acceptance(9, "byte-identical artifacts across runs")
def test_determinism(tmp_path, record_property):
    paths = fixture_paths("city")
    cfg = RunConfig(scenario=True)
    run_pipeline(cfg, paths, tmp_path / "a")
    run_pipeline(cfg, paths, tmp_path / "b")
    names = sorted(p.name for p in (tmp_path / "a").iterdir())
    assert names == sorted(p.name for p in (tmp_path / "b").iterdir())
    for n in names:
        a, b = (tmp_path / "a" / n).read_bytes(), (tmp_path / "b" / n).read_bytes()
        if n == "manifest.json":
            a, b = json.loads(a), json.loads(b)
            a.pop("created"), b.pop("created")
        assert a == b, n
    record_property("detail", f"{len(names)} artifacts compared")
