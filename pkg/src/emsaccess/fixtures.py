"""Seeded synthetic inputs: the 5x5 grid demo and a ~2,000-node test city."""
from __future__ import annotations

from pathlib import Path

import numpy as np
from shapely.geometry import box

from .network import MPH_TO_MPS, EdgeRecord, NodeRecord, build_network, generate_grid
from .population import CensusTract
from .traveltime import Facility

DATA_DIR = Path(__file__).with_name("data")
CITY_SEED = 2024
CITY_SIDE = 45
CITY_EXTENT = 4400.0


def grid5x5():
    """5x5 lattice (200 m, 25 mph), one station, one hospital, four tracts."""
    net = generate_grid(5, 5, 200.0, 25 * MPH_TO_MPS)
    facilities = [Facility("ems-1", "ems_station", 0.0, 0.0),
                  Facility("hosp-1", "hospital", 800.0, 800.0)]
    tracts = [CensusTract(f"t{i}{j}", box(400.0 * i, 400.0 * j, 400.0 * (i + 1),
                                          400.0 * (j + 1)), pop)
              for (i, j), pop in zip([(0, 0), (1, 0), (0, 1), (1, 1)],
                                     [1200.0, 800.0, 2500.0, 1500.0])]
    return net, facilities, tracts


def _warp(u, a=0.5):
    # dense centre, sparse rim: d/du = 1 + a*cos(2*pi*u)
    return u + a * np.sin(2 * np.pi * u) / (2 * np.pi)


def synthetic_city(seed: int = CITY_SEED, side: int = CITY_SIDE, extent: float = CITY_EXTENT,
                   n_ems: int = 14, n_hospital: int = 6, tract_grid=(10, 5)):
    """Jittered, centre-dense lattice city.

    Streets are 25 mph; every 11th row and column is a 55 mph highway. Rows
    with ``r % 4 == 1`` are oneway eastbound, ``r % 4 == 3`` westbound.
    Tracts tile ``[0, extent]^2`` with lognormal populations.
    """
    rng = np.random.default_rng(seed)
    u = np.linspace(0.0, 1.0, side)
    coords = _warp(u) * extent
    nodes = []
    for r in range(side):
        for c in range(side):
            jx, jy = rng.uniform(-12.0, 12.0, 2)
            x = float(np.clip(coords[c] + jx, 0.0, extent))
            y = float(np.clip(coords[r] + jy, 0.0, extent))
            nodes.append(NodeRecord(r * side + c, x, y))
    street = 25 * MPH_TO_MPS
    highway = 55 * MPH_TO_MPS
    edges = []
    for r in range(side):
        for c in range(side):
            u_ = r * side + c
            if c + 1 < side:
                hw = r % 11 == 5
                oneway = not hw and r % 2 == 1
                a, b = (u_, u_ + 1) if (r % 4 == 1 or not oneway) else (u_ + 1, u_)
                edges.append(EdgeRecord(f"h{r}_{c}", a, b, None, highway if hw else street,
                                        "highway" if hw else "street", oneway))
            if r + 1 < side:
                hw = c % 11 == 5
                edges.append(EdgeRecord(f"v{r}_{c}", u_, u_ + side, None,
                                        highway if hw else street,
                                        "highway" if hw else "street", False))
    net = build_network(nodes, edges)

    kinds = ["ems_station"] * n_ems + ["hospital"] * n_hospital
    pts = rng.uniform(0.0, extent, (len(kinds), 2))
    facilities = [Facility(f"{'ems' if k == 'ems_station' else 'hosp'}-{i:02d}", k,
                           float(p[0]), float(p[1]))
                  for i, (k, p) in enumerate(zip(kinds, pts))]

    nx_, ny_ = tract_grid
    w, h = extent / nx_, extent / ny_
    pops = np.round(rng.lognormal(np.log(2500.0), 0.6, nx_ * ny_))
    tracts = []
    k = 0
    for j in range(ny_):
        for i in range(nx_):
            tracts.append(CensusTract(f"T{k:03d}", box(i * w, j * h, (i + 1) * w, (j + 1) * h),
                                      float(pops[k])))
            k += 1
    return net, facilities, tracts


def write_fixture(dirpath, net, facilities, tracts, crs="LOCAL:meters"):
    """Write nodes.csv, edges.csv, facilities.csv and tracts.geojson."""
    from . import codecs

    d = Path(dirpath)
    d.mkdir(parents=True, exist_ok=True)
    codecs.write_nodes(d / "nodes.csv", net)
    codecs.write_edges(d / "edges.csv", net)
    codecs.write_facilities(d / "facilities.csv", facilities)
    codecs.write_tracts(d / "tracts.geojson", tracts, crs=crs)
    return d


def fixture_paths(name: str) -> dict:
    """Paths of a bundled fixture (``"grid5x5"`` or ``"city"``)."""
    d = DATA_DIR / name
    return {k: d / f for k, f in (("nodes", "nodes.csv"), ("edges", "edges.csv"),
                                  ("facilities", "facilities.csv"),
                                  ("tracts", "tracts.geojson"))}
