"""End-to-end run: network -> density -> times -> field -> weights -> reports."""
from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from . import __version__, codecs
from ._kernels import numba_enabled
from .accessibility import (ScenarioResult, coverage_curve, scenario_alpha_scale,
                            vulnerability_report)
from .config import RunConfig
from .density import density_field, derive_intersections
from .network import build_network
from .population import assign_population, voronoi_partition
from .traveltime import edge_times, snap_facilities, travel_time_field

log = logging.getLogger(__name__)

MANIFEST = "manifest.json"


def sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


@dataclass
class PipelineResult:
    network: object
    intersections: object
    density: object
    times: object
    facilities: object
    field: object
    partition: object
    weights: object
    curve: object
    report: object
    scenario: ScenarioResult = None
    warnings: list = field(default_factory=list)


def _unique(items):
    seen = set()
    out = []
    for w in items:
        if w not in seen:
            seen.add(w)
            out.append(w)
    return out


def compute(config: RunConfig, nodes, edges, facilities, tracts, boundary=None,
            backend=None) -> PipelineResult:
    """Run every stage in memory."""
    warnings = []
    net = build_network(nodes, edges)
    inter = derive_intersections(net, config.intersection_classes, config.rounding_grid)
    dens = density_field(net, inter, config.radius, config.unit_scale, backend=backend)
    times = edge_times(net, dens, config.alpha)
    fac = snap_facilities(net, facilities, config.max_snap)
    warnings.extend(fac.warnings)
    fld = travel_time_field(net, times, fac, config.category, reverse=config.reverse,
                            ignore_oneway=config.ignore_oneway, backend=backend)
    part = voronoi_partition(net, boundary)
    weights = assign_population(part, tracts)
    warnings.extend(weights.warnings)
    curve = coverage_curve(fld, weights, config.taus)
    report = vulnerability_report(net, fld, weights, config.tau,
                                  config.min_cluster_population)
    scen = None
    if config.scenario:
        scen = scenario_alpha_scale(config.alpha, config.alpha_scale, net, dens, fac, weights,
                                    config.category, config.taus, reverse=config.reverse,
                                    ignore_oneway=config.ignore_oneway,
                                    threads=config.threads, backend=backend)
    return PipelineResult(net, inter, dens, times, fac, fld, part, weights, curve, report,
                          scen, warnings)


def run_pipeline(config: RunConfig, paths: dict, outdir, *, boundary_path=None,
                 extra_warnings=()):
    """Read inputs, compute, write artifacts and the run manifest.

    ``paths`` needs keys ``nodes``, ``edges``, ``facilities``, ``tracts``.
    Returns ``(manifest, result)``.
    """
    outdir = Path(outdir)
    nodes = codecs.read_nodes(paths["nodes"])
    edges = codecs.read_edges(paths["edges"], [n.node_id for n in nodes])
    facilities = codecs.read_facilities(paths["facilities"])
    tracts = codecs.read_tracts(paths["tracts"])
    boundary = codecs.read_boundary(boundary_path) if boundary_path else None

    res = compute(config, nodes, edges, facilities, tracts, boundary)
    crs = config.crs or codecs.declared_crs(paths["tracts"]) or ""

    outdir.mkdir(parents=True, exist_ok=True)
    cat = config.category
    artifacts = {
        "intersections": "intersections.geojson",
        "density": "density.csv",
        "field": f"field_{cat}.csv",
        "weights": "weights.csv",
        "coverage": f"coverage_{cat}.csv",
        "vulnerable": f"vulnerable_{cat}.geojson",
    }
    codecs.write_intersections(outdir / artifacts["intersections"], res.intersections, crs)
    codecs.write_density(outdir / artifacts["density"], res.network, res.density)
    codecs.write_field(outdir / artifacts["field"], res.network, res.field)
    codecs.write_weights(outdir / artifacts["weights"], res.weights)
    codecs.write_curve(outdir / artifacts["coverage"], res.curve)
    codecs.write_vulnerability(outdir / artifacts["vulnerable"], res.network, res.report, crs)
    if res.scenario is not None:
        artifacts["scenario"] = "scenario.csv"
        codecs.write_scenario(outdir / artifacts["scenario"], res.scenario)

    inputs = {k: {"path": str(paths[k]), "sha256": sha256(paths[k])}
              for k in ("nodes", "edges", "facilities", "tracts")}
    if boundary_path:
        inputs["boundary"] = {"path": str(boundary_path), "sha256": sha256(boundary_path)}
    summary = {
        "nodes": res.network.n_nodes,
        "edges": res.network.n_edges,
        "intersections": len(res.intersections),
        "facilities_used": len(res.facilities.facilities),
        "facilities_excluded": [f.facility_id for f in res.facilities.excluded],
        "total_population": res.weights.total_assigned,
        "unassigned_population": res.weights.unassigned,
        "coverage_at_tau": res.curve.fractions[res.curve.taus.index(config.tau)]
        if config.tau in res.curve.taus else None,
        "accessible_population_at_tau": res.report.accessible_population,
        "underserved_population": res.report.total_underserved,
        "vulnerable_clusters": len(res.report.clusters),
    }
    if res.scenario is not None:
        summary["scenario_alpha_after"] = res.scenario.base_alpha * res.scenario.scale
    manifest = {
        "tool": "emsaccess",
        "version": __version__,
        "created": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "config": config.to_dict(),
        "backend": "numba" if numba_enabled() else "numpy",
        "declared_crs": crs,
        "boundary": str(boundary_path) if boundary_path else
        "default: convex hull of nodes buffered 100 m",
        "inputs": inputs,
        "artifacts": sorted(artifacts.values()) + [MANIFEST],
        "warnings": _unique(list(extra_warnings) + res.warnings),
        "summary": summary,
    }
    codecs.write_json(outdir / MANIFEST, manifest)
    return manifest, res
