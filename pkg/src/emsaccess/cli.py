"""``emsaccess`` command line.

Exit codes: 0 ok, 2 bad arguments/config, 3 missing input file, 4 malformed
input record, 5 invalid network, 6 invalid geometry, 7 analysis error
(e.g. empty facility category), 8 could not write output.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__, codecs
from .accessibility import coverage_curve, scenario_alpha_scale, vulnerability_report
from .calibration import DEFAULT_PERCENTILES, percentile_summary, ratio_table, trip_durations
from .config import ConfigError, RunConfig
from .density import density_field, derive_intersections
from .network import MPH_TO_MPS, NetworkError, build_network, generate_grid
from .pipeline import run_pipeline
from .population import GeometryError, assign_population, voronoi_partition
from .traveltime import edge_times, snap_facilities, travel_time_field

log = logging.getLogger("emsaccess")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_MISSING = 3
EXIT_PARSE = 4
EXIT_NETWORK = 5
EXIT_GEOMETRY = 6
EXIT_ANALYSIS = 7
EXIT_WRITE = 8


class MissingInput(Exception):
    pass


def _need(*paths):
    for p in paths:
        if p is not None and not Path(p).is_file():
            raise MissingInput(f"input file not found: {p}")


def _config(args) -> RunConfig:
    over = dict(
        alpha=getattr(args, "alpha", None),
        radius=getattr(args, "radius", None),
        unit_scale=getattr(args, "unit_scale", None),
        tau=None if getattr(args, "tau", None) is None else args.tau * 60.0,
        category=getattr(args, "category", None),
        rounding_grid=getattr(args, "rounding_grid", None),
        max_snap=getattr(args, "max_snap", None),
        min_cluster_population=getattr(args, "min_population", None),
        alpha_scale=getattr(args, "scale", None),
        seed=getattr(args, "seed", None),
        curve_max=None if getattr(args, "curve_max", None) is None else args.curve_max * 60.0,
        curve_step=getattr(args, "curve_step", None),
        threads=getattr(args, "threads", None),
        crs=getattr(args, "crs", None),
    )
    for flag in ("reverse", "ignore_oneway", "scenario"):
        if getattr(args, flag, False):
            over[flag] = True
    if getattr(args, "classes", None):
        over["intersection_classes"] = tuple(args.classes.split(","))
    if getattr(args, "config", None):
        _need(args.config)
        return RunConfig.from_file(args.config, **over)
    return RunConfig().with_(**over)


def _network(args):
    _need(args.nodes, args.edges)
    nodes = codecs.read_nodes(args.nodes)
    edges = codecs.read_edges(args.edges, [n.node_id for n in nodes])
    return build_network(nodes, edges)


def _density(args, cfg, net):
    if getattr(args, "density", None):
        _need(args.density)
        return codecs.read_density(args.density, net, cfg.radius, cfg.unit_scale)
    inter = derive_intersections(net, cfg.intersection_classes, cfg.rounding_grid)
    return density_field(net, inter, cfg.radius, cfg.unit_scale)


def _weights(args, net):
    if getattr(args, "weights", None):
        _need(args.weights)
        return codecs.read_weights(args.weights), []
    if not getattr(args, "tracts", None):
        raise ConfigError("need --tracts or --weights")
    _need(args.tracts, args.boundary)
    tracts = codecs.read_tracts(args.tracts)
    boundary = codecs.read_boundary(args.boundary) if args.boundary else None
    w = assign_population(voronoi_partition(net, boundary), tracts)
    return w, list(w.warnings)


def _out(path) -> Path:
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    return p


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_grid(args):
    speed = args.speed if args.speed is not None else args.speed_mph * MPH_TO_MPS
    net = generate_grid(args.rows, args.cols, args.spacing, speed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    codecs.write_nodes(out / "nodes.csv", net)
    codecs.write_edges(out / "edges.csv", net)
    print(f"wrote {net.n_nodes} nodes, {net.n_edges} edges to {out}")


def cmd_density(args):
    cfg = _config(args)
    net = _network(args)
    inter = derive_intersections(net, cfg.intersection_classes, cfg.rounding_grid)
    dens = density_field(net, inter, cfg.radius, cfg.unit_scale)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    codecs.write_intersections(out / "intersections.geojson", inter, cfg.crs)
    codecs.write_density(out / "density.csv", net, dens)
    print(f"{len(inter)} intersections; density written to {out / 'density.csv'}")


def cmd_travel_time(args):
    cfg = _config(args)
    net = _network(args)
    _need(args.facilities)
    dens = _density(args, cfg, net)
    fac = snap_facilities(net, codecs.read_facilities(args.facilities), cfg.max_snap)
    for w in fac.warnings:
        print(f"warning: {w}", file=sys.stderr)
    fld = travel_time_field(net, edge_times(net, dens, cfg.alpha), fac, cfg.category,
                            reverse=cfg.reverse, ignore_oneway=cfg.ignore_oneway)
    codecs.write_field(_out(args.out), net, fld)
    print(f"field ({cfg.category}, alpha={cfg.alpha:g}) written to {args.out}")


def cmd_population(args):
    net = _network(args)
    w, warns = _weights(args, net)
    for m in warns:
        print(f"warning: {m}", file=sys.stderr)
    codecs.write_weights(_out(args.out), w)
    print(f"assigned {w.total_assigned:.1f} persons to {len(w.node_ids)} nodes")


def cmd_coverage(args):
    cfg = _config(args)
    _need(args.field, args.weights)
    fld = codecs.read_field(args.field, cfg.category)
    w = codecs.read_weights(args.weights)
    curve = coverage_curve(fld, w, cfg.taus)
    codecs.write_curve(_out(args.out), curve)
    if not args.quiet:
        _print_curve(curve, cfg.tau)


def cmd_vulnerable(args):
    cfg = _config(args)
    net = _network(args)
    _need(args.field, args.weights)
    fld = codecs.read_field(args.field, cfg.category)
    w = codecs.read_weights(args.weights)
    rep = vulnerability_report(net, fld, w, cfg.tau, cfg.min_cluster_population)
    codecs.write_vulnerability(_out(args.out), net, rep, cfg.crs)
    print(f"{len(rep.clusters)} vulnerable clusters, "
          f"{rep.total_underserved:.1f} persons underserved at tau={cfg.tau:g} s")


def cmd_calibrate(args):
    _need(args.trips, args.simulated)
    warns = []
    durations = trip_durations(codecs.read_trips(args.trips, warns))
    for m in warns:
        print(f"warning: {m}", file=sys.stderr)
    actual = percentile_summary(durations, DEFAULT_PERCENTILES)
    out = _out(args.out)
    if not args.simulated:
        codecs.write_summary_csv(out, actual)
        for k, v in actual.items():
            print(f"{str(k):>8} {v:10.2f}")
        return
    sim = codecs.read_summary_csv(args.simulated)
    if args.simulated_minutes:
        sim = {k: v * 60.0 for k, v in sim.items()}
    table = ratio_table(actual, sim)
    codecs.write_ratio_table(out, table)
    codecs.write_json(out.with_suffix(".json"), codecs.ratio_table_json(table))
    print(f"{'pct':>8} {'actual_s':>10} {'sim_s':>10} {'ratio':>7}")
    for r in table.rows:
        print(f"{str(r.percentile):>8} {r.actual:10.2f} {r.simulated:10.2f} {r.ratio:7.3f}")


def cmd_scenario(args):
    cfg = _config(args)
    net = _network(args)
    _need(args.facilities)
    dens = _density(args, cfg, net)
    fac = snap_facilities(net, codecs.read_facilities(args.facilities), cfg.max_snap)
    w, _ = _weights(args, net)
    res = scenario_alpha_scale(cfg.alpha, cfg.alpha_scale, net, dens, fac, w, cfg.category,
                               cfg.taus, reverse=cfg.reverse,
                               ignore_oneway=cfg.ignore_oneway, threads=cfg.threads)
    codecs.write_scenario(_out(args.out), res)
    k = res.before.taus.index(cfg.tau) if cfg.tau in res.before.taus else None
    if k is not None:
        print(f"coverage at tau={cfg.tau:g} s: alpha={res.base_alpha:g} -> "
              f"{res.before.fractions[k]:.4f}; alpha={res.base_alpha * res.scale:g} -> "
              f"{res.after.fractions[k]:.4f}")


def cmd_pipeline(args):
    cfg = _config(args)
    paths = {"nodes": args.nodes, "edges": args.edges, "facilities": args.facilities,
             "tracts": args.tracts}
    _need(*paths.values(), args.boundary)
    manifest, res = run_pipeline(cfg, paths, args.out, boundary_path=args.boundary)
    for m in manifest["warnings"]:
        print(f"warning: {m}", file=sys.stderr)
    if not args.quiet:
        s = manifest["summary"]
        print(f"nodes={s['nodes']} edges={s['edges']} intersections={s['intersections']} "
              f"population={s['total_population']:.1f}")
        _print_curve(res.curve, cfg.tau)
        print(f"vulnerable clusters: {s['vulnerable_clusters']} "
              f"({s['underserved_population']:.1f} persons)")
    print(f"{len(manifest['artifacts'])} artifacts written to {args.out}")


def _print_curve(curve, tau):
    print(f"{'tau_min':>8} {'covered':>8}")
    for t, f in curve.samples:
        if t % 60 == 0 or t == tau:
            print(f"{t / 60:8.2f} {f:8.3f}")


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def _add_net(p):
    p.add_argument("--nodes", required=True, help="nodes .csv or .geojson")
    p.add_argument("--edges", required=True, help="edges .csv or .geojson")


def _add_model(p):
    p.add_argument("--config", help="JSON run configuration (flags override)")
    p.add_argument("--alpha", type=float, help="delay factor, s x unit-scale m^2 (default 15)")
    p.add_argument("--radius", type=float, help="density radius in m (default 800)")
    p.add_argument("--unit-scale", type=float, help="density area unit in m^2 (default 1e4)")
    p.add_argument("--rounding-grid", type=float, help="intersection snap grid in m")
    p.add_argument("--classes", help="road classes forming intersections (street,highway)")
    p.add_argument("--max-snap", type=float, help="max facility snap distance in m")
    p.add_argument("--category", choices=["ems_station", "hospital", "overall"])
    p.add_argument("--reverse", action="store_true", help="node->facility direction")
    p.add_argument("--ignore-oneway", action="store_true", help="allow contraflow travel")
    p.add_argument("--crs", help="projection label recorded in outputs")


def _add_tau(p):
    p.add_argument("--tau", type=float, help="benchmark time in minutes (default 4)")
    p.add_argument("--curve-max", type=float, help="largest curve tau in minutes (default 15)")
    p.add_argument("--curve-step", type=float, help="curve tau step in seconds (default 15)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="emsaccess", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("grid", help="write a lattice network")
    p.add_argument("--rows", type=int, default=5)
    p.add_argument("--cols", type=int, default=5)
    p.add_argument("--spacing", type=float, default=200.0)
    g = p.add_mutually_exclusive_group()
    g.add_argument("--speed", type=float, help="m/s")
    g.add_argument("--speed-mph", type=float, default=25.0)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_grid)

    p = sub.add_parser("density", help="derive intersections and node density")
    _add_net(p)
    _add_model(p)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_density)

    p = sub.add_parser("travel-time", help="nearest-facility travel-time field")
    _add_net(p)
    _add_model(p)
    p.add_argument("--facilities", required=True)
    p.add_argument("--density", help="precomputed density.csv")
    p.add_argument("--out", required=True, help="field .csv")
    p.set_defaults(func=cmd_travel_time)

    p = sub.add_parser("population", help="Voronoi x tract population weights")
    _add_net(p)
    p.add_argument("--tracts", required=True)
    p.add_argument("--boundary", help="study-area polygon GeoJSON")
    p.add_argument("--out", required=True, help="weights .csv")
    p.set_defaults(func=cmd_population)

    p = sub.add_parser("coverage", help="population coverage curve")
    p.add_argument("--config")
    p.add_argument("--field", required=True)
    p.add_argument("--weights", required=True)
    p.add_argument("--category", choices=["ems_station", "hospital", "overall"])
    _add_tau(p)
    p.add_argument("--quiet", action="store_true")
    p.add_argument("--out", required=True, help="curve .csv")
    p.set_defaults(func=cmd_coverage)

    p = sub.add_parser("vulnerable", help="clusters of inaccessible nodes")
    _add_net(p)
    p.add_argument("--config")
    p.add_argument("--field", required=True)
    p.add_argument("--weights", required=True)
    p.add_argument("--tau", type=float, help="benchmark time in minutes (default 4)")
    p.add_argument("--min-population", type=float)
    p.add_argument("--crs")
    p.add_argument("--out", required=True, help="clusters .geojson")
    p.set_defaults(func=cmd_vulnerable)

    p = sub.add_parser("calibrate", help="trip-duration percentiles and ratio table")
    p.add_argument("--trips", required=True, help="CSV with dispatch_ts,arrival_ts")
    p.add_argument("--simulated", help="CSV percentile,seconds of simulated times")
    p.add_argument("--simulated-minutes", action="store_true",
                   help="simulated summary is in minutes")
    p.add_argument("--out", required=True,
                   help="ratio table .csv (+ .json); summary .csv without --simulated")
    p.set_defaults(func=cmd_calibrate)

    for name, fn, helptext in (("scenario", cmd_scenario, "alpha-scaling what-if"),
                               ("pipeline", cmd_pipeline, "run every stage")):
        p = sub.add_parser(name, help=helptext)
        _add_net(p)
        _add_model(p)
        _add_tau(p)
        p.add_argument("--facilities", required=True)
        p.add_argument("--tracts", required=name == "pipeline")
        p.add_argument("--boundary", help="study-area polygon GeoJSON")
        p.add_argument("--scale", type=float, help="alpha multiplier (default 0.5)")
        p.add_argument("--min-population", type=float)
        p.add_argument("--threads", type=int)
        p.add_argument("--seed", type=int)
        p.add_argument("--quiet", action="store_true")
        p.add_argument("--out", required=True,
                       help="output directory" if name == "pipeline" else "scenario .csv")
        if name == "pipeline":
            p.add_argument("--scenario", action="store_true",
                           help="also write scenario.csv")
        else:
            p.add_argument("--density", help="precomputed density.csv")
            p.add_argument("--weights", help="precomputed weights.csv")
        p.set_defaults(func=fn)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (MissingInput, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MISSING
    except (codecs.CodecError, json.JSONDecodeError) as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except NetworkError as exc:
        print(f"network error: {exc}", file=sys.stderr)
        return EXIT_NETWORK
    except GeometryError as exc:
        print(f"geometry error: {exc}", file=sys.stderr)
        return EXIT_GEOMETRY
    except OSError as exc:
        print(f"write error: {exc}", file=sys.stderr)
        return EXIT_WRITE
    except ValueError as exc:
        print(f"analysis error: {exc}", file=sys.stderr)
        return EXIT_ANALYSIS
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
