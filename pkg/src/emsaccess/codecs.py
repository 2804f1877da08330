"""Readers and writers for the tabular (CSV) and feature-collection (GeoJSON)
files the CLI consumes and produces.

Floats are written with ``repr`` so every value re-parses to the same double.
Unreachable travel times are written as the literal ``unreachable``.
"""
from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path

import numpy as np
import shapely
from shapely.geometry import mapping, shape
from shapely.ops import unary_union

from .accessibility import CoverageCurve
from .calibration import MEAN, RatioTable, TripParseError, TripRecord, parse_timestamp
from .network import MPH_TO_MPS, EdgeRecord, NodeRecord, RoadNetwork
from .density import DensityField, IntersectionSet
from .population import CensusTract, GeometryError, PopulationWeights, normalize_polygon
from .traveltime import UNREACHABLE, Facility, TravelTimeField

UNREACHABLE_TOKEN = "unreachable"


class CodecError(ValueError):
    """Malformed input record; message carries the file and row/feature index."""

    def __init__(self, path, where, msg):
        self.path = str(path)
        self.where = where
        super().__init__(f"{path}: {where}: {msg}")


def fmt(v) -> str:
    if v is UNREACHABLE:
        return UNREACHABLE_TOKEN
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        if not math.isfinite(v):
            return UNREACHABLE_TOKEN if v == math.inf else repr(v)
        return repr(v)
    return str(v)


def _json_num(v):
    if v is UNREACHABLE or (isinstance(v, float) and not math.isfinite(v)):
        return UNREACHABLE_TOKEN
    return v


def infer_ids(raw):
    """All-integer id columns become ints; anything else stays str."""
    try:
        out = [int(r) for r in raw]
    except ValueError:
        return list(raw)
    if all(str(i) == r.strip() for i, r in zip(out, raw)):
        return out
    return list(raw)


def _parse_bool(text, path, where):
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "y", "t"):
        return True
    if t in ("", "0", "false", "no", "n", "f"):
        return False
    raise CodecError(path, where, f"bad boolean {text!r}")


def _float(text, path, where, name):
    try:
        v = float(text)
    except (TypeError, ValueError):
        raise CodecError(path, where, f"{name} is not a number: {text!r}") from None
    if not math.isfinite(v):
        raise CodecError(path, where, f"{name} is not finite: {text!r}")
    return v


def _is_geojson(path) -> bool:
    return Path(path).suffix.lower() in (".geojson", ".json")


def _read_rows(path, required):
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in required if c not in header]
        if missing:
            raise CodecError(path, "header", f"missing column(s) {missing}")
        # line numbers are 1-based, header is line 1
        return header, [(i + 2, row) for i, row in enumerate(reader)]


def _read_features(path):
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise CodecError(path, f"line {exc.lineno}", f"invalid JSON: {exc.msg}") from None
    if doc.get("type") != "FeatureCollection":
        raise CodecError(path, "root", "expected a FeatureCollection")
    return doc, doc.get("features", [])


def declared_crs(path):
    """The ``crs`` name carried by a GeoJSON file, if any (recorded, never applied)."""
    if not _is_geojson(path):
        return None
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    crs = doc.get("crs")
    if isinstance(crs, dict):
        return (crs.get("properties") or {}).get("name")
    return crs


def _write_csv(path, header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([fmt(v) for v in r])
    Path(path).write_text(buf.getvalue(), encoding="utf-8")


def _write_json(path, obj):
    Path(path).write_text(json.dumps(obj, indent=2) + "\n", encoding="utf-8")


def _collection(features, crs=None):
    doc = {"type": "FeatureCollection"}
    if crs:
        doc["crs"] = {"type": "name", "properties": {"name": crs}}
    doc["features"] = features
    return doc


# ---------------------------------------------------------------------------
# nodes / edges
# ---------------------------------------------------------------------------

def read_nodes(path) -> list:
    if _is_geojson(path):
        _, feats = _read_features(path)
        raw = []
        for k, f in enumerate(feats):
            where = f"feature {k}"
            g = f.get("geometry") or {}
            props = f.get("properties") or {}
            if g.get("type") != "Point":
                raise CodecError(path, where, "node geometry must be a Point")
            if "node_id" not in props:
                raise CodecError(path, where, "missing node_id property")
            x, y = g["coordinates"][:2]
            raw.append((str(props["node_id"]), _float(x, path, where, "x"),
                        _float(y, path, where, "y")))
    else:
        _, rows = _read_rows(path, ("node_id", "x", "y"))
        raw = []
        for line, row in rows:
            where = f"line {line}"
            raw.append((row["node_id"].strip(), _float(row["x"], path, where, "x"),
                        _float(row["y"], path, where, "y")))
    ids = infer_ids([r[0] for r in raw])
    return [NodeRecord(i, x, y) for i, (_, x, y) in zip(ids, raw)]


def _edge_from_props(props, path, where):
    for col in ("edge_id", "from", "to"):
        if col not in props or props[col] in (None, ""):
            raise CodecError(path, where, f"missing {col}")
    if props.get("speed_mps") not in (None, ""):
        speed = _float(props["speed_mps"], path, where, "speed_mps")
    elif props.get("speed_mph") not in (None, ""):
        speed = _float(props["speed_mph"], path, where, "speed_mph") * MPH_TO_MPS
    else:
        raise CodecError(path, where, "needs speed_mps or speed_mph")
    length = props.get("length")
    length = None if length in (None, "") else _float(length, path, where, "length")
    return [str(props["edge_id"]).strip(), str(props["from"]).strip(),
            str(props["to"]).strip(), length, speed,
            (props.get("road_class") or "street").strip(),
            _parse_bool(props.get("oneway", ""), path, where)]


def read_edges(path, node_ids=None) -> list:
    """Edge records; speeds given in ``speed_mph`` are converted to m/s.

    ``node_ids`` (from :func:`read_nodes`) lets endpoint ids take the node
    id type.
    """
    raw = []
    if _is_geojson(path):
        _, feats = _read_features(path)
        for k, f in enumerate(feats):
            raw.append(_edge_from_props(f.get("properties") or {}, path, f"feature {k}"))
    else:
        _, rows = _read_rows(path, ("edge_id", "from", "to"))
        for line, row in rows:
            raw.append(_edge_from_props(row, path, f"line {line}"))
    eids = infer_ids([r[0] for r in raw])
    lookup = {str(n): n for n in node_ids} if node_ids is not None else None
    ends = infer_ids([r[1] for r in raw] + [r[2] for r in raw]) if lookup is None else None
    out = []
    for k, r in enumerate(raw):
        if lookup is not None:
            a, b = lookup.get(r[1], r[1]), lookup.get(r[2], r[2])
        else:
            a, b = ends[k], ends[len(raw) + k]
        out.append(EdgeRecord(eids[k], a, b, r[3], r[4], r[5], r[6]))
    return out


def write_nodes(path, network: RoadNetwork):
    _write_csv(path, ["node_id", "x", "y"], [(n.node_id, n.x, n.y) for n in network.nodes])


def write_edges(path, network: RoadNetwork):
    _write_csv(path, ["edge_id", "from", "to", "length", "speed_mps", "road_class", "oneway"],
               [(e.edge_id, e.source, e.target, e.length, e.speed_limit, e.road_class,
                 e.oneway) for e in network.edges])


# ---------------------------------------------------------------------------
# facilities / tracts / trips
# ---------------------------------------------------------------------------

def read_facilities(path) -> list:
    out = []
    if _is_geojson(path):
        _, feats = _read_features(path)
        for k, f in enumerate(feats):
            where = f"feature {k}"
            g = f.get("geometry") or {}
            p = f.get("properties") or {}
            if g.get("type") != "Point":
                raise CodecError(path, where, "facility geometry must be a Point")
            if "facility_id" not in p or "kind" not in p:
                raise CodecError(path, where, "needs facility_id and kind properties")
            x, y = g["coordinates"][:2]
            out.append(Facility(str(p["facility_id"]), str(p["kind"]),
                                _float(x, path, where, "x"), _float(y, path, where, "y")))
    else:
        _, rows = _read_rows(path, ("facility_id", "kind", "x", "y"))
        for line, row in rows:
            where = f"line {line}"
            out.append(Facility(row["facility_id"].strip(), row["kind"].strip(),
                                _float(row["x"], path, where, "x"),
                                _float(row["y"], path, where, "y")))
    for k, f in enumerate(out):
        if f.kind not in ("ems_station", "hospital"):
            raise CodecError(path, f"record {k}", f"unknown facility kind {f.kind!r}")
    return out


def write_facilities(path, facilities):
    _write_csv(path, ["facility_id", "kind", "x", "y"],
               [(f.facility_id, f.kind, f.x, f.y) for f in facilities])


def read_tracts(path) -> list:
    """Census tracts from polygon features with ``population`` and optional
    ``area_sq_m``. Ring orientation is normalized (CCW shell, CW holes)."""
    _, feats = _read_features(path)
    out = []
    for k, f in enumerate(feats):
        where = f"feature {k}"
        p = f.get("properties") or {}
        if p.get("population") in (None, ""):
            raise CodecError(path, where, "missing population")
        tid = p.get("tract_id", k)
        try:
            geom = normalize_polygon(shape(f["geometry"]))
        except (GeometryError, KeyError, ValueError, AttributeError, TypeError) as exc:
            raise CodecError(path, where, f"tract {tid!r}: bad geometry ({exc})") from None
        if not geom.is_valid:
            raise CodecError(path, where,
                             f"tract {tid!r}: {shapely.is_valid_reason(geom)}")
        area = p.get("area_sq_m")
        area = None if area in (None, "") else _float(area, path, where, "area_sq_m")
        try:
            out.append(CensusTract(tid, geom, _float(p["population"], path, where,
                                                     "population"), area))
        except GeometryError as exc:
            raise CodecError(path, where, str(exc)) from None
    return out


def read_boundary(path):
    """Study-area polygon: union of the polygon features in ``path``."""
    _, feats = _read_features(path)
    try:
        geom = unary_union([shape(f["geometry"]) for f in feats])
        return normalize_polygon(geom)
    except (GeometryError, KeyError, ValueError, AttributeError, TypeError) as exc:
        raise CodecError(path, "features", f"bad boundary geometry ({exc})") from None


def write_tracts(path, tracts, crs=None):
    feats = []
    for t in tracts:
        props = {"tract_id": t.tract_id, "population": t.population}
        if t.area is not None:
            props["area_sq_m"] = t.area
        feats.append({"type": "Feature", "properties": props,
                      "geometry": mapping(t.polygon)})
    _write_json(path, _collection(feats, crs))


def read_trips(path, warnings: list = None) -> list:
    """Trip records from ``dispatch_ts,arrival_ts[,severity]`` rows."""
    _, rows = _read_rows(path, ("dispatch_ts", "arrival_ts"))
    local = []
    out = []
    for line, row in rows:
        try:
            d = parse_timestamp(row["dispatch_ts"], local)
            a = parse_timestamp(row["arrival_ts"], local)
            out.append(TripRecord(d, a, (row.get("severity") or None)))
        except (TripParseError, ValueError) as exc:
            raise CodecError(path, f"line {line}", str(exc)) from None
    if local and warnings is not None:
        warnings.append(f"{path}: naive timestamps assumed UTC")
    return out


# ---------------------------------------------------------------------------
# outputs
# ---------------------------------------------------------------------------

def write_intersections(path, intersections, crs=None):
    feats = [{"type": "Feature", "properties": {"index": k},
              "geometry": {"type": "Point", "coordinates": [float(x), float(y)]}}
             for k, (x, y) in enumerate(intersections.points.tolist())]
    doc = _collection(feats, crs)
    doc["rounding_grid"] = intersections.rounding_grid
    _write_json(path, doc)


def read_intersections(path):
    doc, feats = _read_features(path)
    pts = []
    for k, f in enumerate(feats):
        g = f.get("geometry") or {}
        if g.get("type") != "Point":
            raise CodecError(path, f"feature {k}", "intersection must be a Point")
        pts.append(g["coordinates"][:2])
    return IntersectionSet(np.array(pts, dtype=np.float64).reshape(-1, 2),
                           float(doc.get("rounding_grid", 1.0)))


def write_density(path, network: RoadNetwork, density):
    _write_csv(path, ["node_id", "x", "y", "count", "density"],
               [(n.node_id, n.x, n.y, int(c), float(v)) for n, c, v in
                zip(network.nodes, density.counts.tolist(), density.values.tolist())])


def read_density(path, network: RoadNetwork, radius: float, unit_scale: float):
    _, rows = _read_rows(path, ("node_id", "count", "density"))
    ids = infer_ids([r["node_id"].strip() for _, r in rows])
    if tuple(ids) != tuple(network.node_ids):
        raise CodecError(path, "node_id", "density rows do not match network nodes")
    counts = np.array([int(r["count"]) for _, r in rows], dtype=np.int64)
    vals = np.array([_float(r["density"], path, f"line {ln}", "density")
                     for ln, r in rows])
    return DensityField(tuple(ids), counts, vals, float(radius), float(unit_scale))


def write_field(path, network: RoadNetwork, field_: TravelTimeField):
    _write_csv(path, ["node_id", "x", "y", "seconds"],
               [(n.node_id, n.x, n.y, float(t))
                for n, t in zip(network.nodes, field_.seconds.tolist())])


def read_field(path, category="overall", alpha=None) -> TravelTimeField:
    _, rows = _read_rows(path, ("node_id", "seconds"))
    ids = infer_ids([r["node_id"].strip() for _, r in rows])
    secs = []
    for line, r in rows:
        s = r["seconds"].strip()
        secs.append(math.inf if s == UNREACHABLE_TOKEN
                    else _float(s, path, f"line {line}", "seconds"))
    return TravelTimeField(category, tuple(ids), np.array(secs, dtype=np.float64), alpha)


def write_weights(path, weights):
    _write_csv(path, ["node_id", "persons"],
               list(zip(weights.node_ids, weights.weights.tolist())))


def read_weights(path):
    _, rows = _read_rows(path, ("node_id", "persons"))
    ids = infer_ids([r["node_id"].strip() for _, r in rows])
    w = np.array([_float(r["persons"], path, f"line {ln}", "persons") for ln, r in rows])
    return PopulationWeights(tuple(ids), w, math.fsum(w.tolist()))


def write_curve(path, curve):
    _write_csv(path, ["tau_seconds", "fraction"], curve.samples)


def read_curve(path, category="overall"):
    _, rows = _read_rows(path, ("tau_seconds", "fraction"))
    taus = tuple(_float(r["tau_seconds"], path, f"line {ln}", "tau") for ln, r in rows)
    fr = tuple(_float(r["fraction"], path, f"line {ln}", "fraction") for ln, r in rows)
    return CoverageCurve(category, taus, fr, math.nan)


def write_scenario(path, result):
    _write_csv(path, ["tau_seconds", "before", "after", "delta"],
               [(t, b, a, d) for t, b, a, d in zip(result.before.taus, result.before.fractions,
                                                 result.after.fractions, result.deltas)])


def write_vulnerability(path, network: RoadNetwork, report, crs=None):
    feats = []
    for c in report.clusters:
        coords = [[float(network.xy[network.index_of(n), 0]),
                   float(network.xy[network.index_of(n), 1])] for n in c.node_ids]
        feats.append({
            "type": "Feature",
            "properties": {
                "cluster_id": c.cluster_id,
                "population": c.population,
                "max_time": _json_num(c.max_time),
                "mean_time": _json_num(c.mean_time),
                "node_ids": list(c.node_ids),
            },
            "geometry": {"type": "MultiPoint", "coordinates": coords},
        })
    doc = _collection(feats, crs)
    doc["summary"] = {
        "tau_seconds": report.tau,
        "min_population": report.min_population,
        "total_underserved": report.total_underserved,
        "accessible_population": report.accessible_population,
        "filtered_population": report.filtered_population,
        "total_population": report.total_population,
    }
    _write_json(path, doc)


def write_ratio_table(path, table: RatioTable):
    rows = [(r.percentile if r.percentile == MEAN else float(r.percentile),
             r.actual, r.simulated, r.ratio) for r in table.rows]
    _write_csv(path, ["percentile", "actual_seconds", "simulated_seconds", "ratio"], rows)


def ratio_table_json(table: RatioTable) -> dict:
    return {"rows": [{"percentile": r.percentile, "actual_seconds": r.actual,
                      "simulated_seconds": r.simulated, "ratio": r.ratio}
                     for r in table.rows]}


def write_summary_csv(path, summary: dict):
    _write_csv(path, ["percentile", "seconds"], list(summary.items()))


def read_summary_csv(path) -> dict:
    """``percentile,seconds`` rows (``mean`` allowed) -> summary mapping."""
    _, rows = _read_rows(path, ("percentile", "seconds"))
    out = {}
    for line, r in rows:
        key = r["percentile"].strip().lower()
        key = MEAN if key in ("mean", "average") else _float(key, path, f"line {line}",
                                                             "percentile")
        out[key] = _float(r["seconds"], path, f"line {line}", "seconds")
    return out


def write_json(path, obj):
    _write_json(path, obj)
