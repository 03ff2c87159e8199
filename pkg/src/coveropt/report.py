"""Comparison tables, quantile curves, and deterministic file emitters.

Files are byte-stable for identical inputs: fixed field order, LF line
endings, and shortest round-trip decimal formatting for floats.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import IO, Iterable, Mapping, Optional, Sequence

import numpy as np

from .coverage import CoverageField, RegionStats, weighted_quantile
from .dataset import DemandPoint, FacilitySite
from .errors import CoverOptError, InvalidInputError, SchemaError
from .optimize import NetworkPlan

FIELD_HEADER = ["zcta", "nearest_facility_id", "distance", "covered"]
STATS_HEADER = [
    "region_id", "population", "weighted_mean_distance",
    "facility_count", "covered_population", "underserved_population",
]
COMPARISON_HEADER = ["region_id", "current", "optimal", "delta"]
GAINS_HEADER = ["region_id", "covered", "gain_add_one", "gain_rearrange"]
QUANTILE_HEADER = ["q", "miles"]
GREEDY_HEADER = ["rank", "zcta", "lat", "lon", "marginal_gain"]
PLAN_HEADER = ["zcta", "load"]


@dataclass(frozen=True)
class ComparisonRow:
    region_id: str
    current_count: int
    optimal_count: int

    @property
    def delta(self) -> int:
        return self.optimal_count - self.current_count


@dataclass(frozen=True)
class GainsRow:
    region_id: str
    currently_covered: int
    gain_add_one: int
    gain_rearrange: int

    def __post_init__(self):
        if self.gain_add_one < 0 or self.gain_rearrange < 0:
            raise InvalidInputError(f"gains must be >= 0 for region {self.region_id!r}")


def fmt(value) -> str:
    """Shortest decimal that round-trips; empty string for absent values."""
    if value is None:
        return ""
    if isinstance(value, float):
        if math.isnan(value):
            return ""
        return repr(value)
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    return str(value)


def compare_networks(
    current_facilities: Sequence[FacilitySite],
    optimal: NetworkPlan,
    regions: Mapping[str, str],
) -> list[ComparisonRow]:
    """Per-region facility counts for the current vs optimal networks.

    Current sites resolve to regions through their zip; optimal sites are
    zcta centroids and resolve directly. Sites without a region entry are
    left out. Sorted by |delta| descending, then region id.
    """
    current: dict[str, int] = {}
    for f in current_facilities:
        rid = regions.get(f.zip)
        if rid is not None:
            current[rid] = current.get(rid, 0) + 1
    optimal_counts: dict[str, int] = {}
    for site in optimal.sites:
        rid = regions.get(site)
        if rid is not None:
            optimal_counts[rid] = optimal_counts.get(rid, 0) + 1
    rows = [
        ComparisonRow(rid, current.get(rid, 0), optimal_counts.get(rid, 0))
        for rid in set(current) | set(optimal_counts)
    ]
    rows.sort(key=lambda r: (-abs(r.delta), r.region_id))
    return rows


def quantile_curve(
    field: CoverageField, demand: Sequence[DemandPoint], grid: Iterable[float]
) -> list[tuple[float, float]]:
    """Weighted distance quantiles on a grid of fractions.

    Points with no distance (no facility anywhere) are excluded.
    """
    dists = []
    weights = []
    for i, d in enumerate(demand):
        v = float(field.distances[i])
        if not math.isnan(v):
            dists.append(v)
            weights.append(d.weight)
    return [(q, weighted_quantile(dists, weights, q)) for q in grid]


def default_grid(n: int = 99) -> list[float]:
    return [round((i + 1) / (n + 1), 6) for i in range(n)]


def emit_csv(destination: str | Path | IO[str], header: Sequence[str], rows: Iterable[Sequence]) -> None:
    """Write rows under a fixed header; byte-stable for identical inputs."""
    def write(fh: IO[str]):
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])

    if isinstance(destination, (str, Path)):
        try:
            with open(destination, "w", encoding="utf-8", newline="") as fh:
                write(fh)
        except OSError as e:
            raise CoverOptError(f"cannot write {destination}: {e}") from e
    else:
        write(destination)


def field_rows(field: CoverageField) -> list[tuple]:
    rows = []
    for i, z in enumerate(field.zctas):
        d = float(field.distances[i])
        rows.append((z, field.nearest_ids[i] or "", None if math.isnan(d) else d, field.covered[i]))
    return rows


def read_field_csv(source: IO[str] | str, radius_miles: float) -> CoverageField:
    """Re-ingest a coverage-field CSV written by `field_rows`/`emit_csv`."""
    stream = io.StringIO(source) if isinstance(source, str) else source
    reader = csv.DictReader(stream)
    if reader.fieldnames != FIELD_HEADER:
        raise SchemaError(f"coverage field CSV must have header {','.join(FIELD_HEADER)}")
    zctas, ids, dists, covered = [], [], [], []
    for rec in reader:
        zctas.append(rec["zcta"])
        ids.append(rec["nearest_facility_id"] or None)
        dists.append(float(rec["distance"]) if rec["distance"] else math.nan)
        covered.append(rec["covered"] == "1")
    return CoverageField(
        radius_miles=radius_miles,
        zctas=tuple(zctas),
        nearest_ids=tuple(ids),
        distances=np.asarray(dists, dtype=np.float64),
        covered=np.asarray(covered, dtype=bool),
    )


def stats_rows(stats: Iterable[RegionStats]) -> list[tuple]:
    return [
        (s.region_id, s.population, s.weighted_mean_distance,
         s.facility_count, s.covered_population, s.underserved_population)
        for s in stats
    ]


def comparison_rows(rows: Iterable[ComparisonRow]) -> list[tuple]:
    return [(r.region_id, r.current_count, r.optimal_count, r.delta) for r in rows]


def gains_rows(rows: Iterable[GainsRow]) -> list[tuple]:
    return [(r.region_id, r.currently_covered, r.gain_add_one, r.gain_rearrange) for r in rows]


def _feature(lon: float, lat: float, properties: dict) -> dict:
    return {
        "type": "Feature",
        "geometry": {"type": "Point", "coordinates": [lon, lat]},
        "properties": properties,
    }


def field_geojson(field: CoverageField, demand: Sequence[DemandPoint]) -> dict:
    """Demand points as a FeatureCollection with distance/covered/weight."""
    features = []
    for i, d in enumerate(demand):
        dist = float(field.distances[i])
        features.append(_feature(d.centroid.lon, d.centroid.lat, {
            "zcta": d.zcta,
            "distance": None if math.isnan(dist) else dist,
            "covered": bool(field.covered[i]),
            "weight": d.weight,
        }))
    return {"type": "FeatureCollection", "features": features}


def sites_geojson(
    sites: Iterable[tuple[str, float, float, str]],
) -> dict:
    """Site markers; each entry is (id, lat, lon, role) with role one of
    existing | added | rearranged."""
    features = []
    for sid, lat, lon, role in sites:
        if role not in ("existing", "added", "rearranged"):
            raise InvalidInputError(f"unknown site role {role!r}")
        features.append(_feature(lon, lat, {"id": sid, "role": role}))
    return {"type": "FeatureCollection", "features": features}


def emit_geojson(destination: str | Path | IO[str], collection: dict) -> None:
    payload = json.dumps(collection, ensure_ascii=False, separators=(",", ":"))
    if isinstance(destination, (str, Path)):
        try:
            with open(destination, "w", encoding="utf-8", newline="") as fh:
                fh.write(payload)
        except OSError as e:
            raise CoverOptError(f"cannot write {destination}: {e}") from e
    else:
        destination.write(payload)
