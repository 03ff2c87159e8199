"""Facility and demand ingestion, location dedup, and region assignment."""

from __future__ import annotations

import csv
import io
import re
import unicodedata
from dataclasses import dataclass, replace
from typing import IO, Iterable, Mapping, Optional, Sequence

from .errors import InvalidInputError, SchemaError
from .geo import GeoPoint, haversine_miles

FACILITY_HEADER = [
    "id", "name", "lat", "lon", "state", "zip",
    "src_directory", "src_doj", "src_referral", "src_manual", "doj_recognized",
]
DEMAND_HEADER = ["zcta", "lat", "lon", "weight", "state"]
FRAGMENT_HEADER = ["zcta", "region_kind", "region_id", "population"]

REGION_KINDS = ("cbsa", "county", "commuting_zone", "state", "nation")

_STATE_RE = re.compile(r"^[A-Z]{2}$")
_ZIP_RE = re.compile(r"^[0-9]{5}$")


@dataclass(frozen=True, slots=True)
class FacilitySite:
    """One deduplicated provider office."""

    id: str
    name: str
    point: GeoPoint
    state: str
    zip: str
    src_directory: bool
    src_doj: bool
    src_referral: bool
    src_manual: bool
    doj_recognized: bool

    def __post_init__(self):
        if not (self.src_directory or self.src_doj or self.src_referral or self.src_manual):
            raise InvalidInputError(f"facility {self.id!r} has no source flag set")
        if not _STATE_RE.match(self.state):
            raise InvalidInputError(f"facility {self.id!r} has invalid state {self.state!r}")
        if not _ZIP_RE.match(self.zip):
            raise InvalidInputError(f"facility {self.id!r} has invalid zip {self.zip!r}")


@dataclass(frozen=True, slots=True)
class DemandPoint:
    """One ZIP centroid with its population weight."""

    zcta: str
    centroid: GeoPoint
    weight: int
    state: str
    cbsa_id: Optional[str] = None

    def __post_init__(self):
        if self.weight < 0 or self.weight != int(self.weight):
            raise InvalidInputError(f"demand {self.zcta!r} weight must be a non-negative integer")
        if not _ZIP_RE.match(self.zcta):
            raise InvalidInputError(f"invalid zcta {self.zcta!r}")
        if not _STATE_RE.match(self.state):
            raise InvalidInputError(f"demand {self.zcta!r} has invalid state {self.state!r}")


@dataclass(frozen=True, slots=True)
class Region:
    id: str
    kind: str
    name: str = ""

    def __post_init__(self):
        if self.kind not in REGION_KINDS:
            raise InvalidInputError(f"unknown region kind {self.kind!r}")


def _check_header(reader: csv.DictReader, expected: Sequence[str], what: str):
    got = reader.fieldnames
    if got is None:
        raise SchemaError(f"{what}: empty input, expected header {','.join(expected)}")
    unknown = [h for h in got if h not in expected]
    missing = [h for h in expected if h not in got]
    if unknown:
        raise SchemaError(f"{what}: unknown header fields {unknown}", row=1)
    if missing:
        raise SchemaError(f"{what}: missing header fields {missing}", row=1)


def _parse_bool(value: str, row: int, field: str) -> bool:
    if value == "0":
        return False
    if value == "1":
        return True
    raise SchemaError(f"boolean must be 0 or 1, got {value!r}", row=row, field=field)


def _parse_float(value: str, row: int, field: str) -> float:
    try:
        return float(value)
    except ValueError:
        raise SchemaError(f"not a number: {value!r}", row=row, field=field) from None


def _parse_point(rec: Mapping[str, str], row: int) -> GeoPoint:
    lat = _parse_float(rec["lat"], row, "lat")
    lon = _parse_float(rec["lon"], row, "lon")
    try:
        return GeoPoint(lat, lon)
    except InvalidInputError as e:
        raise SchemaError(str(e), row=row) from None


def ingest_facilities(source: IO[str] | str) -> list[FacilitySite]:
    """Parse a facility CSV stream into validated FacilitySite records."""
    stream = io.StringIO(source) if isinstance(source, str) else source
    reader = csv.DictReader(stream)
    _check_header(reader, FACILITY_HEADER, "facility CSV")
    sites: list[FacilitySite] = []
    seen: set[str] = set()
    for row_no, rec in enumerate(reader, start=2):
        if None in rec or any(v is None for v in rec.values()):
            raise SchemaError("wrong number of fields", row=row_no)
        if rec["id"] in seen:
            raise SchemaError(f"duplicate facility id {rec['id']!r}", row=row_no, field="id")
        seen.add(rec["id"])
        try:
            sites.append(FacilitySite(
                id=rec["id"],
                name=rec["name"],
                point=_parse_point(rec, row_no),
                state=rec["state"],
                zip=rec["zip"],
                src_directory=_parse_bool(rec["src_directory"], row_no, "src_directory"),
                src_doj=_parse_bool(rec["src_doj"], row_no, "src_doj"),
                src_referral=_parse_bool(rec["src_referral"], row_no, "src_referral"),
                src_manual=_parse_bool(rec["src_manual"], row_no, "src_manual"),
                doj_recognized=_parse_bool(rec["doj_recognized"], row_no, "doj_recognized"),
            ))
        except InvalidInputError as e:
            raise SchemaError(str(e), row=row_no) from None
    return sites


def ingest_demand(source: IO[str] | str) -> list[DemandPoint]:
    """Parse a demand CSV stream into validated DemandPoint records."""
    stream = io.StringIO(source) if isinstance(source, str) else source
    reader = csv.DictReader(stream)
    _check_header(reader, DEMAND_HEADER, "demand CSV")
    points: list[DemandPoint] = []
    seen: set[str] = set()
    for row_no, rec in enumerate(reader, start=2):
        if None in rec or any(v is None for v in rec.values()):
            raise SchemaError("wrong number of fields", row=row_no)
        if rec["zcta"] in seen:
            raise SchemaError(f"duplicate zcta {rec['zcta']!r}", row=row_no, field="zcta")
        seen.add(rec["zcta"])
        try:
            weight = int(rec["weight"])
        except ValueError:
            raise SchemaError(f"not an integer: {rec['weight']!r}", row=row_no, field="weight") from None
        if weight < 0:
            raise SchemaError(f"negative weight {weight}", row=row_no, field="weight")
        try:
            points.append(DemandPoint(
                zcta=rec["zcta"],
                centroid=_parse_point(rec, row_no),
                weight=weight,
                state=rec["state"],
            ))
        except InvalidInputError as e:
            raise SchemaError(str(e), row=row_no) from None
    return points


def ingest_fragments(source: IO[str] | str) -> list[tuple[str, str, str, int]]:
    """Parse a fragment CSV into (zcta, region_kind, region_id, population) rows."""
    stream = io.StringIO(source) if isinstance(source, str) else source
    reader = csv.DictReader(stream)
    _check_header(reader, FRAGMENT_HEADER, "fragment CSV")
    rows = []
    for row_no, rec in enumerate(reader, start=2):
        if None in rec or any(v is None for v in rec.values()):
            raise SchemaError("wrong number of fields", row=row_no)
        if rec["region_kind"] not in REGION_KINDS:
            raise SchemaError(f"unknown region kind {rec['region_kind']!r}", row=row_no, field="region_kind")
        try:
            pop = int(rec["population"])
        except ValueError:
            raise SchemaError(f"not an integer: {rec['population']!r}", row=row_no, field="population") from None
        if pop < 0:
            raise SchemaError(f"negative population {pop}", row=row_no, field="population")
        rows.append((rec["zcta"], rec["region_kind"], rec["region_id"], pop))
    return rows


def normalize_name(name: str) -> str:
    """Case-fold and strip punctuation so office-name variants compare equal."""
    folded = unicodedata.normalize("NFKD", name).casefold()
    folded = folded.replace("'", "").replace("’", "")
    cleaned = "".join(c if c.isalnum() or c.isspace() else " " for c in folded)
    return " ".join(cleaned.split())


def dedupe_by_location(sites: Iterable[FacilitySite], eps: float = 0.05) -> list[FacilitySite]:
    """Merge offices that share a normalized name and sit within eps miles.

    Clustering is single-linkage within each name group. A merged site keeps
    the union of source flags, the OR of doj_recognized, the member point
    closest to the cluster centroid, and the lexicographically smallest id.
    """
    if eps < 0:
        raise InvalidInputError(f"negative eps: {eps}")
    by_name: dict[str, list[FacilitySite]] = {}
    order: dict[str, int] = {}
    for i, s in enumerate(sites):
        by_name.setdefault(normalize_name(s.name), []).append(s)
        order[s.id] = i
    merged: list[FacilitySite] = []
    for group in by_name.values():
        for cluster in _single_linkage(group, eps):
            merged.append(_merge_cluster(cluster))
    merged.sort(key=lambda s: order[s.id])
    return merged


def _single_linkage(group: list[FacilitySite], eps: float) -> list[list[FacilitySite]]:
    n = len(group)
    parent = list(range(n))

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for i in range(n):
        for j in range(i + 1, n):
            if haversine_miles(group[i].point, group[j].point) <= eps:
                parent[find(i)] = find(j)
    clusters: dict[int, list[FacilitySite]] = {}
    for i in range(n):
        clusters.setdefault(find(i), []).append(group[i])
    return list(clusters.values())


def _merge_cluster(cluster: list[FacilitySite]) -> FacilitySite:
    if len(cluster) == 1:
        return cluster[0]
    canonical = min(cluster, key=lambda s: s.id)
    mean_lat = sum(s.point.lat for s in cluster) / len(cluster)
    mean_lon = sum(s.point.lon for s in cluster) / len(cluster)
    centroid = GeoPoint(mean_lat, mean_lon)
    closest = min(cluster, key=lambda s: (haversine_miles(s.point, centroid), s.id))
    return replace(
        canonical,
        point=closest.point,
        src_directory=any(s.src_directory for s in cluster),
        src_doj=any(s.src_doj for s in cluster),
        src_referral=any(s.src_referral for s in cluster),
        src_manual=any(s.src_manual for s in cluster),
        doj_recognized=any(s.doj_recognized for s in cluster),
    )


def assign_region(fragments: Iterable[tuple[str, str, int]]) -> dict[str, str]:
    """Assign each zcta to the region holding its largest fragment population.

    Ties break to the smallest region_id. Input rows are (zcta, region_id,
    population) for a single region kind.
    """
    best: dict[str, tuple[int, str]] = {}
    for zcta, region_id, pop in fragments:
        if pop < 0:
            raise InvalidInputError(f"negative fragment population for {zcta!r}")
        key = (-pop, region_id)
        if zcta not in best or key < best[zcta]:
            best[zcta] = key
    return {z: rid for z, (_, rid) in best.items()}


def with_regions(demand: Iterable[DemandPoint], regions: Mapping[str, str]) -> list[DemandPoint]:
    """Return demand points with cbsa_id filled from a zcta -> region map."""
    return [replace(d, cbsa_id=regions.get(d.zcta)) for d in demand]
