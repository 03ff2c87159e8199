"""Nearest-facility distance field, weighted statistics, and the coverage matrix.

A demand point is covered when its centroid lies within the service radius
(inclusive) of any facility; its population weight is otherwise underserved.
All operations are pure and deterministic for a fixed demand ordering.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from .dataset import DemandPoint, FacilitySite
from .errors import InvalidInputError
from .geo import GeoPoint, build_index

DEFAULT_RADIUS_MILES = 12.0


@dataclass(frozen=True)
class CoverageField:
    """Per-demand-point nearest facility, distance, and covered flag."""

    radius_miles: float
    zctas: tuple[str, ...]
    nearest_ids: tuple[Optional[str], ...]
    distances: np.ndarray  # miles; nan when no facility exists
    covered: np.ndarray  # bool

    def __post_init__(self):
        n = len(self.zctas)
        if not (len(self.nearest_ids) == len(self.distances) == len(self.covered) == n):
            raise InvalidInputError("coverage field columns must align")


@dataclass(frozen=True)
class RegionStats:
    region_id: str
    population: int
    weighted_mean_distance: Optional[float]
    facility_count: int
    covered_population: int
    underserved_population: int


@dataclass(frozen=True)
class CoverageMatrix:
    """Per-candidate in-disk demand sets, the optimizers' working structure.

    `members[cid]` holds demand row indices within the radius of candidate
    `cid`, sorted ascending; `member_dists[cid]` aligns with it.
    """

    radius_miles: float
    candidate_ids: tuple[str, ...]
    demand_zctas: tuple[str, ...]
    demand_weights: np.ndarray  # int64, aligned with demand_zctas
    demand_states: tuple[str, ...]
    members: dict[str, np.ndarray] = field(repr=False)
    member_dists: dict[str, np.ndarray] = field(repr=False)
    covered_weight: dict[str, int] = field(repr=False)

    @property
    def n_demand(self) -> int:
        return len(self.demand_zctas)


def _as_weights(demand: Sequence[DemandPoint]) -> np.ndarray:
    return np.asarray([d.weight for d in demand], dtype=np.int64)


def compute_field(
    demand: Sequence[DemandPoint],
    facilities: Sequence[FacilitySite],
    radius_miles: float = DEFAULT_RADIUS_MILES,
    workers: int = 1,
) -> CoverageField:
    """Nearest-facility distance and covered flag for every demand point."""
    if radius_miles <= 0:
        raise InvalidInputError(f"radius must be positive, got {radius_miles}")
    index = build_index((f.id, f.point) for f in facilities)
    lats = np.asarray([d.centroid.lat for d in demand])
    lons = np.asarray([d.centroid.lon for d in demand])
    dists, ids = index.nearest_bulk(lats, lons, workers=workers)
    covered = np.zeros(len(demand), dtype=bool)
    finite = ~np.isnan(dists)
    covered[finite] = dists[finite] <= radius_miles
    return CoverageField(
        radius_miles=radius_miles,
        zctas=tuple(d.zcta for d in demand),
        nearest_ids=tuple(ids),
        distances=dists,
        covered=covered,
    )


def weighted_quantile(values: Sequence[float], weights: Sequence[float], q: float) -> float:
    """Left-continuous inverse of the weighted ECDF.

    Returns the smallest v with cumulative weight fraction at or above q.
    Zero-weight points are ignored.
    """
    if not 0.0 <= q <= 1.0:
        raise InvalidInputError(f"quantile fraction {q} outside [0, 1]")
    v = np.asarray(values, dtype=np.float64)
    w = np.asarray(weights, dtype=np.float64)
    if v.shape != w.shape:
        raise InvalidInputError("values and weights must align")
    if np.any(w < 0):
        raise InvalidInputError("weights must be non-negative")
    keep = w > 0
    v, w = v[keep], w[keep]
    if v.size == 0:
        raise InvalidInputError("total weight is zero")
    order = np.argsort(v, kind="stable")
    v, w = v[order], w[order]
    cdf = np.cumsum(w) / np.sum(w)
    idx = int(np.searchsorted(cdf, q, side="left"))
    return float(v[min(idx, v.size - 1)])


def classify(field: CoverageField, demand: Sequence[DemandPoint]) -> tuple[int, int]:
    """(covered_population, underserved_population) under the field's radius."""
    w = _as_weights(demand)
    if len(w) != len(field.covered):
        raise InvalidInputError("field and demand must align")
    covered = int(w[field.covered].sum())
    return covered, int(w.sum()) - covered


def aggregate(
    field: CoverageField,
    demand: Sequence[DemandPoint],
    regions: Mapping[str, str],
    facilities: Sequence[FacilitySite],
) -> list[RegionStats]:
    """Population-weighted per-region coverage statistics.

    Demand points map to regions through `regions` (zcta -> region_id);
    points without an entry are skipped. Facilities attribute to the region
    of their own zip through the same map. Points with no distance are
    excluded from the weighted mean but counted underserved.
    """
    pops: dict[str, int] = {}
    cov: dict[str, int] = {}
    wsum: dict[str, float] = {}
    wdsum: dict[str, float] = {}
    for i, d in enumerate(demand):
        rid = regions.get(d.zcta)
        if rid is None:
            continue
        pops[rid] = pops.get(rid, 0) + d.weight
        if field.covered[i]:
            cov[rid] = cov.get(rid, 0) + d.weight
        if not math.isnan(field.distances[i]) and d.weight > 0:
            wsum[rid] = wsum.get(rid, 0.0) + d.weight
            wdsum[rid] = wdsum.get(rid, 0.0) + d.weight * float(field.distances[i])
    fac_counts: dict[str, int] = {}
    for f in facilities:
        rid = regions.get(f.zip)
        if rid is not None:
            fac_counts[rid] = fac_counts.get(rid, 0) + 1
    out = []
    for rid in sorted(set(pops) | set(fac_counts)):
        population = pops.get(rid, 0)
        covered = cov.get(rid, 0)
        mean = wdsum[rid] / wsum[rid] if wsum.get(rid) else None
        out.append(RegionStats(
            region_id=rid,
            population=population,
            weighted_mean_distance=mean,
            facility_count=fac_counts.get(rid, 0),
            covered_population=covered,
            underserved_population=population - covered,
        ))
    return out


def find_underserved(stats: Iterable[RegionStats]) -> list[str]:
    """Regions strictly above the 3rd quartile in both mean distance and population.

    Quartiles are unweighted across regions with a defined mean distance,
    linearly interpolated.
    """
    usable = [s for s in stats if s.weighted_mean_distance is not None]
    if len(usable) < 4:
        raise InvalidInputError(f"need at least 4 regions with defined means, got {len(usable)}")
    dists = np.asarray([s.weighted_mean_distance for s in usable])
    pops = np.asarray([s.population for s in usable], dtype=np.float64)
    q3_dist = float(np.quantile(dists, 0.75))
    q3_pop = float(np.quantile(pops, 0.75))
    return sorted(
        s.region_id
        for s in usable
        if s.weighted_mean_distance > q3_dist and s.population > q3_pop
    )


def build_matrix(
    demand: Sequence[DemandPoint],
    candidates: Iterable[tuple[str, GeoPoint]],
    radius_miles: float = DEFAULT_RADIUS_MILES,
    workers: int = 1,
) -> CoverageMatrix:
    """In-disk demand sets and covered weight for every candidate site."""
    if radius_miles <= 0:
        raise InvalidInputError(f"radius must be positive, got {radius_miles}")
    cand = list(candidates)
    weights = _as_weights(demand)
    demand_index = build_index((d.zcta, d.centroid) for d in demand)
    # Query the demand index once per candidate; the demand tree is reused
    # across candidates instead of rebuilding per call.
    lats = np.asarray([p.lat for _, p in cand])
    lons = np.asarray([p.lon for _, p in cand])
    balls = demand_index.within_radius_bulk(lats, lons, radius_miles, workers=workers)
    members: dict[str, np.ndarray] = {}
    dists: dict[str, np.ndarray] = {}
    covered: dict[str, int] = {}
    for (cid, _), (idx, d) in zip(cand, balls):
        members[cid] = idx
        dists[cid] = d
        covered[cid] = int(weights[idx].sum())
    return CoverageMatrix(
        radius_miles=radius_miles,
        candidate_ids=tuple(cid for cid, _ in cand),
        demand_zctas=tuple(d.zcta for d in demand),
        demand_weights=weights,
        demand_states=tuple(d.state for d in demand),
        members=members,
        member_dists=dists,
        covered_weight=covered,
    )


def correlation(x: Sequence[float], y: Sequence[float]) -> float:
    """Pearson product-moment correlation coefficient."""
    xa = np.asarray(x, dtype=np.float64)
    ya = np.asarray(y, dtype=np.float64)
    if xa.size != ya.size:
        raise InvalidInputError("series must have equal length")
    if xa.size < 2:
        raise InvalidInputError("need at least 2 observations")
    xd = xa - xa.mean()
    yd = ya - ya.mean()
    denom = math.sqrt(float(np.dot(xd, xd)) * float(np.dot(yd, yd)))
    if denom == 0.0:
        raise InvalidInputError("correlation undefined for a constant series")
    return float(np.dot(xd, yd)) / denom
