"""Synthetic facility/demand generator for benchmarks and end-to-end tests.

Demand is concentrated in a handful of urban clusters and facilities are
mostly co-located with them, so regional facility counts and demand weights
correlate strongly. A sprinkling of duplicate facility rows exercises the
location dedup path.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import DemandPoint, FacilitySite
from .errors import InvalidInputError
from .geo import GeoPoint

LAT_RANGE = (25.0, 49.0)
LON_RANGE = (-124.0, -67.0)

_LETTERS = "ABCDEFGHIJKLMNOPQRSTUVWXYZ"


@dataclass(frozen=True)
class SynthConfig:
    n_demand: int = 33_000
    n_facilities: int = 2_138
    n_clusters: int = 40
    n_states: int = 20
    cluster_fraction: float = 0.85
    cluster_sigma_deg: float = 0.15
    duplicate_rate: float = 0.01
    seed: int = 0

    def __post_init__(self):
        if self.n_demand < 1 or self.n_facilities < 0 or self.n_clusters < 1:
            raise InvalidInputError("synthetic sizes must be positive")
        if self.n_demand > 99_999:
            raise InvalidInputError("zcta space is exhausted beyond 99999 demand points")
        if not 1 <= self.n_states <= len(_LETTERS) ** 2:
            raise InvalidInputError("n_states out of range")


def _state_code(i: int) -> str:
    return _LETTERS[i // 26] + _LETTERS[i % 26]


def _state_of(lon: float, n_states: int) -> str:
    lo, hi = LON_RANGE
    band = int((lon - lo) / (hi - lo) * n_states)
    return _state_code(min(max(band, 0), n_states - 1))


@dataclass(frozen=True)
class SynthDataset:
    demand: list[DemandPoint]
    facilities: list[FacilitySite]
    fragments: list[tuple[str, str, str, int]]  # (zcta, kind, region_id, population)


def generate(config: SynthConfig = SynthConfig()) -> SynthDataset:
    rng = np.random.default_rng([config.seed, 42])
    n_clusters = config.n_clusters
    centers_lat = rng.uniform(LAT_RANGE[0] + 1, LAT_RANGE[1] - 1, n_clusters)
    centers_lon = rng.uniform(LON_RANGE[0] + 1, LON_RANGE[1] - 1, n_clusters)
    # Heavier clusters first: a rough big-city size distribution.
    cluster_mass = np.sort(rng.pareto(1.2, n_clusters) + 1.0)[::-1]
    cluster_mass /= cluster_mass.sum()

    n_clustered = int(config.n_demand * config.cluster_fraction)
    cluster_of = rng.choice(n_clusters, size=n_clustered, p=cluster_mass)
    lat = np.empty(config.n_demand)
    lon = np.empty(config.n_demand)
    lat[:n_clustered] = centers_lat[cluster_of] + rng.normal(0, config.cluster_sigma_deg, n_clustered)
    lon[:n_clustered] = centers_lon[cluster_of] + rng.normal(0, config.cluster_sigma_deg, n_clustered)
    n_rural = config.n_demand - n_clustered
    lat[n_clustered:] = rng.uniform(*LAT_RANGE, n_rural)
    lon[n_clustered:] = rng.uniform(*LON_RANGE, n_rural)
    lat = np.clip(lat, *LAT_RANGE)
    lon = np.clip(lon, *LON_RANGE)

    weight = np.empty(config.n_demand, dtype=np.int64)
    weight[:n_clustered] = np.round(rng.lognormal(5.0, 1.0, n_clustered)).astype(np.int64)
    weight[n_clustered:] = np.round(rng.lognormal(2.0, 1.0, n_rural)).astype(np.int64)
    weight = np.maximum(weight, 0)

    demand = []
    fragments = []
    for i in range(config.n_demand):
        zcta = f"{i + 1:05d}"
        state = _state_of(float(lon[i]), config.n_states)
        demand.append(DemandPoint(
            zcta=zcta,
            centroid=GeoPoint(float(lat[i]), float(lon[i])),
            weight=int(weight[i]),
            state=state,
        ))
        if i < n_clustered:
            cid = f"C{cluster_of[i]:03d}"
            w = int(weight[i])
            if rng.random() < config.duplicate_rate and n_clusters > 1:
                # Straddling zcta: two fragments, majority in the home cluster.
                other = f"C{(cluster_of[i] + 1) % n_clusters:03d}"
                major = (w * 2) // 3
                fragments.append((zcta, "cbsa", cid, major))
                fragments.append((zcta, "cbsa", other, w - major))
            else:
                fragments.append((zcta, "cbsa", cid, w))

    # Facilities co-locate with demand mass; a thin uniform tail covers
    # low-demand territory.
    n_urban = int(config.n_facilities * 0.9)
    fac_cluster = rng.choice(n_clusters, size=n_urban, p=cluster_mass)
    flat = np.empty(config.n_facilities)
    flon = np.empty(config.n_facilities)
    flat[:n_urban] = centers_lat[fac_cluster] + rng.normal(0, config.cluster_sigma_deg, n_urban)
    flon[:n_urban] = centers_lon[fac_cluster] + rng.normal(0, config.cluster_sigma_deg, n_urban)
    flat[n_urban:] = rng.uniform(*LAT_RANGE, config.n_facilities - n_urban)
    flon[n_urban:] = rng.uniform(*LON_RANGE, config.n_facilities - n_urban)
    flat = np.clip(flat, *LAT_RANGE)
    flon = np.clip(flon, *LON_RANGE)

    facilities = []
    for i in range(config.n_facilities):
        point = GeoPoint(float(flat[i]), float(flon[i]))
        src = rng.random(3) < (0.55, 0.55, 0.3)
        facilities.append(FacilitySite(
            id=f"F{i + 1:05d}",
            name=f"Legal Aid Office {i + 1}",
            point=point,
            state=_state_of(point.lon, config.n_states),
            zip=_nearest_zcta_code(point, lat, lon),
            src_directory=bool(src[0]) or not (src[1] or src[2]),
            src_doj=bool(src[1]),
            src_referral=bool(src[2]),
            src_manual=bool(rng.random() < 0.15),
            doj_recognized=bool(src[1]) and bool(rng.random() < 0.95),
        ))
        if rng.random() < config.duplicate_rate:
            # Same office listed twice a few dozen feet apart.
            jitter = rng.normal(0, 1e-4, 2)
            twin = GeoPoint(
                float(np.clip(point.lat + jitter[0], *LAT_RANGE)),
                float(np.clip(point.lon + jitter[1], *LON_RANGE)),
            )
            f = facilities[-1]
            facilities.append(FacilitySite(
                id=f"F{i + 1:05d}D",
                name=f.name,
                point=twin,
                state=f.state,
                zip=f.zip,
                src_directory=False,
                src_doj=False,
                src_referral=True,
                src_manual=False,
                doj_recognized=False,
            ))
    return SynthDataset(demand=demand, facilities=facilities, fragments=fragments)


def _nearest_zcta_code(point: GeoPoint, lats: np.ndarray, lons: np.ndarray) -> str:
    # Cheap planar approximation is fine here: the zip only needs to be a
    # plausible nearby zcta, not an exact nearest neighbor.
    i = int(np.argmin((lats - point.lat) ** 2 + (lons - point.lon) ** 2))
    return f"{i + 1:05d}"
