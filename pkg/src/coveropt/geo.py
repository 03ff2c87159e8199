"""Coordinates, great-circle distance, and an exact spatial index.

Distances are statute miles on a sphere of mean radius 3958.7613 mi.
The index is an accelerator only: query results are identical to a
linear scan with `haversine_miles` (same ids, same tie-breaking).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np
from scipy.spatial import cKDTree

from .errors import InvalidInputError

EARTH_RADIUS_MILES = 3958.7613

# Relative inflation applied to KD-tree chord radii so the candidate set is
# always a superset of the true answer; exact haversine filtering follows.
_CHORD_SLACK = 1e-9
_CHORD_ABS_SLACK = 1e-12


@dataclass(frozen=True, slots=True)
class GeoPoint:
    """A latitude/longitude pair in degrees."""

    lat: float
    lon: float

    def __post_init__(self):
        if not (math.isfinite(self.lat) and math.isfinite(self.lon)):
            raise InvalidInputError(f"non-finite coordinate: ({self.lat}, {self.lon})")
        if not -90.0 <= self.lat <= 90.0:
            raise InvalidInputError(f"latitude {self.lat} outside [-90, 90]")
        if not -180.0 <= self.lon <= 180.0:
            raise InvalidInputError(f"longitude {self.lon} outside [-180, 180]")


def haversine_miles(a: GeoPoint, b: GeoPoint) -> float:
    """Great-circle distance between two points, in statute miles."""
    phi1 = math.radians(a.lat)
    phi2 = math.radians(b.lat)
    dphi = math.radians(b.lat - a.lat)
    dlam = math.radians(b.lon - a.lon)
    h = math.sin(dphi / 2.0) ** 2 + math.cos(phi1) * math.cos(phi2) * math.sin(dlam / 2.0) ** 2
    return 2.0 * EARTH_RADIUS_MILES * math.asin(min(1.0, math.sqrt(h)))


def haversine_miles_vec(lat: float, lon: float, lats: np.ndarray, lons: np.ndarray) -> np.ndarray:
    """Distances from one (lat, lon) to arrays of coordinates, in miles."""
    phi1 = math.radians(lat)
    phi2 = np.radians(lats)
    dphi = np.radians(lats - lat)
    dlam = np.radians(lons - lon)
    h = np.sin(dphi / 2.0) ** 2 + math.cos(phi1) * np.cos(phi2) * np.sin(dlam / 2.0) ** 2
    return 2.0 * EARTH_RADIUS_MILES * np.arcsin(np.minimum(1.0, np.sqrt(h)))


def _unit_vectors(lats: np.ndarray, lons: np.ndarray) -> np.ndarray:
    phi = np.radians(lats)
    lam = np.radians(lons)
    cos_phi = np.cos(phi)
    return np.column_stack((cos_phi * np.cos(lam), cos_phi * np.sin(lam), np.sin(phi)))


def _chord_from_miles(r: float) -> float:
    # Chord length on the unit sphere subtending an arc of r miles.
    theta = min(r / EARTH_RADIUS_MILES, math.pi)
    return 2.0 * math.sin(theta / 2.0)


class SpatialIndex:
    """Immutable nearest/within-radius index over (id, GeoPoint) entries.

    Built as a KD-tree over unit-sphere chord space. Chord distance is
    monotone in great-circle distance, so tree candidates are refined
    with the exact haversine before anything is returned.
    """

    __slots__ = ("_ids", "_lats", "_lons", "_tree")

    def __init__(self, entries: Iterable[tuple[str, GeoPoint]]):
        ids: list[str] = []
        lats: list[float] = []
        lons: list[float] = []
        seen: set[str] = set()
        for eid, point in entries:
            if eid in seen:
                raise InvalidInputError(f"duplicate id in index: {eid!r}")
            seen.add(eid)
            ids.append(eid)
            lats.append(point.lat)
            lons.append(point.lon)
        self._ids = tuple(ids)
        self._lats = np.asarray(lats, dtype=np.float64)
        self._lons = np.asarray(lons, dtype=np.float64)
        self._tree = (
            cKDTree(_unit_vectors(self._lats, self._lons)) if ids else None
        )

    def __len__(self) -> int:
        return len(self._ids)

    @property
    def ids(self) -> tuple[str, ...]:
        return self._ids

    def _refine_nearest(self, q: GeoPoint, idxs: Sequence[int]) -> tuple[str, float]:
        best: tuple[float, str] | None = None
        for i in idxs:
            d = haversine_miles(q, GeoPoint(self._lats[i], self._lons[i]))
            key = (d, self._ids[i])
            if best is None or key < best:
                best = key
        assert best is not None
        return best[1], best[0]

    def nearest(self, q: GeoPoint) -> Optional[tuple[str, float]]:
        """Entry minimizing distance to `q`; ties broken by smallest id."""
        if self._tree is None:
            return None
        qv = _unit_vectors(np.array([q.lat]), np.array([q.lon]))[0]
        k = min(2, len(self._ids))
        dists, idxs = self._tree.query(qv, k=k)
        if k == 1:
            return self._refine_nearest(q, [int(idxs)])
        d1, d2 = float(dists[0]), float(dists[1])
        if d2 > d1 * (1.0 + _CHORD_SLACK) + _CHORD_ABS_SLACK:
            i = int(idxs[0])
            d = haversine_miles(q, GeoPoint(self._lats[i], self._lons[i]))
            return self._ids[i], d
        # Potential tie: compare every candidate in a slightly inflated ball
        # with the exact metric.
        ball = self._tree.query_ball_point(qv, d2 * (1.0 + _CHORD_SLACK) + _CHORD_ABS_SLACK)
        return self._refine_nearest(q, ball)

    def within_radius(self, q: GeoPoint, r: float) -> list[tuple[str, float]]:
        """Entries with distance <= r (inclusive), sorted by (distance, id)."""
        if r < 0:
            raise InvalidInputError(f"negative radius: {r}")
        if self._tree is None:
            return []
        qv = _unit_vectors(np.array([q.lat]), np.array([q.lon]))[0]
        chord = _chord_from_miles(r) * (1.0 + _CHORD_SLACK) + _CHORD_ABS_SLACK
        idxs = self._tree.query_ball_point(qv, chord)
        out = []
        for i in idxs:
            d = haversine_miles(q, GeoPoint(self._lats[i], self._lons[i]))
            if d <= r:
                out.append((self._ids[i], d))
        out.sort(key=lambda t: (t[1], t[0]))
        return out

    def nearest_bulk(
        self, lats: np.ndarray, lons: np.ndarray, workers: int = 1
    ) -> tuple[np.ndarray, list[Optional[str]]]:
        """Vectorized nearest for many query points.

        Returns (distances, ids) aligned with the queries; distance is nan
        and id None when the index is empty. Same ids as `nearest`;
        distances equal up to floating-point rounding.
        """
        n = len(lats)
        if self._tree is None:
            return np.full(n, np.nan), [None] * n
        qv = _unit_vectors(np.asarray(lats, dtype=np.float64), np.asarray(lons, dtype=np.float64))
        k = min(2, len(self._ids))
        dists, idxs = self._tree.query(qv, k=k, workers=workers)
        if k == 1:
            dists = dists[:, None] if dists.ndim == 1 else dists
            idxs = idxs[:, None] if idxs.ndim == 1 else idxs
        out_d = np.empty(n, dtype=np.float64)
        out_ids: list[Optional[str]] = [None] * n
        if k == 2:
            ambiguous = dists[:, 1] <= dists[:, 0] * (1.0 + _CHORD_SLACK) + _CHORD_ABS_SLACK
        else:
            ambiguous = np.zeros(n, dtype=bool)
        clear = ~ambiguous
        if np.any(clear):
            ci = idxs[clear, 0]
            out_d[clear] = _pairwise_miles(
                np.asarray(lats)[clear], np.asarray(lons)[clear], self._lats[ci], self._lons[ci]
            )
            clear_pos = np.flatnonzero(clear)
            for pos, i in zip(clear_pos, ci):
                out_ids[pos] = self._ids[int(i)]
        for pos in np.flatnonzero(ambiguous):
            res = self.nearest(GeoPoint(float(lats[pos]), float(lons[pos])))
            assert res is not None
            out_ids[pos], out_d[pos] = res
        return out_d, out_ids

    def within_radius_bulk(
        self, lats: np.ndarray, lons: np.ndarray, r: float, workers: int = 1
    ) -> list[tuple[np.ndarray, np.ndarray]]:
        """Per-query (member indices, distances) for all entries within r.

        Members are positions into `ids`, sorted ascending; distances align.
        """
        if r < 0:
            raise InvalidInputError(f"negative radius: {r}")
        n = len(lats)
        if self._tree is None:
            empty = (np.empty(0, dtype=np.int64), np.empty(0, dtype=np.float64))
            return [empty] * n
        qv = _unit_vectors(np.asarray(lats, dtype=np.float64), np.asarray(lons, dtype=np.float64))
        chord = _chord_from_miles(r) * (1.0 + _CHORD_SLACK) + _CHORD_ABS_SLACK
        balls = self._tree.query_ball_point(qv, chord, workers=workers)
        out = []
        for i in range(n):
            cand = np.asarray(sorted(balls[i]), dtype=np.int64)
            if cand.size == 0:
                out.append((cand, np.empty(0, dtype=np.float64)))
                continue
            d = _pairwise_miles(
                np.full(cand.size, lats[i]), np.full(cand.size, lons[i]),
                self._lats[cand], self._lons[cand],
            )
            keep = d <= r
            out.append((cand[keep], d[keep]))
        return out


def _pairwise_miles(lat1: np.ndarray, lon1: np.ndarray, lat2: np.ndarray, lon2: np.ndarray) -> np.ndarray:
    phi1 = np.radians(lat1)
    phi2 = np.radians(lat2)
    dphi = np.radians(lat2 - lat1)
    dlam = np.radians(lon2 - lon1)
    h = np.sin(dphi / 2.0) ** 2 + np.cos(phi1) * np.cos(phi2) * np.sin(dlam / 2.0) ** 2
    return 2.0 * EARTH_RADIUS_MILES * np.arcsin(np.minimum(1.0, np.sqrt(h)))


def build_index(entries: Iterable[tuple[str, GeoPoint]]) -> SpatialIndex:
    """Build an immutable SpatialIndex; ids must be unique."""
    return SpatialIndex(entries)


def nearest(index: SpatialIndex, q: GeoPoint) -> Optional[tuple[str, float]]:
    return index.nearest(q)


def within_radius(index: SpatialIndex, q: GeoPoint, r: float) -> list[tuple[str, float]]:
    return index.within_radius(q, r)
