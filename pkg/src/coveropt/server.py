"""Read-only HTTP service over an immutable dataset snapshot.

Answers derive from the snapshot plus request parameters only, so the
service is safe for many concurrent readers and horizontally trivial.
Optimizer endpoints share a global in-flight limit (429 beyond it).
"""

from __future__ import annotations

import argparse
import os
import threading
from dataclasses import dataclass
from typing import Optional

import numpy as np
from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from pydantic import BaseModel, Field

from . import coverage as cov
from . import dataset, optimize, report
from .errors import InvalidInputError
from .geo import GeoPoint, SpatialIndex, build_index

MAX_WHATIF_SITES = 50
MAX_REARRANGE_SAMPLES = 50_000
DEFAULT_INFLIGHT_LIMIT = 2


@dataclass(frozen=True)
class Snapshot:
    """Immutable bundle every endpoint reads from."""

    radius_miles: float
    capacity: int
    demand: list[dataset.DemandPoint]
    facilities: list[dataset.FacilitySite]
    demand_index: SpatialIndex
    field: cov.CoverageField
    matrix: cov.CoverageMatrix
    existing_plan: optimize.NetworkPlan
    covered: int
    underserved: int


def load_snapshot(
    facilities_path: str,
    demand_path: str,
    radius_miles: float = 12.0,
    capacity: int = optimize.DEFAULT_CAPACITY,
    threads: int = 1,
) -> Snapshot:
    with open(facilities_path, "r", encoding="utf-8", newline="") as fh:
        facilities = dataset.ingest_facilities(fh)
    with open(demand_path, "r", encoding="utf-8", newline="") as fh:
        demand = dataset.ingest_demand(fh)
    field = cov.compute_field(demand, facilities, radius_miles, workers=threads)
    covered, underserved = cov.classify(field, demand)
    matrix = cov.build_matrix(demand, [(d.zcta, d.centroid) for d in demand],
                              radius_miles, workers=threads)
    return Snapshot(
        radius_miles=radius_miles,
        capacity=capacity,
        demand=demand,
        facilities=facilities,
        demand_index=build_index((d.zcta, d.centroid) for d in demand),
        field=field,
        matrix=matrix,
        existing_plan=optimize.plan_from_field(field, demand, facilities),
        covered=covered,
        underserved=underserved,
    )


class WhatIfSite(BaseModel):
    lat: Optional[float] = None
    lon: Optional[float] = None
    zcta: Optional[str] = None


class WhatIfRequest(BaseModel):
    sites: list[WhatIfSite]


class GreedyRequest(BaseModel):
    k: int = Field(ge=1, le=1000)
    scope: str = "nation"


class RearrangeRequest(BaseModel):
    seed: int = Field(default=0, ge=0)
    samples: int = Field(default=20_000, ge=1, le=MAX_REARRANGE_SAMPLES)
    patience: int = Field(default=optimize.DEFAULT_PATIENCE, ge=1, le=100_000)


def _resolve_site(site: WhatIfSite, snapshot: Snapshot) -> GeoPoint:
    if site.zcta is not None:
        match = next((d.centroid for d in snapshot.demand if d.zcta == site.zcta), None)
        if match is None:
            raise HTTPException(status_code=400, detail=f"unknown zcta {site.zcta!r}")
        return match
    if site.lat is None or site.lon is None:
        raise HTTPException(status_code=400, detail="site needs lat+lon or zcta")
    try:
        return GeoPoint(site.lat, site.lon)
    except InvalidInputError as e:
        raise HTTPException(status_code=400, detail=str(e)) from None


def create_app(
    snapshot: Optional[Snapshot],
    cors_origins: Optional[list[str]] = None,
    inflight_limit: int = DEFAULT_INFLIGHT_LIMIT,
    threads: int = 1,
) -> FastAPI:
    app = FastAPI(title="coveropt", version="0.1.0")
    if cors_origins:
        app.add_middleware(
            CORSMiddleware, allow_origins=cors_origins,
            allow_methods=["*"], allow_headers=["*"],
        )
    gate = threading.Semaphore(inflight_limit)

    def snap() -> Snapshot:
        if snapshot is None:
            raise HTTPException(status_code=503, detail="no snapshot loaded")
        return snapshot

    @app.get("/v1/health")
    def health():
        return {"status": "ok"}

    @app.get("/v1/coverage")
    def coverage_summary():
        s = snap()
        weights = np.asarray([d.weight for d in s.demand])
        usable = bool(np.any(~np.isnan(s.field.distances) & (weights > 0)))
        curve = (report.quantile_curve(s.field, s.demand, report.default_grid())
                 if usable else [])
        return {
            "covered": s.covered,
            "underserved": s.underserved,
            "total": s.covered + s.underserved,
            "radius_miles": s.radius_miles,
            "quantiles": [{"q": q, "miles": round(m, 4)} for q, m in curve],
        }

    @app.post("/v1/whatif")
    def whatif(req: WhatIfRequest):
        s = snap()
        if len(req.sites) > MAX_WHATIF_SITES:
            raise HTTPException(status_code=413,
                                detail=f"at most {MAX_WHATIF_SITES} sites per request")
        points = [_resolve_site(site, s) for site in req.sites]
        zcta_pos = {z: i for i, z in enumerate(s.matrix.demand_zctas)}
        newly = set()
        for p in points:
            for zcta, _ in s.demand_index.within_radius(p, s.radius_miles):
                if not s.field.covered[zcta_pos[zcta]]:
                    newly.add(zcta)
        weights = s.matrix.demand_weights
        gain = int(sum(weights[zcta_pos[z]] for z in newly))
        return {"gain": gain, "newly_covered_zctas": sorted(newly)}

    @app.post("/v1/optimize/greedy")
    def optimize_greedy(req: GreedyRequest):
        s = snap()
        if not gate.acquire(blocking=False):
            raise HTTPException(status_code=429, detail="optimizer busy")
        try:
            scope = (optimize.Scope.nation() if req.scope == "nation"
                     else optimize.Scope.for_state(req.scope))
            try:
                picks = optimize.greedy_add(s.matrix, s.existing_plan, req.k, scope)
            except InvalidInputError as e:
                raise HTTPException(status_code=422, detail=str(e)) from None
            centroid = {d.zcta: d.centroid for d in s.demand}
            return {"placements": [
                {"rank": i, "zcta": z, "lat": centroid[z].lat, "lon": centroid[z].lon,
                 "marginal_gain": g}
                for i, (z, g) in enumerate(picks, start=1)
            ]}
        finally:
            gate.release()

    @app.post("/v1/optimize/rearrange")
    def optimize_rearrange(req: RearrangeRequest):
        s = snap()
        if not gate.acquire(blocking=False):
            raise HTTPException(status_code=429, detail="optimizer busy")
        try:
            cap = optimize.CapacityConstraint(s.capacity)
            try:
                plan = optimize.random_search(
                    s.matrix, len(s.facilities), req.samples, cap,
                    seed=req.seed, threads=threads,
                )
                plan = optimize.iterative_improve(
                    plan, s.matrix, cap, seed=req.seed, patience=req.patience,
                )
            except InvalidInputError as e:
                raise HTTPException(status_code=422, detail=str(e)) from None
            return {
                "sites": [{"zcta": z, "load": plan.loads[z]} for z in plan.sites],
                "covered_before": s.existing_plan.covered_population,
                "covered_after": plan.covered_population,
                "gain": plan.covered_population - s.existing_plan.covered_population,
            }
        finally:
            gate.release()

    @app.get("/v1/geo")
    def geometry():
        s = snap()
        return {
            "facilities": report.sites_geojson(
                (f.id, f.point.lat, f.point.lon, "existing") for f in s.facilities
            ),
            "demand": report.field_geojson(s.field, s.demand),
        }

    return app


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="coveropt-server")
    parser.add_argument("--facilities", required=True)
    parser.add_argument("--demand", required=True)
    parser.add_argument("--radius", type=float, default=12.0)
    parser.add_argument("--capacity", type=int, default=optimize.DEFAULT_CAPACITY)
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8787)
    parser.add_argument("--cors-origin", action="append", default=None,
                        help="allowed UI origin; repeatable")
    args = parser.parse_args(argv)
    threads = int(os.environ.get("COVEROPT_THREADS", "1") or 1)
    snapshot = load_snapshot(args.facilities, args.demand, args.radius,
                             args.capacity, threads=threads)
    app = create_app(snapshot, cors_origins=args.cors_origin, threads=threads)
    import uvicorn

    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
