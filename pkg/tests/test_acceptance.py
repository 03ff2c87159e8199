"""Acceptance suite: one test per criterion at its stated tolerance.

Each criterion prints a single [PASS]/[FAIL] line; run with
`pytest tests/test_acceptance.py -v -s` to see them as they complete.
"""

import json
import math
import os
import subprocess
import sys
import time
from contextlib import contextmanager

import numpy as np
import pytest
from fastapi.testclient import TestClient

from coveropt.cli import main
from coveropt.coverage import (
    RegionStats,
    aggregate,
    build_matrix,
    classify,
    compute_field,
    correlation,
    find_underserved,
    weighted_quantile,
)
from coveropt.dataset import assign_region, ingest_demand, ingest_facilities
from coveropt.geo import GeoPoint, build_index
from coveropt.optimize import (
    CapacityConstraint,
    NetworkPlan,
    brute_force_optimal,
    greedy_add,
    iterative_improve,
    random_search,
)
from coveropt.server import create_app, load_snapshot
from coveropt.synth import SynthConfig, generate

from conftest import make_demand, random_points

EMPTY_PLAN = NetworkPlan(sites=(), covered_population=0, assignment={}, loads={})
THREADS = min(4, os.cpu_count() or 1)


@contextmanager
def criterion(label):
    try:
        yield
    except BaseException:
        print(f"[FAIL] {label}")
        raise
    else:
        print(f"[PASS] {label}")


# --- independent oracles -----------------------------------------------------

EARTH_R = 3958.7613


def oracle_pairwise_miles(qlat, qlon, lats, lons):
    """Linear-scan distance oracle, written out independently of the library.

    Deltas are taken in degrees before converting, the numerically stable
    order for nearby points."""
    phi1 = np.radians(qlat)[:, None]
    phi2 = np.radians(lats)[None, :]
    dphi = np.radians(lats[None, :] - qlat[:, None])
    dlam = np.radians(lons[None, :] - qlon[:, None])
    h = np.sin(dphi / 2) ** 2 + np.cos(phi1) * np.cos(phi2) * np.sin(dlam / 2) ** 2
    return 2 * EARTH_R * np.arcsin(np.minimum(1.0, np.sqrt(h)))


def oracle_expansion_quantile(values, weights, q):
    expanded = sorted(v for v, w in zip(values, weights) for _ in range(w))
    n = len(expanded)
    for i, v in enumerate(expanded):
        if (i + 1) / n >= q:
            return v
    return expanded[-1]


# --- criteria ----------------------------------------------------------------


def test_a1_index_fidelity():
    with criterion("A1 index fidelity vs linear scan, 30 instances, <5s"):
        rng = np.random.default_rng(101)
        start = time.perf_counter()
        sizes = [5000, 4000, 3000] + [int(rng.integers(100, 2001)) for _ in range(27)]
        for n in sizes:
            lats, lons = random_points(rng, n)
            ids = [f"e{i:05d}" for i in range(n)]
            index = build_index(
                (ids[i], GeoPoint(lats[i], lons[i])) for i in range(n)
            )
            qlats, qlons = random_points(rng, 1000)
            got_d, got_ids = index.nearest_bulk(qlats, qlons, workers=THREADS)
            dmat = oracle_pairwise_miles(qlats, qlons, lats, lons)
            want_idx = np.argmin(dmat, axis=1)  # first min = smallest id
            want_d = dmat[np.arange(1000), want_idx]
            assert got_ids == [ids[j] for j in want_idx]
            assert np.allclose(got_d, want_d, rtol=1e-12, atol=0)
            for qi in range(0, 1000, 40):
                got = index.within_radius(GeoPoint(qlats[qi], qlons[qi]), 12.0)
                inside = np.flatnonzero(dmat[qi] <= 12.0)
                want = sorted(((dmat[qi][j], ids[j]) for j in inside))
                assert [g[0] for g in got] == [w[1] for w in want]
                assert np.allclose([g[1] for g in got], [w[0] for w in want], rtol=1e-12)
        elapsed = time.perf_counter() - start
        assert elapsed < 5.0, f"A1 took {elapsed:.2f}s"


def test_a2_haversine_anchors():
    with criterion("A2 haversine anchors and exact symmetry on 10k pairs"):
        from coveropt.geo import haversine_miles

        assert haversine_miles(GeoPoint(10, 20), GeoPoint(10, 20)) == 0.0
        d1 = haversine_miles(GeoPoint(0, 0), GeoPoint(0, 1))
        assert abs(d1 - 69.09) <= 0.05
        d2 = haversine_miles(GeoPoint(0, 0), GeoPoint(0, 180))
        assert abs(d2 - 12436.8) <= 1.0
        rng = np.random.default_rng(102)
        lats, lons = random_points(rng, 20_000, (-90, 90), (-180, 180))
        for i in range(0, 20_000, 2):
            a = GeoPoint(lats[i], lons[i])
            b = GeoPoint(lats[i + 1], lons[i + 1])
            assert haversine_miles(a, b) == haversine_miles(b, a)


def test_a3_weighted_quantile_oracle():
    with criterion("A3 weighted quantile equals expansion oracle, 1000 instances"):
        rng = np.random.default_rng(103)
        qs = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9]
        for _ in range(1000):
            n = int(rng.integers(1, 14))
            values = np.round(rng.uniform(0, 200, n), 4).tolist()
            weights = rng.integers(0, 7, n).tolist()
            if sum(weights) == 0:
                weights[rng.integers(0, n)] = 1
            results = [weighted_quantile(values, weights, q) for q in qs]
            for q, got in zip(qs, results):
                assert got == oracle_expansion_quantile(values, weights, q)
            assert all(a <= b for a, b in zip(results, results[1:]))


def test_a4_conservation_and_radius_monotonicity():
    with criterion("A4 covered+underserved conservation; covered(R) monotone"):
        rng = np.random.default_rng(104)
        for _ in range(20):
            nd = int(rng.integers(50, 500))
            nf = int(rng.integers(0, 40))
            dlats, dlons = random_points(rng, nd)
            flats, flons = random_points(rng, max(nf, 1))
            demand = [
                make_demand(f"{i + 1:05d}", dlats[i], dlons[i], int(rng.integers(0, 200)))
                for i in range(nd)
            ]
            from conftest import make_facility

            facilities = [make_facility(f"F{i}", flats[i], flons[i]) for i in range(nf)]
            total = sum(d.weight for d in demand)
            prev = -1
            for r in [1, 6, 12, 15, 50]:
                field = compute_field(demand, facilities, r, workers=THREADS)
                covered, underserved = classify(field, demand)
                assert covered + underserved == total
                assert covered >= prev
                prev = covered


def _random_mclp_instance(rng, n_demand, n_cands, box=2.0):
    dlats, dlons = random_points(rng, n_demand, (0.0, box), (0.0, box))
    demand = [
        make_demand(f"{i + 1:05d}", dlats[i], dlons[i], int(rng.integers(0, 30)))
        for i in range(n_demand)
    ]
    cands = [(demand[i].zcta, demand[i].centroid) for i in range(n_cands)]
    return build_matrix(demand, cands, 12.0)


def test_a5_greedy_exactness_and_bound():
    with criterion("A5 greedy k=1 exact on 100 instances; (1-1/e) bound on 200"):
        rng = np.random.default_rng(105)
        for i in range(100):
            n_demand = int(rng.integers(200, 2001))
            n_cands = int(rng.integers(50, min(501, n_demand + 1)))
            matrix = _random_mclp_instance(rng, n_demand, n_cands)
            t0 = time.perf_counter()
            picks = greedy_add(matrix, EMPTY_PLAN, 1, candidates="all")
            best_set, best_gain = brute_force_optimal(matrix, EMPTY_PLAN, 1)
            elapsed = time.perf_counter() - t0
            assert picks[0][1] == best_gain
            assert picks[0][0] == best_set[0]
            assert elapsed < 1.0, f"instance {i} took {elapsed:.2f}s"
        violations = 0
        for _ in range(200):
            n_demand = int(rng.integers(40, 150))
            n_cands = int(rng.integers(6, 31))
            k = int(rng.integers(1, 4))
            matrix = _random_mclp_instance(rng, n_demand, n_cands, box=1.0)
            greedy_gain = sum(g for _, g in greedy_add(matrix, EMPTY_PLAN, k, candidates="all"))
            _, opt_gain = brute_force_optimal(matrix, EMPTY_PLAN, k)
            assert opt_gain >= greedy_gain
            if greedy_gain < (1 - 1 / math.e) * opt_gain - 1e-9:
                violations += 1
        assert violations == 0


def _rearrangement_fixture():
    """10 disjoint demand clusters (weights 120..75), 5 candidates per cluster."""
    cluster_weights = [120, 115, 110, 105, 100, 95, 90, 85, 80, 75]
    demand = []
    cands = []
    for c, w in enumerate(cluster_weights):
        base_lon = float(c)  # clusters ~69 miles apart; disks disjoint at R=12
        parts = [w // 2, w // 3, w - w // 2 - w // 3]
        for j, pw in enumerate(parts):
            demand.append(make_demand(f"{c:02d}{j:03d}", 0.0, base_lon + 0.01 * j, pw))
        for s in range(5):
            cands.append((f"B{c:02d}{s:02d}", GeoPoint(0.02, base_lon + 0.005 * s)))
    matrix = build_matrix(demand, cands, 12.0)
    return matrix


def test_a6_rearrangement_contract():
    with criterion("A6 rearrange monotone+cap-valid; 20k-sample search within 2% of optimum on >=95% of 20 seeds"):
        matrix = _rearrangement_fixture()
        cap = CapacityConstraint(200)
        _, opt_gain = brute_force_optimal(matrix, EMPTY_PLAN, 5)
        assert opt_gain == 550  # top five cluster weights
        hits = 0
        for seed in range(20):
            plan = random_search(matrix, 5, n_samples=20_000, cap=cap, seed=seed,
                                 threads=THREADS)
            assert max(plan.loads.values()) <= cap.max_load
            improved = iterative_improve(plan, matrix, cap, seed=seed, patience=500)
            assert improved.covered_population >= plan.covered_population
            assert max(improved.loads.values()) <= cap.max_load
            if plan.covered_population >= 0.98 * opt_gain:
                hits += 1
        assert hits >= 19, f"only {hits}/20 seeds within 2%"


FIXTURE_FACILITIES = """id,name,lat,lon,state,zip,src_directory,src_doj,src_referral,src_manual,doj_recognized
F1,Alpha Office,40.0,-100.0,AA,00001,1,1,0,0,1
F2,Beta Office,42.0,-101.0,BB,00005,1,0,0,0,0
"""

FIXTURE_DEMAND = """zcta,lat,lon,weight,state
00001,40.05,-100.0,10,AA
00002,40.5,-100.0,20,AA
00003,40.0,-100.1,30,AA
00004,42.5,-101.0,7,BB
00005,42.0,-101.05,40,BB
00006,41.0,-99.0,55,BB
"""


@pytest.fixture
def fixture_dir(tmp_path):
    (tmp_path / "facilities.csv").write_text(FIXTURE_FACILITIES)
    (tmp_path / "demand.csv").write_text(FIXTURE_DEMAND)
    return tmp_path


def _cli_env_run(fixture_dir, out, extra, env_threads):
    cmd = [
        sys.executable, "-m", "coveropt.cli", *extra,
        "--in-facilities", str(fixture_dir / "facilities.csv"),
        "--in-demand", str(fixture_dir / "demand.csv"),
        "--out-dir", str(out),
    ]
    env = dict(os.environ, COVEROPT_THREADS=env_threads)
    proc = subprocess.run(cmd, capture_output=True, env=env)
    assert proc.returncode == 0, proc.stderr.decode()
    return {p.name: p.read_bytes() for p in sorted(out.iterdir())}


def test_a7_determinism(fixture_dir, tmp_path):
    with criterion("A7 same-seed byte-identical outputs; threads 1 vs 8 identical"):
        add_args = ["add", "--k", "2", "--seed", "11"]
        re_args = ["rearrange", "--samples", "300", "--patience", "100", "--seed", "11"]
        runs = {}
        for tag, extra, threads in [
            ("add1a", add_args, "1"), ("add1b", add_args, "1"), ("add8", add_args, "8"),
            ("re1a", re_args, "1"), ("re1b", re_args, "1"), ("re8", re_args, "8"),
        ]:
            runs[tag] = _cli_env_run(fixture_dir, tmp_path / tag, extra, threads)
        assert runs["add1a"] == runs["add1b"] == runs["add8"]
        assert runs["re1a"] == runs["re1b"] == runs["re8"]


def test_a8_scale_performance(tmp_path):
    with criterion("A8 synthetic scale: field <2s, matrix <10s, 20k networks <60s"):
        out = tmp_path / "synth"
        assert main(["synth", "--seed", "0", "--out-dir", str(out)]) == 0
        with open(out / "facilities.csv") as fh:
            facilities = ingest_facilities(fh)
        with open(out / "demand.csv") as fh:
            demand = ingest_demand(fh)
        assert len(demand) == 33_000
        assert len(facilities) >= 2_138

        t0 = time.perf_counter()
        field = compute_field(demand, facilities, 12.0, workers=THREADS)
        t_field = time.perf_counter() - t0
        assert t_field < 2.0, f"field took {t_field:.2f}s"

        t0 = time.perf_counter()
        matrix = build_matrix(demand, [(d.zcta, d.centroid) for d in demand], 12.0,
                              workers=THREADS)
        t_matrix = time.perf_counter() - t0
        assert t_matrix < 10.0, f"matrix took {t_matrix:.2f}s"

        rng = np.random.default_rng(108)
        subset = [demand[i] for i in sorted(rng.choice(len(demand), 5000, replace=False))]
        sub_matrix = build_matrix(subset, [(d.zcta, d.centroid) for d in subset], 12.0,
                                  workers=THREADS)
        cap = CapacityConstraint(int(sub_matrix.demand_weights.sum()))
        t0 = time.perf_counter()
        random_search(sub_matrix, 200, n_samples=20_000, cap=cap, seed=0, threads=THREADS)
        t_search = time.perf_counter() - t0
        assert t_search < 60.0, f"search took {t_search:.2f}s"
        print(f"  (field {t_field:.2f}s, matrix {t_matrix:.2f}s, search {t_search:.2f}s)",
              end=" ")


def test_a9_colocation_correlation():
    with criterion("A9 regional facility/demand correlation > 0.8 on co-location synthetic"):
        data = generate(SynthConfig(n_demand=8000, n_facilities=600, n_clusters=25,
                                    n_states=10, seed=0))
        regions = assign_region(
            [(z, rid, p) for z, kind, rid, p in data.fragments if kind == "cbsa"]
        )
        field = compute_field(data.demand, data.facilities, 12.0, workers=THREADS)
        stats = aggregate(field, data.demand, regions, data.facilities)
        r = correlation([s.facility_count for s in stats], [s.population for s in stats])
        assert r > 0.8, f"correlation {r:.3f}"


def test_a10_dual_quartile_detector():
    with criterion("A10 dual-quartile detector finds exactly the 2 planted regions"):
        def region(rid, mean, pop):
            return RegionStats(region_id=rid, population=pop, weighted_mean_distance=mean,
                               facility_count=0, covered_population=0,
                               underserved_population=pop)

        stats = [
            region("r1", 1, 100), region("r2", 2, 200), region("r3", 3, 300),
            region("r4", 4, 400), region("r5", 5, 500), region("r6", 6, 600),
            region("planted1", 50, 5000), region("planted2", 60, 6000),
        ]
        assert find_underserved(stats) == ["planted1", "planted2"]


def test_s1_api_cli_equivalence(fixture_dir, tmp_path):
    with criterion("S1 server responses equal CLI outputs field-for-field"):
        out = tmp_path / "cli"
        base = ["--in-facilities", str(fixture_dir / "facilities.csv"),
                "--in-demand", str(fixture_dir / "demand.csv"), "--out-dir", str(out)]
        assert main(["coverage"] + base) == 0
        assert main(["add", "--k", "1"] + base) == 0

        snapshot = load_snapshot(fixture_dir / "facilities.csv",
                                 fixture_dir / "demand.csv", 12.0)
        client = TestClient(create_app(snapshot))

        summary = json.loads((out / "summary.json").read_text())
        body = client.get("/v1/coverage").json()
        assert body["covered"] == summary["covered"]
        assert body["underserved"] == summary["underserved"]
        assert body["total"] == summary["total"]
        cli_quantiles = [
            (float(line.split(",")[0]), float(line.split(",")[1]))
            for line in (out / "quantile.csv").read_text().splitlines()[1:]
        ]
        assert len(body["quantiles"]) == len(cli_quantiles)
        for api_row, (q, miles) in zip(body["quantiles"], cli_quantiles):
            assert api_row["q"] == q
            assert api_row["miles"] == round(miles, 4)

        added = (out / "added.csv").read_text().splitlines()[1]
        rank, zcta, lat, lon, gain = added.split(",")
        greedy = client.post("/v1/optimize/greedy", json={"k": 1}).json()["placements"][0]
        assert greedy == {"rank": int(rank), "zcta": zcta, "lat": float(lat),
                          "lon": float(lon), "marginal_gain": int(gain)}

        whatif = client.post("/v1/whatif", json={"sites": [{"zcta": zcta}]}).json()
        assert whatif["gain"] == int(gain)
