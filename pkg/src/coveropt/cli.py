"""Command-line front end: ingest, coverage, underserved, add, rearrange,
compare, synth.

Every command is a pure function of its input files, flags, and seed; runs
with identical inputs produce byte-identical outputs regardless of the
COVEROPT_THREADS setting.

Exit codes: 0 success, 2 bad flags, 3 missing file, 4 schema violation,
1 anything else. Failures print one machine-parsable line to stderr:
`coveropt: error: <category>: <detail>`.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass, fields
from pathlib import Path

from . import coverage as cov
from . import dataset, optimize, report, synth
from .errors import CoverOptError, InvalidInputError, SchemaError

EXIT_BAD_FLAGS = 2
EXIT_MISSING_FILE = 3
EXIT_SCHEMA = 4


@dataclass
class RunConfig:
    radius_miles: float = 12.0
    capacity: int = optimize.DEFAULT_CAPACITY
    seed: int = 0
    n_samples: int = optimize.DEFAULT_SAMPLES
    patience: int = optimize.DEFAULT_PATIENCE
    scope: str = "nation"
    k: int = 1
    dedupe_eps_miles: float = 0.05

    def validate(self):
        numeric = ["radius_miles", "capacity", "seed", "n_samples", "patience", "k"]
        for name in numeric:
            v = getattr(self, name)
            if name != "seed" and v <= 0:
                raise InvalidInputError(f"{name} must be positive, got {v}")
        if self.seed < 0:
            raise InvalidInputError(f"seed must be >= 0, got {self.seed}")
        if self.dedupe_eps_miles < 0:
            raise InvalidInputError(f"dedupe_eps_miles must be >= 0, got {self.dedupe_eps_miles}")
        if self.scope not in ("nation", "state"):
            raise InvalidInputError(f"scope must be nation or state, got {self.scope!r}")


_CONFIG_TYPES = {f.name: f.type for f in fields(RunConfig)}


def load_config_file(path: str) -> dict:
    """Flat key=value file mirroring RunConfig field names."""
    values = {}
    text = Path(path).read_text(encoding="utf-8")
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise SchemaError(f"config line is not key=value: {raw!r}", row=line_no)
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if key not in _CONFIG_TYPES:
            raise SchemaError(f"unknown config key {key!r}", row=line_no)
        caster = {"float": float, "int": int, "str": str}[_CONFIG_TYPES[key]]
        try:
            values[key] = caster(value)
        except ValueError:
            raise SchemaError(f"bad value for {key}: {value!r}", row=line_no) from None
    return values


def threads_from_env() -> int:
    raw = os.environ.get("COVEROPT_THREADS")
    if raw is None:
        return min(os.cpu_count() or 1, 4)
    try:
        n = int(raw)
    except ValueError:
        raise InvalidInputError(f"COVEROPT_THREADS must be an integer, got {raw!r}") from None
    if n < 1:
        raise InvalidInputError(f"COVEROPT_THREADS must be >= 1, got {n}")
    return n


def _open_text(path: str):
    try:
        return open(path, "r", encoding="utf-8", newline="")
    except FileNotFoundError:
        raise FileNotFoundError(path) from None


def _load_inputs(args, need_fragments=False):
    with _open_text(args.in_facilities) as fh:
        facilities = dataset.ingest_facilities(fh)
    with _open_text(args.in_demand) as fh:
        demand = dataset.ingest_demand(fh)
    fragments = None
    if getattr(args, "in_fragments", None):
        with _open_text(args.in_fragments) as fh:
            fragments = dataset.ingest_fragments(fh)
    elif need_fragments:
        raise InvalidInputError("--in-fragments is required for this command")
    return facilities, demand, fragments


def _region_map(fragments, kind: str) -> dict[str, str]:
    rows = [(z, rid, pop) for z, k, rid, pop in fragments if k == kind]
    return dataset.assign_region(rows)


def _state_region_map(demand, facilities) -> dict[str, str]:
    m = {d.zcta: d.state for d in demand}
    for f in facilities:
        m.setdefault(f.zip, f.state)
    return m


def _out(args, name: str) -> Path:
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    return out_dir / name


def _facility_rows(sites):
    return [
        (f.id, f.name, f.point.lat, f.point.lon, f.state, f.zip,
         f.src_directory, f.src_doj, f.src_referral, f.src_manual, f.doj_recognized)
        for f in sites
    ]


def _demand_rows(points):
    return [(d.zcta, d.centroid.lat, d.centroid.lon, d.weight, d.state) for d in points]


def cmd_ingest(args, cfg: RunConfig) -> int:
    facilities, demand, fragments = _load_inputs(args)
    deduped = dataset.dedupe_by_location(facilities, cfg.dedupe_eps_miles)
    report.emit_csv(_out(args, "facilities.csv"), dataset.FACILITY_HEADER, _facility_rows(deduped))
    report.emit_csv(_out(args, "demand.csv"), dataset.DEMAND_HEADER, _demand_rows(demand))
    if fragments is not None:
        report.emit_csv(_out(args, "fragments.csv"), dataset.FRAGMENT_HEADER, fragments)
    print(f"ingested {len(facilities)} facilities ({len(deduped)} after dedup), "
          f"{len(demand)} demand points")
    return 0


def cmd_coverage(args, cfg: RunConfig) -> int:
    threads = threads_from_env()
    facilities, demand, fragments = _load_inputs(args)
    field = cov.compute_field(demand, facilities, cfg.radius_miles, workers=threads)
    covered, underserved = cov.classify(field, demand)
    report.emit_csv(_out(args, "field.csv"), report.FIELD_HEADER, report.field_rows(field))
    curve = report.quantile_curve(field, demand, report.default_grid())
    report.emit_csv(_out(args, "quantile.csv"), report.QUANTILE_HEADER, curve)
    report.emit_geojson(_out(args, "demand.geojson"), report.field_geojson(field, demand))
    if fragments is not None:
        stats = cov.aggregate(field, demand, _region_map(fragments, args.region_kind), facilities)
        report.emit_csv(_out(args, "region_stats.csv"), report.STATS_HEADER, report.stats_rows(stats))
    summary = {"covered": covered, "underserved": underserved, "total": covered + underserved,
               "radius_miles": cfg.radius_miles}
    _out(args, "summary.json").write_text(json.dumps(summary, sort_keys=True), encoding="utf-8")
    print(f"covered {covered} underserved {underserved}")
    return 0


def cmd_underserved(args, cfg: RunConfig) -> int:
    threads = threads_from_env()
    facilities, demand, fragments = _load_inputs(args, need_fragments=True)
    field = cov.compute_field(demand, facilities, cfg.radius_miles, workers=threads)
    stats = cov.aggregate(field, demand, _region_map(fragments, args.region_kind), facilities)
    regions = cov.find_underserved(stats)
    report.emit_csv(_out(args, "region_stats.csv"), report.STATS_HEADER, report.stats_rows(stats))
    report.emit_csv(_out(args, "underserved.csv"), ["region_id"], [(r,) for r in regions])
    print(f"{len(regions)} underserved regions")
    return 0


def cmd_add(args, cfg: RunConfig) -> int:
    threads = threads_from_env()
    facilities, demand, _ = _load_inputs(args)
    field = cov.compute_field(demand, facilities, cfg.radius_miles, workers=threads)
    existing = optimize.plan_from_field(field, demand, facilities)
    matrix = cov.build_matrix(demand, [(d.zcta, d.centroid) for d in demand],
                              cfg.radius_miles, workers=threads)
    centroid = {d.zcta: d.centroid for d in demand}
    if cfg.scope == "nation":
        try:
            picks = optimize.greedy_add(matrix, existing, cfg.k)
        except InvalidInputError:
            # Saturated network: no underserved centroids left. Fall back to
            # the full candidate pool so the command still reports its
            # (zero-gain) placements instead of failing.
            picks = optimize.greedy_add(matrix, existing, cfg.k, candidates="all")
        rows = [
            (rank, z, centroid[z].lat, centroid[z].lon, gain)
            for rank, (z, gain) in enumerate(picks, start=1)
        ]
        report.emit_csv(_out(args, "added.csv"), report.GREEDY_HEADER, rows)
        sites = [(f.id, f.point.lat, f.point.lon, "existing") for f in facilities]
        sites += [(z, centroid[z].lat, centroid[z].lon, "added") for z, _ in picks]
        report.emit_geojson(_out(args, "sites.geojson"), report.sites_geojson(sites))
        total = sum(g for _, g in picks)
    else:
        results = optimize.optimize_states(
            demand, facilities, optimize.CapacityConstraint(cfg.capacity),
            mode="add-k" if cfg.k > 1 else "add-one", seed=cfg.seed,
            radius_miles=cfg.radius_miles, k=cfg.k, matrix=matrix, threads=threads,
        )
        rows = []
        for r in results:
            for rank, (z, gain) in enumerate(r.placements or [], start=1):
                rows.append((r.state, rank, z, centroid[z].lat, centroid[z].lon, gain))
        report.emit_csv(_out(args, "added_by_state.csv"),
                        ["state"] + report.GREEDY_HEADER, rows)
        total = sum(r.gain for r in results)
    print(f"added sites gain {total}")
    return 0


def cmd_rearrange(args, cfg: RunConfig) -> int:
    threads = threads_from_env()
    facilities, demand, _ = _load_inputs(args)
    field = cov.compute_field(demand, facilities, cfg.radius_miles, workers=threads)
    existing = optimize.plan_from_field(field, demand, facilities)
    matrix = cov.build_matrix(demand, [(d.zcta, d.centroid) for d in demand],
                              cfg.radius_miles, workers=threads)
    cap = optimize.CapacityConstraint(cfg.capacity)
    centroid = {d.zcta: d.centroid for d in demand}
    if cfg.scope == "nation":
        deduped_size = len(facilities)
        plan = optimize.random_search(
            matrix, deduped_size, cfg.n_samples, cap, seed=cfg.seed, threads=threads,
        )
        plan = optimize.iterative_improve(plan, matrix, cap, seed=cfg.seed,
                                          patience=cfg.patience)
        report.emit_csv(_out(args, "plan.csv"), report.PLAN_HEADER,
                        [(s, plan.loads[s]) for s in plan.sites])
        sites = [(f.id, f.point.lat, f.point.lon, "existing") for f in facilities]
        sites += [(s, centroid[s].lat, centroid[s].lon, "rearranged") for s in plan.sites]
        report.emit_geojson(_out(args, "plan.geojson"), report.sites_geojson(sites))
        summary = {
            "covered_before": existing.covered_population,
            "covered_after": plan.covered_population,
            "gain": plan.covered_population - existing.covered_population,
        }
        _out(args, "summary.json").write_text(json.dumps(summary, sort_keys=True), encoding="utf-8")
        print(f"rearranged: covered {existing.covered_population} -> {plan.covered_population}")
    else:
        results = optimize.optimize_states(
            demand, facilities, cap, mode="rearrange", seed=cfg.seed,
            radius_miles=cfg.radius_miles, n_samples=cfg.n_samples,
            patience=cfg.patience, matrix=matrix, threads=threads,
        )
        plan_rows = []
        gain_rows = []
        for r in results:
            gain_rows.append((r.state, r.gain))
            if r.plan is not None:
                for s in r.plan.sites:
                    plan_rows.append((r.state, s, r.plan.loads[s]))
        report.emit_csv(_out(args, "plan_by_state.csv"), ["state"] + report.PLAN_HEADER, plan_rows)
        report.emit_csv(_out(args, "gains_by_state.csv"), ["state", "gain"], gain_rows)
        print(f"rearranged per state: total gain {sum(r.gain for r in results)}")
    return 0


def cmd_compare(args, cfg: RunConfig) -> int:
    threads = threads_from_env()
    facilities, demand, fragments = _load_inputs(args, need_fragments=args.region_kind != "state")
    if args.region_kind == "state":
        regions = _state_region_map(demand, facilities)
    else:
        regions = _region_map(fragments, args.region_kind)
    with _open_text(args.in_plan) as fh:
        plan_sites = _read_plan_sites(fh)
    plan = optimize.NetworkPlan(sites=tuple(sorted(plan_sites)), covered_population=0,
                                assignment={}, loads={})
    rows = report.compare_networks(facilities, plan, regions)
    report.emit_csv(_out(args, "comparison.csv"), report.COMPARISON_HEADER,
                    report.comparison_rows(rows))
    if args.in_added and args.in_gains:
        gains = _build_gains(args, cfg, facilities, demand, threads)
        report.emit_csv(_out(args, "gains.csv"), report.GAINS_HEADER, report.gains_rows(gains))
    print(f"compared {len(rows)} regions")
    return 0


def _read_plan_sites(fh) -> list[str]:
    import csv as _csv

    reader = _csv.DictReader(fh)
    if reader.fieldnames is None or "zcta" not in reader.fieldnames:
        raise SchemaError("plan CSV must carry a zcta column")
    return [rec["zcta"] for rec in reader]


def _build_gains(args, cfg, facilities, demand, threads) -> list[report.GainsRow]:
    import csv as _csv

    field = cov.compute_field(demand, facilities, cfg.radius_miles, workers=threads)
    covered_by_state: dict[str, int] = {}
    for i, d in enumerate(demand):
        if field.covered[i]:
            covered_by_state[d.state] = covered_by_state.get(d.state, 0) + d.weight
    add_gain: dict[str, int] = {}
    with _open_text(args.in_added) as fh:
        for rec in _csv.DictReader(fh):
            if "state" not in rec or "marginal_gain" not in rec:
                raise SchemaError("added CSV must carry state and marginal_gain columns")
            add_gain[rec["state"]] = add_gain.get(rec["state"], 0) + int(rec["marginal_gain"])
    re_gain: dict[str, int] = {}
    with _open_text(args.in_gains) as fh:
        for rec in _csv.DictReader(fh):
            if "state" not in rec or "gain" not in rec:
                raise SchemaError("gains CSV must carry state and gain columns")
            re_gain[rec["state"]] = re_gain.get(rec["state"], 0) + int(rec["gain"])
    states = sorted({d.state for d in demand})
    return [
        report.GainsRow(s, covered_by_state.get(s, 0), add_gain.get(s, 0), re_gain.get(s, 0))
        for s in states
    ]


def cmd_synth(args, cfg: RunConfig) -> int:
    config = synth.SynthConfig(
        n_demand=args.n_demand,
        n_facilities=args.n_facilities,
        n_clusters=args.n_clusters,
        n_states=args.n_states,
        seed=cfg.seed,
    )
    data = synth.generate(config)
    report.emit_csv(_out(args, "facilities.csv"), dataset.FACILITY_HEADER,
                    _facility_rows(data.facilities))
    report.emit_csv(_out(args, "demand.csv"), dataset.DEMAND_HEADER, _demand_rows(data.demand))
    report.emit_csv(_out(args, "fragments.csv"), dataset.FRAGMENT_HEADER, data.fragments)
    print(f"synthesized {len(data.demand)} demand points, {len(data.facilities)} facilities")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="coveropt",
                                     description="Facility-network coverage analysis and optimization")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, inputs=True):
        p.add_argument("--config", help="flat key=value config file")
        p.add_argument("--radius", type=float, dest="radius_miles")
        p.add_argument("--capacity", type=int)
        p.add_argument("--seed", type=int)
        p.add_argument("--samples", type=int, dest="n_samples")
        p.add_argument("--patience", type=int)
        p.add_argument("--scope", choices=["nation", "state"])
        p.add_argument("--k", type=int)
        p.add_argument("--dedupe-eps", type=float, dest="dedupe_eps_miles")
        p.add_argument("--out-dir", required=True)
        if inputs:
            p.add_argument("--in-facilities", required=True)
            p.add_argument("--in-demand", required=True)
            p.add_argument("--in-fragments")

    p = sub.add_parser("ingest", help="validate, dedupe, and normalize input files")
    common(p)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("coverage", help="coverage field, stats, and quantile curve")
    common(p)
    p.add_argument("--region-kind", default="cbsa", choices=list(dataset.REGION_KINDS))
    p.set_defaults(func=cmd_coverage)

    p = sub.add_parser("underserved", help="regions above both third quartiles")
    common(p)
    p.add_argument("--region-kind", default="cbsa", choices=list(dataset.REGION_KINDS))
    p.set_defaults(func=cmd_underserved)

    p = sub.add_parser("add", help="greedy placement of new sites")
    common(p)
    p.set_defaults(func=cmd_add)

    p = sub.add_parser("rearrange", help="randomized capacity-constrained rearrangement")
    common(p)
    p.set_defaults(func=cmd_rearrange)

    p = sub.add_parser("compare", help="current-vs-optimal counts and gains tables")
    common(p)
    p.add_argument("--region-kind", default="cbsa", choices=list(dataset.REGION_KINDS))
    p.add_argument("--in-plan", required=True)
    p.add_argument("--in-added")
    p.add_argument("--in-gains")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("synth", help="generate a synthetic dataset")
    common(p, inputs=False)
    p.add_argument("--n-demand", type=int, default=33_000)
    p.add_argument("--n-facilities", type=int, default=2_138)
    p.add_argument("--n-clusters", type=int, default=40)
    p.add_argument("--n-states", type=int, default=20)
    p.set_defaults(func=cmd_synth)
    return parser


def resolve_config(args) -> RunConfig:
    cfg = RunConfig()
    if getattr(args, "config", None):
        if not Path(args.config).exists():
            raise FileNotFoundError(args.config)
        for key, value in load_config_file(args.config).items():
            setattr(cfg, key, value)
    for f in fields(RunConfig):
        v = getattr(args, f.name, None)
        if v is not None:
            setattr(cfg, f.name, v)
    cfg.validate()
    return cfg


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve_config(args)
        return args.func(args, cfg)
    except FileNotFoundError as e:
        print(f"coveropt: error: missing-file: {e}", file=sys.stderr)
        return EXIT_MISSING_FILE
    except SchemaError as e:
        print(f"coveropt: error: schema: {e}", file=sys.stderr)
        return EXIT_SCHEMA
    except InvalidInputError as e:
        print(f"coveropt: error: invalid-input: {e}", file=sys.stderr)
        return EXIT_SCHEMA
    except CoverOptError as e:
        print(f"coveropt: error: failed: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
