"""Spatial optimizers: greedy site placement and randomized network rearrangement.

Both optimizers work off a CoverageMatrix whose candidates are ZIP-centroid
sites. Coverage accounting assigns each demand point's full weight to its
nearest in-plan site within the radius (ties to the smallest site id); the
capacity constraint bounds that per-site assigned load.

All randomness is counter-based: attempt i of a search draws from a
generator seeded with (seed, stream, i), so parallel and serial runs of the
same seed produce identical results.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from .coverage import CoverageField, CoverageMatrix, compute_field, build_matrix
from .dataset import DemandPoint, FacilitySite
from .errors import InvalidInputError

DEFAULT_CAPACITY = 61_725
DEFAULT_SAMPLES = 200_000
DEFAULT_PATIENCE = 1_000

_SEARCH_STREAM = 0
_IMPROVE_STREAM = 1


@dataclass(frozen=True)
class CapacityConstraint:
    """Upper bound on the demand weight nearest-assigned to any single site."""

    max_load: int = DEFAULT_CAPACITY

    def __post_init__(self):
        if self.max_load <= 0:
            raise InvalidInputError(f"max_load must be positive, got {self.max_load}")


@dataclass(frozen=True)
class Scope:
    """Candidate-site eligibility: nationwide, or one state's centroids only."""

    kind: str = "nation"
    state: Optional[str] = None

    def __post_init__(self):
        if self.kind not in ("nation", "state"):
            raise InvalidInputError(f"scope kind must be nation or state, got {self.kind!r}")
        if self.kind == "state" and not self.state:
            raise InvalidInputError("state scope requires a state code")

    @classmethod
    def nation(cls) -> "Scope":
        return cls("nation", None)

    @classmethod
    def for_state(cls, state: str) -> "Scope":
        return cls("state", state)


@dataclass(frozen=True)
class NetworkPlan:
    """A candidate facility set with its coverage accounting."""

    sites: tuple[str, ...]
    covered_population: int
    assignment: dict[str, str]  # demand zcta -> serving site id
    loads: dict[str, int]  # site id -> assigned weight


@dataclass(frozen=True)
class StateResult:
    state: str
    mode: str
    gain: int
    covered_before: int
    covered_after: int
    placements: Optional[list[tuple[str, int]]] = None  # (zcta, marginal gain)
    plan: Optional[NetworkPlan] = None


def assign_demand(
    sites: Iterable[str], matrix: CoverageMatrix
) -> tuple[dict[str, str], dict[str, int]]:
    """Nearest-in-plan assignment and per-site loads.

    Every demand point within the radius of at least one in-plan site is
    assigned to the nearest such site; equal distances go to the smaller id.
    """
    order = sorted(set(sites))
    n = matrix.n_demand
    best_d = np.full(n, np.inf)
    best_rank = np.full(n, -1, dtype=np.int64)
    for rank, s in enumerate(order):
        m = matrix.members[s]
        d = matrix.member_dists[s]
        better = d < best_d[m]
        mm = m[better]
        best_d[mm] = d[better]
        best_rank[mm] = rank
    assigned = np.flatnonzero(best_rank >= 0)
    loads_arr = np.bincount(
        best_rank[assigned], weights=matrix.demand_weights[assigned], minlength=len(order)
    ).astype(np.int64)
    assignment = {
        matrix.demand_zctas[i]: order[best_rank[i]] for i in assigned
    }
    loads = {s: int(loads_arr[r]) for r, s in enumerate(order)}
    return assignment, loads


def plan_for_sites(sites: Iterable[str], matrix: CoverageMatrix) -> NetworkPlan:
    """Materialize a NetworkPlan (assignment, loads, coverage) for a site set."""
    assignment, loads = assign_demand(sites, matrix)
    return NetworkPlan(
        sites=tuple(sorted(set(sites))),
        covered_population=sum(loads.values()),
        assignment=assignment,
        loads=loads,
    )


def plan_from_field(field: CoverageField, demand: Sequence[DemandPoint],
                    facilities: Sequence[FacilitySite]) -> NetworkPlan:
    """The existing facility network as a NetworkPlan."""
    assignment: dict[str, str] = {}
    loads: dict[str, int] = {f.id: 0 for f in facilities}
    covered = 0
    for i, d in enumerate(demand):
        if field.covered[i]:
            fid = field.nearest_ids[i]
            assert fid is not None
            assignment[d.zcta] = fid
            loads[fid] = loads.get(fid, 0) + d.weight
            covered += d.weight
    return NetworkPlan(
        sites=tuple(sorted(loads)),
        covered_population=covered,
        assignment=assignment,
        loads=loads,
    )


def _covered_mask_of_plan(plan: NetworkPlan, matrix: CoverageMatrix) -> np.ndarray:
    idx = {z: i for i, z in enumerate(matrix.demand_zctas)}
    mask = np.zeros(matrix.n_demand, dtype=bool)
    for z in plan.assignment:
        i = idx.get(z)
        if i is not None:
            mask[i] = True
    return mask


def _scope_filter(matrix: CoverageMatrix, ids: Iterable[str], scope: Scope) -> list[str]:
    if scope.kind == "nation":
        return sorted(ids)
    state_of = dict(zip(matrix.demand_zctas, matrix.demand_states))
    return sorted(c for c in ids if state_of.get(c) == scope.state)


def greedy_add(
    matrix: CoverageMatrix,
    existing: NetworkPlan,
    k: int,
    scope: Scope = Scope.nation(),
    candidates: str = "underserved",
) -> list[tuple[str, int]]:
    """Greedily place k new sites, maximizing newly covered weight per step.

    `candidates` picks the pool: "underserved" (centroids of demand points
    not covered by the existing network, the default) or "all" (every
    candidate centroid in scope). Ties go to the smallest zcta; a selected
    centroid leaves the pool. Returns [(zcta, marginal_gain), ...] in
    selection order.
    """
    if k < 1:
        raise InvalidInputError(f"k must be >= 1, got {k}")
    covered = _covered_mask_of_plan(existing, matrix)
    if candidates == "underserved":
        zcta_idx = {z: i for i, z in enumerate(matrix.demand_zctas)}
        pool = [
            c for c in matrix.candidate_ids
            if c in zcta_idx and not covered[zcta_idx[c]]
        ]
    elif candidates == "all":
        pool = list(matrix.candidate_ids)
    else:
        raise InvalidInputError(f"unknown candidate policy {candidates!r}")
    pool = _scope_filter(matrix, pool, scope)
    if not pool:
        raise InvalidInputError("empty candidate set")
    if k > len(pool):
        raise InvalidInputError(f"k={k} exceeds {len(pool)} eligible candidates")
    weights = matrix.demand_weights
    picks: list[tuple[str, int]] = []
    for _ in range(k):
        best_gain = -1
        best_c = None
        for c in pool:
            m = matrix.members[c]
            gain = int(weights[m[~covered[m]]].sum())
            if gain > best_gain:
                best_gain = gain
                best_c = c
        assert best_c is not None
        covered[matrix.members[best_c]] = True
        picks.append((best_c, best_gain))
        pool.remove(best_c)
    return picks


def _uncovered_bitmask(
    matrix: CoverageMatrix, candidate: str, covered: np.ndarray,
    bit_offsets: np.ndarray, n_bits: int,
) -> int:
    # Weighted bitmask: demand point i occupies weights[i] consecutive bits,
    # so bit_count() of a union equals its covered weight exactly.
    m = matrix.members[candidate]
    m = m[~covered[m]]
    w = matrix.demand_weights[m]
    m, w = m[w > 0], w[w > 0]
    if m.size == 0:
        return 0
    total = int(w.sum())
    pos = (np.repeat(bit_offsets[m], w)
           + np.arange(total, dtype=np.int64)
           - np.repeat(np.cumsum(w) - w, w))
    bits = np.zeros(n_bits, dtype=np.uint8)
    bits[pos] = 1
    return int.from_bytes(np.packbits(bits, bitorder="little").tobytes(), "little")


def brute_force_optimal(
    matrix: CoverageMatrix,
    existing: NetworkPlan,
    k: int,
    candidate_ids: Optional[Iterable[str]] = None,
) -> tuple[tuple[str, ...], int]:
    """Exact maximum newly covered weight over all k-subsets of candidates.

    Testing oracle; guarded to C(n, k) <= 1e7. Ties break to the
    lexicographically smallest zcta set.
    """
    cands = sorted(candidate_ids) if candidate_ids is not None else sorted(matrix.candidate_ids)
    n = len(cands)
    if k < 1:
        raise InvalidInputError(f"k must be >= 1, got {k}")
    if k > n:
        raise InvalidInputError(f"k={k} exceeds {n} candidates")
    if math.comb(n, k) > 10_000_000:
        raise InvalidInputError(f"C({n}, {k}) exceeds the enumeration guard")
    covered = _covered_mask_of_plan(existing, matrix)
    bit_offsets = np.concatenate(([0], np.cumsum(matrix.demand_weights)))[:-1]
    n_bits = int(matrix.demand_weights.sum())
    masks = [_uncovered_bitmask(matrix, c, covered, bit_offsets, n_bits) for c in cands]
    gains = [m.bit_count() for m in masks]
    # suffix_top[r][i]: sum of the r largest single-candidate gains in cands[i:],
    # an upper bound on any r further picks.
    suffix_top = [[0] * (n + 1) for _ in range(k + 1)]
    for r in range(1, k + 1):
        top: list[int] = []
        for i in range(n - 1, -1, -1):
            top.append(gains[i])
            top.sort(reverse=True)
            del top[r:]
            suffix_top[r][i] = sum(top)
    best_gain = -1
    best_set: tuple[str, ...] = ()

    def dfs(i: int, depth: int, union: int, chosen: list[str]):
        nonlocal best_gain, best_set
        if depth == k:
            gain = union.bit_count()
            if gain > best_gain:
                best_gain = gain
                best_set = tuple(chosen)
            return
        remaining = k - depth
        if n - i < remaining:
            return
        if union.bit_count() + suffix_top[remaining][i] <= best_gain:
            return
        for j in range(i, n - remaining + 1):
            chosen.append(cands[j])
            dfs(j + 1, depth + 1, union | masks[j], chosen)
            chosen.pop()
            if union.bit_count() + suffix_top[remaining][j + 1] <= best_gain:
                break

    dfs(0, 0, 0, [])
    return best_set, best_gain


class _NetworkEvaluator:
    """Shared arrays for scoring many candidate networks quickly."""

    def __init__(
        self,
        matrix: CoverageMatrix,
        candidate_ids: Sequence[str],
        cap: CapacityConstraint,
        base_covered: Optional[np.ndarray],
    ):
        self.matrix = matrix
        self.cands = list(candidate_ids)
        self.cap = cap
        self.base = base_covered
        self.base_weight = (
            int(matrix.demand_weights[base_covered].sum()) if base_covered is not None else 0
        )
        self.members = [matrix.members[c] for c in self.cands]
        self.indisk = np.asarray([matrix.covered_weight[c] for c in self.cands], dtype=np.int64)

    def objective(self, picks: np.ndarray) -> int:
        """Total covered weight of the network plus any fixed base coverage."""
        mask = np.zeros(self.matrix.n_demand, dtype=bool)
        for j in picks:
            mask[self.members[j]] = True
        if self.base is not None:
            mask |= self.base
        return int(self.matrix.demand_weights[mask].sum())

    def cap_ok(self, picks: np.ndarray) -> bool:
        # A site's load never exceeds its in-disk weight, so a cheap bound
        # settles most networks without the exact assignment.
        if int(self.indisk[picks].max()) <= self.cap.max_load:
            return True
        sites = [self.cands[j] for j in picks]
        _, loads = assign_demand(sites, self.matrix)
        return max(loads.values(), default=0) <= self.cap.max_load

    def evaluate(self, picks: np.ndarray) -> tuple[bool, int]:
        if not self.cap_ok(picks):
            return False, -1
        return True, self.objective(picks)


def _attempt_picks(seed: int, attempt: int, n_cands: int, size: int) -> np.ndarray:
    rng = np.random.default_rng([seed, _SEARCH_STREAM, attempt])
    return rng.choice(n_cands, size=size, replace=False)


def random_search(
    matrix: CoverageMatrix,
    network_size: int,
    n_samples: int = DEFAULT_SAMPLES,
    cap: CapacityConstraint = CapacityConstraint(),
    seed: int = 0,
    candidate_ids: Optional[Iterable[str]] = None,
    base_covered: Optional[np.ndarray] = None,
    threads: int = 1,
) -> NetworkPlan:
    """Best of n_samples uniform random networks of `network_size` centroids.

    Networks violating the capacity constraint are redrawn (they do not
    count against n_samples) up to a hard ceiling of 10 * n_samples
    attempts. Ties keep the first-encountered network; the result is fully
    determined by the seed regardless of thread count.
    """
    cands = sorted(candidate_ids) if candidate_ids is not None else sorted(matrix.candidate_ids)
    if network_size < 1:
        raise InvalidInputError(f"network_size must be >= 1, got {network_size}")
    if network_size > len(cands):
        raise InvalidInputError(
            f"network_size {network_size} exceeds {len(cands)} candidate centroids"
        )
    if n_samples < 1:
        raise InvalidInputError(f"n_samples must be >= 1, got {n_samples}")
    ev = _NetworkEvaluator(matrix, cands, cap, base_covered)
    max_attempts = 10 * n_samples

    def eval_chunk(bounds: tuple[int, int]) -> tuple[np.ndarray, np.ndarray]:
        lo, hi = bounds
        valid = np.zeros(hi - lo, dtype=bool)
        objs = np.full(hi - lo, -1, dtype=np.int64)
        for a in range(lo, hi):
            picks = _attempt_picks(seed, a, len(cands), network_size)
            ok, obj = ev.evaluate(picks)
            valid[a - lo] = ok
            objs[a - lo] = obj
        return valid, objs

    chunk = 512
    bounds = [(lo, min(lo + chunk, max_attempts)) for lo in range(0, max_attempts, chunk)]
    valid_parts: list[np.ndarray] = []
    obj_parts: list[np.ndarray] = []
    n_valid = 0
    if threads > 1:
        # Submit in waves so an early quota stop does not evaluate the
        # whole 10x attempt budget; results are merged in attempt order.
        wave = max(threads * 4, 1)
        with ThreadPoolExecutor(max_workers=threads) as pool:
            for w in range(0, len(bounds), wave):
                for valid, objs in pool.map(eval_chunk, bounds[w : w + wave]):
                    valid_parts.append(valid)
                    obj_parts.append(objs)
                    n_valid += int(valid.sum())
                if n_valid >= n_samples:
                    break
    else:
        for b in bounds:
            valid, objs = eval_chunk(b)
            valid_parts.append(valid)
            obj_parts.append(objs)
            n_valid += int(valid.sum())
            if n_valid >= n_samples:
                break
    valid = np.concatenate(valid_parts)
    objs = np.concatenate(obj_parts)
    if n_valid == 0:
        raise InvalidInputError(
            f"no capacity-valid network found in {max_attempts} attempts"
        )
    # Truncate to the attempt at which the n_samples-th valid draw occurred,
    # so thread scheduling cannot change which attempts are considered.
    valid_positions = np.flatnonzero(valid)
    if len(valid_positions) > n_samples:
        cutoff = valid_positions[n_samples - 1]
        valid = valid[: cutoff + 1]
        objs = objs[: cutoff + 1]
    best_obj = objs[valid].max()
    best_attempt = int(np.flatnonzero(valid & (objs == best_obj))[0])
    picks = _attempt_picks(seed, best_attempt, len(cands), network_size)
    return plan_for_sites([cands[j] for j in picks], matrix)


def iterative_improve(
    plan: NetworkPlan,
    matrix: CoverageMatrix,
    cap: CapacityConstraint = CapacityConstraint(),
    seed: int = 0,
    patience: int = DEFAULT_PATIENCE,
    candidate_ids: Optional[Iterable[str]] = None,
    base_covered: Optional[np.ndarray] = None,
) -> NetworkPlan:
    """Relocate the lowest-load site to random unused centroids, keeping
    strict coverage improvements that respect the capacity constraint.

    Stops after `patience` consecutive rejected moves. Coverage never
    decreases; the result is deterministic for a given seed.
    """
    if patience < 1:
        raise InvalidInputError(f"patience must be >= 1, got {patience}")
    if max(plan.loads.values(), default=0) > cap.max_load:
        raise InvalidInputError("input plan violates the capacity constraint")
    cands = sorted(candidate_ids) if candidate_ids is not None else sorted(matrix.candidate_ids)
    cand_pos = {c: i for i, c in enumerate(cands)}
    for s in plan.sites:
        if s not in cand_pos:
            raise InvalidInputError(f"plan site {s!r} is not a candidate centroid")
    ev = _NetworkEvaluator(matrix, cands, cap, base_covered)
    rng = np.random.default_rng([seed, _IMPROVE_STREAM])
    sites = list(plan.sites)
    picks = np.asarray([cand_pos[s] for s in sites], dtype=np.int64)
    in_plan = np.zeros(len(cands), dtype=bool)
    in_plan[picks] = True
    current_obj = ev.objective(picks)
    loads = dict(plan.loads)
    rejections = 0
    while rejections < patience:
        victim = min(sites, key=lambda s: (loads.get(s, 0), s))
        vi = sites.index(victim)
        unused = np.flatnonzero(~in_plan)
        if unused.size == 0:
            break
        new_pos = int(unused[rng.integers(unused.size)])
        old_pos = picks[vi]
        picks[vi] = new_pos
        ok = ev.cap_ok(picks)
        new_obj = ev.objective(picks) if ok else -1
        if ok and new_obj > current_obj:
            in_plan[old_pos] = False
            in_plan[new_pos] = True
            sites[vi] = cands[new_pos]
            current_obj = new_obj
            _, loads = assign_demand(sites, matrix)
            rejections = 0
        else:
            picks[vi] = old_pos
            rejections += 1
    return plan_for_sites(sites, matrix)


def eligible_network_size(facilities: Sequence[FacilitySite], state: Optional[str] = None) -> int:
    if state is None:
        return len(facilities)
    return sum(1 for f in facilities if f.state == state)


def optimize_states(
    demand: Sequence[DemandPoint],
    facilities: Sequence[FacilitySite],
    cap: CapacityConstraint = CapacityConstraint(),
    mode: str = "add-one",
    seed: int = 0,
    radius_miles: float = 12.0,
    k: int = 1,
    n_samples: int = DEFAULT_SAMPLES,
    patience: int = DEFAULT_PATIENCE,
    matrix: Optional[CoverageMatrix] = None,
    threads: int = 1,
) -> list[StateResult]:
    """Run one optimizer per state with state-scoped candidate sites.

    Placement is restricted to each state's centroids, but coverage counts
    any in-plan or existing site within the radius regardless of state.
    For rearrangement, a state whose best found network covers less than
    the current one keeps the current network (gain 0).
    """
    if mode not in ("add-one", "add-k", "rearrange"):
        raise InvalidInputError(f"unknown mode {mode!r}")
    field = compute_field(demand, facilities, radius_miles, workers=threads)
    existing = plan_from_field(field, demand, facilities)
    baseline = existing.covered_population
    if matrix is None:
        matrix = build_matrix(
            demand, [(d.zcta, d.centroid) for d in demand], radius_miles, workers=threads
        )
    states = sorted({d.state for d in demand})
    results: list[StateResult] = []
    for rank, state in enumerate(states):
        state_seed = int(np.random.SeedSequence([seed, rank]).generate_state(1)[0])
        if mode in ("add-one", "add-k"):
            kk = 1 if mode == "add-one" else k
            try:
                picks = greedy_add(matrix, existing, kk, Scope.for_state(state))
            except InvalidInputError:
                results.append(StateResult(state, mode, 0, baseline, baseline, placements=[]))
                continue
            gain = sum(g for _, g in picks)
            results.append(StateResult(
                state, mode, gain, baseline, baseline + gain, placements=picks,
            ))
        else:
            size = eligible_network_size(facilities, state)
            state_cands = [d.zcta for d in demand if d.state == state]
            if size == 0 or size > len(state_cands):
                results.append(StateResult(state, mode, 0, baseline, baseline, plan=None))
                continue
            external = compute_field(
                demand, [f for f in facilities if f.state != state], radius_miles,
                workers=threads,
            )
            base_mask = np.asarray(external.covered, dtype=bool)
            plan = random_search(
                matrix, size, n_samples, cap, seed=state_seed,
                candidate_ids=state_cands, base_covered=base_mask, threads=threads,
            )
            plan = iterative_improve(
                plan, matrix, cap, seed=state_seed, patience=patience,
                candidate_ids=state_cands, base_covered=base_mask,
            )
            after = int(matrix.demand_weights[
                base_mask | _covered_mask_of_plan(plan, matrix)
            ].sum())
            if after <= baseline:
                results.append(StateResult(state, mode, 0, baseline, baseline, plan=None))
            else:
                results.append(StateResult(
                    state, mode, after - baseline, baseline, after, plan=plan,
                ))
    return results
