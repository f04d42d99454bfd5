"""Assign candidate edges to destination zones under topology and budget constraints.

The surrogate starts as a copy of the released fine network ``R``. Each pass
visits every destination zone once in a seeded random order, draws one
candidate uniformly from the candidates whose origin is topologically allowed
for that zone, and accepts it only if both the coarse-pair budget and the
destination worker budget can absorb its weight.
"""

from __future__ import annotations

import time
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from . import _backend
from .candidates import CandidateEdge
from .errors import DataError
from .ingest import PopulationTable
from .network import Level, ODNetwork, PartitionHierarchy, aggregate, in_strengths, out_strengths

Pair = tuple[str, str]


@dataclass
class BudgetLedger:
    """Remaining capacity per coarse pair (restricted to E_AB) and per destination zone."""

    sa2_pair_budget: dict[Pair, int]
    dzn_budget: dict[str, int]

    @classmethod
    def initial(
        cls,
        fine: ODNetwork,
        coarse: ODNetwork,
        e_ab: Iterable[Pair],
        dest_population: PopulationTable,
        hierarchy: PartitionHierarchy,
    ) -> BudgetLedger:
        """Budgets implied by the current fine network.

        Pair budget is ``w(B) - w(aggregate(fine))`` on each overlapping pair;
        destination budget is ``N_y - in_strength(fine)`` for every destination
        zone of the hierarchy (zones without a population entry count as 0).
        """
        agg = aggregate(fine, hierarchy)
        pair = {p: coarse.edges[p] - agg.weight(*p) for p in sorted(e_ab)}
        ins = in_strengths(fine)
        dzn = {y: dest_population.get(y, 0) - ins.get(y, 0) for y in hierarchy.dzn_to_sa2}
        return cls(pair, dzn)

    def copy(self) -> BudgetLedger:
        return BudgetLedger(dict(self.sa2_pair_budget), dict(self.dzn_budget))


@dataclass
class AssignmentConfig:
    seed: int = 0
    max_passes: int = 1_000_000
    wall_clock_budget: float | None = None  # seconds
    stall_passes: int = 3

    def __post_init__(self):
        if self.max_passes < 1:
            raise ValueError("max_passes must be >= 1")
        if self.stall_passes < 1:
            raise ValueError("stall_passes must be >= 1")


@dataclass
class AssignmentReport:
    edges_added: int = 0
    commuters_added: int = 0
    unassigned_edges: int = 0
    unassigned_commuters: int = 0
    accepted: int = 0
    passes: int = 0
    termination: str = "exhausted"
    trace: list[tuple[int, float, int]] = field(default_factory=list)
    remaining: list[CandidateEdge] = field(default_factory=list)
    ledger: BudgetLedger | None = None


class AssignResult(NamedTuple):
    accepted: bool
    reason: str


def allowed_candidate_pool(
    dest: str,
    gamma: ODNetwork,
    e_ab: Iterable[Pair],
    hierarchy: PartitionHierarchy,
    candidates: Sequence[CandidateEdge],
) -> list[CandidateEdge]:
    """Candidates whose origin may connect to ``dest``.

    An origin SA2 ``X`` qualifies when ``(X, dest)`` is an edge of the mixed
    coarse->destination network and ``(X, parent(dest))`` is in ``e_ab``.
    """
    dest_sa2 = hierarchy.parent(dest, Level.FINE_DEST)
    e_ab = e_ab if isinstance(e_ab, (set, frozenset)) else set(e_ab)
    phi = {x for (x, y) in gamma.keys() if y == dest and (x, dest_sa2) in e_ab}
    return [m for m in candidates if hierarchy.parent(m.origin, Level.FINE_ORIGIN) in phi]


def try_assign(
    cand: CandidateEdge,
    dest: str,
    ledger: BudgetLedger,
    hierarchy: PartitionHierarchy,
    surrogate: dict[Pair, int] | None = None,
) -> AssignResult:
    """Accept ``cand`` at ``dest`` iff both budgets can absorb its weight.

    On acceptance both budgets are decremented and, when ``surrogate`` is
    given, the weight is merged into edge ``(cand.origin, dest)``.
    """
    pair = (hierarchy.parent(cand.origin, Level.FINE_ORIGIN), hierarchy.parent(dest, Level.FINE_DEST))
    budget = ledger.sa2_pair_budget.get(pair)
    if budget is None:
        return AssignResult(False, "pair not in E_AB")
    if budget < cand.weight:
        return AssignResult(False, "sa2-budget")
    if ledger.dzn_budget.get(dest, 0) < cand.weight:
        return AssignResult(False, "dzn-budget")
    ledger.sa2_pair_budget[pair] = budget - cand.weight
    ledger.dzn_budget[dest] = ledger.dzn_budget.get(dest, 0) - cand.weight
    if surrogate is not None:
        key = (cand.origin, dest)
        surrogate[key] = surrogate.get(key, 0) + cand.weight
    return AssignResult(True, "accepted")


def _check_consistency(fine, candidates, coarse, gamma, e_ab, hierarchy):
    if fine.origin_level is not Level.FINE_ORIGIN or fine.dest_level is not Level.FINE_DEST:
        raise DataError("fine network must be SA1->DZN")
    if coarse.origin_level is not Level.COARSE or coarse.dest_level is not Level.COARSE:
        raise DataError("coarse network must be SA2->SA2")
    if gamma.origin_level is not Level.COARSE or gamma.dest_level is not Level.FINE_DEST:
        raise DataError("topology network must be SA2->DZN")
    sa1, dzn = hierarchy.sa1_to_sa2, hierarchy.dzn_to_sa2
    sa2 = set(hierarchy.sa2_codes)
    for o in fine.origins():
        if o not in sa1:
            raise DataError(f"zone {o!r} at level SA1 has no parent in hierarchy")
    for d in fine.dests():
        if d not in dzn:
            raise DataError(f"zone {d!r} at level DZN has no parent in hierarchy")
    for m in candidates:
        if m.origin not in sa1:
            raise DataError(f"candidate origin {m.origin!r} has no parent in hierarchy")
    for x, y in gamma.keys():
        if x not in sa2 or y not in dzn:
            raise DataError(f"topology edge ({x!r}, {y!r}) not covered by hierarchy")
    for pair in e_ab:
        if pair not in coarse:
            raise DataError(f"overlap pair {pair!r} absent from coarse network")


def build_surrogate(
    fine: ODNetwork,
    candidates: Sequence[CandidateEdge],
    coarse: ODNetwork,
    gamma: ODNetwork,
    e_ab: Iterable[Pair],
    dest_population: PopulationTable,
    hierarchy: PartitionHierarchy,
    cfg: AssignmentConfig | None = None,
    *,
    backend: str | None = None,
    progress=None,
) -> tuple[ODNetwork, AssignmentReport]:
    """Add candidate edges to ``fine`` and return the surrogate plus a report.

    ``progress`` is an optional callable receiving each trace row.
    """
    cfg = cfg or AssignmentConfig()
    kern = _backend.get(backend)
    e_ab = frozenset(e_ab)
    candidates = sorted(candidates)
    _check_consistency(fine, candidates, coarse, gamma, e_ab, hierarchy)

    ledger = BudgetLedger.initial(fine, coarse, e_ab, dest_population, hierarchy)

    dzns = list(hierarchy.dzn_to_sa2)
    dzn_index = {y: i for i, y in enumerate(dzns)}
    sa2s = hierarchy.sa2_codes
    sa2_index = {x: i for i, x in enumerate(sa2s)}
    pairs = list(ledger.sa2_pair_budget)
    pair_index = {p: i for i, p in enumerate(pairs)}

    # allowed origin SA2s per destination, sorted by SA2 index
    phi: list[list[tuple[int, int]]] = [[] for _ in dzns]
    for x, y in gamma.keys():
        p = pair_index.get((x, hierarchy.dzn_to_sa2[y]))
        if p is not None:
            phi[dzn_index[y]].append((sa2_index[x], p))
    phi_ptr = np.zeros(len(dzns) + 1, dtype=np.int64)
    for i, entries in enumerate(phi):
        entries.sort()
        phi_ptr[i + 1] = phi_ptr[i] + len(entries)
    phi_sa2 = np.array([x for entries in phi for x, _ in entries], dtype=np.int64)
    phi_pair = np.array([p for entries in phi for _, p in entries], dtype=np.int64)

    n_cand = len(candidates)
    cand_weight = np.array([m.weight for m in candidates], dtype=np.int64)
    cand_sa2 = np.array([sa2_index[hierarchy.sa1_to_sa2[m.origin]] for m in candidates], dtype=np.int64)
    pool = np.argsort(cand_sa2, kind="stable").astype(np.int64)
    pool_count = np.bincount(cand_sa2, minlength=len(sa2s)).astype(np.int64)
    pool_start = np.zeros(len(sa2s), dtype=np.int64)
    if len(sa2s) > 1:
        pool_start[1:] = np.cumsum(pool_count)[:-1]

    pair_budget = np.array([ledger.sa2_pair_budget[p] for p in pairs], dtype=np.int64)
    dzn_budget = np.array([ledger.dzn_budget[y] for y in dzns], dtype=np.int64)
    acc_cand = np.zeros(n_cand, dtype=np.int64)
    acc_dzn = np.zeros(n_cand, dtype=np.int64)
    n_acc = 0

    rng = np.random.default_rng(cfg.seed)
    report = AssignmentReport()
    unassigned = int(cand_weight.sum())
    t0 = time.perf_counter()
    report.trace.append((0, 0.0, unassigned))
    if progress:
        progress(report.trace[-1])
    stall = 0
    termination = "exhausted"
    pass_no = 0
    while unassigned > 0:
        if pass_no >= cfg.max_passes:
            termination = "max_passes"
            break
        if cfg.wall_clock_budget is not None and time.perf_counter() - t0 >= cfg.wall_clock_budget:
            termination = "wall_clock"
            break
        pass_no += 1
        order = rng.permutation(len(dzns)).astype(np.int64)
        draws = rng.random(len(dzns))
        n_acc, added = kern.assign_pass(
            order, draws, phi_ptr, phi_sa2, phi_pair, pool, pool_start, pool_count,
            cand_weight, pair_budget, dzn_budget, acc_cand, acc_dzn, n_acc,
        )
        unassigned -= added
        report.trace.append((pass_no, time.perf_counter() - t0, unassigned))
        if progress:
            progress(report.trace[-1])
        stall = stall + 1 if added == 0 else 0
        if stall >= cfg.stall_passes:
            termination = "stalled"
            break

    edges = dict(fine.edges)
    for k in range(n_acc):
        m = candidates[acc_cand[k]]
        key = (m.origin, dzns[acc_dzn[k]])
        edges[key] = edges.get(key, 0) + m.weight
    surrogate = ODNetwork(Level.FINE_ORIGIN, Level.FINE_DEST, edges)

    assigned = np.zeros(n_cand, dtype=bool)
    assigned[acc_cand[:n_acc]] = True
    report.remaining = [m for m, used in zip(candidates, assigned) if not used]
    report.accepted = n_acc
    report.edges_added = surrogate.edge_count - fine.edge_count
    report.commuters_added = surrogate.total_commuters - fine.total_commuters
    report.unassigned_edges = len(report.remaining)
    report.unassigned_commuters = unassigned
    report.passes = pass_no
    report.termination = termination
    report.ledger = BudgetLedger(
        {p: int(b) for p, b in zip(pairs, pair_budget)},
        {y: int(b) for y, b in zip(dzns, dzn_budget)},
    )
    return surrogate, report


def check_constraints(
    fine: ODNetwork,
    surrogate: ODNetwork,
    coarse: ODNetwork,
    gamma: ODNetwork,
    e_ab: Iterable[Pair],
    origin_population: PopulationTable,
    dest_population: PopulationTable,
    hierarchy: PartitionHierarchy,
) -> list[str]:
    """Recompute every surrogate constraint from the final networks; return violations.

    Released edges are never removed, so where ``fine`` already exceeds a
    bound the requirement is that the surrogate adds nothing there. In
    general, growth over ``fine`` must fit within ``max(0, bound - fine)``.
    """
    e_ab = frozenset(e_ab)
    problems: list[str] = []
    for pair, w in fine.items():
        ws = surrogate.weight(*pair)
        if ws < w:
            problems.append(f"released edge {pair} shrank from {w} to {ws}")
    for (o, d), w in surrogate.items():
        if fine.weight(o, d) == w:
            continue
        x = hierarchy.parent(o, Level.FINE_ORIGIN)
        y = hierarchy.parent(d, Level.FINE_DEST)
        if (x, y) not in e_ab:
            problems.append(f"added edge ({o}, {d}) aggregates to {(x, y)} outside E_AB")
        if (x, d) not in gamma:
            problems.append(f"added edge ({o}, {d}) has no topology edge ({x}, {d})")

    def _growth(label, before, after, bound):
        for key in sorted(after):
            grew = after[key] - before.get(key, 0)
            allowed = max(0, bound(key) - before.get(key, 0))
            if grew > allowed:
                problems.append(
                    f"{label} {key}: grew by {grew} past bound {bound(key)} (released {before.get(key, 0)})"
                )

    agg_s = aggregate(surrogate, hierarchy).edges
    agg_r = aggregate(fine, hierarchy).edges
    _growth("coarse pair", agg_r, {p: agg_s.get(p, 0) for p in e_ab}, lambda p: coarse.weight(*p))
    _growth("destination", in_strengths(fine), in_strengths(surrogate), lambda y: dest_population.get(y, 0))
    _growth("origin", out_strengths(fine), out_strengths(surrogate), lambda x: origin_population.get(x, 0))
    return problems


def exceeded_by_release(fine: ODNetwork, coarse: ODNetwork, e_ab: Iterable[Pair], hierarchy: PartitionHierarchy) -> int:
    """Number of overlapping coarse pairs where the released network already exceeds ``coarse``."""
    agg = aggregate(fine, hierarchy)
    return sum(1 for p in e_ab if agg.weight(*p) > coarse.weight(*p))
