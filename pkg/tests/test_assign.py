import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import FD, FO, coarse, fine, mixed, pop, random_fine, random_hierarchy
from oracles import aggregate_naive, allowed_brute, budgets_from_scratch
from odsurrogate.assign import (
    AssignmentConfig,
    BudgetLedger,
    allowed_candidate_pool,
    build_surrogate,
    check_constraints,
    try_assign,
)
from odsurrogate.candidates import CandidateEdge
from odsurrogate.errors import DataError
from odsurrogate.network import aggregate, edge_intersection, in_strengths, out_strengths
from odsurrogate.pipeline import Inputs, run


def random_instance(seed):
    """Small world with noisy coarse releases and a random candidate set."""
    rng = random.Random(seed)
    h = random_hierarchy(rng, n_sa2=rng.randint(1, 5), sa1_per=4, dzn_per=3)
    truth = random_fine(rng, h, density=0.6, wmax=25)
    R = fine({p: w for p, w in truth.items() if rng.random() < 0.6})
    agg = aggregate(truth, h)
    B = coarse({p: max(1, w + rng.randint(-3, 3)) for p, w in agg.items() if rng.random() < 0.9})
    G = aggregate(truth, h, dest=False)
    G = mixed({p: w for p, w in G.items() if rng.random() < 0.85})
    ins = in_strengths(truth)
    n_y = pop({y: ins.get(y, 0) + rng.randint(-2, 4) if ins.get(y, 0) > 2 else ins.get(y, 0) for y in h.dzn_to_sa2}, FD)
    outs = out_strengths(truth)
    n_x = pop({x: outs.get(x, 0) for x in h.sa1_to_sa2}, FO)
    r_out = out_strengths(R)
    cands = []
    for x in h.sa1_to_sa2:
        left = n_x[x] - r_out.get(x, 0)
        while left >= 3 and rng.random() < 0.8:
            w = rng.randint(3, min(12, left))
            cands.append(CandidateEdge(x, w))
            left -= w
    e_ab = edge_intersection(B, aggregate(R, h))
    return h, R, B, G, e_ab, n_x, n_y, cands


def test_no_gamma_edge_empty_pool(tiny_hierarchy):
    h = tiny_hierarchy
    cands = [CandidateEdge("a1", 3), CandidateEdge("b1", 4)]
    gamma = mixed({("A", "ya"): 5})
    assert allowed_candidate_pool("yb1", gamma, {("A", "B"), ("B", "B")}, h, cands) == []


def test_single_sa2_pool_is_all_candidates():
    from odsurrogate.network import PartitionHierarchy

    h = PartitionHierarchy({"x1": "X", "x2": "X"}, {"y": "X"})
    cands = [CandidateEdge("x1", 3), CandidateEdge("x2", 5), CandidateEdge("x2", 3)]
    assert allowed_candidate_pool("y", mixed({("X", "y"): 9}), {("X", "X")}, h, cands) == cands


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_pool_matches_brute_force(seed):
    h, R, B, G, e_ab, _, _, cands = random_instance(seed)
    for y in h.dzn_to_sa2:
        assert allowed_candidate_pool(y, G, e_ab, h, cands) == allowed_brute(y, G, e_ab, h, cands)


def test_try_assign_accept_and_reject(tiny_hierarchy):
    h = tiny_hierarchy
    ledger = BudgetLedger({("A", "B"): 10}, {"yb1": 10})
    s = {}
    assert try_assign(CandidateEdge("a1", 3), "yb1", ledger, h, s) == (True, "accepted")
    assert ledger.sa2_pair_budget[("A", "B")] == 7 and ledger.dzn_budget["yb1"] == 7
    assert s == {("a1", "yb1"): 3}
    try_assign(CandidateEdge("a1", 4), "yb1", ledger, h, s)
    assert s == {("a1", "yb1"): 7}  # merged, not duplicated

    tight = BudgetLedger({("A", "B"): 2}, {"yb1": 10})
    assert try_assign(CandidateEdge("a1", 3), "yb1", tight, h) == (False, "sa2-budget")
    assert tight.sa2_pair_budget[("A", "B")] == 2

    dzn = BudgetLedger({("A", "B"): 10}, {"yb1": 2})
    assert try_assign(CandidateEdge("a1", 3), "yb1", dzn, h).reason == "dzn-budget"
    assert try_assign(CandidateEdge("a1", 3), "ya", dzn, h).reason == "pair not in E_AB"


def test_exact_fit_accepted(tiny_hierarchy):
    ledger = BudgetLedger({("A", "B"): 3}, {"yb1": 3})
    assert try_assign(CandidateEdge("a1", 3), "yb1", ledger, tiny_hierarchy).accepted


def _simple_world(tiny_hierarchy):
    R = fine({("a1", "yb1"): 4})
    B = coarse({("A", "B"): 20})
    G = mixed({("A", "yb1"): 15})
    return R, B, G, edge_intersection(B, aggregate(R, tiny_hierarchy))


def test_empty_candidate_set(tiny_hierarchy):
    R, B, G, e_ab = _simple_world(tiny_hierarchy)
    S, rep = build_surrogate(R, [], B, G, e_ab, pop({"yb1": 30}, FD), tiny_hierarchy)
    assert S == R
    assert (rep.edges_added, rep.commuters_added, rep.unassigned_edges, rep.unassigned_commuters) == (0, 0, 0, 0)
    assert rep.termination == "exhausted" and rep.passes == 0


def test_single_candidate_added(tiny_hierarchy):
    R, B, G, e_ab = _simple_world(tiny_hierarchy)
    S, rep = build_surrogate(R, [CandidateEdge("a2", 5)], B, G, e_ab, pop({"yb1": 30}, FD), tiny_hierarchy)
    assert dict(S.edges) == {("a1", "yb1"): 4, ("a2", "yb1"): 5}
    assert rep.edges_added == 1 and rep.commuters_added == 5 and rep.termination == "exhausted"


def test_blocked_candidate_stalls(tiny_hierarchy):
    R, B, G, e_ab = _simple_world(tiny_hierarchy)
    cfg = AssignmentConfig(seed=1, stall_passes=4)
    S, rep = build_surrogate(R, [CandidateEdge("a2", 5)], B, G, e_ab, pop({"yb1": 6}, FD), tiny_hierarchy, cfg)
    assert S == R
    assert rep.termination == "stalled" and rep.passes == 4 and rep.unassigned_commuters == 5


def test_max_passes_and_wall_clock(tiny_hierarchy):
    R, B, G, e_ab = _simple_world(tiny_hierarchy)
    cands = [CandidateEdge("a2", 5)]
    _, rep = build_surrogate(R, cands, B, G, e_ab, pop({"yb1": 6}, FD), tiny_hierarchy, AssignmentConfig(max_passes=2))
    assert rep.termination == "max_passes" and rep.passes == 2
    _, rep = build_surrogate(R, cands, B, G, e_ab, pop({"yb1": 6}, FD), tiny_hierarchy, AssignmentConfig(wall_clock_budget=0))
    assert rep.termination == "wall_clock" and rep.passes == 0


def test_config_validation():
    with pytest.raises(ValueError):
        AssignmentConfig(stall_passes=0)


def test_inconsistent_levels_rejected(tiny_hierarchy):
    R, B, G, e_ab = _simple_world(tiny_hierarchy)
    with pytest.raises(DataError):
        build_surrogate(B, [], B, G, e_ab, pop({}, FD), tiny_hierarchy)


def test_candidate_origin_outside_hierarchy(tiny_hierarchy):
    R, B, G, e_ab = _simple_world(tiny_hierarchy)
    with pytest.raises(DataError):
        build_surrogate(R, [CandidateEdge("zz", 3)], B, G, e_ab, pop({}, FD), tiny_hierarchy)


def _check_all(h, R, B, G, e_ab, n_x, n_y, cands, S, rep):
    # superset
    for p, w in R.items():
        assert S.weight(*p) >= w
    # topology of additions
    for (o, d), w in S.items():
        if R.weight(o, d) != w:
            x, y = h.sa1_to_sa2[o], h.dzn_to_sa2[d]
            assert (x, y) in e_ab and (x, d) in G
    # ledger equals a from-scratch recomputation
    pair, dzn = budgets_from_scratch(R, S, B, e_ab, n_y, h)
    assert rep.ledger.sa2_pair_budget == pair
    assert rep.ledger.dzn_budget == dzn
    # budgets never driven below zero by an acceptance
    init = BudgetLedger.initial(R, B, e_ab, n_y, h)
    for p, b in pair.items():
        assert b >= min(0, init.sa2_pair_budget[p]) and (b >= 0 or b == init.sa2_pair_budget[p])
    for y, b in dzn.items():
        assert b >= 0 or b == init.dzn_budget[y]
    # conservation of candidate mass
    assert rep.commuters_added + rep.unassigned_commuters == sum(c.weight for c in cands)
    assert sum(c.weight for c in rep.remaining) == rep.unassigned_commuters
    # monotone trace
    u = [t[2] for t in rep.trace]
    assert all(a >= b for a, b in zip(u, u[1:]))
    assert u[-1] == rep.unassigned_commuters
    assert check_constraints(R, S, B, G, e_ab, n_x, n_y, h) == []


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from(["python", "cython"]))
def test_random_instances_full_recompute(seed, backend):
    from odsurrogate import _backend

    if backend == "cython" and _backend.compiled_kernels is None:
        backend = "python"
    h, R, B, G, e_ab, n_x, n_y, cands = random_instance(seed)
    S, rep = build_surrogate(R, cands, B, G, e_ab, n_y, h, AssignmentConfig(seed=seed), backend=backend)
    _check_all(h, R, B, G, e_ab, n_x, n_y, cands, S, rep)


def test_ledger_keys_subset_of_overlap(small_inputs):
    i = small_inputs
    e_ab = edge_intersection(i.B, aggregate(i.R, i.hierarchy))
    ledger = BudgetLedger.initial(i.R, i.B, e_ab, i.n_y, i.hierarchy)
    assert set(ledger.sa2_pair_budget) == set(e_ab)


def test_bundle_run_constraints_and_determinism(small_inputs):
    a = run(small_inputs, seed=3)
    b = run(small_inputs, seed=3)
    assert a.surrogate == b.surrogate
    assert a.violations == []
    h = small_inputs.hierarchy
    _check_all(
        h, small_inputs.R, small_inputs.B, small_inputs.Gamma, a.e_ab, small_inputs.n_x, small_inputs.n_y,
        a.candidates, a.surrogate, a.assignment,
    )
    assert aggregate_naive(a.surrogate, h) == aggregate(a.surrogate, h)


def test_check_constraints_detects_violations(tiny_hierarchy):
    h = tiny_hierarchy
    R, B, G, e_ab = _simple_world(h)
    n_x, n_y = pop({"a1": 4, "a2": 30}), pop({"yb1": 30, "ya": 30}, FD)
    shrunk = fine({("a1", "yb1"): 3})
    assert any("shrank" in v for v in check_constraints(R, shrunk, B, G, e_ab, n_x, n_y, h))
    off_topology = fine({("a1", "yb1"): 4, ("a2", "ya"): 3})
    msgs = check_constraints(R, off_topology, B, G, e_ab, n_x, n_y, h)
    assert any("outside E_AB" in v for v in msgs) and any("no topology edge" in v for v in msgs)
    over = fine({("a1", "yb1"): 4, ("a2", "yb1"): 17})
    assert any(v.startswith("coarse pair") for v in check_constraints(R, over, B, G, e_ab, n_x, n_y, h))
    assert any(v.startswith("destination") for v in check_constraints(R, over, B, G, e_ab, n_x, pop({"yb1": 10}, FD), h))
    assert any(v.startswith("origin") for v in check_constraints(R, over, B, G, e_ab, pop({"a1": 4, "a2": 5}), n_y, h))


def test_release_already_over_bound_allows_no_growth(tiny_hierarchy):
    h = tiny_hierarchy
    R = fine({("a1", "yb1"): 25})
    B = coarse({("A", "B"): 20})
    G = mixed({("A", "yb1"): 15})
    e_ab = edge_intersection(B, aggregate(R, h))
    n_x, n_y = pop({"a1": 25, "a2": 9}), pop({"yb1": 40}, FD)
    S, rep = build_surrogate(R, [CandidateEdge("a2", 3)], B, G, e_ab, n_y, h)
    assert S == R and rep.termination == "stalled"
    assert check_constraints(R, S, B, G, e_ab, n_x, n_y, h) == []
    grown = fine({("a1", "yb1"): 25, ("a2", "yb1"): 3})
    assert check_constraints(R, grown, B, G, e_ab, n_x, n_y, h)


def test_inputs_previous_population_fallback(small_bundle):
    i = Inputs.from_bundle(small_bundle)
    i.n_x_prev = None
    assert i.previous_populations().counts == out_strengths(small_bundle.H)
