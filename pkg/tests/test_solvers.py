import time

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from schedbal import _kernels
from schedbal.instance import generate_instance, make_instance
from schedbal.qubo import build_bqp, build_qubo, derive_penalties, qubo_energy
from schedbal.schedule import InfeasibleScheduleError, Schedule, evaluate, validate_schedule
from schedbal.solvers import (
    SearchSpaceTooLarge,
    SolverConfig,
    brute_force,
    hybrid_solve,
    local_improve,
    simulated_annealing,
    solve_sa,
)

from oracles import all_bitstrings, optimum

FAST = SolverConfig(sweeps=200, restarts=2)


def qubo_for(inst):
    bqp = build_bqp(inst)
    return bqp, build_qubo(bqp, derive_penalties(inst))


def monotone(trace):
    return all(b[1] <= a[1] and b[0] >= a[0] for a, b in zip(trace, trace[1:]))


# -- config ------------------------------------------------------------------

@pytest.mark.parametrize(
    "kw",
    [{"sweeps": 0}, {"restarts": 0}, {"t_final": 0}, {"t_initial": 0.01}, {"moves": "swap"}, {"flips_per_sweep": 0}],
)
def test_config_validation(kw):
    with pytest.raises(ValueError):
        SolverConfig(**kw)


# -- brute force -------------------------------------------------------------

def test_brute_single_job():
    inst = make_instance([{1: 3}], value=[{1: 4}], weights=(1, 2, 3))
    res = brute_force(inst)
    assert res.schedule == Schedule.of([[1]]) and res.breakdown.combined == 2 * 9 - 3 * 4


def test_brute_picks_cheaper_order():
    inst = make_instance([{1: 3}, {1: 4}], setup=[[0, 2], [9, 0]])
    res = brute_force(inst)
    assert res.schedule == Schedule.of([[1, 2]]) and res.breakdown.combined == 51


def test_brute_splits_for_balance():
    inst = make_instance([{1: 3, 2: 3}, {1: 4, 2: 4}])
    res = brute_force(inst)
    assert res.breakdown.balance_sum_sq == 25
    assert res.schedule == Schedule.of([[1], [2]])  # smallest of the two mirror images


def test_brute_rejects_large():
    with pytest.raises(SearchSpaceTooLarge):
        brute_force(generate_instance(12, 4, 1.0, seed=0))


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 5), st.integers(1, 3), st.integers(0, 10**6))
def test_brute_matches_enumeration(J, M, seed):
    inst = generate_instance(J, M, 0.7, seed)
    res = brute_force(inst)
    assert res.breakdown.combined == optimum(inst)
    assert res.breakdown == evaluate(inst, res.schedule)
    assert brute_force(inst).schedule == res.schedule


# -- annealing -----------------------------------------------------------------

def test_flip_delta_matches_recompute():
    inst = generate_instance(6, 3, 0.7, seed=5)
    bqp, q = qubo_for(inst)
    from schedbal.solvers import _sa_arrays

    indptr, indices, data, _ = _sa_arrays(q)
    rng = np.random.default_rng(0)
    for _ in range(1000):
        x = rng.integers(0, 2, q.n_vars).astype(np.uint8)
        h = q.linear + q.quadratic @ x + q.quadratic.T @ x
        i = int(rng.integers(q.n_vars))
        before = qubo_energy(q, x)
        d = _kernels._flip(i, x, h, indptr, indices, data)
        assert qubo_energy(q, x) - before == d
        assert np.array_equal(h, q.linear + q.quadratic @ x + q.quadratic.T @ x)


def test_zero_qubo():
    inst = make_instance([{1: 0}, {1: 0}], weights=(1, 1, 1))
    bqp = build_bqp(inst)
    from schedbal.qubo import PenaltyWeights, QuboModel
    import scipy.sparse as sp

    q = QuboModel(bqp.n_vars, np.zeros(bqp.n_vars, dtype=np.int64), sp.csr_matrix((4, 4), dtype=np.int64), 7, bqp, PenaltyWeights(1, 1, 1))
    res = simulated_annealing(q, FAST)
    assert res.energy == 7 == qubo_energy(q, res.bits)


@pytest.mark.parametrize("moves", ["bitflip", "bitflip+slotswap"])
def test_sa_energy_bookkeeping(moves):
    inst = generate_instance(7, 3, 0.8, seed=2)
    bqp, q = qubo_for(inst)
    seen = []
    res = simulated_annealing(q, SolverConfig(sweeps=150, moves=moves), on_improve=lambda t, b, e: seen.append((b.copy(), e)))
    assert res.energy == qubo_energy(q, res.bits)
    for bits, e in seen:
        assert qubo_energy(q, bits) == e
    assert monotone(res.trace) and res.trace[-1][1] == res.energy
    assert res.runs == 4 and res.flips == 4 * 150 * q.n_vars


def test_sa_deterministic():
    inst = generate_instance(6, 2, 1.0, seed=1)
    _, q = qubo_for(inst)
    a = simulated_annealing(q, SolverConfig(seed=3, sweeps=100))
    b = simulated_annealing(q, SolverConfig(seed=3, sweeps=100))
    assert np.array_equal(a.bits, b.bits) and a.energy == b.energy


def test_sa_time_budget():
    inst = generate_instance(30, 4, 1.0, seed=1)
    _, q = qubo_for(inst)
    t = time.perf_counter()
    res = simulated_annealing(q, SolverConfig(sweeps=10**6, time_budget=0.3))
    assert time.perf_counter() - t < 3
    assert res.runs == 1 and res.energy == qubo_energy(q, res.bits)


def test_sa_finds_tiny_minimum():
    inst = generate_instance(4, 1, 1.0, seed=3)  # 16 variables
    _, q = qubo_for(inst)
    emin = qubo_energy(q, all_bitstrings(q.n_vars)).min()
    hits = sum(simulated_annealing(q, SolverConfig(seed=s)).energy == emin for s in range(100))
    assert hits >= 95


# -- local search --------------------------------------------------------------

def test_local_improve_swaps_misordered():
    inst = make_instance([{1: 1}, {1: 1}], setup=[[0, 1], [8, 0]])
    assert local_improve(inst, Schedule.of([[2, 1]])) == Schedule.of([[1, 2]])


def test_local_improve_keeps_optimum():
    inst = generate_instance(5, 2, 1.0, seed=4)
    best = brute_force(inst)
    out = local_improve(inst, best.schedule)
    assert evaluate(inst, out).combined == best.breakdown.combined


def test_local_improve_rejects_infeasible():
    inst = make_instance([{1: 1}, {1: 1}])
    with pytest.raises(InfeasibleScheduleError):
        local_improve(inst, Schedule.of([[1]]))


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 12), st.integers(1, 4), st.integers(0, 10**6))
def test_local_improve_descends(J, M, seed):
    inst = generate_instance(J, M, 0.6, seed)
    seqs = [[] for _ in range(M)]
    for j in inst.jobs:
        seqs[inst.eligible(j)[-1] - 1].append(j)
    start = Schedule.of(seqs)
    values = [evaluate(inst, start).combined]
    out = local_improve(inst, start, seed=seed, on_improve=lambda d: values.append(values[-1] + d))
    assert validate_schedule(inst, out) == []
    assert all(b < a for a, b in zip(values, values[1:]))
    assert values[-1] == evaluate(inst, out).combined
    assert local_improve(inst, start, seed=seed) == out
    assert local_improve(inst, out, seed=seed) == out


# -- pipelines -------------------------------------------------------------------

def test_solve_sa_result_consistent():
    inst = generate_instance(6, 2, 1.0, seed=7)
    res = solve_sa(inst, FAST)
    assert res.feasible and res.breakdown == evaluate(inst, res.schedule)
    assert monotone(res.best_energy_trace) and res.best_energy_trace[-1][1] == res.breakdown.combined


def test_hybrid_single_leaf_is_sa():
    inst = generate_instance(5, 3, 1.0, seed=2)
    h, s = hybrid_solve(inst, FAST), solve_sa(inst, FAST)
    assert h.schedule == s.schedule and h.solver_name == "hybrid"


def test_hybrid_quality_small():
    good = 0
    for k in range(20):
        inst = generate_instance(3 + k % 4, 1 + k % 3, 1.0, seed=500 + k)
        opt = brute_force(inst).breakdown.combined
        got = hybrid_solve(inst, SolverConfig(seed=k)).breakdown.combined
        assert got >= opt
        good += got <= opt + 0.05 * abs(opt)
    assert good >= 18


@settings(max_examples=15, deadline=None)
@given(st.integers(1, 25), st.integers(1, 8), st.integers(0, 10**6))
def test_hybrid_feasible_and_deterministic(J, M, seed):
    inst = generate_instance(J, M, 0.4, seed)
    cfg = SolverConfig(seed=seed, sweeps=50, restarts=1)
    res = hybrid_solve(inst, cfg, max_vars=60)
    assert res.feasible and validate_schedule(inst, res.schedule) == []
    assert monotone(res.best_energy_trace)
    for tr in res.details.get("leaf_traces", []):
        assert monotone(tr)
    assert hybrid_solve(inst, cfg, max_vars=60).schedule == res.schedule
