import json

import pytest
from hypothesis import given, settings, strategies as st

from schedbal.decompose import (
    MachineGraph,
    build_machine_graph,
    cut_weight,
    kernighan_lin_bisect,
    merge_solutions,
    recursive_decompose,
    split_instance,
    write_leaves,
)
from schedbal.instance import generate_instance, make_instance
from schedbal.qubo import count_variables
from schedbal.schedule import Schedule, validate_schedule

from oracles import balanced_cuts


def graph(n, edges):
    return MachineGraph(tuple(range(1, n + 1)), {tuple(sorted(e)): w for e, w in edges.items()})


def test_graph_weights():
    inst = make_instance([{1: 1, 2: 1}, {2: 1, 3: 1}])
    g = build_machine_graph(inst)
    assert (g.w(1, 2), g.w(2, 3), g.w(1, 3)) == (1, 1, 0)
    disjoint = build_machine_graph(make_instance([{1: 1}, {2: 1}]))
    assert disjoint.weights == {}


def test_kl_finds_obvious_cut():
    g = graph(4, {(1, 2): 10, (3, 4): 10, (1, 3): 1})
    for seed in range(5):
        part = kernighan_lin_bisect(g, seed)
        assert {part.side_a, part.side_b} == {(1, 2), (3, 4)}
        assert part.cut_weight == 1


def test_kl_two_nodes_and_errors():
    part = kernighan_lin_bisect(graph(2, {(1, 2): 3}))
    assert {part.side_a, part.side_b} == {(1,), (2,)} and part.cut_weight == 3
    with pytest.raises(ValueError):
        kernighan_lin_bisect(graph(1, {}))


def test_kl_odd_sizes_differ_by_one():
    part = kernighan_lin_bisect(graph(5, {(1, 2): 1, (2, 3): 1, (4, 5): 2}), seed=3)
    assert sorted(map(len, (part.side_a, part.side_b))) == [2, 3]


def _one_swap_stable(g, part):
    base = part.cut_weight
    for a in part.side_a:
        for b in part.side_b:
            side = (set(part.side_a) - {a}) | {b}
            if cut_weight(g, side) < base:
                return False
    return True


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 8), st.integers(0, 10**6))
def test_kl_local_optimum(n, seed):
    inst = generate_instance(3 * n, n, 0.35, seed)
    g = build_machine_graph(inst)
    part = kernighan_lin_bisect(g, seed)
    assert part.cut_weight == cut_weight(g, part.side_a)
    assert _one_swap_stable(g, part)
    assert part.cut_weight <= max(balanced_cuts(g))
    assert kernighan_lin_bisect(g, seed) == part


def test_split_assigns_by_best_value():
    inst = make_instance(
        [{1: 1, 3: 1}, {2: 1, 3: 1}, {1: 1, 4: 1}],
        value=[{1: 9, 3: 1}, {2: 4, 3: 4}, {1: 2, 4: 2}],
    )
    part = kernighan_lin_bisect(build_machine_graph(inst))
    a, b = split_instance(inst, part)
    side_of = {}
    for sub in (a, b):
        for j in sub.job_ids:
            side_of[j] = set(sub.machine_ids)
    assert 1 in side_of[1] and 2 in side_of[2] and 1 in side_of[3]


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 20), st.integers(2, 8), st.integers(0, 10**6))
def test_split_preserves_jobs(J, M, seed):
    inst = generate_instance(J, M, 0.4, seed)
    a, b = split_instance(inst, kernighan_lin_bisect(build_machine_graph(inst), seed))
    assert sorted(a.job_ids + b.job_ids) == list(inst.jobs)
    for sub in (a, b):
        for lj, j in enumerate(sub.job_ids, 1):
            assert sub.instance.eligible(lj)
            for lm in sub.instance.eligible(lj):
                m = sub.machine_ids[lm - 1]
                assert sub.instance.p(lj, lm) == inst.p(j, m) and sub.instance.v(lj, lm) == inst.v(j, m)
            for lk, k in enumerate(sub.job_ids, 1):
                assert sub.instance.s(lj, lk) == inst.s(j, k)


def test_recursive_stop_rules():
    small = generate_instance(4, 6, 1.0, seed=0)
    assert [leaf.instance for leaf in recursive_decompose(small, max_vars=10**6)] == [small]
    three = generate_instance(40, 3, 1.0, seed=0)
    assert len(recursive_decompose(three, max_vars=1)) == 1
    eight = generate_instance(30, 8, 0.6, seed=2)
    leaves = recursive_decompose(eight, max_vars=1, seed=4)
    assert all(leaf.instance.n_machines < 4 for leaf in leaves)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 30), st.integers(1, 10), st.integers(1, 400), st.integers(0, 10**6))
def test_recursive_leaves_and_merge(J, M, max_vars, seed):
    inst = generate_instance(J, M, 0.4, seed)
    leaves = recursive_decompose(inst, max_vars=max_vars, seed=seed)
    assert recursive_decompose(inst, max_vars=max_vars, seed=seed) == leaves
    for leaf in leaves:
        assert count_variables(leaf.instance) <= max_vars or leaf.instance.n_machines < 4
    # any feasible leaf schedules merge into a feasible whole
    parts = []
    for leaf in leaves:
        li = leaf.instance
        seqs = [[] for _ in range(li.n_machines)]
        for j in li.jobs:
            seqs[li.eligible(j)[0] - 1].append(j)
        parts.append((leaf, Schedule.of(seqs)))
    assert validate_schedule(inst, merge_solutions(parts)) == []


def test_merge_errors():
    inst = generate_instance(6, 4, 1.0, seed=1)
    a, b = split_instance(inst, kernighan_lin_bisect(build_machine_graph(inst)))
    sa = Schedule.of([list(a.instance.jobs)] + [[]] * (a.instance.n_machines - 1))
    sb = Schedule.of([list(b.instance.jobs)] + [[]] * (b.instance.n_machines - 1))
    assert validate_schedule(inst, merge_solutions([(a, sa), (b, sb)])) == []
    with pytest.raises(ValueError, match="more than one part"):
        merge_solutions([(a, sa), (a, sa), (b, sb)])
    if a.job_ids:
        with pytest.raises(ValueError, match="missing"):
            merge_solutions([(a, sa)] if b.job_ids else [(b, sb)])


def test_single_part_identity():
    inst = generate_instance(5, 2, 1.0, seed=1)
    (leaf,) = recursive_decompose(inst)
    sched = Schedule.of([[1, 3, 5], [2, 4]])
    assert merge_solutions([(leaf, sched)]) == sched


def test_write_leaves(tmp_path):
    inst = generate_instance(12, 6, 0.5, seed=3)
    leaves = recursive_decompose(inst, max_vars=20, seed=1)
    manifest = write_leaves(leaves, tmp_path)
    saved = json.loads((tmp_path / "manifest.json").read_text())
    assert saved == manifest and len(saved["leaves"]) == len(leaves)
    for entry in saved["leaves"]:
        assert (tmp_path / entry["file"]).exists()
