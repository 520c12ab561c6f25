import csv
import io
import math

import pytest
from hypothesis import given, strategies as st

from schedbal.bench import (
    CSV_COLUMNS,
    SolverSpec,
    deviation_pct,
    load_solver_specs,
    records_to_csv,
    run_benchmark,
    time_to_target,
)
from schedbal.instance import generate_instance
from schedbal.mip import count_mip_variables
from schedbal.qubo import count_variables
from schedbal.solvers import SolverConfig


def test_deviation_examples():
    assert deviation_pct(103, 100) == 3.0
    assert deviation_pct(-97, -100) == 3.0
    assert deviation_pct(42, 42) == 0.0
    with pytest.raises(ZeroDivisionError):
        deviation_pct(1, 0)


@given(st.integers(-10**6, 10**6), st.integers(-10**6, 10**6).filter(bool))
def test_deviation_zero_iff_equal(a, b):
    d = deviation_pct(a, b)
    assert (d == 0) == (a == b)
    assert math.copysign(1, d) == math.copysign(1, a - b) or d == 0


def test_time_to_target_examples():
    trace = [(1, 50), (2, 40), (3, 30)]
    assert time_to_target(trace, 40) == 2
    assert time_to_target(trace, 29) is None
    assert time_to_target(trace, 60) == 1
    with pytest.raises(ValueError):
        time_to_target([(1, 10), (2, 11)], 5)


def test_spec_parsing():
    specs = load_solver_specs('[{"label": "a", "solver": "sa", "config": {"sweeps": 10}}, {"solver": "brute"}]')
    assert specs[0].config.sweeps == 10 and specs[1].label == "brute"
    with pytest.raises(ValueError):
        load_solver_specs('[{"solver": "gurobi"}]')
    with pytest.raises(ValueError):
        load_solver_specs('[{"solver": "sa"}, {"solver": "sa"}]')
    with pytest.raises(ValueError):
        load_solver_specs('[{"solver": "sa", "config": {"seed": 3}}]')


def _instances():
    return [("i1", generate_instance(5, 2, 1.0, seed=1)), ("i2", generate_instance(4, 3, 0.7, seed=2))]


SPECS = [SolverSpec("brute", "brute"), SolverSpec("hybrid", "hybrid", SolverConfig(sweeps=100, restarts=2))]


def test_run_benchmark_records_and_summary():
    records, summary = run_benchmark(_instances(), SPECS, [0, 1])
    assert len(records) == 2 * 2 * 2
    for r in records:
        inst = dict(_instances())[r.instance]
        assert r.vars_bqp == count_variables(inst) and r.vars_mip == count_mip_variables(inst)
        assert r.feasible
    for name, entry in summary["instances"].items():
        objs = [r.objective for r in records if r.instance == name]
        assert entry["best_known"] == min(objs)
        brute = [r for r in entry["runs"] if r["solver"] == "brute"]
        assert all(r["deviation_pct"] == 0 for r in brute)
        for r in entry["runs"]:
            assert r["deviation_pct"] >= 0
            if r["solver"] == "brute":
                assert r["time_to_target"]["hybrid"] is not None


def test_csv_shape_and_determinism():
    a = records_to_csv(run_benchmark(_instances(), SPECS, [3], timing=False)[0])
    b = records_to_csv(run_benchmark(_instances(), SPECS, [3], timing=False)[0])
    assert a == b
    rows = list(csv.reader(io.StringIO(a)))
    assert tuple(rows[0]) == CSV_COLUMNS and len(rows) == 1 + 4


def test_parallel_matches_serial():
    serial = records_to_csv(run_benchmark(_instances(), SPECS, [0], timing=False)[0])
    parallel = records_to_csv(run_benchmark(_instances(), SPECS, [0], jobs=2, timing=False)[0])
    assert serial == parallel


def test_failures_are_recorded():
    big = [("big", generate_instance(14, 4, 1.0, seed=0))]
    records, summary = run_benchmark(big + _instances()[:1], [SolverSpec("brute", "brute")], [0])
    assert len(summary["failures"]) == 1 and summary["failures"][0]["instance"] == "big"
    assert records_to_csv(records).count("\n") == 2


def test_empty_solver_list():
    records, summary = run_benchmark(_instances(), [], [0])
    assert records == [] and summary["failures"] == []
