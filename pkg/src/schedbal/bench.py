"""Benchmark harness: Cartesian solver runs, deviation and time-to-target summaries."""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Mapping, Sequence

from .instance import ProblemInstance
from .mip import count_mip_variables
from .qubo import count_variables
from .solvers import SolverConfig, brute_force, hybrid_solve, solve_sa
from .decompose import DEFAULT_MAX_VARS

log = logging.getLogger(__name__)

__all__ = [
    "CSV_COLUMNS",
    "BenchRecord",
    "SolverSpec",
    "deviation_pct",
    "load_solver_specs",
    "records_to_csv",
    "run_benchmark",
    "time_to_target",
]

CSV_COLUMNS = (
    "instance", "jobs", "machines", "vars_bqp", "vars_mip", "solver",
    "seed", "budget_s", "objective", "wall_s", "feasible",
)
SOLVERS = ("brute", "sa", "hybrid")


def deviation_pct(candidate, reference) -> float:
    """100 * (candidate - reference) / |reference|; positive means worse."""
    if reference == 0:
        raise ZeroDivisionError("deviation against a zero reference")
    return 100.0 * (candidate - reference) / abs(reference)


def time_to_target(trace: Sequence[tuple[float, float]], target) -> float | None:
    """First elapsed time at which the trace is at or below ``target``, else None."""
    for (_, a), (_, b) in zip(trace, trace[1:]):
        if b > a:
            raise ValueError("trace energies must be non-increasing")
    for t, e in trace:
        if e <= target:
            return t
    return None


@dataclass(frozen=True)
class SolverSpec:
    label: str
    solver: str
    config: SolverConfig = SolverConfig()
    max_vars: int = DEFAULT_MAX_VARS

    def __post_init__(self):
        if self.solver not in SOLVERS:
            raise ValueError(f"unknown solver {self.solver!r}")

    @classmethod
    def from_dict(cls, doc: Mapping) -> "SolverSpec":
        extra = set(doc) - {"label", "solver", "config", "max_vars"}
        if extra:
            raise ValueError(f"unknown solver spec keys {sorted(extra)}")
        solver = doc["solver"]
        cfg = dict(doc.get("config", {}))
        if "seed" in cfg:
            raise ValueError("seeds come from the benchmark, not the solver spec")
        return cls(
            doc.get("label", solver), solver, SolverConfig(**cfg), int(doc.get("max_vars", DEFAULT_MAX_VARS))
        )


def load_solver_specs(text: str) -> list[SolverSpec]:
    doc = json.loads(text)
    if isinstance(doc, dict):
        doc = doc.get("solvers", [])
    specs = [SolverSpec.from_dict(d) for d in doc]
    labels = [s.label for s in specs]
    if len(set(labels)) != len(labels):
        raise ValueError("solver labels must be unique")
    return specs


@dataclass
class BenchRecord:
    instance: str
    jobs: int
    machines: int
    vars_bqp: int
    vars_mip: int
    solver: str
    seed: int
    budget_s: float | None
    objective: float | None
    wall_s: float
    feasible: bool
    trace: list = field(default_factory=list, repr=False)
    error: str | None = None

    def row(self) -> list:
        return [getattr(self, c) for c in CSV_COLUMNS]


def _run_one(task) -> BenchRecord:
    name, inst, spec, seed, timing, include_build = task
    base = dict(
        instance=name,
        jobs=inst.n_jobs,
        machines=inst.n_machines,
        vars_bqp=count_variables(inst),
        vars_mip=count_mip_variables(inst),
        solver=spec.label,
        seed=seed,
        budget_s=spec.config.time_budget,
    )
    cfg = SolverConfig(**{**asdict(spec.config), "seed": seed})
    t0 = time.perf_counter()
    try:
        if spec.solver == "brute":
            res = brute_force(inst)
        elif spec.solver == "sa":
            res = solve_sa(inst, cfg)
        else:
            res = hybrid_solve(inst, cfg, spec.max_vars)
    except Exception as exc:  # recorded, the run continues
        return BenchRecord(**base, objective=None, wall_s=0.0, feasible=False, error=f"{type(exc).__name__}: {exc}")
    wall = time.perf_counter() - t0 if include_build else res.wall_time
    trace = [list(p) for p in res.best_energy_trace]
    if not timing:
        wall = 0.0
        trace = [[0.0, e] for _, e in trace]
    return BenchRecord(**base, objective=res.breakdown.combined, wall_s=wall, feasible=res.feasible, trace=trace)


def _summary(records: list[BenchRecord], timing: bool) -> dict:
    out: dict = {"instances": {}, "failures": []}
    for r in records:
        if r.error is not None:
            out["failures"].append({"instance": r.instance, "solver": r.solver, "seed": r.seed, "error": r.error})
    by_inst: dict[str, list[BenchRecord]] = {}
    for r in records:
        if r.error is None:
            by_inst.setdefault(r.instance, []).append(r)
    for name, recs in by_inst.items():
        best = min(r.objective for r in recs)
        rows = []
        for r in recs:
            dev = deviation_pct(r.objective, best) if best != 0 else (0.0 if r.objective == 0 else math.inf)
            ttt = {}
            for other in recs:
                if other.seed == r.seed and other.solver != r.solver:
                    ttt[other.solver] = time_to_target(r.trace, other.objective) if timing else None
            rows.append(
                {"solver": r.solver, "seed": r.seed, "objective": r.objective, "deviation_pct": dev, "time_to_target": ttt}
            )
        out["instances"][name] = {"best_known": best, "runs": rows}
    return out


def run_benchmark(
    instances: Sequence[tuple[str, ProblemInstance]],
    solvers: Sequence[SolverSpec],
    seeds: Sequence[int],
    jobs: int = 1,
    timing: bool = True,
    include_build: bool = False,
) -> tuple[list[BenchRecord], dict]:
    """Run every (instance, solver, seed) and summarise.

    Records come back sorted by (instance, solver label, seed) whatever the
    parallelism.  Deviation is measured against the best objective over
    all runs of the instance; time-to-target compares each run to the other
    solvers' final objective on the same seed.  With ``timing=False`` wall
    times are written as 0 and time-to-target is null, which makes the
    output byte-for-byte reproducible.
    """
    tasks = [(name, inst, spec, int(seed), timing, include_build) for name, inst in instances for spec in solvers for seed in seeds]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            records = list(pool.map(_run_one, tasks))
    else:
        records = [_run_one(t) for t in tasks]
    records.sort(key=lambda r: (r.instance, r.solver, r.seed))
    for r in records:
        if r.error is not None:
            log.warning("run failed: %s / %s / seed %d: %s", r.instance, r.solver, r.seed, r.error)
    return records, _summary(records, timing)


def records_to_csv(records: Sequence[BenchRecord]) -> str:
    """CSV of successful runs; failed runs are left out (they are in the summary)."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in records:
        if r.error is None:
            w.writerow(["" if v is None else v for v in r.row()])
    return buf.getvalue()
