"""Command line entry point: ``schedbal <command> ...``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .bench import load_solver_specs, records_to_csv, run_benchmark
from .decompose import DEFAULT_MAX_VARS, recursive_decompose, write_leaves
from .instance import InstanceError, generate_instance, parse_instance, serialize_instance
from .mip import build_mip, check_assignment, export_lp, parse_assignment
from .qubo import build_bqp, build_qubo, derive_penalties, write_qubo
from .schedule import evaluate, gantt_to_json, gantt_to_svg, parse_schedule, to_gantt, validate_schedule
from .solvers import SolverConfig, solve

EXIT_OK, EXIT_INPUT, EXIT_RUN = 0, 1, 2


class InputError(Exception):
    pass


def _read(path) -> str:
    try:
        return Path(path).read_text()
    except OSError as err:
        raise InputError(f"cannot read {path}: {err.strerror}") from None


def _instance(path):
    try:
        return parse_instance(_read(path))
    except InstanceError as err:
        raise InputError(f"{path}: {err}") from None


def _write(path, text: str) -> None:
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def cmd_gen(a) -> int:
    inst = generate_instance(
        a.jobs, a.machines, a.density, a.seed, machine_independent_processing=a.machine_independent
    )
    _write(a.out, serialize_instance(inst))
    return EXIT_OK


def cmd_eval(a) -> int:
    inst = _instance(a.instance)
    try:
        sched = parse_schedule(_read(a.schedule))
    except (ValueError, TypeError) as err:
        raise InputError(f"{a.schedule}: {err}") from None
    problems = validate_schedule(inst, sched)
    if problems:
        for p in problems:
            print(f"infeasible: {p}", file=sys.stderr)
        return EXIT_INPUT
    print(json.dumps(evaluate(inst, sched).as_dict(), sort_keys=True))
    if a.gantt:
        tl = to_gantt(inst, sched)
        _write(a.gantt, gantt_to_json(tl) if a.gantt.endswith(".json") else gantt_to_svg(tl))
    return EXIT_OK


def cmd_export_lp(a) -> int:
    _write(a.out, export_lp(build_mip(_instance(a.instance))))
    return EXIT_OK


def cmd_export_qubo(a) -> int:
    inst = _instance(a.instance)
    qubo = build_qubo(build_bqp(inst, full_slots=a.full_slots), derive_penalties(inst))
    if a.out in (None, "-"):
        write_qubo(qubo, sys.stdout)
    else:
        with open(a.out, "w") as fh:
            write_qubo(qubo, fh)
    return EXIT_OK


def cmd_check(a) -> int:
    model = build_mip(_instance(a.instance))
    try:
        res = check_assignment(model, parse_assignment(_read(a.assignment)))
    except (KeyError, ValueError) as err:
        raise InputError(f"{a.assignment}: {err}") from None
    print(json.dumps({"feasible": res.feasible, "objective": res.objective, "violations": res.violations}))
    return EXIT_OK if res.feasible else EXIT_INPUT


def cmd_decompose(a) -> int:
    if a.max_vars < 1:
        raise InputError("--max-vars must be at least 1")
    leaves = recursive_decompose(_instance(a.instance), max_vars=a.max_vars, seed=a.seed)
    write_leaves(leaves, a.out_dir)
    print(f"{len(leaves)} leaves written to {a.out_dir}")
    return EXIT_OK


def _config(a) -> SolverConfig:
    try:
        return SolverConfig(
            seed=a.seed, time_budget=a.time_budget, sweeps=a.sweeps, restarts=a.restarts, moves=a.moves
        )
    except ValueError as err:
        raise InputError(str(err)) from None


def cmd_solve(a) -> int:
    inst = _instance(a.instance)
    cfg = _config(a)
    try:
        res = solve(inst, a.solver, cfg, a.max_vars)
    except Exception as err:
        print(f"solver failed: {type(err).__name__}: {err}", file=sys.stderr)
        return EXIT_RUN
    _write(a.out, json.dumps(res.to_dict(), indent=1, sort_keys=True) + "\n")
    return EXIT_OK if res.feasible else EXIT_RUN


def cmd_bench(a) -> int:
    paths = sorted(Path(a.instances).glob("*.json"))
    if not Path(a.instances).is_dir():
        raise InputError(f"{a.instances} is not a directory")
    instances = [(p.stem, _instance(p)) for p in paths]
    try:
        specs = load_solver_specs(_read(a.solvers))
        seeds = [int(s) for s in a.seeds.split(",") if s.strip()]
    except (ValueError, TypeError, KeyError) as err:
        raise InputError(f"bad solver spec or seeds: {err}") from None
    records, summary = run_benchmark(
        instances, specs, seeds, jobs=a.jobs, timing=not a.no_timing, include_build=a.include_build
    )
    _write(a.out, records_to_csv(records))
    if a.summary:
        _write(a.summary, json.dumps(summary, indent=1, sort_keys=True) + "\n")
    return EXIT_RUN if summary["failures"] else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="schedbal", description="Production assignment and scheduling toolkit")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate a random instance")
    g.add_argument("--jobs", type=int, required=True)
    g.add_argument("--machines", type=int, required=True)
    g.add_argument("--density", type=float, default=1.0)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--machine-independent", action="store_true", help="same processing time on every machine")
    g.add_argument("--out")
    g.set_defaults(fn=cmd_gen)

    e = sub.add_parser("eval", help="score a schedule")
    e.add_argument("--instance", required=True)
    e.add_argument("--schedule", required=True)
    e.add_argument("--gantt", help="write a timeline (.svg, or .json for the block list)")
    e.set_defaults(fn=cmd_eval)

    lp = sub.add_parser("export-lp", help="write the MIP model as CPLEX LP text")
    lp.add_argument("--instance", required=True)
    lp.add_argument("--out")
    lp.set_defaults(fn=cmd_export_lp)

    q = sub.add_parser("export-qubo", help="write the QUBO coefficients")
    q.add_argument("--instance", required=True)
    q.add_argument("--out")
    q.add_argument("--full-slots", action="store_true")
    q.set_defaults(fn=cmd_export_qubo)

    c = sub.add_parser("check", help="check a 'name value' MIP assignment")
    c.add_argument("--instance", required=True)
    c.add_argument("--assignment", required=True)
    c.set_defaults(fn=cmd_check)

    d = sub.add_parser("decompose", help="split an instance into leaf sub-instances")
    d.add_argument("--instance", required=True)
    d.add_argument("--max-vars", type=int, default=DEFAULT_MAX_VARS)
    d.add_argument("--seed", type=int, default=0)
    d.add_argument("--out-dir", required=True)
    d.set_defaults(fn=cmd_decompose)

    s = sub.add_parser("solve", help="solve an instance")
    s.add_argument("--instance", required=True)
    s.add_argument("--solver", choices=("brute", "sa", "hybrid"), required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--time-budget", type=float)
    s.add_argument("--max-vars", type=int, default=DEFAULT_MAX_VARS)
    s.add_argument("--sweeps", type=int, default=1000)
    s.add_argument("--restarts", type=int, default=4)
    s.add_argument("--moves", choices=("bitflip", "bitflip+slotswap"), default="bitflip")
    s.add_argument("--out")
    s.set_defaults(fn=cmd_solve)

    b = sub.add_parser("bench", help="run a benchmark grid")
    b.add_argument("--instances", required=True, help="directory of instance .json files")
    b.add_argument("--solvers", required=True, help="JSON list of {label, solver, config, max_vars}")
    b.add_argument("--seeds", default="0")
    b.add_argument("--out")
    b.add_argument("--summary")
    b.add_argument("--jobs", type=int, default=1)
    b.add_argument("--include-build", action="store_true", help="time model building as well as solving")
    b.add_argument("--no-timing", action="store_true", help="write zero wall times for reproducible output")
    b.set_defaults(fn=cmd_bench)
    return p


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(message)s")
    parser = build_parser()
    try:
        a = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    try:
        return a.fn(a)
    except InputError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
