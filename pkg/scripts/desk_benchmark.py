"""Desk-scale benchmark: brute force vs annealing vs the hybrid pipeline.

Generates small seeded instances (so brute force gives the reference
optimum), runs every solver on every seed, writes the CSV and summary,
and prints mean deviation per solver.

    python scripts/desk_benchmark.py --out-dir bench_out --seeds 0,1,2
"""

import argparse
import json
import statistics
from pathlib import Path

from schedbal.bench import SolverSpec, records_to_csv, run_benchmark
from schedbal.instance import generate_instance, serialize_instance
from schedbal.solvers import SolverConfig


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out-dir", default="bench_out")
    ap.add_argument("--instances", type=int, default=8)
    ap.add_argument("--seeds", default="0,1,2")
    ap.add_argument("--sweeps", type=int, default=1000)
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("--no-timing", action="store_true")
    a = ap.parse_args(argv)

    out = Path(a.out_dir)
    (out / "instances").mkdir(parents=True, exist_ok=True)
    instances = []
    for k in range(a.instances):
        inst = generate_instance(4 + k % 3, 2 + k % 3, 0.8, seed=1000 + k)
        name = f"desk_{k:02d}"
        (out / "instances" / f"{name}.json").write_text(serialize_instance(inst))
        instances.append((name, inst))

    cfg = SolverConfig(sweeps=a.sweeps)
    specs = [
        SolverSpec("brute", "brute"),
        SolverSpec("sa", "sa", cfg),
        SolverSpec("hybrid", "hybrid", cfg, max_vars=40),
    ]
    seeds = [int(s) for s in a.seeds.split(",")]
    records, summary = run_benchmark(instances, specs, seeds, jobs=a.jobs, timing=not a.no_timing)
    (out / "results.csv").write_text(records_to_csv(records))
    (out / "summary.json").write_text(json.dumps(summary, indent=1, sort_keys=True) + "\n")

    devs = {}
    for entry in summary["instances"].values():
        for r in entry["runs"]:
            devs.setdefault(r["solver"], []).append(r["deviation_pct"])
    for solver, d in sorted(devs.items()):
        print(f"{solver:8s} mean deviation {statistics.mean(d):6.2f}%  max {max(d):6.2f}%  runs {len(d)}")
    if summary["failures"]:
        print(f"{len(summary['failures'])} failed runs, see summary.json")


if __name__ == "__main__":
    main()
