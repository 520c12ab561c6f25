"""Machine-graph bisection and sub-problem splitting/merging.

Machines are nodes; two machines are joined with weight equal to the
number of jobs eligible on both.  A balanced Kernighan-Lin bisection keeps
heavily shared machines together, jobs follow the machine where they are
worth most, and the recursion stops at small sub-problems.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from itertools import combinations
from typing import Sequence

import numpy as np

from .instance import ProblemInstance
from .qubo import count_variables
from .schedule import Schedule

__all__ = [
    "MachineGraph",
    "Partition",
    "SubProblem",
    "build_machine_graph",
    "cut_weight",
    "kernighan_lin_bisect",
    "merge_solutions",
    "recursive_decompose",
    "split_instance",
]

DEFAULT_MAX_VARS = 10_000


@dataclass(frozen=True)
class MachineGraph:
    nodes: tuple[int, ...]
    weights: dict[tuple[int, int], int]  # (a, b) with a < b, zero weights omitted

    def w(self, a: int, b: int) -> int:
        if a > b:
            a, b = b, a
        return self.weights.get((a, b), 0)


@dataclass(frozen=True)
class Partition:
    side_a: tuple[int, ...]
    side_b: tuple[int, ...]
    cut_weight: int


def build_machine_graph(inst: ProblemInstance) -> MachineGraph:
    weights: dict[tuple[int, int], int] = {}
    for j in inst.jobs:
        for a, b in combinations(sorted(inst.eligible(j)), 2):
            weights[(a, b)] = weights.get((a, b), 0) + 1
    return MachineGraph(tuple(inst.machines), weights)


def cut_weight(graph: MachineGraph, side_a) -> int:
    a = set(side_a)
    return sum(w for (x, y), w in graph.weights.items() if (x in a) != (y in a))


def _initial_split(nodes: Sequence[int], rng: np.random.Generator) -> tuple[list[int], list[int]]:
    ordered = sorted(nodes)
    A, B = ordered[0::2], ordered[1::2]
    for _ in range(len(ordered)):
        i, k = rng.integers(len(A)), rng.integers(len(B))
        A[i], B[k] = B[k], A[i]
    return A, B


def kernighan_lin_bisect(graph: MachineGraph, seed: int = 0) -> Partition:
    """Balanced bisection by Kernighan-Lin passes.

    Starts from an alternating split of the sorted ids scrambled by
    ``seed``-driven swaps.  Each pass greedily swaps the best unlocked pair,
    locks it, and keeps the prefix of swaps with the largest positive total
    gain; passes repeat until none has positive gain, so no single swap can
    lower the cut afterwards.
    """
    nodes = list(graph.nodes)
    if len(nodes) < 2:
        raise ValueError("bisection needs at least two nodes")
    rng = np.random.default_rng(seed)
    A, B = _initial_split(nodes, rng)
    idx = {v: k for k, v in enumerate(nodes)}
    n = len(nodes)
    Wm = np.zeros((n, n), dtype=np.int64)
    for (a, b), w in graph.weights.items():
        Wm[idx[a], idx[b]] = Wm[idx[b], idx[a]] = w

    while True:
        side = np.zeros(n, dtype=bool)  # True = in A
        side[[idx[v] for v in A]] = True
        # D = external - internal cost
        ext = np.where(side[None, :] != side[:, None], Wm, 0).sum(1)
        inn = np.where(side[None, :] == side[:, None], Wm, 0).sum(1)
        D = ext - inn
        freeA = [idx[v] for v in sorted(A)]
        freeB = [idx[v] for v in sorted(B)]
        swaps, gains = [], []
        while freeA and freeB:
            best = None
            for a in freeA:
                for b in freeB:
                    g = D[a] + D[b] - 2 * Wm[a, b]
                    if best is None or g > best[0]:
                        best = (g, a, b)
            g, a, b = best
            swaps.append((a, b))
            gains.append(int(g))
            freeA.remove(a)
            freeB.remove(b)
            # a moves to B and b moves to A
            for x in freeA:
                D[x] += 2 * Wm[x, a] - 2 * Wm[x, b]
            for y in freeB:
                D[y] += 2 * Wm[y, b] - 2 * Wm[y, a]
        prefix = np.cumsum(gains)
        k = int(np.argmax(prefix))
        if prefix[k] <= 0:
            break
        for a, b in swaps[: k + 1]:
            va, vb = nodes[a], nodes[b]
            A[A.index(va)] = vb
            B[B.index(vb)] = va

    A, B = tuple(sorted(A)), tuple(sorted(B))
    return Partition(A, B, cut_weight(graph, A))


@dataclass(frozen=True)
class SubProblem:
    """A sub-instance plus the maps from its local ids back to the root ids."""

    instance: ProblemInstance
    machine_ids: tuple[int, ...]  # local machine m -> root id machine_ids[m-1]
    job_ids: tuple[int, ...]
    root_machines: int
    root_jobs: int

    @classmethod
    def whole(cls, inst: ProblemInstance) -> "SubProblem":
        return cls(inst, tuple(inst.machines), tuple(inst.jobs), inst.n_machines, inst.n_jobs)

    def manifest(self) -> dict:
        return {"machine_ids": list(self.machine_ids), "job_ids": list(self.job_ids)}


def _restrict(inst: ProblemInstance, machines: Sequence[int], jobs: Sequence[int]) -> ProblemInstance:
    mpos = {m: k for k, m in enumerate(machines, 1)}
    elig, proc, val = [], [], []
    for j in jobs:
        ms = [m for m in inst.eligible(j) if m in mpos]
        elig.append(tuple(mpos[m] for m in ms))
        proc.append({mpos[m]: inst.p(j, m) for m in ms})
        val.append({mpos[m]: inst.v(j, m) for m in ms})
    setup = tuple(tuple(inst.s(i, j) for j in jobs) for i in jobs)
    return ProblemInstance(len(machines), len(jobs), tuple(elig), tuple(proc), tuple(val), setup, inst.weights)


def split_instance(sub: SubProblem | ProblemInstance, part: Partition) -> tuple[SubProblem, SubProblem]:
    """Send every job to the side holding its most valuable machine.

    Ties go to the lowest machine id.  Local ids in each half are
    renumbered from 1; the returned sub-problems remember the root ids.  A
    side may receive no jobs, in which case its instance has ``n_jobs == 0``.
    """
    if isinstance(sub, ProblemInstance):
        sub = SubProblem.whole(sub)
    inst = sub.instance
    side_a = set(part.side_a)
    if side_a | set(part.side_b) != set(inst.machines) or side_a & set(part.side_b):
        raise ValueError("partition must split the instance's machines")
    jobs_a, jobs_b = [], []
    for j in inst.jobs:
        best = min(inst.eligible(j), key=lambda m: (-inst.v(j, m), m))
        (jobs_a if best in side_a else jobs_b).append(j)
    out = []
    for machines, jobs in ((part.side_a, jobs_a), (part.side_b, jobs_b)):
        machines = sorted(machines)
        out.append(
            SubProblem(
                _restrict(inst, machines, jobs),
                tuple(sub.machine_ids[m - 1] for m in machines),
                tuple(sub.job_ids[j - 1] for j in jobs),
                sub.root_machines,
                sub.root_jobs,
            )
        )
    return out[0], out[1]


def recursive_decompose(
    inst: ProblemInstance | SubProblem, max_vars: int = DEFAULT_MAX_VARS, seed: int = 0
) -> list[SubProblem]:
    """Bisect until each leaf fits ``max_vars`` or has fewer than 4 machines.

    Halves without jobs are dropped (their machines stay idle).  Leaves come
    out depth-first, side A before side B.
    """
    if max_vars < 1:
        raise ValueError("max_vars must be at least 1")
    root = inst if isinstance(inst, SubProblem) else SubProblem.whole(inst)
    rng = np.random.default_rng(seed)
    leaves: list[SubProblem] = []

    def visit(sub: SubProblem, node_seed: int) -> None:
        si = sub.instance
        if si.n_machines < 4 or count_variables(si) <= max_vars:
            leaves.append(sub)
            return
        part = kernighan_lin_bisect(build_machine_graph(si), seed=node_seed)
        child_seeds = np.random.default_rng([seed, node_seed]).integers(0, 2**31, size=2)
        for child, cs in zip(split_instance(sub, part), child_seeds):
            if child.instance.n_jobs:
                visit(child, int(cs))

    visit(root, int(rng.integers(0, 2**31)))
    return leaves


def merge_solutions(parts: Sequence[tuple[SubProblem, Schedule]]) -> Schedule:
    """Map each part's schedule back to root ids and take the union."""
    if not parts:
        raise ValueError("nothing to merge")
    M, J = parts[0][0].root_machines, parts[0][0].root_jobs
    seqs: list[list[int] | None] = [None] * M
    placed: set[int] = set()
    for sub, sched in parts:
        if sched.n_machines != sub.instance.n_machines:
            raise ValueError("schedule does not match its sub-problem")
        for m_local, seq in enumerate(sched.sequences, 1):
            m = sub.machine_ids[m_local - 1]
            if seqs[m - 1] is not None:
                raise ValueError(f"machine {m} appears in more than one part")
            seqs[m - 1] = [sub.job_ids[j - 1] for j in seq]
            for j in seqs[m - 1]:
                if j in placed:
                    raise ValueError(f"job {j} appears in more than one part")
                placed.add(j)
    missing = sorted(set(range(1, J + 1)) - placed)
    if missing:
        raise ValueError(f"jobs missing from merged schedule: {missing}")
    return Schedule.of(s or [] for s in seqs)


def write_leaves(leaves: Sequence[SubProblem], out_dir) -> dict:
    """Write one instance file per leaf plus ``manifest.json``."""
    from pathlib import Path

    from .instance import serialize_instance

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest = {"leaves": []}
    for k, leaf in enumerate(leaves):
        name = f"leaf_{k:03d}.json"
        (out / name).write_text(serialize_instance(leaf.instance))
        manifest["leaves"].append({"id": k, "file": name, **leaf.manifest()})
    if leaves:
        manifest["root"] = {"n_machines": leaves[0].root_machines, "n_jobs": leaves[0].root_jobs}
    (out / "manifest.json").write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n")
    return manifest
