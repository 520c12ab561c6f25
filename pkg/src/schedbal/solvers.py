"""Solvers: exhaustive oracle, QUBO annealing, local search and the hybrid pipeline."""

from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from . import _kernels
from .decompose import DEFAULT_MAX_VARS, SubProblem, merge_solutions, recursive_decompose
from .instance import ProblemInstance
from .qubo import QuboModel, build_bqp, build_qubo, decode_bitstring, derive_penalties, qubo_energy
from .schedule import ObjectiveBreakdown, Schedule, _require_feasible, evaluate, validate_schedule

__all__ = [
    "AnnealResult",
    "SearchSpaceTooLarge",
    "SolveResult",
    "SolverConfig",
    "brute_force",
    "hybrid_solve",
    "local_improve",
    "simulated_annealing",
    "solve",
    "solve_sa",
]

BRUTE_FORCE_LIMIT = 10**7
MOVES = ("bitflip", "bitflip+slotswap")


class SearchSpaceTooLarge(ValueError):
    pass


@dataclass(frozen=True)
class SolverConfig:
    """Annealing settings.

    ``sweeps`` sweeps of ``flips_per_sweep`` proposals each (default: one
    proposal per variable), temperature decaying geometrically from
    ``t_initial`` (default: largest absolute QUBO coefficient) to
    ``t_final``.  ``time_budget`` is a soft deadline checked between sweeps;
    runs cut short by it are not reproducible.
    """

    seed: int = 0
    time_budget: float | None = None
    sweeps: int = 1000
    flips_per_sweep: int | None = None
    restarts: int = 4
    t_initial: float | None = None
    t_final: float = 0.1
    moves: str = "bitflip"

    def __post_init__(self):
        if self.sweeps < 1:
            raise ValueError("sweeps must be >= 1")
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")
        if self.flips_per_sweep is not None and self.flips_per_sweep < 1:
            raise ValueError("flips_per_sweep must be >= 1")
        if not self.t_final > 0:
            raise ValueError("t_final must be positive")
        if self.t_initial is not None and self.t_initial < self.t_final:
            raise ValueError("t_initial must be >= t_final")
        if self.moves not in MOVES:
            raise ValueError(f"moves must be one of {MOVES}")


@dataclass
class SolveResult:
    schedule: Schedule
    breakdown: ObjectiveBreakdown
    best_energy_trace: list[tuple[float, float]]
    wall_time: float
    feasible: bool
    solver_name: str
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "solver": self.solver_name,
            "feasible": self.feasible,
            "wall_time": self.wall_time,
            "breakdown": self.breakdown.as_dict(),
            "best_energy_trace": [list(p) for p in self.best_energy_trace],
            "schedule": {"sequences": [list(s) for s in self.schedule.sequences]},
        }


class _Trace:
    """Best-so-far (elapsed, energy) points; only strict improvements are kept."""

    def __init__(self, t0: float):
        self.t0 = t0
        self.points: list[tuple[float, float]] = []

    def add(self, energy, when: float | None = None) -> None:
        if self.points and not energy < self.points[-1][1]:
            return
        elapsed = (time.perf_counter() if when is None else when) - self.t0
        self.points.append((elapsed, energy))


# -- exhaustive oracle -------------------------------------------------------

def search_space_bound(inst: ProblemInstance) -> int:
    """Upper bound on (assignment, order) pairs: inserting jobs one by one,
    job k has at most ``max|E_j| + k - 1`` slots to go to."""
    e = max(len(inst.eligible(j)) for j in inst.jobs)
    return math.prod(e + k for k in range(inst.n_jobs))


def brute_force(inst: ProblemInstance) -> SolveResult:
    """Exact minimum by enumeration.

    Assignments are enumerated first; since setups are machine-independent
    the best order of a job set is the same on every machine and is cached.
    Ties are broken towards the lexicographically smallest schedule.
    """
    bound = search_space_bound(inst)
    if bound > BRUTE_FORCE_LIMIT:
        raise SearchSpaceTooLarge(f"search space bound {bound} exceeds {BRUTE_FORCE_LIMIT}")
    t0 = time.perf_counter()
    w = inst.weights
    S = inst.s_matrix.tolist()
    P = inst.p_matrix.tolist()
    V = inst.v_matrix.tolist()
    order_cache: dict[tuple[int, ...], tuple[int, tuple[int, ...]]] = {}

    def best_order(jobs: tuple[int, ...]):
        hit = order_cache.get(jobs)
        if hit is None:
            hit = (0, ())
            if jobs:
                best = None
                for perm in itertools.permutations(jobs):  # lexicographic since jobs sorted
                    cost = 0
                    for a, b in zip(perm, perm[1:]):
                        cost += S[a][b]
                    if best is None or cost < best[0]:
                        best = (cost, perm)
                hit = best
            order_cache[jobs] = hit
        return hit

    M = inst.n_machines
    best = None
    for assign in itertools.product(*(inst.eligible(j) for j in inst.jobs)):
        groups: list[list[int]] = [[] for _ in range(M)]
        for j, m in enumerate(assign, 1):
            groups[m - 1].append(j)
        setup = balance = value = 0
        seqs = []
        for m, g in enumerate(groups, 1):
            cost, perm = best_order(tuple(g))
            setup += cost
            balance += sum(P[j][m] for j in g) ** 2
            value += sum(V[j][m] for j in g)
            seqs.append(perm)
        combined = w.w_setup * setup + w.w_balance * balance - w.w_value * value
        key = (combined, tuple(seqs))
        if best is None or key < best:
            best = key
    sched = Schedule(best[1])
    bd = evaluate(inst, sched)
    wall = time.perf_counter() - t0
    return SolveResult(sched, bd, [(wall, bd.combined)], wall, True, "brute")


# -- simulated annealing -----------------------------------------------------

@dataclass
class AnnealResult:
    bits: np.ndarray
    energy: float
    trace: list[tuple[float, float]]
    flips: int
    runs: int
    run_bits: list = field(default_factory=list, repr=False)  # best state of each restart


def _sa_arrays(qubo: QuboModel):
    """Symmetric adjacency for the kernel, cached on the model."""
    cached = qubo.__dict__.get("_sa_cache")
    if cached is not None:
        return cached
    Q = qubo.quadratic
    if qubo.dtype == np.int64:
        hi = np.abs(Q.data).max(initial=0)
        probe = np.zeros(1, dtype=np.int32 if hi < 2**31 else np.int64)
    else:
        probe = np.zeros(1, dtype=np.float64)
    indptr, indices, data = _kernels.symmetric_from_upper(
        Q.indptr.astype(np.int64), Q.indices.astype(np.int32), Q.data, qubo.n_vars, probe
    )
    bqp = qubo.bqp
    k = np.array([len(bqp.inst.jobs_on(m)) for m in bqp.inst.machines], dtype=np.int64)
    slots = np.array(bqp.slots_per_machine, dtype=np.int64)
    layout = (
        (bqp.var_m - 1).astype(np.int64),
        (bqp.var_t - 1).astype(np.int64),
        bqp.block_start[:-1].astype(np.int64),
        k,
        slots,
    )
    cached = (indptr, indices, data, layout)
    object.__setattr__(qubo, "_sa_cache", cached)
    return cached


def _temperatures(config: SolverConfig, qubo: QuboModel) -> np.ndarray:
    t0 = config.t_initial
    if t0 is None:
        t0 = max(float(qubo.max_abs_coefficient()), config.t_final)
    t1 = config.t_final
    if config.sweeps == 1:
        return np.array([t0])
    return t0 * (t1 / t0) ** (np.arange(config.sweeps) / (config.sweeps - 1))


def simulated_annealing(
    qubo: QuboModel,
    config: SolverConfig = SolverConfig(),
    on_improve: Callable[[float, np.ndarray, float], None] | None = None,
) -> AnnealResult:
    """Metropolis annealing with incremental energy updates.

    Each restart ``r`` draws from its own stream seeded by ``(seed, r)`` and
    starts from uniform random bits.  The best state across restarts wins,
    ties going to the smaller bitstring.  ``on_improve(elapsed, bits,
    energy)`` fires whenever the overall best improves at a sweep boundary.
    """
    t_start = time.perf_counter()
    n = qubo.n_vars
    indptr, indices, data, (var_block, var_slot, block_start, block_k, block_slots) = _sa_arrays(qubo)
    temps = _temperatures(config, qubo)
    per_sweep = config.flips_per_sweep or n
    slotswap = config.moves == "bitflip+slotswap"
    log_len = per_sweep * (2 * int(block_k.max(initial=1)) if slotswap else 1)
    log = np.empty(max(log_len, 1), dtype=np.int64)
    accum = np.int64 if qubo.dtype == np.int64 else np.float64
    py = int if qubo.dtype == np.int64 else float
    deadline = None if config.time_budget is None else t_start + config.time_budget

    best_bits, best_e = None, None
    trace = _Trace(t_start)
    flips = runs = 0
    run_states = []
    for r in range(config.restarts):
        if deadline is not None and time.perf_counter() > deadline:
            break
        runs += 1
        rng = np.random.default_rng([config.seed, r])
        x = rng.integers(0, 2, size=n).astype(np.uint8)
        h = (qubo.linear + (qubo.quadratic @ x) + (qubo.quadratic.T @ x)).astype(accum)
        energy = accum(qubo_energy(qubo, x))
        run_best_e = py(energy)
        run_best = x.copy()
        kinds = np.zeros(per_sweep, dtype=np.int8)
        extra = np.zeros(per_sweep, dtype=np.int64)
        for T in temps:
            picks = rng.integers(0, n, size=per_sweep)
            uniforms = rng.random(per_sweep)
            if slotswap:
                kinds = (rng.random(per_sweep) < 0.5).astype(np.int8)
                extra = rng.integers(0, 2**31, size=per_sweep)
            energy, new_best, n_log, best_pos = _kernels.anneal_sweep(
                x, h, indptr, indices, data, energy, accum(run_best_e),
                picks, uniforms, kinds, extra, float(T),
                var_block, var_slot, block_start, block_k, block_slots, log,
            )
            flips += per_sweep
            if best_pos >= 0:
                run_best = x.copy()
                undo = np.bincount(log[best_pos:n_log], minlength=n) & 1
                run_best ^= undo.astype(np.uint8)
                run_best_e = py(new_best)
                if best_e is None or run_best_e < best_e:
                    best_e, best_bits = run_best_e, run_best.copy()
                    trace.add(best_e)
                    if on_improve is not None:
                        on_improve(trace.points[-1][0], best_bits, best_e)
            if deadline is not None and time.perf_counter() > deadline:
                break
        run_states.append(run_best)
        if best_e is None or run_best_e < best_e or (
            run_best_e == best_e and run_best.tobytes() < best_bits.tobytes()
        ):
            best_e, best_bits = run_best_e, run_best.copy()
            trace.add(best_e)
    return AnnealResult(best_bits, best_e, trace.points, flips, runs, run_states)


# -- local search ------------------------------------------------------------

def local_improve(
    inst: ProblemInstance,
    sched: Schedule,
    seed: int = 0,
    on_improve: Callable[[float], None] | None = None,
) -> Schedule:
    """Steepest descent over adjacent swaps, 2-opt reversals and relocations.

    Every iteration scans the full neighbourhood and applies the move with
    the largest strict decrease of the combined objective; the first such
    move found wins ties, with machines scanned in a ``seed``-shuffled
    order.  Stops at a local optimum.
    """
    _require_feasible(inst, sched)
    w = inst.weights
    ws, wb, wv = w.w_setup, w.w_balance, w.w_value
    S = inst.s_matrix.tolist()
    P = inst.p_matrix.tolist()
    V = inst.v_matrix.tolist()
    seqs = [list(s) for s in sched.sequences]
    loads = [sum(P[j][m] for j in seq) for m, seq in enumerate(seqs, 1)]
    order = list(np.random.default_rng(seed).permutation(inst.n_machines) + 1)
    elig = [None] + [tuple(inst.eligible(j)) for j in inst.jobs]

    def s(a, b):
        return S[a][b]  # row/col 0 is the dummy job, all zeros

    while True:
        best_delta, best_move = 0, None
        # within-machine reversals; length 2 is an adjacent swap
        for m in order:
            seq = seqs[m - 1]
            n = len(seq)
            if n < 2:
                continue
            fwd = [0] * n
            bwd = [0] * n
            for k in range(1, n):
                fwd[k] = fwd[k - 1] + S[seq[k - 1]][seq[k]]
                bwd[k] = bwd[k - 1] + S[seq[k]][seq[k - 1]]
            for a in range(n - 1):
                prev = seq[a - 1] if a else 0
                for b in range(a + 1, n):
                    nxt = seq[b + 1] if b + 1 < n else 0
                    d = (
                        s(prev, seq[b]) + s(seq[a], nxt) - s(prev, seq[a]) - s(seq[b], nxt)
                        + (bwd[b] - bwd[a]) - (fwd[b] - fwd[a])
                    )
                    d *= ws
                    if d < best_delta:
                        best_delta, best_move = d, ("reverse", m, a, b)
        # relocations
        for ma in order:
            seq = seqs[ma - 1]
            n = len(seq)
            for p, j in enumerate(seq):
                prev = seq[p - 1] if p else 0
                nxt = seq[p + 1] if p + 1 < n else 0
                d_remove = s(prev, nxt) - s(prev, j) - s(j, nxt)
                rest = seq[:p] + seq[p + 1 :]
                for mb in elig[j]:
                    if mb == ma:
                        target, base = rest, ws * d_remove
                    else:
                        target = seqs[mb - 1]
                        pa, pb = P[j][ma], P[j][mb]
                        ta, tb = loads[ma - 1], loads[mb - 1]
                        base = (
                            ws * d_remove
                            + wb * ((ta - pa) ** 2 - ta * ta + (tb + pb) ** 2 - tb * tb)
                            - wv * (V[j][mb] - V[j][ma])
                        )
                    for q in range(len(target) + 1):
                        if mb == ma and q == p:
                            continue
                        a = target[q - 1] if q else 0
                        b = target[q] if q < len(target) else 0
                        d = base + ws * (s(a, j) + s(j, b) - s(a, b))
                        if d < best_delta:
                            best_delta, best_move = d, ("move", ma, p, mb, q)
        if best_move is None:
            break
        if best_move[0] == "reverse":
            _, m, a, b = best_move
            seqs[m - 1][a : b + 1] = reversed(seqs[m - 1][a : b + 1])
        else:
            _, ma, p, mb, q = best_move
            j = seqs[ma - 1].pop(p)
            seqs[mb - 1].insert(q, j)
            if ma != mb:
                loads[ma - 1] -= P[j][ma]
                loads[mb - 1] += P[j][mb]
        if on_improve is not None:
            on_improve(best_delta)
    return Schedule.of(seqs)


# -- pipelines ---------------------------------------------------------------

def _anneal_subproblem(inst: ProblemInstance, config: SolverConfig, trace: _Trace | None):
    """Anneal the instance's QUBO and decode (with repair) each restart's best state.

    Returns the annealing result and the distinct decoded schedules, best
    combined objective first.
    """
    bqp = build_bqp(inst)
    qubo = build_qubo(bqp, derive_penalties(inst))

    def record(elapsed, bits, energy):
        if trace is not None and bqp.is_feasible(bits):
            trace.add(energy)

    ann = simulated_annealing(qubo, config, on_improve=record)
    decoded = {}
    for bits in ann.run_bits:
        dec = decode_bitstring(bqp, bits, repair=True)
        decoded.setdefault(dec.schedule, (evaluate(inst, dec.schedule).combined, dec.repaired))
    ranked = sorted(decoded.items(), key=lambda kv: (kv[1][0], kv[0]))
    return ann, [(sched, repaired) for sched, (_, repaired) in ranked]


def _polish(inst, sched: Schedule, trace: _Trace, seed: int) -> Schedule:
    current = [evaluate(inst, sched).combined]
    trace.add(current[0])

    def step(delta):
        current[0] += delta
        trace.add(current[0])

    return local_improve(inst, sched, seed=seed, on_improve=step)


def _result(inst, sched: Schedule, trace: _Trace, t0, name, details) -> SolveResult:
    bd = evaluate(inst, sched)
    trace.add(bd.combined)
    wall = time.perf_counter() - t0
    return SolveResult(sched, bd, trace.points, wall, not validate_schedule(inst, sched), name, details)


def solve_sa(inst: ProblemInstance, config: SolverConfig = SolverConfig(), polish: bool = True) -> SolveResult:
    """Anneal the full QUBO, decode with repair, then local search.

    Every restart's best state is decoded and (with ``polish``) improved
    by :func:`local_improve`; the best resulting schedule is returned, ties
    going to the smaller schedule.
    """
    t0 = time.perf_counter()
    trace = _Trace(t0)
    ann, cands = _anneal_subproblem(inst, config, trace)
    best = None
    for sched, _ in cands:
        if polish:
            sched = _polish(inst, sched, trace, config.seed)
        key = (evaluate(inst, sched).combined, sched)
        if best is None or key < best:
            best = key
    details = {
        "qubo_energy": ann.energy,
        "all_runs_feasible": not any(rep for _, rep in cands),
        "flips": ann.flips,
        "restarts_run": ann.runs,
    }
    return _result(inst, best[1], trace, t0, "sa", details)


def hybrid_solve(
    inst: ProblemInstance, config: SolverConfig = SolverConfig(), max_vars: int = DEFAULT_MAX_VARS
) -> SolveResult:
    """Decompose, anneal each leaf, merge, then local search on the whole.

    When the instance needs no splitting this is exactly :func:`solve_sa`.

    The main trace tracks the full-instance objective, which only exists
    from the merge onwards; per-leaf QUBO traces, on the same clock, are in
    ``details["leaf_traces"]``.
    """
    t0 = time.perf_counter()
    leaves = recursive_decompose(inst, max_vars=max_vars, seed=config.seed)
    if len(leaves) == 1 and leaves[0].instance == inst:
        res = solve_sa(inst, config)
        res.solver_name = "hybrid"
        res.details["leaves"] = [leaves[0].manifest()]
        return res
    parts: list[tuple[SubProblem, Schedule]] = []
    leaf_traces = []
    for k, leaf in enumerate(leaves):
        leaf_t = time.perf_counter() - t0
        leaf_seed = int(np.random.SeedSequence([config.seed, k]).generate_state(1)[0])
        ann, cands = _anneal_subproblem(leaf.instance, replace(config, seed=leaf_seed), None)
        parts.append((leaf, cands[0][0]))
        leaf_traces.append([(leaf_t + t, e) for t, e in ann.trace])
    merged = merge_solutions(parts)
    details = {
        "leaves": [leaf.manifest() for leaf in leaves],
        "leaf_traces": leaf_traces,
    }
    trace = _Trace(t0)
    sched = _polish(inst, merged, trace, config.seed)
    return _result(inst, sched, trace, t0, "hybrid", details)


def solve(inst: ProblemInstance, solver: str, config: SolverConfig = SolverConfig(), max_vars: int = DEFAULT_MAX_VARS):
    if solver == "brute":
        return brute_force(inst)
    if solver == "sa":
        return solve_sa(inst, config)
    if solver == "hybrid":
        return hybrid_solve(inst, config, max_vars)
    raise ValueError(f"unknown solver {solver!r}")
