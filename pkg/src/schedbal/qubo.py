"""Position-encoded binary quadratic model and its QUBO compilation.

Variable ``(m, t, j)`` is 1 when job ``j`` is the ``t``-th job on machine
``m``.  Variables exist only for eligible pairs, and by default machine
``m`` gets as many slots as it has eligible jobs.  Indices are laid out
machine by machine, then slot by slot, then by ascending job id, so every
machine owns one contiguous block.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .instance import ProblemInstance
from .schedule import Schedule, _require_feasible, combine

__all__ = [
    "BqpModel",
    "ConstraintFamily",
    "DecodeResult",
    "PenaltyWeights",
    "QuboModel",
    "build_bqp",
    "build_qubo",
    "count_variables",
    "decode_bitstring",
    "derive_penalties",
    "encode_schedule",
    "qubo_energy",
    "read_qubo",
    "write_qubo",
]

INT_LIMIT = 2**62


def _slots(inst: ProblemInstance, full_slots: bool) -> list[int]:
    return [inst.n_jobs if full_slots else len(inst.jobs_on(m)) for m in inst.machines]


def count_variables(inst: ProblemInstance, full_slots: bool = False) -> int:
    """Number of binaries: sum over machines of slots x eligible jobs."""
    return sum(T * len(inst.jobs_on(m)) for m, T in zip(inst.machines, _slots(inst, full_slots)))


@dataclass(frozen=True)
class ConstraintFamily:
    """One constraint family kept symbolically.

    ``groups[k]`` holds variable indices; for ``order`` each group is a pair
    ``(slot t indices, slot t-1 indices)`` meaning ``sum(t) <= sum(t-1)``.
    """

    name: str
    sense: str
    rhs: int
    groups: tuple


@dataclass(frozen=True, eq=False)
class BqpModel:
    inst: ProblemInstance
    full_slots: bool
    slots_per_machine: tuple[int, ...]
    block_start: np.ndarray  # length M + 1
    var_m: np.ndarray
    var_t: np.ndarray
    var_j: np.ndarray

    @property
    def n_vars(self) -> int:
        return int(self.block_start[-1])

    @cached_property
    def var_index(self) -> dict[tuple[int, int, int], int]:
        return {
            (int(m), int(t), int(j)): k for k, (m, t, j) in enumerate(zip(self.var_m, self.var_t, self.var_j))
        }

    @cached_property
    def _pos(self) -> list[dict[int, int]]:
        return [{j: r for r, j in enumerate(self.inst.jobs_on(m))} for m in self.inst.machines]

    def index(self, m: int, t: int, j: int) -> int:
        """Index of ``(m, t, j)``; ``KeyError`` if that variable does not exist."""
        r = self._pos[m - 1].get(j)
        T = self.slots_per_machine[m - 1]
        if r is None or not 1 <= t <= T:
            raise KeyError((m, t, j))
        k = len(self._pos[m - 1])
        return int(self.block_start[m - 1]) + (t - 1) * k + r

    @cached_property
    def slot_id(self) -> np.ndarray:
        """Global slot number of each variable (slots numbered machine-major)."""
        offsets = np.concatenate([[0], np.cumsum(self.slots_per_machine)])
        return (offsets[self.var_m - 1] + self.var_t - 1).astype(np.int64)

    @property
    def n_slots(self) -> int:
        return int(sum(self.slots_per_machine))

    @cached_property
    def constraints(self) -> tuple[ConstraintFamily, ...]:
        order = np.argsort(self.var_j, kind="stable")
        bounds = np.searchsorted(self.var_j[order], np.arange(1, self.inst.n_jobs + 2))
        once = tuple(order[bounds[k] : bounds[k + 1]] for k in range(self.inst.n_jobs))
        slot_groups = []
        ordering = []
        for m in self.inst.machines:
            k = len(self.inst.jobs_on(m))
            start = int(self.block_start[m - 1])
            for t in range(self.slots_per_machine[m - 1]):
                cur = np.arange(start + t * k, start + (t + 1) * k)
                slot_groups.append(cur)
                if t:
                    ordering.append((cur, cur - k))
        return (
            ConstraintFamily("once", "=", 1, once),
            ConstraintFamily("slot", "<=", 1, tuple(slot_groups)),
            ConstraintFamily("order", "<=", 0, tuple(ordering)),
        )

    # -- evaluation on bitstrings ------------------------------------------

    def _bits(self, bits) -> np.ndarray:
        x = np.asarray(bits)
        if x.shape != (self.n_vars,):
            raise ValueError(f"expected {self.n_vars} bits, got shape {x.shape}")
        return x.astype(np.int64)

    def objective_terms(self, bits) -> tuple[int, int, int]:
        """(setup, balance, value) of a bitstring, straight from the sums."""
        x = self._bits(bits)
        inst = self.inst
        setup = balance = value = 0
        for m in inst.machines:
            jobs = np.asarray(inst.jobs_on(m), dtype=np.int64)
            k, T = len(jobs), self.slots_per_machine[m - 1]
            if not k:
                continue
            a = int(self.block_start[m - 1])
            X = x[a : a + T * k].reshape(T, k)
            S = inst.s_matrix[np.ix_(jobs, jobs)]
            for t in range(1, T):
                setup += int(X[t - 1] @ S @ X[t])
            balance += int((X @ inst.p_matrix[jobs, m]).sum()) ** 2
            value += int((X @ inst.v_matrix[jobs, m]).sum())
        return setup, balance, value

    def objective(self, bits):
        return combine(self.inst, *self.objective_terms(bits))

    def slot_counts(self, bits) -> np.ndarray:
        x = self._bits(bits)
        return np.bincount(self.slot_id, weights=x, minlength=self.n_slots).astype(np.int64)

    def job_counts(self, bits) -> np.ndarray:
        x = self._bits(bits)
        return np.bincount(self.var_j, weights=x, minlength=self.inst.n_jobs + 1)[1:].astype(np.int64)

    def violations(self, bits) -> list[str]:
        out = []
        jc = self.job_counts(bits)
        for j in np.flatnonzero(jc != 1):
            out.append(f"once: job {j + 1} placed {jc[j]} times")
        sc = self.slot_counts(bits)
        offset = 0
        for m, T in zip(self.inst.machines, self.slots_per_machine):
            row = sc[offset : offset + T]
            for t in np.flatnonzero(row > 1):
                out.append(f"slot: machine {m} slot {t + 1} holds {row[t]} jobs")
            for t in np.flatnonzero(row[1:] > row[:-1]):
                out.append(f"order: machine {m} slot {t + 2} used after empty slot {t + 1}")
            offset += T
        return out

    def is_feasible(self, bits) -> bool:
        jc = self.job_counts(bits)
        if np.any(jc != 1):
            return False
        sc = self.slot_counts(bits)
        if np.any(sc > 1):
            return False
        T = np.asarray(self.slots_per_machine, dtype=np.int64)
        first = np.zeros(self.n_slots, dtype=bool)
        first[(np.cumsum(T) - T)[T > 0]] = True
        prev = np.concatenate([[0], sc[:-1]])
        return not np.any((sc > prev) & ~first)


def build_bqp(inst: ProblemInstance, full_slots: bool = False) -> BqpModel:
    slots = _slots(inst, full_slots)
    sizes = [T * len(inst.jobs_on(m)) for m, T in zip(inst.machines, slots)]
    block_start = np.concatenate([[0], np.cumsum(sizes)]).astype(np.int64)
    vm, vt, vj = [], [], []
    for m, T in zip(inst.machines, slots):
        jobs = np.asarray(inst.jobs_on(m), dtype=np.int64)
        k = len(jobs)
        vm.append(np.full(T * k, m, dtype=np.int64))
        vt.append(np.repeat(np.arange(1, T + 1, dtype=np.int64), k))
        vj.append(np.tile(jobs, T))
    cat = lambda parts: np.concatenate(parts) if parts else np.zeros(0, dtype=np.int64)  # noqa: E731
    return BqpModel(inst, full_slots, tuple(slots), block_start, cat(vm), cat(vt), cat(vj))


# -- penalties ---------------------------------------------------------------

@dataclass(frozen=True)
class PenaltyWeights:
    lambda1: float  # each job exactly once
    lambda2: float  # at most one job per slot
    lambda3: float  # no slot used after an empty one

    def __post_init__(self):
        for name in ("lambda1", "lambda2", "lambda3"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")

    def as_tuple(self) -> tuple:
        return (self.lambda1, self.lambda2, self.lambda3)


def derive_penalties(inst: ProblemInstance) -> PenaltyWeights:
    """Penalty weights large enough to dominate any gain from a violation.

    Ordering: a gap can at most save one setup, so ``w_setup*s* + 1``.
    Once-only: dropping a job saves at most a setup or ``2*J*p_max**2`` of
    balance, and duplicating one gains at most ``c*`` of value, so
    ``max(w_setup*s*, 2*w_balance*J*p_max**2, w_value*c*) + 1``.  The slot
    penalty reuses the once-only weight.
    """
    w = inst.weights
    s_star, c_star, p_k = inst.max_setup, inst.max_value, inst.max_processing
    lam3 = w.w_setup * s_star + 1
    lam1 = max(w.w_setup * s_star, 2 * w.w_balance * inst.n_jobs * p_k * p_k, w.w_value * c_star) + 1
    if lam1 * 8 >= INT_LIMIT or lam3 * 8 >= INT_LIMIT:
        raise OverflowError("penalty weights exceed the 64-bit coefficient range")
    return PenaltyWeights(lam1, lam1, lam3)


# -- QUBO --------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class QuboModel:
    """``energy(x) = offset + linear @ x + sum_{i<j} quadratic[i, j] x_i x_j``.

    ``quadratic`` is a strictly upper-triangular CSR matrix; diagonal terms
    are folded into ``linear`` since ``x*x == x``.
    """

    n_vars: int
    linear: np.ndarray
    quadratic: sp.csr_matrix
    offset: float
    bqp: BqpModel
    penalties: PenaltyWeights

    @property
    def var_index(self) -> dict[tuple[int, int, int], int]:
        return self.bqp.var_index

    @property
    def dtype(self):
        return self.linear.dtype

    def max_abs_coefficient(self):
        hi = np.abs(self.linear).max(initial=0)
        if self.quadratic.nnz:
            hi = max(hi, np.abs(self.quadratic.data).max())
        return hi.item() if hasattr(hi, "item") else hi

    def items(self):
        """(i, j, coef) for every nonzero term, linear ones as (i, i, coef), row-major."""
        Q = self.quadratic
        for i in range(self.n_vars):
            if self.linear[i]:
                yield i, i, self.linear[i].item()
            lo, hi = Q.indptr[i], Q.indptr[i + 1]
            for j, c in zip(Q.indices[lo:hi], Q.data[lo:hi]):
                if c:
                    yield i, int(j), c.item()


def _is_integral(*vals) -> bool:
    return all(isinstance(v, (int, np.integer)) and not isinstance(v, bool) for v in vals)


def _machine_block(bqp: BqpModel, m: int, pen: PenaltyWeights, dtype):
    """Dense pair weights and linear terms for the variables of machine ``m``."""
    inst = bqp.inst
    w = inst.weights
    lam1, lam2, lam3 = pen.as_tuple()
    jobs = np.asarray(inst.jobs_on(m), dtype=np.int64)
    k, T = len(jobs), bqp.slots_per_machine[m - 1]
    tt = np.repeat(np.arange(T), k)
    rr = np.tile(np.arange(k), T)
    P = inst.p_matrix[jobs, m][rr].astype(dtype)
    V = inst.v_matrix[jobs, m][rr].astype(dtype)

    W = (2 * w.w_balance) * np.multiply.outer(P, P)
    same_job = rr[:, None] == rr[None, :]
    W[same_job] += 2 * lam1
    del same_job
    same_slot = tt[:, None] == tt[None, :]
    W[same_slot] += 2 * lam2
    same_slot &= (tt >= 1)[:, None]
    W[same_slot] += 2 * lam3
    del same_slot
    S = inst.s_matrix[np.ix_(jobs, jobs)].astype(dtype)
    step = tt[None, :] - tt[:, None]
    # row in slot t-1, column in slot t; these all lie in the upper triangle,
    # which is the only half the caller reads
    fwd = step == 1
    del step
    W[fwd] += (w.w_setup * S[rr[:, None], rr[None, :]] - lam3)[fwd]
    del fwd

    L = w.w_balance * P * P - w.w_value * V - lam1 + lam3 * (tt >= 1)
    return W, L.astype(dtype)


def build_qubo(bqp: BqpModel, penalties: PenaltyWeights) -> QuboModel:
    """Expand objective plus penalties into an upper-triangular QUBO.

    Penalties added to the weighted objective::

        lam1 * sum_j (sum_{m,t} x[m,t,j] - 1)^2
        lam2 * sum_{m,t} sum_{i != j} x[m,t,i] x[m,t,j]
        lam3 * sum_{m, t>=2} S[m,t] (S[m,t] - S[m,t-1])     S = slot occupancy
    """
    inst = bqp.inst
    integral = inst.weights.is_integral and _is_integral(*penalties.as_tuple())
    dtype = np.int64 if integral else np.float64
    n = bqp.n_vars
    lam1 = penalties.lambda1

    linear = np.zeros(n, dtype=dtype)
    rows, cols, vals = [], [], []
    for m in inst.machines:
        a, b = int(bqp.block_start[m - 1]), int(bqp.block_start[m])
        if a == b:
            continue
        W, L = _machine_block(bqp, m, penalties, dtype)
        linear[a:b] = L
        iu, ju = np.triu_indices(b - a, 1)
        v = W[iu, ju]
        del W
        keep = v != 0
        rows.append((iu[keep] + a).astype(np.int32))
        cols.append((ju[keep] + a).astype(np.int32))
        vals.append(v[keep])
        del iu, ju, v, keep

    # same job on two different machines
    for group in bqp.constraints[0].groups:
        if len(group) < 2:
            continue
        g = np.sort(group)
        gm = bqp.var_m[g]
        iu, ju = np.triu_indices(len(g), 1)
        keep = gm[iu] != gm[ju]
        rows.append(g[iu[keep]].astype(np.int32))
        cols.append(g[ju[keep]].astype(np.int32))
        vals.append(np.full(int(keep.sum()), 2 * lam1, dtype=dtype))

    if rows:
        r = np.concatenate(rows)
        del rows
        c = np.concatenate(cols)
        del cols
        d = np.concatenate(vals)
        del vals
        Q = sp.csr_matrix((d, (r, c)), shape=(n, n))
        del r, c, d
    else:
        Q = sp.csr_matrix((n, n), dtype=dtype)
    Q.sum_duplicates()
    Q.eliminate_zeros()
    offset = lam1 * inst.n_jobs
    offset = int(offset) if integral else float(offset)
    return QuboModel(n, linear, Q, offset, bqp, penalties)


def qubo_energy(qubo: QuboModel, bits):
    """Energy of one bitstring (returns a scalar) or of each row of a 2-D array."""
    X = np.asarray(bits)
    if X.shape[-1] != qubo.n_vars or X.ndim not in (1, 2):
        raise ValueError(f"expected bitstrings of length {qubo.n_vars}, got shape {X.shape}")
    X = X.astype(qubo.dtype)
    if X.ndim == 1:
        e = qubo.offset + X @ qubo.linear + X @ (qubo.quadratic @ X)
        return e.item() if hasattr(e, "item") else e
    QX = (qubo.quadratic @ X.T).T
    return qubo.offset + X @ qubo.linear + np.einsum("ij,ij->i", X, QX)


# -- schedules <-> bits ------------------------------------------------------

def encode_schedule(bqp: BqpModel, sched: Schedule) -> np.ndarray:
    _require_feasible(bqp.inst, sched)
    bits = np.zeros(bqp.n_vars, dtype=np.uint8)
    for m, seq in enumerate(sched.sequences, 1):
        if len(seq) > bqp.slots_per_machine[m - 1]:
            raise ValueError(f"machine {m}: sequence exceeds slot budget {bqp.slots_per_machine[m - 1]}")
        for t, j in enumerate(seq, 1):
            bits[bqp.index(m, t, j)] = 1
    return bits


@dataclass(frozen=True)
class DecodeResult:
    schedule: Schedule
    feasible: bool
    repaired: bool = False


def _sequences_from_lit(bqp: BqpModel, lit) -> list[list[int]]:
    """Per machine, the lit jobs ordered by (slot, job)."""
    seqs: list[list[tuple[int, int]]] = [[] for _ in range(bqp.inst.n_machines)]
    for k in lit:
        seqs[bqp.var_m[k] - 1].append((int(bqp.var_t[k]), int(bqp.var_j[k])))
    return [[j for _, j in sorted(s)] for s in seqs]


def best_insertion(inst: ProblemInstance, seqs: list[list[int]], loads: list[int], j: int):
    """Cheapest (delta, machine, position) to insert ``j``; first wins ties."""
    w = inst.weights
    S = inst.setup
    best = None
    for m in inst.eligible(j):
        seq = seqs[m - 1]
        p = inst.p(j, m)
        base = w.w_balance * ((loads[m - 1] + p) ** 2 - loads[m - 1] ** 2) - w.w_value * inst.v(j, m)
        for pos in range(len(seq) + 1):
            prev = seq[pos - 1] if pos else 0
            nxt = seq[pos] if pos < len(seq) else 0
            ds = 0
            if prev:
                ds += S[prev - 1][j - 1]
            if nxt:
                ds += S[j - 1][nxt - 1]
            if prev and nxt:
                ds -= S[prev - 1][nxt - 1]
            delta = base + w.w_setup * ds
            if best is None or delta < best[0]:
                best = (delta, m, pos)
    return best


def decode_bitstring(bqp: BqpModel, bits, repair: bool = False) -> DecodeResult:
    """Turn a bitstring into a schedule.

    Feasible bitstrings decode exactly.  Otherwise, without ``repair`` the
    result keeps the first lit copy of each job (a partial schedule, flagged
    infeasible).  With ``repair``: each job keeps the lit bit with the
    highest value (lowest index on ties), machines are compacted in slot
    order, and jobs left unplaced are inserted one by one, ascending id, at
    the eligible machine and position with the smallest increase of the
    combined objective.
    """
    x = np.asarray(bits)
    if x.shape != (bqp.n_vars,):
        raise ValueError(f"expected {bqp.n_vars} bits, got shape {x.shape}")
    inst = bqp.inst
    lit = np.flatnonzero(x)
    if bqp.is_feasible(x):
        return DecodeResult(Schedule.of(_sequences_from_lit(bqp, lit)), True)

    if not repair:
        seen, keep = set(), []
        for k in lit:
            j = int(bqp.var_j[k])
            if j not in seen:
                seen.add(j)
                keep.append(k)
        return DecodeResult(Schedule.of(_sequences_from_lit(bqp, keep)), False)

    chosen: dict[int, tuple[int, int]] = {}
    for k in lit:
        j, m = int(bqp.var_j[k]), int(bqp.var_m[k])
        v = inst.v(j, m)
        if j not in chosen or v > chosen[j][0]:
            chosen[j] = (v, int(k))
    seqs = _sequences_from_lit(bqp, sorted(k for _, k in chosen.values()))
    loads = [sum(inst.p(j, m) for j in seq) for m, seq in enumerate(seqs, 1)]
    for j in inst.jobs:
        if j in chosen:
            continue
        _, m, pos = best_insertion(inst, seqs, loads, j)
        seqs[m - 1].insert(pos, j)
        loads[m - 1] += inst.p(j, m)
    return DecodeResult(Schedule.of(seqs), True, repaired=True)


# -- file format -------------------------------------------------------------

def write_qubo(qubo: QuboModel, fh) -> None:
    """Header ``# n_vars offset`` then ``i j coeff`` lines (0-based, i <= j)."""
    fh.write(f"# {qubo.n_vars} {qubo.offset}\n")
    for i, j, c in qubo.items():
        fh.write(f"{i} {j} {c}\n")


def read_qubo(fh) -> tuple[int, float, dict[tuple[int, int], float]]:
    header = fh.readline().split()
    if len(header) != 3 or header[0] != "#":
        raise ValueError("missing '# n_vars offset' header")
    num = lambda s: int(s) if s.lstrip("-").isdigit() else float(s)  # noqa: E731
    n, offset = int(header[1]), num(header[2])
    terms = {}
    for line in fh:
        if line.strip():
            i, j, c = line.split()
            terms[(int(i), int(j))] = num(c)
    return n, offset, terms
