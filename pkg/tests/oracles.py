"""Independent reference computations used by the tests.

Nothing here reuses the package's expansion or search code: energies come
straight from the unexpanded penalty expressions, schedules from plain
enumeration, objectives from the raw instance fields.
"""

import itertools

import numpy as np


def variable_list(inst, full_slots=False):
    """(m, t, j) in machine, slot, job order (the documented index layout)."""
    out = []
    for m in range(1, inst.n_machines + 1):
        jobs = [j for j in range(1, inst.n_jobs + 1) if m in inst.eligibility[j - 1]]
        T = inst.n_jobs if full_slots else len(jobs)
        for t in range(1, T + 1):
            for j in jobs:
                out.append((m, t, j))
    return out


def objective(inst, seqs):
    """(setup, balance, value, combined) from the raw instance fields."""
    setup = balance = value = 0
    for m, seq in enumerate(seqs, 1):
        for a, b in zip(seq, seq[1:]):
            setup += inst.setup[a - 1][b - 1]
        balance += sum(inst.processing[j - 1][m] for j in seq) ** 2
        value += sum(inst.value[j - 1][m] for j in seq)
    w = inst.weights
    return setup, balance, value, w.w_setup * setup + w.w_balance * balance - w.w_value * value


def penalty_energy(inst, lambdas, bits, full_slots=False):
    """Objective plus the three penalties, evaluated without expansion."""
    lam1, lam2, lam3 = lambdas
    w = inst.weights
    x = dict(zip(variable_list(inst, full_slots), (int(b) for b in bits)))
    J, M = inst.n_jobs, inst.n_machines
    slots = {}
    for (m, t, j) in x:
        slots[m] = max(slots.get(m, 0), t)

    def xv(m, t, j):
        return x.get((m, t, j), 0)

    setup = balance = value = 0
    for m in range(1, M + 1):
        T = slots.get(m, 0)
        for t in range(2, T + 1):
            for i in range(1, J + 1):
                for j in range(1, J + 1):
                    if i != j:
                        setup += inst.setup[i - 1][j - 1] * xv(m, t - 1, i) * xv(m, t, j)
        load = 0
        for (mm, t, j), b in x.items():
            if mm == m and b:
                load += inst.processing[j - 1][m]
                value += inst.value[j - 1][m]
        balance += load * load
    energy = w.w_setup * setup + w.w_balance * balance - w.w_value * value

    for j in range(1, J + 1):
        placed = sum(b for (m, t, jj), b in x.items() if jj == j)
        energy += lam1 * (placed - 1) ** 2
    for m in range(1, M + 1):
        occ = [0] * (slots.get(m, 0) + 1)
        for t in range(1, slots.get(m, 0) + 1):
            lit = [j for j in range(1, J + 1) if xv(m, t, j)]
            occ[t] = len(lit)
            energy += lam2 * sum(1 for a in lit for b in lit if a != b)
        for t in range(2, len(occ)):
            energy += lam3 * occ[t] * (occ[t] - occ[t - 1])
    return energy


def all_schedules(inst):
    """Every feasible schedule as a tuple of per-machine tuples."""
    M = inst.n_machines
    for assign in itertools.product(*inst.eligibility):
        groups = [[] for _ in range(M)]
        for j, m in enumerate(assign, 1):
            groups[m - 1].append(j)
        for perms in itertools.product(*(itertools.permutations(g) for g in groups)):
            yield tuple(perms)


def optimum(inst):
    return min(objective(inst, s)[3] for s in all_schedules(inst))


def all_bitstrings(n):
    return np.array(list(itertools.product((0, 1), repeat=n)), dtype=np.uint8)


def balanced_cuts(graph):
    """Cut weight of every balanced bisection (each counted once)."""
    nodes = sorted(graph.nodes)
    n = len(nodes)
    first = nodes[0]
    cuts = []
    for side in itertools.combinations(nodes, n // 2):
        if n % 2 == 0 and first not in side:
            continue
        a = set(side)
        cuts.append(sum(w for (u, v), w in graph.weights.items() if (u in a) != (v in a)))
    return cuts


def penalty_energy_batch(inst, lambdas, X, full_slots=False):
    """``penalty_energy`` for every row of the 0/1 matrix ``X`` at once."""
    lam1, lam2, lam3 = lambdas
    w = inst.weights
    X = np.asarray(X, dtype=np.int64)
    vars_ = variable_list(inst, full_slots)
    J, M = inst.n_jobs, inst.n_machines
    energy = np.zeros(len(X), dtype=np.int64 if all(float(v).is_integer() for v in (*lambdas, *w.as_tuple())) else np.float64)

    cols = {}
    for k, (m, t, j) in enumerate(vars_):
        cols.setdefault((m, t), []).append((k, j))
    T = {m: max([t for (mm, t) in cols if mm == m], default=0) for m in range(1, M + 1)}

    for m in range(1, M + 1):
        load = np.zeros(len(X), dtype=np.int64)
        occ_prev = None
        for t in range(1, T[m] + 1):
            here = cols[(m, t)]
            occ = X[:, [k for k, _ in here]].sum(1)
            for k, j in here:
                load += inst.processing[j - 1][m] * X[:, k]
                energy -= w.w_value * inst.value[j - 1][m] * X[:, k]
            energy += lam2 * occ * (occ - 1)
            if t >= 2:
                for ka, i in cols[(m, t - 1)]:
                    for kb, j in here:
                        if i != j:
                            energy += w.w_setup * inst.setup[i - 1][j - 1] * X[:, ka] * X[:, kb]
                energy += lam3 * occ * (occ - occ_prev)
            occ_prev = occ
        energy += w.w_balance * load * load

    for j in range(1, J + 1):
        placed = X[:, [k for k, (_, _, jj) in enumerate(vars_) if jj == j]].sum(1)
        energy += lam1 * (placed - 1) ** 2
    return energy


def feasible_rows(inst, X, full_slots=False):
    """Mask of rows that place every job once, one job per slot, no gaps."""
    X = np.asarray(X, dtype=np.int64)
    vars_ = variable_list(inst, full_slots)
    ok = np.ones(len(X), dtype=bool)
    for j in range(1, inst.n_jobs + 1):
        ok &= X[:, [k for k, v in enumerate(vars_) if v[2] == j]].sum(1) == 1
    for m in range(1, inst.n_machines + 1):
        prev = None
        t = 1
        while True:
            idx = [k for k, v in enumerate(vars_) if v[0] == m and v[1] == t]
            if not idx:
                break
            occ = X[:, idx].sum(1)
            ok &= occ <= 1
            if prev is not None:
                ok &= occ <= prev
            prev, t = occ, t + 1
    return ok


def schedule_from_bits(inst, bits, full_slots=False):
    seqs = [[] for _ in range(inst.n_machines)]
    for (m, t, j), b in sorted(zip(variable_list(inst, full_slots), bits), key=lambda p: (p[0][0], p[0][1])):
        if b:
            seqs[m - 1].append(j)
    return tuple(tuple(s) for s in seqs)
