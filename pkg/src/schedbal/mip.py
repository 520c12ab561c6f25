"""Mixed-integer convex model (predecessor/successor arcs with MTZ cuts).

The model is kept symbolic: named variables, named linear rows and a
separable convex quadratic on the per-machine loads.  It is exported as
CPLEX-LP text for any external MIP solver, and it can score and check a
candidate assignment exactly, which is how it is tested against the
schedule evaluator.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Mapping

import numpy as np
import scipy.sparse as sp

from .instance import ProblemInstance
from .schedule import Schedule, _require_feasible

__all__ = [
    "CheckResult",
    "Constraint",
    "MipModel",
    "build_mip",
    "check_assignment",
    "count_mip_variables",
    "encode_schedule_to_assignment",
    "export_lp",
    "format_assignment",
    "parse_assignment",
]

TOL = 1e-9


def x_name(m: int, i: int, j: int) -> str:
    return f"x_{m}_{i}_{j}"


def u_name(m: int, j: int) -> str:
    return f"u_{m}_{j}"


def t_name(m: int) -> str:
    return f"t_{m}"


@dataclass(frozen=True)
class Constraint:
    name: str
    terms: tuple[tuple[str, int], ...]
    sense: str  # "<=", ">=", "="
    rhs: int


@dataclass(frozen=True)
class MipModel:
    binaries: tuple[str, ...]
    continuous: tuple[str, ...]
    constraints: tuple[Constraint, ...]
    linear: Mapping[str, float]
    quadratic: tuple[tuple[str, float], ...]  # (var, coef) meaning coef * var^2
    big_m: int
    n_machines: int
    n_jobs: int

    @property
    def n_vars(self) -> int:
        return len(self.binaries) + len(self.continuous)

    @cached_property
    def _compiled(self):
        names = self.binaries + self.continuous
        index = {n: k for k, n in enumerate(names)}
        rows, cols, vals = [], [], []
        for r, con in enumerate(self.constraints):
            for var, coef in con.terms:
                rows.append(r)
                cols.append(index[var])
                vals.append(coef)
        A = sp.csr_matrix(
            (np.asarray(vals, dtype=np.int64), (rows, cols)), shape=(len(self.constraints), len(names))
        )
        rhs = np.array([c.rhs for c in self.constraints], dtype=np.int64)
        sense = np.array([c.sense for c in self.constraints])
        c = [self.linear.get(n, 0) for n in names]
        q = [0] * len(names)
        for var, coef in self.quadratic:
            q[index[var]] += coef
        return index, A, rhs, sense, c, q


def _arc_nodes(inst: ProblemInstance, m: int) -> list[int]:
    return [0, *inst.jobs_on(m)]


def count_mip_variables(inst: ProblemInstance) -> int:
    """Binaries over eligible arcs plus u and t variables, without building."""
    total = 0
    for m in inst.machines:
        k = len(inst.jobs_on(m))
        total += (k + 1) * k + k + 1
    return total


def default_big_m(inst: ProblemInstance) -> int:
    return sum(max(inst.processing[j - 1].values()) for j in inst.jobs)


def build_mip(inst: ProblemInstance, big_m: int | None = None) -> MipModel:
    """Build the arc model.

    Arcs ``x_m_i_j`` exist only when both endpoints are eligible on ``m``
    (job 0 is the dummy, eligible everywhere).  The MTZ rows include the
    dummy as predecessor with ``u_m_0 = 0`` so a first job's ``u`` is at
    least its processing time.
    """
    W = inst.weights
    bigm = default_big_m(inst) if big_m is None else int(big_m)
    binaries: list[str] = []
    continuous: list[str] = []
    linear: dict[str, float] = {}
    cons: list[Constraint] = []

    pred: dict[int, list[tuple[str, int]]] = {j: [] for j in inst.jobs}
    succ: dict[int, list[tuple[str, int]]] = {j: [] for j in inst.jobs}

    for m in inst.machines:
        nodes = _arc_nodes(inst, m)
        for i in nodes:
            for j in nodes:
                if i == j:
                    continue
                name = x_name(m, i, j)
                binaries.append(name)
                coef = 0
                if i and j:
                    coef += W.w_setup * inst.s(i, j)
                if j:
                    coef -= W.w_value * inst.v(j, m)
                    pred[j].append((name, 1))
                if i:
                    succ[i].append((name, 1))
                if coef:
                    linear[name] = coef
        for j in nodes[1:]:
            continuous.append(u_name(m, j))
    for m in inst.machines:
        continuous.append(t_name(m))

    for j in inst.jobs:
        cons.append(Constraint(f"pred_{j}", tuple(pred[j]), "=", 1))
    for i in inst.jobs:
        cons.append(Constraint(f"succ_{i}", tuple(succ[i]), "=", 1))

    for m in inst.machines:
        nodes = _arc_nodes(inst, m)
        if len(nodes) == 1:
            continue
        for j in nodes:
            terms = [(x_name(m, i, j), 1) for i in nodes if i != j]
            terms += [(x_name(m, j, k), -1) for k in nodes if k != j]
            cons.append(Constraint(f"flow_{m}_{j}", tuple(terms), "=", 0))
        cons.append(Constraint(f"depot_{m}", tuple((x_name(m, 0, j), 1) for j in nodes[1:]), "<=", 1))
        for j in nodes[1:]:
            pj = inst.p(j, m)
            for i in nodes:
                if i == j:
                    continue
                terms = [(u_name(m, i), 1)] if i else []
                terms += [(u_name(m, j), -1), (x_name(m, i, j), bigm)]
                cons.append(Constraint(f"mtz_{m}_{i}_{j}", tuple(terms), "<=", bigm - pj))
        for j in nodes[1:]:
            cons.append(Constraint(f"load_{m}_{j}", ((t_name(m), 1), (u_name(m, j), -1)), ">=", 0))

    tsum = tuple((t_name(m), 1) for m in inst.machines)
    if inst.processing_is_machine_independent():
        total = sum(next(iter(inst.processing[j - 1].values())) for j in inst.jobs)
        cons.append(Constraint("total_load", tsum, "=", total))
    else:
        total = sum(min(inst.processing[j - 1].values()) for j in inst.jobs)
        cons.append(Constraint("total_load", tsum, ">=", total))

    quadratic = tuple((t_name(m), W.w_balance) for m in inst.machines)
    return MipModel(
        tuple(binaries), tuple(continuous), tuple(cons), linear, quadratic, bigm, inst.n_machines, inst.n_jobs
    )


# -- LP text -----------------------------------------------------------------

def _num(x) -> str:
    if isinstance(x, float) and x.is_integer():
        x = int(x)
    return repr(x) if isinstance(x, float) else str(x)


def _linear_expr(terms: Iterable[tuple[str, float]]) -> str:
    parts = []
    for var, coef in terms:
        if coef == 0:
            continue
        sign = "-" if coef < 0 else "+"
        mag = abs(coef)
        body = var if mag == 1 else f"{_num(mag)} {var}"
        parts.append(f"{sign} {body}")
    if not parts:
        return "0"
    text = " ".join(parts)
    return text[2:] if text.startswith("+ ") else "-" + text[1:]


def _wrap(prefix: str, text: str, width: int = 100) -> list[str]:
    lines, cur = [], prefix
    for tok in text.split():
        if len(cur) + len(tok) + 1 > width:
            lines.append(cur)
            cur = "   "
        cur += " " + tok
    lines.append(cur)
    return lines


def export_lp(model: MipModel) -> str:
    """CPLEX LP text; quadratic terms go in a ``[ ... ] / 2`` bracket."""
    names = model.binaries + model.continuous
    obj = _linear_expr((n, model.linear[n]) for n in names if n in model.linear)
    quad = [(v, c) for v, c in model.quadratic if c != 0]
    if quad:
        bracket = " + ".join(f"{_num(2 * c)} {v} ^ 2" for v, c in quad)
        obj = ("" if obj == "0" else obj + " + ") + f"[ {bracket} ] / 2"
    out = ["\\ production assignment and scheduling", "Minimize"]
    out += _wrap(" obj:", obj)
    out.append("Subject To")
    for con in model.constraints:
        op = {"=": "=", "<=": "<=", ">=": ">="}[con.sense]
        out += _wrap(f" {con.name}:", f"{_linear_expr(con.terms)} {op} {_num(con.rhs)}")
    out.append("Bounds")
    for n in model.continuous:
        out.append(f" {n} >= 0")
    out.append("Binary")
    for k in range(0, len(model.binaries), 8):
        out.append(" " + " ".join(model.binaries[k : k + 8]))
    out.append("End")
    return "\n".join(out) + "\n"


# -- assignments -------------------------------------------------------------

def encode_schedule_to_assignment(inst: ProblemInstance, sched: Schedule) -> dict[str, int]:
    """Arc, cumulative-load and load values of a feasible schedule.

    Only nonzero arcs and the ``u`` of placed jobs are listed, plus every
    ``t_m``; everything else is implicitly 0.
    """
    _require_feasible(inst, sched)
    out: dict[str, int] = {}
    for m, seq in enumerate(sched.sequences, 1):
        if seq:
            chain = [0, *seq, 0]
            for a, b in zip(chain, chain[1:]):
                out[x_name(m, a, b)] = 1
        acc = 0
        for j in seq:
            acc += inst.p(j, m)
            out[u_name(m, j)] = acc
        out[t_name(m)] = acc
    return out


@dataclass(frozen=True)
class CheckResult:
    violations: list[str] = field(default_factory=list)
    objective: float = 0

    @property
    def feasible(self) -> bool:
        return not self.violations


def check_assignment(model: MipModel, assignment: Mapping[str, float]) -> CheckResult:
    index, A, rhs, sense, c, q = model._compiled
    x = [0] * len(index)
    for name, val in assignment.items():
        k = index.get(name)
        if k is None:
            raise KeyError(f"unknown variable {name!r}")
        x[k] = val

    integral = all(float(v).is_integer() for v in x)
    if integral:
        xv = np.array([int(v) for v in x], dtype=np.int64)
        lhs = A @ xv
        slack = lhs - rhs
        tol = 0
    else:
        xv = np.array(x, dtype=np.float64)
        lhs = A.astype(np.float64) @ xv
        slack = lhs - rhs
        tol = TOL
    bad = np.zeros(len(rhs), dtype=bool)
    bad |= (sense == "=") & (np.abs(slack) > tol)
    bad |= (sense == "<=") & (slack > tol)
    bad |= (sense == ">=") & (slack < -tol)

    violations = []
    nb = len(model.binaries)
    for k in np.flatnonzero(bad):
        con = model.constraints[k]
        violations.append(f"{con.name}: {lhs[k]} {con.sense} {con.rhs} violated")
    for k, v in enumerate(x[:nb]):
        if v not in (0, 1):
            violations.append(f"{model.binaries[k]}: binary takes value {v}")
    for k, v in enumerate(x[nb:], nb):
        if v < -tol:
            violations.append(f"{model.continuous[k - nb]}: negative value {v}")

    objective = sum(ck * xk for ck, xk in zip(c, x) if ck and xk) + sum(
        qk * xk * xk for qk, xk in zip(q, x) if qk and xk
    )
    return CheckResult(violations, objective)


def parse_assignment(text: str) -> dict[str, float]:
    """Read ``name value`` lines; blank lines and ``#`` comments are skipped."""
    out: dict[str, float] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ValueError(f"line {lineno}: expected 'name value'")
        val = float(parts[1])
        out[parts[0]] = int(val) if val.is_integer() else val
    return out


def format_assignment(assignment: Mapping[str, float]) -> str:
    return "".join(f"{k} {_num(v)}\n" for k, v in assignment.items())
