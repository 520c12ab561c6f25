"""Problem data for production assignment and scheduling.

Jobs and machines use 1-based ids.  All durations, setups and values are
integers; the objective weights may be any nonnegative numbers but integer
weights keep every downstream model coefficient integral.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Mapping, Sequence

import numpy as np

__all__ = [
    "InstanceError",
    "ObjectiveWeights",
    "ProblemInstance",
    "Violation",
    "generate_instance",
    "parse_instance",
    "serialize_instance",
    "validate_instance",
]


class InstanceError(ValueError):
    """Raised for malformed or invalid instance documents."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path
        self.message = message


@dataclass(frozen=True)
class Violation:
    field: str
    rule: str
    detail: str = ""

    def __str__(self) -> str:
        tail = f" ({self.detail})" if self.detail else ""
        return f"{self.field}: {self.rule}{tail}"


@dataclass(frozen=True)
class ObjectiveWeights:
    w_setup: float = 1
    w_balance: float = 1
    w_value: float = 1

    def as_tuple(self) -> tuple:
        return (self.w_setup, self.w_balance, self.w_value)

    @property
    def is_integral(self) -> bool:
        return all(isinstance(w, (int, np.integer)) for w in self.as_tuple())


@dataclass(frozen=True)
class ProblemInstance:
    """An assignment-and-sequencing instance.

    ``eligibility[j-1]`` lists the machines job ``j`` may run on;
    ``processing[j-1]`` and ``value[j-1]`` map exactly those machines to
    integers.  ``setup[i-1][j-1]`` is the changeover time when ``j`` directly
    follows ``i`` (the diagonal is ignored).

    Construction does not validate, so that broken instances can be
    inspected with :func:`validate_instance`.
    """

    n_machines: int
    n_jobs: int
    eligibility: tuple[tuple[int, ...], ...]
    processing: tuple[Mapping[int, int], ...]
    value: tuple[Mapping[int, int], ...]
    setup: tuple[tuple[int, ...], ...]
    weights: ObjectiveWeights = field(default_factory=ObjectiveWeights)

    @property
    def jobs(self) -> range:
        return range(1, self.n_jobs + 1)

    @property
    def machines(self) -> range:
        return range(1, self.n_machines + 1)

    def p(self, j: int, m: int) -> int:
        return self.processing[j - 1][m]

    def v(self, j: int, m: int) -> int:
        return self.value[j - 1][m]

    def s(self, i: int, j: int) -> int:
        """Setup before ``j`` when it follows ``i``; 0 involving the dummy job 0."""
        if i == 0 or j == 0 or i == j:
            return 0
        return self.setup[i - 1][j - 1]

    def eligible(self, j: int) -> tuple[int, ...]:
        return self.eligibility[j - 1]

    def jobs_on(self, m: int) -> tuple[int, ...]:
        """Jobs eligible on machine ``m``, ascending."""
        return self._jobs_by_machine[m - 1]

    @cached_property
    def _jobs_by_machine(self) -> tuple[tuple[int, ...], ...]:
        buckets: list[list[int]] = [[] for _ in range(self.n_machines)]
        for j in self.jobs:
            for m in self.eligible(j):
                if 1 <= m <= self.n_machines:
                    buckets[m - 1].append(j)
        return tuple(tuple(b) for b in buckets)

    # Dense views, index 0 is the dummy job / unused machine slot.
    @cached_property
    def p_matrix(self) -> np.ndarray:
        out = np.zeros((self.n_jobs + 1, self.n_machines + 1), dtype=np.int64)
        for j in self.jobs:
            for m, p in self.processing[j - 1].items():
                out[j, m] = p
        out.flags.writeable = False
        return out

    @cached_property
    def v_matrix(self) -> np.ndarray:
        out = np.zeros((self.n_jobs + 1, self.n_machines + 1), dtype=np.int64)
        for j in self.jobs:
            for m, v in self.value[j - 1].items():
                out[j, m] = v
        out.flags.writeable = False
        return out

    @cached_property
    def s_matrix(self) -> np.ndarray:
        out = np.zeros((self.n_jobs + 1, self.n_jobs + 1), dtype=np.int64)
        if self.n_jobs:
            out[1:, 1:] = np.asarray(self.setup, dtype=np.int64).reshape(self.n_jobs, self.n_jobs)
            np.fill_diagonal(out, 0)
        out.flags.writeable = False
        return out

    @cached_property
    def eligible_mask(self) -> np.ndarray:
        out = np.zeros((self.n_jobs + 1, self.n_machines + 1), dtype=bool)
        for j in self.jobs:
            out[j, list(self.eligible(j))] = True
        out.flags.writeable = False
        return out

    @property
    def max_setup(self) -> int:
        return int(self.s_matrix.max(initial=0))

    @property
    def max_processing(self) -> int:
        return int(self.p_matrix.max(initial=0))

    @property
    def max_value(self) -> int:
        return int(self.v_matrix.max(initial=0))

    def processing_is_machine_independent(self) -> bool:
        return all(len(set(self.processing[j - 1].values())) <= 1 for j in self.jobs)


def _validate_weights(w: ObjectiveWeights) -> list[Violation]:
    out = []
    for name, val in zip(("w_setup", "w_balance", "w_value"), w.as_tuple()):
        if not isinstance(val, (int, float, np.integer, np.floating)) or isinstance(val, bool):
            out.append(Violation(f"weights.{name}", "weight must be a number"))
        elif not math.isfinite(val):
            out.append(Violation(f"weights.{name}", "non-finite weight"))
        elif val < 0:
            out.append(Violation(f"weights.{name}", "negative weight"))
    if not out and all(val == 0 for val in w.as_tuple()):
        out.append(Violation("weights", "all weights zero"))
    return out


def _is_int(x: Any) -> bool:
    return isinstance(x, (int, np.integer)) and not isinstance(x, bool)


def validate_instance(inst: ProblemInstance) -> list[Violation]:
    """Return every broken invariant of ``inst``; empty when it is valid."""
    out: list[Violation] = []
    if not _is_int(inst.n_machines) or inst.n_machines < 1:
        out.append(Violation("n_machines", "must be a positive integer"))
    if not _is_int(inst.n_jobs) or inst.n_jobs < 1:
        out.append(Violation("n_jobs", "must be a positive integer"))
    if out:
        return out
    J, M = inst.n_jobs, inst.n_machines
    for name in ("eligibility", "processing", "value"):
        if len(getattr(inst, name)) != J:
            out.append(Violation(name, "length must equal n_jobs"))
    if out:
        return out

    for j in inst.jobs:
        elig = inst.eligibility[j - 1]
        path = f"jobs[{j}]"
        if len(elig) == 0:
            out.append(Violation(f"{path}.eligible", "empty eligibility"))
        if len(set(elig)) != len(elig):
            out.append(Violation(f"{path}.eligible", "duplicate machine"))
        bad = [m for m in elig if not _is_int(m) or not 1 <= m <= M]
        if bad:
            out.append(Violation(f"{path}.eligible", "eligibility out of range", f"machines {bad}"))
        for name, table, what in (
            ("processing", inst.processing[j - 1], "processing time"),
            ("value", inst.value[j - 1], "value"),
        ):
            if set(table) != set(elig):
                out.append(Violation(f"{path}.{name}", f"{name} keys must equal eligible machines"))
            for m, x in table.items():
                if not _is_int(x):
                    out.append(Violation(f"{path}.{name}[{m}]", f"non-integer {what}"))
                elif x < 0:
                    out.append(Violation(f"{path}.{name}[{m}]", f"negative {what}"))

    if len(inst.setup) != J or any(len(row) != J for row in inst.setup):
        out.append(Violation("setup", "must be an n_jobs x n_jobs matrix"))
    else:
        for i in range(J):
            for j in range(J):
                if i == j:
                    continue
                x = inst.setup[i][j]
                if not _is_int(x):
                    out.append(Violation(f"setup[{i + 1}][{j + 1}]", "non-integer setup time"))
                elif x < 0:
                    out.append(Violation(f"setup[{i + 1}][{j + 1}]", "negative setup time"))
    out.extend(_validate_weights(inst.weights))
    return out


# -- document format ---------------------------------------------------------

def _require(doc: Mapping, key: str, path: str) -> Any:
    if key not in doc:
        raise InstanceError(f"{path}.{key}" if path else key, "missing field")
    return doc[key]


def _as_int(x: Any, path: str) -> int:
    if isinstance(x, bool):
        raise InstanceError(path, "expected an integer")
    if isinstance(x, int):
        return x
    if isinstance(x, float) and x.is_integer():
        return int(x)
    raise InstanceError(path, "expected an integer")


def _as_weight(x: Any, path: str):
    if isinstance(x, bool) or not isinstance(x, (int, float)):
        raise InstanceError(path, "expected a number")
    if isinstance(x, float) and x.is_integer():
        return int(x)
    return x


def _machine_table(raw: Any, path: str) -> dict[int, int]:
    if not isinstance(raw, Mapping):
        raise InstanceError(path, "expected an object keyed by machine id")
    out = {}
    for k, x in raw.items():
        try:
            m = int(k)
        except (TypeError, ValueError):
            raise InstanceError(f"{path}[{k}]", "machine id must be an integer") from None
        out[m] = _as_int(x, f"{path}[{k}]")
    return out


def parse_instance(text: str) -> ProblemInstance:
    """Parse an instance document and reject anything that fails validation."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as err:
        raise InstanceError("", f"malformed document: {err}") from None
    if not isinstance(doc, Mapping):
        raise InstanceError("", "malformed document: top level must be an object")

    M = _as_int(_require(doc, "n_machines", ""), "n_machines")
    J = _as_int(_require(doc, "n_jobs", ""), "n_jobs")
    if M < 1:
        raise InstanceError("n_machines", "must be positive")
    if J < 1:
        raise InstanceError("n_jobs", "must be positive")

    wdoc = doc.get("weights", {"w_setup": 1, "w_balance": 1, "w_value": 1})
    if not isinstance(wdoc, Mapping):
        raise InstanceError("weights", "expected an object")
    weights = ObjectiveWeights(
        *(_as_weight(_require(wdoc, k, "weights"), f"weights.{k}") for k in ("w_setup", "w_balance", "w_value"))
    )

    jobs = _require(doc, "jobs", "")
    if not isinstance(jobs, list) or len(jobs) != J:
        raise InstanceError("jobs", f"expected a list of {J} jobs")
    by_id: dict[int, Mapping] = {}
    for pos, jdoc in enumerate(jobs):
        if not isinstance(jdoc, Mapping):
            raise InstanceError(f"jobs[{pos}]", "expected an object")
        jid = _as_int(_require(jdoc, "id", f"jobs[{pos}]"), f"jobs[{pos}].id")
        if not 1 <= jid <= J:
            raise InstanceError(f"jobs[{pos}].id", "job id out of range")
        if jid in by_id:
            raise InstanceError(f"jobs[{pos}].id", "duplicate job id")
        by_id[jid] = jdoc

    elig, proc, val = [], [], []
    for j in range(1, J + 1):
        jdoc, path = by_id[j], f"jobs[{j}]"
        raw = _require(jdoc, "eligible", path)
        if not isinstance(raw, list):
            raise InstanceError(f"{path}.eligible", "expected a list of machine ids")
        elig.append(tuple(sorted(_as_int(m, f"{path}.eligible") for m in raw)))
        proc.append(_machine_table(_require(jdoc, "processing", path), f"{path}.processing"))
        val.append(_machine_table(_require(jdoc, "value", path), f"{path}.value"))

    if "setup" in doc:
        raw = doc["setup"]
        if not isinstance(raw, list) or len(raw) != J or any(not isinstance(r, list) or len(r) != J for r in raw):
            raise InstanceError("setup", f"expected a {J}x{J} integer matrix")
        setup = tuple(
            tuple(0 if i == j else _as_int(x, f"setup[{i + 1}][{j + 1}]") for j, x in enumerate(row))
            for i, row in enumerate(raw)
        )
    elif J == 1:
        setup = ((0,),)
    else:
        raise InstanceError("setup", "missing field")

    inst = ProblemInstance(M, J, tuple(elig), tuple(proc), tuple(val), setup, weights)
    problems = validate_instance(inst)
    if problems:
        first = problems[0]
        raise InstanceError(first.field, first.rule + (f" ({first.detail})" if first.detail else ""))
    return inst


def instance_to_dict(inst: ProblemInstance) -> dict:
    w = inst.weights
    return {
        "n_machines": inst.n_machines,
        "n_jobs": inst.n_jobs,
        "weights": {"w_balance": w.w_balance, "w_setup": w.w_setup, "w_value": w.w_value},
        "jobs": [
            {
                "eligible": list(inst.eligible(j)),
                "id": j,
                "processing": {str(m): inst.processing[j - 1][m] for m in sorted(inst.processing[j - 1])},
                "value": {str(m): inst.value[j - 1][m] for m in sorted(inst.value[j - 1])},
            }
            for j in inst.jobs
        ],
        "setup": [[0 if i == j else int(x) for j, x in enumerate(row)] for i, row in enumerate(inst.setup)],
    }


def serialize_instance(inst: ProblemInstance) -> str:
    """Canonical text: sorted keys, one job per line, one setup row per line."""
    doc = instance_to_dict(inst)
    dump = lambda x: json.dumps(x, sort_keys=True, separators=(", ", ": "))  # noqa: E731
    lines = ["{"]
    lines.append('  "jobs": [')
    lines.append(",\n".join("    " + dump(jd) for jd in doc["jobs"]))
    lines.append("  ],")
    lines.append(f'  "n_jobs": {doc["n_jobs"]},')
    lines.append(f'  "n_machines": {doc["n_machines"]},')
    lines.append('  "setup": [')
    lines.append(",\n".join("    " + dump(row) for row in doc["setup"]))
    lines.append("  ],")
    lines.append(f'  "weights": {dump(doc["weights"])}')
    lines.append("}")
    return "\n".join(lines) + "\n"


# -- generator ---------------------------------------------------------------

def generate_instance(
    n_jobs: int,
    n_machines: int,
    eligibility_density: float = 1.0,
    seed: int = 0,
    *,
    processing_range: tuple[int, int] = (1, 100),
    setup_range: tuple[int, int] = (0, 50),
    value_range: tuple[int, int] = (1, 100),
    machine_independent_processing: bool = False,
    weights: ObjectiveWeights | None = None,
) -> ProblemInstance:
    """Draw a random instance; a pure function of its arguments.

    Each (job, machine) pair is eligible independently with probability
    ``eligibility_density``; a job left with no machine gets one drawn
    uniformly.  Integer data are uniform on the closed ranges.
    """
    if n_jobs < 1 or n_machines < 1:
        raise ValueError("n_jobs and n_machines must be positive")
    if not 0 < eligibility_density <= 1:
        raise ValueError("eligibility_density must lie in (0, 1]")
    rng = np.random.default_rng(seed)
    lo_p, hi_p = processing_range
    lo_s, hi_s = setup_range
    lo_v, hi_v = value_range

    mask = rng.random((n_jobs, n_machines)) < eligibility_density
    rescue = rng.integers(0, n_machines, size=n_jobs)
    for j in range(n_jobs):
        if not mask[j].any():
            mask[j, rescue[j]] = True
    p = rng.integers(lo_p, hi_p + 1, size=(n_jobs, n_machines))
    if machine_independent_processing:
        p[:] = p[:, :1]
    v = rng.integers(lo_v, hi_v + 1, size=(n_jobs, n_machines))
    s = rng.integers(lo_s, hi_s + 1, size=(n_jobs, n_jobs))
    np.fill_diagonal(s, 0)

    elig, proc, val = [], [], []
    for j in range(n_jobs):
        ms = tuple(int(m) + 1 for m in np.flatnonzero(mask[j]))
        elig.append(ms)
        proc.append({m: int(p[j, m - 1]) for m in ms})
        val.append({m: int(v[j, m - 1]) for m in ms})
    setup = tuple(tuple(int(x) for x in row) for row in s)
    return ProblemInstance(
        n_machines, n_jobs, tuple(elig), tuple(proc), tuple(val), setup, weights or ObjectiveWeights()
    )


def make_instance(
    processing: Sequence[Mapping[int, int]],
    setup: Sequence[Sequence[int]] | None = None,
    value: Sequence[Mapping[int, int]] | None = None,
    n_machines: int | None = None,
    weights: ObjectiveWeights | tuple | None = None,
) -> ProblemInstance:
    """Convenience constructor: eligibility is read off the processing keys."""
    J = len(processing)
    elig = tuple(tuple(sorted(row)) for row in processing)
    if n_machines is None:
        n_machines = max(max(row) for row in elig)
    if value is None:
        value = [{m: 0 for m in row} for row in elig]
    if setup is None:
        setup = [[0] * J for _ in range(J)]
    if isinstance(weights, tuple):
        weights = ObjectiveWeights(*weights)
    return ProblemInstance(
        n_machines,
        J,
        elig,
        tuple(dict(r) for r in processing),
        tuple(dict(r) for r in value),
        tuple(tuple(0 if i == j else int(x) for j, x in enumerate(row)) for i, row in enumerate(setup)),
        weights or ObjectiveWeights(),
    )
