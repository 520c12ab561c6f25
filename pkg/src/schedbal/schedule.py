"""Schedules, feasibility, the three-part objective, and Gantt export."""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, Sequence

from .instance import ProblemInstance, Violation

__all__ = [
    "GanttBlock",
    "GanttTimeline",
    "InfeasibleScheduleError",
    "ObjectiveBreakdown",
    "Schedule",
    "evaluate",
    "gantt_to_json",
    "gantt_to_svg",
    "parse_schedule",
    "serialize_schedule",
    "to_gantt",
    "validate_schedule",
]


class InfeasibleScheduleError(ValueError):
    def __init__(self, violations: Sequence[Violation]):
        self.violations = list(violations)
        super().__init__("infeasible schedule: " + "; ".join(map(str, self.violations)))


@dataclass(frozen=True, order=True)
class Schedule:
    """``sequences[m-1]`` is the ordered job list of machine ``m``."""

    sequences: tuple[tuple[int, ...], ...]

    @classmethod
    def of(cls, seqs: Iterable[Iterable[int]]) -> "Schedule":
        return cls(tuple(tuple(int(j) for j in s) for s in seqs))

    @classmethod
    def empty(cls, n_machines: int) -> "Schedule":
        return cls(((),) * n_machines)

    @property
    def n_machines(self) -> int:
        return len(self.sequences)

    def machine_of(self) -> dict[int, int]:
        return {j: m for m, seq in enumerate(self.sequences, 1) for j in seq}


@dataclass(frozen=True)
class ObjectiveBreakdown:
    setup_total: int
    balance_sum_sq: int
    value_total: int
    combined: float

    def as_dict(self) -> dict:
        return {
            "setup_total": self.setup_total,
            "balance_sum_sq": self.balance_sum_sq,
            "value_total": self.value_total,
            "combined": self.combined,
        }


@dataclass(frozen=True)
class GanttBlock:
    kind: str  # "setup" | "processing"
    job: int
    start: int
    end: int


@dataclass(frozen=True)
class GanttTimeline:
    machines: tuple[tuple[GanttBlock, ...], ...]

    def span(self, m: int) -> int:
        blocks = self.machines[m - 1]
        return blocks[-1].end if blocks else 0


def validate_schedule(inst: ProblemInstance, sched: Schedule) -> list[Violation]:
    out: list[Violation] = []
    if sched.n_machines != inst.n_machines:
        out.append(Violation("sequences", "machine count mismatch", f"{sched.n_machines} != {inst.n_machines}"))
        return out
    seen: dict[int, int] = {}
    for m, seq in enumerate(sched.sequences, 1):
        for j in seq:
            if not 1 <= j <= inst.n_jobs:
                out.append(Violation(f"sequences[{m}]", "job id out of range", f"job {j}"))
                continue
            if j in seen:
                out.append(Violation(f"sequences[{m}]", "duplicate job", f"job {j} also on machine {seen[j]}"))
                continue
            seen[j] = m
            if m not in inst.eligible(j):
                out.append(Violation(f"sequences[{m}]", "ineligible machine", f"job {j}"))
    missing = [j for j in inst.jobs if j not in seen]
    if missing:
        out.append(Violation("sequences", "missing job", f"jobs {missing}"))
    return out


def _require_feasible(inst: ProblemInstance, sched: Schedule) -> None:
    problems = validate_schedule(inst, sched)
    if problems:
        raise InfeasibleScheduleError(problems)


def combine(inst: ProblemInstance, setup_total, balance_sum_sq, value_total):
    w = inst.weights
    return w.w_setup * setup_total + w.w_balance * balance_sum_sq - w.w_value * value_total


def machine_load(inst: ProblemInstance, m: int, seq: Sequence[int]) -> int:
    """Processing time on machine ``m``; setups are not part of the load."""
    proc = inst.processing
    return sum(proc[j - 1][m] for j in seq)


def sequence_setup(inst: ProblemInstance, seq: Sequence[int]) -> int:
    s = inst.setup
    return sum(s[a - 1][b - 1] for a, b in zip(seq, seq[1:]))


def evaluate(inst: ProblemInstance, sched: Schedule) -> ObjectiveBreakdown:
    _require_feasible(inst, sched)
    setup = balance = value = 0
    for m, seq in enumerate(sched.sequences, 1):
        setup += sequence_setup(inst, seq)
        balance += machine_load(inst, m, seq) ** 2
        value += sum(inst.value[j - 1][m] for j in seq)
    return ObjectiveBreakdown(setup, balance, value, combine(inst, setup, balance, value))


def to_gantt(inst: ProblemInstance, sched: Schedule) -> GanttTimeline:
    """Lay every machine out from time 0; zero-length setups are omitted."""
    _require_feasible(inst, sched)
    rows = []
    for m, seq in enumerate(sched.sequences, 1):
        clock, blocks, prev = 0, [], 0
        for j in seq:
            s = inst.s(prev, j)
            if s:
                blocks.append(GanttBlock("setup", j, clock, clock + s))
                clock += s
            p = inst.p(j, m)
            blocks.append(GanttBlock("processing", j, clock, clock + p))
            clock += p
            prev = j
        rows.append(tuple(blocks))
    return GanttTimeline(tuple(rows))


def gantt_to_json(tl: GanttTimeline) -> str:
    doc = {
        "machines": [
            {
                "machine": m,
                "blocks": [{"kind": b.kind, "job": b.job, "start": b.start, "end": b.end} for b in blocks],
            }
            for m, blocks in enumerate(tl.machines, 1)
        ]
    }
    return json.dumps(doc, indent=1, sort_keys=True) + "\n"


PX_PER_UNIT = 4
ROW_HEIGHT = 24
LEFT_MARGIN = 48


def gantt_to_svg(tl: GanttTimeline) -> str:
    """Static SVG, one row per machine, 4 px per time unit."""
    horizon = max((tl.span(m) for m in range(1, len(tl.machines) + 1)), default=0)
    width = LEFT_MARGIN + horizon * PX_PER_UNIT + 8
    height = ROW_HEIGHT * len(tl.machines) + 8
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'font-family="monospace" font-size="10">'
    ]
    for m, blocks in enumerate(tl.machines, 1):
        y = 4 + (m - 1) * ROW_HEIGHT
        out.append(f'<text x="2" y="{y + 15}">M{m}</text>')
        for b in blocks:
            x = LEFT_MARGIN + b.start * PX_PER_UNIT
            w = (b.end - b.start) * PX_PER_UNIT
            fill = "#bbbbbb" if b.kind == "setup" else "#4a7ab5"
            out.append(
                f'<rect x="{x}" y="{y}" width="{w}" height="{ROW_HEIGHT - 4}" fill="{fill}" stroke="#222">'
                f"<title>{b.kind} job {b.job} [{b.start}, {b.end})</title></rect>"
            )
            if b.kind == "processing" and w >= 14:
                out.append(f'<text x="{x + 2}" y="{y + 14}" fill="white">{b.job}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def serialize_schedule(sched: Schedule) -> str:
    return json.dumps({"sequences": [list(s) for s in sched.sequences]}) + "\n"


def schedule_from_doc(doc) -> Schedule:
    if isinstance(doc, dict):
        doc = doc.get("sequences", doc.get("schedule"))
    if isinstance(doc, dict):
        doc = doc["sequences"]
    if not isinstance(doc, list) or any(not isinstance(s, list) for s in doc):
        raise ValueError("schedule document must hold a list of per-machine job lists")
    return Schedule.of(doc)


def parse_schedule(text: str) -> Schedule:
    return schedule_from_doc(json.loads(text))
