"""Exhaustive stage->tier enumeration and per-level straggler makespan evaluation."""

from __future__ import annotations

import csv
import io
import itertools
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from types import MappingProxyType

from .errors import CapExceeded, EmptyCandidateSet, SpecFormatError
from .storage import component_times

COMPONENTS = ("stage_in", "execution", "stage_out")
EXPORT_HEADER = ("config_index", "assignment", "tpn", "makespan_s", "trace")


@dataclass(frozen=True)
class Assignment:
    tier_of: MappingProxyType
    tpn: int = 1
    index: int = -1  # position in enumeration order

    def __post_init__(self):
        if not isinstance(self.tier_of, MappingProxyType):
            object.__setattr__(self, "tier_of", MappingProxyType(dict(self.tier_of)))

    def __getitem__(self, stage):
        return self.tier_of[stage]

    def __reduce__(self):
        # mapping proxies do not pickle; needed for process-pool evaluation
        return (Assignment, (dict(self.tier_of), self.tpn, self.index))

    def __eq__(self, other):
        if not isinstance(other, Assignment):
            return NotImplemented
        return dict(self.tier_of) == dict(other.tier_of) and self.tpn == other.tpn

    def __hash__(self):
        return hash((tuple(sorted(self.tier_of.items())), self.tpn))

    def items(self):
        return sorted(self.tier_of.items())

    def encode(self) -> str:
        return ";".join(f"{s}:{t}" for s, t in self.items())


@dataclass(frozen=True)
class CritEntry:
    level: int
    component: str
    stage: str
    tier: str
    time: float


@dataclass(frozen=True)
class EvaluatedConfig:
    assignment: Assignment
    makespan: float
    crit_trace: tuple

    @property
    def index(self):
        return self.assignment.index


def space_size(dag) -> int:
    return math.prod(len(s.tiers) for s in dag.stages)


def enumerate_assignments(dag, limit=None):
    """Yield every assignment lazily in (stage name, tier speed rank) lexicographic order."""
    names = sorted(s.name for s in dag.stages)
    choices = []
    for n in names:
        c = dag.candidates(n)
        if not c:
            raise EmptyCandidateSet(n)
        choices.append(c)
    size = math.prod(len(c) for c in choices)
    if limit is not None and size > limit:
        raise CapExceeded(size, limit)
    for i, combo in enumerate(itertools.product(*choices)):
        yield Assignment(dict(zip(names, combo)), dag.tpn, i)


def straggler(level_stages, component, times, assignment):
    """Slowest stage of a level for one component; ties go to the smallest name."""
    best_v = -math.inf
    best = None
    for stage in sorted(level_stages):
        v = times[stage].get(component)
        if v > best_v:
            best_v = v
            best = stage
    return best, assignment[best], best_v


def makespan_from_times(levels, times, assignment):
    """Sum of per-level component maxima plus the critical-path trace.

    The makespan is a left fold over the trace: levels ascending, then
    stage-in, execution, stage-out within a level.
    """
    total = 0.0
    trace = []
    for lvl, stages in enumerate(levels):
        for comp in COMPONENTS:
            stage, tier, t = straggler(stages, comp, times, assignment)
            total += t
            trace.append(CritEntry(lvl, comp, stage, tier, t))
    return total, tuple(trace)


def evaluate(dag, assignment, profile) -> EvaluatedConfig:
    times = component_times(dag, assignment, profile)
    total, trace = makespan_from_times(dag.levels, times, assignment)
    return EvaluatedConfig(assignment, total, trace)


def _evaluate_chunk(args):
    dag, profile, chunk = args
    return [evaluate(dag, a, profile) for a in chunk]


def evaluate_all(dag, profile, limit=None, workers=1, chunk_size=256):
    """Evaluate the whole space, ascending by makespan (ties by enumeration index).

    With ``workers > 1`` chunks are evaluated in worker processes; results
    are merged by enumeration index so the output equals the sequential run.
    """
    assignments = list(enumerate_assignments(dag, limit))
    if workers and workers > 1 and len(assignments) > chunk_size:
        chunks = [assignments[i : i + chunk_size] for i in range(0, len(assignments), chunk_size)]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_evaluate_chunk, [(dag, profile, c) for c in chunks]))
        results = [r for part in parts for r in part]
    else:
        results = [evaluate(dag, a, profile) for a in assignments]
    results.sort(key=lambda r: (r.makespan, r.index))
    return results


# ---------------------------------------------------------------- export

def dumps_evaluated(configs) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(EXPORT_HEADER)
    for c in configs:
        trace = ";".join(
            f"{e.level}|{e.component}|{e.stage}|{e.tier}|{e.time!r}" for e in c.crit_trace
        )
        w.writerow([c.index, c.assignment.encode(), c.assignment.tpn, repr(c.makespan), trace])
    return buf.getvalue()


def loads_evaluated(text) -> list:
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header is None or tuple(header) != EXPORT_HEADER:
        raise SpecFormatError(f"evaluated table line 1: expected header {','.join(EXPORT_HEADER)}")
    out = []
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        try:
            idx, assign, tpn, makespan, trace = row
            tier_of = dict(p.split(":", 1) for p in assign.split(";"))
            entries = []
            for part in (trace.split(";") if trace else ()):
                lvl, comp, stage, tier, t = part.split("|")
                if comp not in COMPONENTS:
                    raise ValueError(f"unknown component {comp!r}")
                entries.append(CritEntry(int(lvl), comp, stage, tier, float(t)))
            a = Assignment(tier_of, int(tpn), int(idx))
            out.append(EvaluatedConfig(a, float(makespan), tuple(entries)))
        except ValueError as exc:
            raise SpecFormatError(f"evaluated table line {lineno}: {exc}") from None
    return out


def load_evaluated(path) -> list:
    with open(path, encoding="utf-8", newline="") as fh:
        return loads_evaluated(fh.read())
