"""QoS queries over evaluated configurations, plus cost, sensitivity and robustness reports."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

from .configspace import COMPONENTS, makespan_from_times, straggler
from .errors import MissingScale, SpecFormatError
from .storage import component_times

QUERY_KINDS = (
    "Q1_node_scaling",
    "Q2_allowed_tiers",
    "Q3_deadline_excluding",
    "Q4_tier_unavailable",
)
_PARAM_KEYS = {
    "Q1_node_scaling": ({"candidate_nodes"}, {"max_nodes"}),
    "Q2_allowed_tiers": ({"allowed_tiers"}, {"scale"}),
    "Q3_deadline_excluding": ({"deadline_s", "excluded_tiers"}, {"scale"}),
    "Q4_tier_unavailable": ({"unavailable_tiers"}, {"scale"}),
}


@dataclass(frozen=True)
class QosQuery:
    kind: str
    params: dict
    objective: str = "min_makespan"

    def __post_init__(self):
        if self.kind not in QUERY_KINDS:
            raise ValueError(f"unknown query kind {self.kind!r}")
        if self.objective != "min_makespan":
            raise ValueError(f"unsupported objective {self.objective!r}")
        required, optional = _PARAM_KEYS[self.kind]
        missing = required - set(self.params)
        unknown = set(self.params) - required - optional
        if missing:
            raise ValueError(f"{self.kind}: missing params {sorted(missing)}")
        if unknown:
            raise ValueError(f"{self.kind}: unknown params {sorted(unknown)}")
        if self.kind == "Q3_deadline_excluding" and not self.params["deadline_s"] > 0:
            raise ValueError("deadline must be positive")

    @classmethod
    def from_dict(cls, d):
        if not isinstance(d, dict) or set(d) - {"kind", "params", "objective"} or "kind" not in d:
            raise SpecFormatError("query: expected keys kind, params[, objective]")
        return cls(d["kind"], dict(d.get("params", {})), d.get("objective", "min_makespan"))

    def to_dict(self):
        return {"kind": self.kind, "params": self.params, "objective": self.objective}


def load_query(path) -> QosQuery:
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SpecFormatError(f"query line {exc.lineno}: {exc.msg}") from None
    try:
        return QosQuery.from_dict(doc)
    except ValueError as exc:
        raise SpecFormatError(f"query: {exc}") from None


@dataclass(frozen=True)
class Choice:
    scale: object
    config_index: int
    assignment: dict
    makespan: float
    region: int | None

    def to_dict(self):
        return {
            "scale": self.scale,
            "config_index": self.config_index,
            "assignment": dict(sorted(self.assignment.items())),
            "predicted_makespan_s": self.makespan,
            "region_index": self.region,
        }


@dataclass
class Recommendation:
    status: str  # matched | denied
    chosen: Choice | None = None
    alternatives: list = field(default_factory=list)
    rationale: list = field(default_factory=list)
    reason: str | None = None  # empty_feasible_set | deadline_miss
    gap_s: float | None = None

    def to_dict(self):
        return {
            "status": self.status,
            "reason": self.reason,
            "deadline_gap_s": self.gap_s,
            "chosen": self.chosen.to_dict() if self.chosen else None,
            "alternatives": [a.to_dict() for a in self.alternatives],
            "rationale": list(self.rationale),
        }


def _region_lookup(model):
    if model is None:
        return lambda c: None
    by_member = model.region_by_member()

    def lookup(c):
        r = by_member.get(c.index)
        return r if r is not None else model.region_of(c.assignment.tier_of)

    return lookup


def _choice(scale, c, region):
    return Choice(scale, c.index, dict(c.assignment.tier_of), c.makespan, region)


def _best(configs):
    return min(configs, key=lambda c: (c.makespan, c.index))


def _pick_scale(query, evaluations):
    if "scale" in query.params:
        scale = query.params["scale"]
        if scale not in evaluations:
            raise MissingScale(f"no evaluated configurations for scale {scale}")
        return scale
    if len(evaluations) == 1:
        return next(iter(evaluations))
    raise MissingScale("query must name a scale when several are loaded")


def satisfies(query, assignment) -> bool:
    """Whether ``assignment`` (stage -> tier) meets the query's tier constraints."""
    tiers = set(assignment.values())
    p = query.params
    if query.kind == "Q2_allowed_tiers":
        return tiers <= set(p["allowed_tiers"])
    if query.kind == "Q3_deadline_excluding":
        return not tiers & set(p["excluded_tiers"])
    if query.kind == "Q4_tier_unavailable":
        return not tiers & set(p["unavailable_tiers"])
    return True


def answer(query: QosQuery, evaluations: dict, models: dict | None = None, k=3) -> Recommendation:
    """Answer a Q1-Q4 request from per-scale evaluations and region models."""
    models = models or {}
    rationale = []
    if query.kind == "Q1_node_scaling":
        cap = query.params.get("max_nodes")
        cands = sorted(query.params["candidate_nodes"])
        allowed = [n for n in cands if cap is None or n <= cap]
        rationale.append(f"candidate node counts {cands}, cap {cap}: considering {allowed}")
        for n in allowed:
            if n not in evaluations:
                raise MissingScale(f"no evaluated configurations for scale {n}")
        if not allowed:
            rationale.append("no candidate node count within the cap")
            return Recommendation("denied", rationale=rationale, reason="empty_feasible_set")
        per_scale = []
        for n in allowed:
            b = _best(evaluations[n])
            per_scale.append((b.makespan, n, b))
            rationale.append(f"scale {n}: best config {b.index} at {b.makespan!r} s")
        _, scale, best = min(per_scale, key=lambda t: (t[0], t[1]))
        feasible = evaluations[scale]
    else:
        scale = _pick_scale(query, evaluations)
        pool = evaluations[scale]
        feasible = [c for c in pool if satisfies(query, c.assignment.tier_of)]
        rationale.append(
            f"scale {scale}: {len(pool) - len(feasible)} of {len(pool)} configurations violate the tier constraint"
        )
        if not feasible:
            rationale.append("no configuration satisfies the constraint")
            return Recommendation("denied", rationale=rationale, reason="empty_feasible_set")
        best = _best(feasible)
        if query.kind == "Q3_deadline_excluding":
            deadline = float(query.params["deadline_s"])
            if best.makespan > deadline:
                gap = best.makespan - deadline
                # smallest relaxation that makes deadline + gap reach the best makespan
                while deadline + gap < best.makespan:
                    gap = math.nextafter(gap, math.inf)
                rationale.append(
                    f"best admissible makespan {best.makespan!r} s misses the deadline {deadline!r} s by {gap!r} s"
                )
                return Recommendation("denied", rationale=rationale, reason="deadline_miss", gap_s=gap)
            rationale.append(f"best admissible makespan {best.makespan!r} s meets the deadline {deadline!r} s")

    lookup = _region_lookup(models.get(scale))
    region = lookup(best)
    chosen = _choice(scale, best, region)
    rationale.append(f"chosen config {best.index} in region {region}")
    alts = []
    if region is not None:
        same = [c for c in feasible if c.index != best.index and lookup(c) == region]
        if query.kind != "Q1_node_scaling":
            same = [c for c in same if satisfies(query, c.assignment.tier_of)]
        same.sort(key=lambda c: (c.makespan, c.index))
        alts = [_choice(scale, c, region) for c in same[:k]]
    return Recommendation("matched", chosen, alts, rationale)


# ---------------------------------------------------------------- cost composition

@dataclass(frozen=True)
class CostComposition:
    shared_io: float
    local_io: float
    movement: float

    @property
    def total(self):
        return self.shared_io + self.local_io + self.movement

    @property
    def shares(self):
        t = self.total
        if t == 0:
            return (0.0, 0.0, 0.0)
        return (self.shared_io / t, self.local_io / t, self.movement / t)


def _reconcile(parts, target):
    """Adjust one non-zero part by a few ulps so that ``(a + b) + c == target`` exactly."""
    parts = list(parts)
    if (parts[0] + parts[1]) + parts[2] == target:
        return parts
    for i in sorted(range(3), key=lambda i: -parts[i]):
        if parts[i] == 0.0:
            continue
        for direction in (math.inf, -math.inf):
            trial = list(parts)
            for _ in range(64):
                trial[i] = math.nextafter(trial[i], direction)
                if (trial[0] + trial[1]) + trial[2] == target:
                    return trial
    raise ArithmeticError("could not reconcile cost components with the makespan")


def cost_composition(config, catalog) -> CostComposition:
    """Split a critical-path trace into shared-tier I/O, local-tier I/O and data movement."""
    shared = local = move = 0.0
    for e in config.crit_trace:
        if e.component == "execution":
            if catalog.get(e.tier).cls == "remote":
                shared += e.time
            else:
                local += e.time
        else:
            move += e.time
    shared, local, move = _reconcile((shared, local, move), config.makespan)
    return CostComposition(shared, local, move)


def region_cost_composition(model, configs, catalog) -> list:
    """Per region: (index, median makespan, mean shares over members)."""
    by_index = {c.index: c for c in configs}
    out = []
    for r in model.regions:
        shares = [cost_composition(by_index[m], catalog).shares for m in r.members if m in by_index]
        if not shares:
            continue
        mean = tuple(sum(s[i] for s in shares) / len(shares) for i in range(3))
        out.append((r.index, r.median, mean))
    return out


# ---------------------------------------------------------------- sensitivity

@dataclass
class SensitivityReport:
    classification: dict  # stage -> critical | dont_care (critical if so in any region)
    per_region: dict  # region -> {stage: (class, spread)}
    frequency: dict  # (stage, tier) -> fraction of configs with it on the critical path


def sensitivity_classify(evaluations, model, epsilon=0.05) -> SensitivityReport:
    """Label each stage critical or don't-care, region by region.

    A stage is don't-care in a region when the region admits every candidate
    tier for it and swapping only its tier among members moves makespan by
    less than ``epsilon`` of the region median.
    """
    by_index = {c.index: c for c in evaluations}
    stages = sorted(model.groups)
    per_region = {}
    for r in model.regions:
        members = [by_index[m] for m in r.members if m in by_index]
        labels = {}
        for s in stages:
            full = tuple(r.rule.get(s, ())) == tuple(model.groups[s])
            groups = {}
            for c in members:
                key = tuple(t for st, t in sorted(c.assignment.tier_of.items()) if st != s)
                groups.setdefault(key, []).append(c.makespan)
            spread = 0.0
            for ys in groups.values():
                if len(ys) > 1:
                    spread = max(spread, (max(ys) - min(ys)) / r.median)
            labels[s] = ("dont_care" if full and spread < epsilon else "critical", spread)
        per_region[r.index] = labels
    classification = {
        s: "critical" if any(lab[s][0] == "critical" for lab in per_region.values()) else "dont_care"
        for s in stages
    }
    counts = {}
    for c in evaluations:
        for pair in {(e.stage, e.tier) for e in c.crit_trace if e.time > 0}:
            counts[pair] = counts.get(pair, 0) + 1
    n = max(1, len(evaluations))
    frequency = {pair: counts[pair] / n for pair in sorted(counts)}
    return SensitivityReport(classification, per_region, frequency)


# ---------------------------------------------------------------- robustness

@dataclass(frozen=True)
class RobustnessReport:
    trace_stable: bool
    worst_delta_s: float
    flips: tuple  # (level, component, perturbed stage, factor, new straggler)
    rank_shift_bound: int | None = None


class _Scaled:
    def __init__(self, base, component, factor):
        self.base = base
        self.component = component
        self.factor = factor

    def get(self, component):
        v = self.base.get(component)
        return v * self.factor if component == self.component else v


def robustness(config, dag, profile, rho, evaluations=None) -> RobustnessReport:
    """Perturb each component time by +-rho one at a time and watch the stragglers.

    The trace is stable when no perturbation changes which stage is the
    straggler of any (level, component).  ``rank_shift_bound`` counts other
    configurations whose makespan lies within the worst-case delta.
    """
    if not 0 <= rho < 1:
        raise ValueError("rho must be in [0, 1)")
    assignment = config.assignment
    times = component_times(dag, assignment, profile)
    _, trace = makespan_from_times(dag.levels, times, assignment)
    flips = []
    worst = 0.0
    for lvl, stages in enumerate(dag.levels):
        for comp_i, comp in enumerate(COMPONENTS):
            base = trace[3 * lvl + comp_i]
            for s in stages:
                for factor in (1.0 + rho, 1.0 - rho):
                    t2 = dict(times)
                    t2[s] = _Scaled(times[s], comp, factor)
                    who, _, v = straggler(stages, comp, t2, assignment)
                    worst = max(worst, abs(v - base.time))
                    if who != base.stage:
                        flips.append((lvl, comp, s, factor, who))
    bound = None
    if evaluations is not None:
        m = config.makespan
        bound = sum(
            1 for c in evaluations if c.index != config.index and abs(c.makespan - m) <= worst
        )
    return RobustnessReport(not flips, worst, tuple(flips), bound)
