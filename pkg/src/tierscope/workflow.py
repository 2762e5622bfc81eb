"""Workflow DAG templates with per-edge scaling rules, and projection to a target scale.

A template is a leveled stage graph.  Data enters from a pseudo-stage
``@source`` pinned to the initial data tier and leaves through ``@sink``
pinned to the final data tier.  Each edge carries a :class:`ScalingRule`
from which the concrete (access count, access size, volume) triple is
computed for a given ``(data_scale, task_scale)``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import NamedTuple

from .errors import (
    InvalidTemplate,
    ScaleOverflow,
    SpecFormatError,
    UnknownRuleKind,
    UnknownTemplate,
)

SOURCE = "@source"
SINK = "@sink"

RULE_KINDS = (
    "volume_linear_in_data_scale",
    "volume_inverse_in_task_scale",
    "constant",
    "access_size_fixed_volume_linear",
)
PATTERNS = ("sequential", "random")
TIER_CLASSES = ("remote", "local")
MAX_BYTES = 2**63 - 1

MiB = 1 << 20


@dataclass(frozen=True)
class Tier:
    name: str
    cls: str
    speed_rank: int


@dataclass(frozen=True)
class TierCatalog:
    tiers: tuple

    def __post_init__(self):
        object.__setattr__(self, "tiers", tuple(sorted(self.tiers, key=lambda t: t.speed_rank)))

    def __iter__(self):
        return iter(self.tiers)

    def __len__(self):
        return len(self.tiers)

    def __contains__(self, name):
        return any(t.name == name for t in self.tiers)

    def get(self, name) -> Tier:
        for t in self.tiers:
            if t.name == name:
                return t
        raise KeyError(name)

    def rank(self, name) -> int:
        return self.get(name).speed_rank

    @property
    def names(self):
        """Tier names fastest first."""
        return tuple(t.name for t in self.tiers)

    def violations(self):
        out = []
        names = [t.name for t in self.tiers]
        if len(set(names)) != len(names):
            out.append(Violation("duplicate-tier", "catalog", "tier names are not unique"))
        ranks = sorted(t.speed_rank for t in self.tiers)
        if ranks != list(range(1, len(ranks) + 1)):
            out.append(Violation("tier-ranks", "catalog", "speed ranks must be 1..T without gaps"))
        for t in self.tiers:
            if t.cls not in TIER_CLASSES:
                out.append(Violation("tier-class", t.name, f"unknown tier class {t.cls!r}"))
        return out


def default_catalog() -> TierCatalog:
    """tmpfs > node-local ssd > shared beegfs."""
    return TierCatalog(
        (Tier("tmpfs", "local", 1), Tier("ssd", "local", 2), Tier("beegfs", "remote", 3))
    )


@dataclass(frozen=True)
class Stage:
    name: str
    level: int
    tiers: tuple  # candidate tier names


@dataclass(frozen=True)
class ScalingRule:
    kind: str
    base_access_count: int
    base_access_size: int
    base_volume: int

    def apply(self, data_scale, task_scale):
        """Return ``(access_size, volume)`` in bytes at the given scale."""
        ds = Fraction(data_scale)
        ts = Fraction(task_scale)
        v = Fraction(self.base_volume)
        if self.kind == "volume_linear_in_data_scale":
            v = v * ds
        elif self.kind == "volume_inverse_in_task_scale":
            v = v / ts
        elif self.kind == "constant":
            pass
        elif self.kind == "access_size_fixed_volume_linear":
            v = v * ds * ts
        else:
            raise UnknownRuleKind(self.kind)
        volume = max(1, math.ceil(v))
        if volume > MAX_BYTES:
            raise ScaleOverflow(f"volume {volume} exceeds {MAX_BYTES} bytes")
        # a transfer never exceeds the data it moves
        return min(self.base_access_size, volume), volume


@dataclass(frozen=True)
class TemplateEdge:
    src: str
    dst: str
    rule: ScalingRule
    pattern: str = "sequential"


@dataclass(frozen=True)
class EdgeProps:
    access_count: int
    access_size: int
    volume: int
    pattern: str


@dataclass(frozen=True)
class ProjectedEdge:
    src: str
    dst: str
    props: EdgeProps


class Violation(NamedTuple):
    code: str
    where: str
    message: str

    def __str__(self):
        return f"{self.where}: {self.message}"


@dataclass(frozen=True)
class WorkflowTemplate:
    stages: tuple
    edges: tuple
    initial_data_tier: str
    final_data_tier: str
    catalog: TierCatalog = field(default_factory=default_catalog)
    name: str = ""

    @property
    def levels(self) -> int:
        return max((s.level for s in self.stages), default=-1) + 1

    def stage(self, name) -> Stage:
        for s in self.stages:
            if s.name == name:
                return s
        raise KeyError(name)

    @property
    def stage_names(self):
        return tuple(sorted(s.name for s in self.stages))


def validate(template: WorkflowTemplate) -> list:
    """Return every invariant violation of ``template`` (empty list = valid)."""
    out = list(template.catalog.violations())
    seen = set()
    for s in template.stages:
        if s.name in seen:
            out.append(Violation("duplicate-stage", s.name, "duplicate stage name"))
        seen.add(s.name)
        if s.name in (SOURCE, SINK):
            out.append(Violation("reserved-name", s.name, "stage name is reserved"))
        if s.level < 0:
            out.append(Violation("bad-level", s.name, f"negative level {s.level}"))
        if not s.tiers:
            out.append(Violation("empty-tiers", s.name, "empty candidate tier set"))
        for t in s.tiers:
            if t not in template.catalog:
                out.append(Violation("unknown-tier", s.name, f"unknown tier {t!r}"))
    used_levels = {s.level for s in template.stages}
    for lvl in range(template.levels):
        if lvl not in used_levels:
            out.append(Violation("empty-level", f"level {lvl}", "level has no stages"))
    for attr in ("initial_data_tier", "final_data_tier"):
        t = getattr(template, attr)
        if t not in template.catalog:
            out.append(Violation("unknown-tier", attr, f"unknown tier {t!r}"))

    level_of = {s.name: s.level for s in template.stages}
    touched = set()
    for i, e in enumerate(template.edges):
        where = f"edge {i} ({e.src}->{e.dst})"
        src_ok = e.src == SOURCE or e.src in level_of
        dst_ok = e.dst == SINK or e.dst in level_of
        if not src_ok:
            out.append(Violation("unknown-endpoint", where, f"unknown producer {e.src!r}"))
        if not dst_ok:
            out.append(Violation("unknown-endpoint", where, f"unknown consumer {e.dst!r}"))
        if e.src == SOURCE and e.dst == SINK:
            out.append(Violation("source-to-sink", where, "edge bypasses every stage"))
        if e.src == e.dst:
            out.append(Violation("self-loop", where, "edge connects a stage to itself"))
        elif e.src in level_of and e.dst in level_of and level_of[e.src] > level_of[e.dst]:
            out.append(Violation("level-order", where, "level-order violated"))
        touched.update((e.src, e.dst))
        if e.pattern not in PATTERNS:
            out.append(Violation("bad-pattern", where, f"unknown pattern {e.pattern!r}"))
        r = e.rule
        if r.kind not in RULE_KINDS:
            out.append(Violation("unknown-rule", where, f"unknown rule kind {r.kind!r}"))
        if min(r.base_access_count, r.base_access_size, r.base_volume) <= 0:
            out.append(Violation("bad-rule", where, "rule values must be positive"))
        else:
            if r.base_volume < r.base_access_size:
                out.append(Violation("bad-rule", where, "base volume smaller than access size"))
            if r.base_access_count != -(-r.base_volume // r.base_access_size):
                out.append(
                    Violation("bad-rule", where, "access count inconsistent with volume/access size")
                )
    for s in template.stages:
        if s.name not in touched:
            out.append(Violation("isolated-stage", s.name, "stage has no edges"))
    if template.edges and SOURCE not in touched:
        out.append(Violation("no-source", "edges", "no edge leaves the external source"))
    if template.edges and SINK not in touched:
        out.append(Violation("no-sink", "edges", "no edge reaches the external sink"))
    return out


@dataclass(frozen=True)
class ProjectedDag:
    template: WorkflowTemplate
    edges: tuple  # ProjectedEdge, same order as template.edges
    data_scale: Fraction
    task_scale: int
    tpn: int = 1

    @property
    def catalog(self) -> TierCatalog:
        return self.template.catalog

    @property
    def stages(self):
        return self.template.stages

    @property
    def levels(self):
        """Stage names grouped by level, each level sorted by name."""
        groups = [[] for _ in range(self.template.levels)]
        for s in self.template.stages:
            groups[s.level].append(s.name)
        return [tuple(sorted(g)) for g in groups]

    def candidates(self, stage) -> tuple:
        """Candidate tiers of ``stage`` ordered fastest first."""
        cat = self.catalog
        return tuple(sorted(self.template.stage(stage).tiers, key=cat.rank))

    def to_dict(self):
        return {
            "workflow": self.template.name,
            "data_scale": str(self.data_scale),
            "task_scale": self.task_scale,
            "tpn": self.tpn,
            "levels": [list(g) for g in self.levels],
            "edges": [
                {
                    "from": e.src,
                    "to": e.dst,
                    "access_count": e.props.access_count,
                    "access_size_bytes": e.props.access_size,
                    "volume_bytes": e.props.volume,
                    "pattern": e.props.pattern,
                }
                for e in self.edges
            ],
        }


def project(template: WorkflowTemplate, data_scale=1, task_scale=1, tpn=1) -> ProjectedDag:
    """Instantiate ``template`` at ``(data_scale, task_scale)``."""
    data_scale = Fraction(data_scale)
    if data_scale <= 0 or int(task_scale) != task_scale or task_scale <= 0 or tpn <= 0:
        raise ValueError("scales and tpn must be positive (task_scale an integer)")
    for e in template.edges:
        if e.rule.kind not in RULE_KINDS:
            raise UnknownRuleKind(f"{e.src}->{e.dst}: {e.rule.kind!r}")
    problems = validate(template)
    if problems:
        raise InvalidTemplate(problems)
    edges = []
    for e in template.edges:
        size, volume = e.rule.apply(data_scale, task_scale)
        count = -(-volume // size)
        edges.append(ProjectedEdge(e.src, e.dst, EdgeProps(count, size, volume, e.pattern)))
    return ProjectedDag(template, tuple(edges), data_scale, int(task_scale), int(tpn))


# ---------------------------------------------------------------- file format

_TOP_KEYS = {"name", "tiers", "stages", "edges", "initial_data_tier", "final_data_tier"}
_REQUIRED_TOP = {"stages", "edges", "initial_data_tier", "final_data_tier"}
_STAGE_KEYS = {"name", "level", "tiers"}
_EDGE_KEYS = {"from", "to", "rule", "pattern"}
_RULE_KEYS = {"kind", "base_access_count", "base_access_size_bytes", "base_volume_bytes"}
_TIER_KEYS = {"name", "class", "speed_rank"}


def _check_keys(obj, allowed, required, where):
    if not isinstance(obj, dict):
        raise SpecFormatError(f"{where}: expected an object")
    unknown = sorted(set(obj) - allowed)
    if unknown:
        raise SpecFormatError(f"{where}: unknown key(s) {', '.join(unknown)}")
    missing = sorted(required - set(obj))
    if missing:
        raise SpecFormatError(f"{where}: missing key(s) {', '.join(missing)}")


def template_from_dict(doc) -> WorkflowTemplate:
    _check_keys(doc, _TOP_KEYS, _REQUIRED_TOP, "workflow")
    if "tiers" in doc:
        tiers = []
        for i, t in enumerate(doc["tiers"]):
            _check_keys(t, _TIER_KEYS, _TIER_KEYS, f"tiers[{i}]")
            tiers.append(Tier(str(t["name"]), str(t["class"]), int(t["speed_rank"])))
        catalog = TierCatalog(tuple(tiers))
    else:
        catalog = default_catalog()
    stages = []
    for i, s in enumerate(doc["stages"]):
        _check_keys(s, _STAGE_KEYS, _STAGE_KEYS, f"stages[{i}]")
        stages.append(Stage(str(s["name"]), int(s["level"]), tuple(s["tiers"])))
    edges = []
    for i, e in enumerate(doc["edges"]):
        _check_keys(e, _EDGE_KEYS, {"from", "to", "rule"}, f"edges[{i}]")
        r = e["rule"]
        _check_keys(r, _RULE_KEYS, _RULE_KEYS, f"edges[{i}].rule")
        rule = ScalingRule(
            str(r["kind"]),
            int(r["base_access_count"]),
            int(r["base_access_size_bytes"]),
            int(r["base_volume_bytes"]),
        )
        edges.append(TemplateEdge(str(e["from"]), str(e["to"]), rule, e.get("pattern", "sequential")))
    return WorkflowTemplate(
        tuple(stages),
        tuple(edges),
        str(doc["initial_data_tier"]),
        str(doc["final_data_tier"]),
        catalog,
        str(doc.get("name", "")),
    )


def template_to_dict(t: WorkflowTemplate) -> dict:
    return {
        "name": t.name,
        "tiers": [{"name": x.name, "class": x.cls, "speed_rank": x.speed_rank} for x in t.catalog],
        "stages": [{"name": s.name, "level": s.level, "tiers": list(s.tiers)} for s in t.stages],
        "edges": [
            {
                "from": e.src,
                "to": e.dst,
                "rule": {
                    "kind": e.rule.kind,
                    "base_access_count": e.rule.base_access_count,
                    "base_access_size_bytes": e.rule.base_access_size,
                    "base_volume_bytes": e.rule.base_volume,
                },
                "pattern": e.pattern,
            }
            for e in t.edges
        ],
        "initial_data_tier": t.initial_data_tier,
        "final_data_tier": t.final_data_tier,
    }


def loads_template(text: str) -> WorkflowTemplate:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SpecFormatError(f"line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    try:
        return template_from_dict(doc)
    except (TypeError, ValueError) as exc:
        raise SpecFormatError(str(exc)) from None


def load_template(path) -> WorkflowTemplate:
    """Load a workflow spec file, or a built-in shape given as ``builtin:<name>``."""
    path = str(path)
    if path.startswith("builtin:"):
        return builtin_template(path.split(":", 1)[1])
    with open(path, encoding="utf-8") as fh:
        return loads_template(fh.read())


# ---------------------------------------------------------------- built-ins

def _rule(kind, size, volume):
    return ScalingRule(kind, -(-volume // size), size, volume)


def _genome5():
    tiers = ("tmpfs", "ssd", "beegfs")
    lin = "volume_linear_in_data_scale"
    agg = "access_size_fixed_volume_linear"
    stages = (
        Stage("individuals", 0, tiers),
        Stage("sifting", 0, tiers),
        Stage("individuals_merge", 1, tiers),
        Stage("frequency", 2, tiers),
        Stage("mutation_overlap", 2, tiers),
    )
    edges = (
        TemplateEdge(SOURCE, "individuals", _rule(agg, 4 * MiB, 256 * MiB)),
        TemplateEdge(SOURCE, "sifting", _rule(lin, 1 * MiB, 64 * MiB)),
        TemplateEdge("individuals", "individuals_merge", _rule(agg, 1 * MiB, 128 * MiB), "random"),
        TemplateEdge("individuals_merge", "frequency", _rule(lin, 4 * MiB, 96 * MiB)),
        TemplateEdge("individuals_merge", "mutation_overlap", _rule(lin, 4 * MiB, 96 * MiB)),
        TemplateEdge("sifting", "frequency", _rule(lin, 256 * 1024, 16 * MiB), "random"),
        TemplateEdge("sifting", "mutation_overlap", _rule(lin, 256 * 1024, 16 * MiB), "random"),
        TemplateEdge("frequency", SINK, _rule(lin, 1 * MiB, 8 * MiB)),
        TemplateEdge("mutation_overlap", SINK, _rule(lin, 1 * MiB, 8 * MiB)),
    )
    return WorkflowTemplate(stages, edges, "beegfs", "beegfs", default_catalog(), "genome5")


def _chain9():
    tiers = ("tmpfs", "ssd", "beegfs")
    lin = "volume_linear_in_data_scale"
    names = [f"s{i}" for i in range(1, 10)]
    stages = tuple(Stage(n, i, tiers) for i, n in enumerate(names))
    edges = [TemplateEdge(SOURCE, names[0], _rule(lin, 4 * MiB, 512 * MiB))]
    for i in range(8):
        vol = (64 + 32 * (i % 3)) * MiB
        edges.append(TemplateEdge(names[i], names[i + 1], _rule(lin, 1 * MiB, vol)))
    edges.append(TemplateEdge(names[-1], SINK, _rule(lin, 1 * MiB, 32 * MiB)))
    return WorkflowTemplate(stages, tuple(edges), "beegfs", "beegfs", default_catalog(), "chain9")


def _mlloop4(iterations=2):
    tiers = ("tmpfs", "ssd", "beegfs")
    inv = "volume_inverse_in_task_scale"
    agg = "access_size_fixed_volume_linear"
    const = "constant"
    stages, edges = [], []
    prev = SOURCE
    for k in range(iterations):
        sim, ag, tr, inf = (f"{n}_i{k}" for n in ("simulation", "aggregation", "training", "inference"))
        base = 4 * k
        stages += [
            Stage(sim, base, tiers),
            Stage(ag, base + 1, tiers),
            Stage(tr, base + 2, tiers),
            Stage(inf, base + 3, tiers),
        ]
        edges += [
            TemplateEdge(prev, sim, _rule(const, 1 * MiB, 16 * MiB)),
            TemplateEdge(sim, ag, _rule(agg, 1 * MiB, 64 * MiB)),
            TemplateEdge(ag, tr, _rule(const, 4 * MiB, 256 * MiB)),
            TemplateEdge(ag, inf, _rule(inv, 1 * MiB, 128 * MiB), "random"),
            TemplateEdge(tr, inf, _rule(const, 1 * MiB, 32 * MiB)),
        ]
        prev = inf
    edges.append(TemplateEdge(prev, SINK, _rule(const, 1 * MiB, 16 * MiB)))
    return WorkflowTemplate(
        tuple(stages), tuple(edges), "beegfs", "beegfs", default_catalog(), "mlloop4"
    )


BUILTINS = ("genome5", "chain9", "mlloop4")


def builtin_template(name: str, iterations: int = 2) -> WorkflowTemplate:
    """Synthetic template with one of the built-in shapes.

    ``genome5`` is a five-stage fan-in/fan-out DAG over three levels,
    ``chain9`` a nine-stage linear chain and ``mlloop4`` a four-stage loop
    unrolled ``iterations`` times.
    """
    if name == "genome5":
        return _genome5()
    if name == "chain9":
        return _chain9()
    if name == "mlloop4":
        if iterations < 1:
            raise ValueError("iterations must be >= 1")
        return _mlloop4(iterations)
    raise UnknownTemplate(name)
