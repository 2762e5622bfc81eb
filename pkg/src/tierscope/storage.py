"""Storage-tier performance profiles and per-stage I/O component times."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

from .errors import NoProfileData, SpecFormatError
from .workflow import PATTERNS, SINK, SOURCE

IO_TYPES = ("read", "write", "copy_in", "copy_out")
PROFILE_HEADER = (
    "tier",
    "io_type",
    "pattern",
    "nodes",
    "tpn",
    "transfer_size_bytes",
    "total_size_bytes",
    "rate_bytes_per_s",
)


@dataclass(frozen=True)
class ProfileRecord:
    tier: str
    io_type: str
    pattern: str
    nodes: int
    tpn: int
    transfer_size: int
    total_size: int
    rate: float

    @property
    def key(self):
        return (self.tier, self.io_type, self.pattern)

    @property
    def dims(self):
        return (self.nodes, self.tpn, self.transfer_size, self.total_size)


@dataclass(frozen=True)
class ComponentTimes:
    stage_in: float
    execution: float
    stage_out: float

    def get(self, component):
        return getattr(self, component)


class StorageProfile:
    """Read-only collection of measured transfer rates.

    Rates between measured points are interpolated in log space from the two
    nearest records (inverse-distance weights); exact hits return the
    recorded rate.
    """

    def __init__(self, records):
        self.records = tuple(records)
        self._groups = {}
        self._exact = {}
        for r in self.records:
            if r.io_type not in IO_TYPES:
                raise ValueError(f"unknown io_type {r.io_type!r}")
            if r.pattern not in PATTERNS:
                raise ValueError(f"unknown pattern {r.pattern!r}")
            if min(r.dims) <= 0 or not (r.rate > 0 and math.isfinite(r.rate)):
                raise ValueError(f"non-positive profile value in {r}")
            full = r.key + r.dims
            if full in self._exact:
                raise ValueError(f"duplicate profile record {full}")
            self._exact[full] = r.rate
            self._groups.setdefault(r.key, []).append(r)
        for key, group in self._groups.items():
            group.sort(key=lambda r: r.dims)
            self._groups[key] = tuple(
                (r, tuple(math.log(d) for d in r.dims), math.log(r.rate)) for r in group
            )
        self._cache = {}

    def __len__(self):
        return len(self.records)

    @property
    def tiers(self):
        return sorted({r.tier for r in self.records})

    def has(self, tier, io_type, pattern):
        return (tier, io_type, pattern) in self._groups

    def estimate_rate(self, tier, io_type, pattern, nodes, tpn, transfer_size, total_size):
        query = (tier, io_type, pattern, nodes, tpn, transfer_size, total_size)
        hit = self._cache.get(query)
        if hit is not None:
            return hit
        rate = self._estimate(query)
        self._cache[query] = rate
        return rate

    def _estimate(self, query):
        key, dims = query[:3], query[3:]
        exact = self._exact.get(query)
        if exact is not None:
            return exact
        group = self._groups.get(key)
        if not group:
            raise NoProfileData(f"no profile records for tier={key[0]} io_type={key[1]} pattern={key[2]}")
        if min(dims) <= 0:
            raise ValueError(f"profile query dimensions must be positive: {dims}")
        logq = [math.log(d) for d in dims]
        if len(group) == 1:
            return group[0][0].rate
        scored = sorted(
            (math.dist(logq, logd), r.dims, logr) for r, logd, logr in group
        )
        (d1, _, l1), (d2, _, l2) = scored[:2]
        w1, w2 = 1.0 / d1, 1.0 / d2
        return math.exp((w1 * l1 + w2 * l2) / (w1 + w2))


def estimate_rate(profile, tier, io_type, pattern, nodes, tpn, transfer_size, total_size):
    return profile.estimate_rate(tier, io_type, pattern, nodes, tpn, transfer_size, total_size)


def loads_profile(text) -> StorageProfile:
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise SpecFormatError("profile: empty file") from None
    if tuple(h.strip() for h in header) != PROFILE_HEADER:
        raise SpecFormatError(f"profile line 1: expected header {','.join(PROFILE_HEADER)}")
    records = []
    for lineno, row in enumerate(reader, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(PROFILE_HEADER):
            raise SpecFormatError(f"profile line {lineno}: expected {len(PROFILE_HEADER)} fields")
        try:
            rec = ProfileRecord(
                row[0].strip(),
                row[1].strip(),
                row[2].strip(),
                int(row[3]),
                int(row[4]),
                int(row[5]),
                int(row[6]),
                float(row[7]),
            )
        except ValueError as exc:
            raise SpecFormatError(f"profile line {lineno}: {exc}") from None
        records.append((lineno, rec))
    try:
        return StorageProfile(r for _, r in records)
    except ValueError as exc:
        raise SpecFormatError(f"profile: {exc}") from None


def load_profile(path) -> StorageProfile:
    with open(path, encoding="utf-8", newline="") as fh:
        return loads_profile(fh.read())


def dumps_profile(profile: StorageProfile) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(PROFILE_HEADER)
    for r in sorted(profile.records, key=lambda r: r.key + r.dims):
        w.writerow([r.tier, r.io_type, r.pattern, r.nodes, r.tpn, r.transfer_size, r.total_size, repr(r.rate)])
    return buf.getvalue()


def synthetic_profile(
    speeds,
    nodes=(1, 2, 4, 8, 16, 32),
    tpns=(1, 4, 16),
    transfer_sizes=(256 * 1024, 1 << 20, 4 << 20),
    total_sizes=(1 << 20, 16 << 20, 256 << 20, 4 << 30, 64 << 30),
    random_penalty=0.5,
    write_penalty=0.8,
    copy_rates=None,
):
    """Build a dense synthetic profile.

    ``speeds`` maps tier name to its sequential read rate in bytes/s.  Rates
    grow mildly with transfer size and concurrency so interpolation has
    something to do; ``copy_rates`` (tier -> bytes/s) sets copy_in/copy_out
    rates and defaults to half of the read rate.
    """
    records = []
    for tier, base in speeds.items():
        copy = (copy_rates or {}).get(tier, base / 2)
        for io_type in IO_TYPES:
            for pattern in PATTERNS:
                for n in nodes:
                    for t in tpns:
                        for ts in transfer_sizes:
                            for tot in total_sizes:
                                size_gain = (ts / (1 << 20)) ** 0.1
                                par_gain = (n * t) ** 0.05
                                if io_type.startswith("copy"):
                                    rate = copy * size_gain
                                else:
                                    rate = base * size_gain * par_gain
                                    if io_type == "write":
                                        rate *= write_penalty
                                if pattern == "random":
                                    rate *= random_penalty
                                records.append(
                                    ProfileRecord(tier, io_type, pattern, n, t, ts, tot, float(rate))
                                )
    return StorageProfile(records)


# ---------------------------------------------------------------- component times

def _tier_map(assignment):
    return getattr(assignment, "tier_of", assignment)


def component_times(dag, assignment, profile) -> dict:
    """Per-stage (stage-in, execution, stage-out) seconds under ``assignment``.

    A relocation along an edge is charged once, on the consumer's stage-in;
    stage-out only carries copies towards the final data tier.  Copies run
    one task per node.
    """
    tier_of = _tier_map(assignment)
    tpn = getattr(assignment, "tpn", dag.tpn)
    nodes = dag.task_scale
    initial = dag.template.initial_data_tier
    final = dag.template.final_data_tier
    rate = profile.estimate_rate

    out = {}
    for stage in sorted(s.name for s in dag.stages):
        tier = tier_of[stage]
        s_in = 0.0
        reads = 0.0
        writes = 0.0
        s_out = 0.0
        try:
            for e in dag.edges:
                p = e.props
                if e.dst == stage:
                    src_tier = initial if e.src == SOURCE else tier_of[e.src]
                    if src_tier != tier:
                        s_in += p.volume / rate(tier, "copy_in", p.pattern, nodes, 1, p.access_size, p.volume)
                    reads += p.volume / rate(tier, "read", p.pattern, nodes, tpn, p.access_size, p.volume)
                if e.src == stage:
                    writes += p.volume / rate(tier, "write", p.pattern, nodes, tpn, p.access_size, p.volume)
                    if e.dst == SINK and final != tier:
                        s_out += p.volume / rate(tier, "copy_out", p.pattern, nodes, 1, p.access_size, p.volume)
        except NoProfileData as exc:
            raise NoProfileData(f"stage {stage}: {exc}") from None
        out[stage] = ComponentTimes(s_in, reads + writes, s_out)
    return out


def relocations(dag, assignment) -> list:
    """Edges whose data must move between tiers, as ``(edge_index, target_tier)``."""
    tier_of = _tier_map(assignment)
    initial = dag.template.initial_data_tier
    final = dag.template.final_data_tier
    moves = []
    for i, e in enumerate(dag.edges):
        src_tier = initial if e.src == SOURCE else tier_of[e.src]
        dst_tier = final if e.dst == SINK else tier_of[e.dst]
        if src_tier != dst_tier:
            moves.append((i, dst_tier))
    return moves
