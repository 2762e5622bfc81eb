import sys

import pytest

from tierscope.configspace import Assignment, EvaluatedConfig
from tierscope.storage import IO_TYPES, ProfileRecord, StorageProfile
from tierscope.workflow import (
    PATTERNS,
    SINK,
    SOURCE,
    ScalingRule,
    Stage,
    TemplateEdge,
    WorkflowTemplate,
    default_catalog,
)

MB = 10**6
TIERS = ("tmpfs", "ssd", "beegfs")


def rule(volume, size=None, kind="volume_linear_in_data_scale"):
    size = min(size or 1 * MB, volume)
    return ScalingRule(kind, -(-volume // size), size, volume)


def chain_template(volumes, tiers=TIERS, initial="beegfs", final="beegfs", kind="volume_linear_in_data_scale"):
    """Linear chain A, B, ... where ``volumes[i]`` feeds stage i and the last one goes to the sink."""
    names = [chr(ord("A") + i) for i in range(len(volumes) - 1)]
    stages = tuple(Stage(n, i, tuple(tiers)) for i, n in enumerate(names))
    ends = [SOURCE] + names + [SINK]
    edges = tuple(TemplateEdge(ends[i], ends[i + 1], rule(v, kind=kind)) for i, v in enumerate(volumes))
    return WorkflowTemplate(stages, edges, initial, final, default_catalog(), "chain")


def flat_profile(rates):
    """One record per (tier, io_type, pattern); ``rates[tier][io_type]`` in bytes/s."""
    records = []
    for tier, by_io in rates.items():
        for io in IO_TYPES:
            for pat in PATTERNS:
                records.append(ProfileRecord(tier, io, pat, 1, 1, 1, 1, float(by_io[io])))
    return StorageProfile(records)


def uniform_rates(read, write=None, copy=None):
    write = read if write is None else write
    copy = read if copy is None else copy
    return {"read": read, "write": write, "copy_in": copy, "copy_out": copy}


def fake_config(index, tier_of, makespan, trace=()):
    return EvaluatedConfig(Assignment(tier_of, 1, index), float(makespan), tuple(trace))


@pytest.fixture
def catalog():
    return default_catalog()


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if results is not None:
        terminalreporter.section("acceptance criteria")
        for n in range(1, 9):
            terminalreporter.write_line(results.get(n, f"criterion {n}: FAIL  errored before reporting"))
