"""Synthetic workflows and profiles used by the demo and the acceptance suite."""

from __future__ import annotations

from .configspace import evaluate_all
from .storage import synthetic_profile
from .workflow import (
    MiB,
    SINK,
    SOURCE,
    ScalingRule,
    Stage,
    TemplateEdge,
    WorkflowTemplate,
    default_catalog,
    project,
)

GB = 1e9

# three speed classes, 4x apart
STAIRCASE_SPEEDS = {"tmpfs": 16 * GB, "ssd": 4 * GB, "beegfs": 1 * GB}
STAIRCASE_COPY = {"tmpfs": 1000 * GB, "ssd": 1000 * GB, "beegfs": 1000 * GB}


def staircase_template(n_stages=5, ratio=32, head_volume=1024 * MiB) -> WorkflowTemplate:
    """Linear chain whose per-stage volume shrinks by ``ratio`` at every stage.

    With ``ratio`` well above the slowest/fastest speed ratio, the tier of
    each stage dominates everything downstream, so makespans fall into
    nested, well-separated bands.
    """
    tiers = ("tmpfs", "ssd", "beegfs")
    names = [f"s{i}" for i in range(n_stages)]
    stages = tuple(Stage(n, i, tiers) for i, n in enumerate(names))
    vols = [max(1, int(head_volume / ratio**i)) for i in range(n_stages + 1)]

    def rule(v):
        size = min(64 * 1024, v)
        return ScalingRule("volume_linear_in_data_scale", -(-v // size), size, v)

    edges = [TemplateEdge(SOURCE, names[0], rule(vols[0]))]
    edges += [TemplateEdge(names[i], names[i + 1], rule(vols[i + 1])) for i in range(n_stages - 1)]
    edges.append(TemplateEdge(names[-1], SINK, rule(vols[-1])))
    return WorkflowTemplate(stages, tuple(edges), "beegfs", "beegfs", default_catalog(), "staircase")


def staircase_profile():
    return synthetic_profile(STAIRCASE_SPEEDS, copy_rates=STAIRCASE_COPY)


def genome_profile():
    """Profile for the genome5 demo: fast local tiers, slower shared tier, moderate copies."""
    return synthetic_profile(
        {"tmpfs": 20 * GB, "ssd": 2 * GB, "beegfs": 0.2 * GB},
        copy_rates={"tmpfs": 1 * GB, "ssd": 1 * GB, "beegfs": 0.5 * GB},
    )


def staircase_dataset(n_stages=5, ratio=32, task_scale=4, tpn=4):
    """``(dag, profile, evaluated configs)`` for the staircase workflow."""
    dag = project(staircase_template(n_stages, ratio), 1, task_scale, tpn)
    profile = staircase_profile()
    return dag, profile, evaluate_all(dag, profile)
