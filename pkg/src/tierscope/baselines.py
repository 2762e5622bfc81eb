"""Heuristic placement orderings and the pairwise-concordance fidelity metric.

An ordering is a tuple of positions into the config list, best first.
"""

from __future__ import annotations

import numpy as np

from . import kernels
from .errors import LengthMismatch
from .storage import relocations


def _tier_counts(config, catalog, rank):
    return sum(1 for t in config.assignment.tier_of.values() if catalog.rank(t) == rank)


def fsf_scores(configs, catalog, weights=(2, 1)):
    """Weighted count of stages on the fastest and second-fastest tiers."""
    w1, w2 = weights
    return [w1 * _tier_counts(c, catalog, 1) + w2 * _tier_counts(c, catalog, 2) for c in configs]


def ltl_scores(configs, dag):
    """Number of edges whose data changes tier under each config."""
    return [len(relocations(dag, c.assignment)) for c in configs]


def order_fsf(configs, catalog):
    """Most stages on the fastest tier first, then most on the second fastest."""
    keys = [
        (-_tier_counts(c, catalog, 1), -_tier_counts(c, catalog, 2), c.index, i)
        for i, c in enumerate(configs)
    ]
    return tuple(k[-1] for k in sorted(keys))


def order_ltl(configs, dag):
    """Fewest tier transitions first."""
    scores = ltl_scores(configs, dag)
    keys = sorted((s, c.index, i) for i, (s, c) in enumerate(zip(scores, configs)))
    return tuple(k[-1] for k in keys)


def _minmax(v):
    v = np.asarray(v, dtype=np.float64)
    lo, hi = v.min(), v.max()
    if hi == lo:
        return np.zeros(len(v))
    return (v - lo) / (hi - lo)


def hybrid_scores(configs, dag, catalog, weights=(2, 1), fast_weight=1.0, move_weight=1.0):
    if not configs:
        return np.zeros(0)
    fast = _minmax(fsf_scores(configs, catalog, weights))
    moves = _minmax(ltl_scores(configs, dag))
    return fast_weight * fast - move_weight * moves


def order_hybrid(configs, dag, catalog, weights=(2, 1), fast_weight=1.0, move_weight=1.0):
    """Descending normalized fast-media score minus normalized transition score."""
    combined = hybrid_scores(configs, dag, catalog, weights, fast_weight, move_weight)
    keys = sorted((-float(s), c.index, i) for i, (s, c) in enumerate(zip(combined, configs)))
    return tuple(k[-1] for k in keys)


def order_by_regions(model, configs):
    """Regions by median, then predicted leaf mean, then enumeration index."""
    region_of = model.region_by_member()
    pred = {r.index: r.prediction for r in model.regions}
    keys = []
    for i, c in enumerate(configs):
        reg = region_of.get(c.index)
        if reg is None:
            reg = model.region_of(c.assignment.tier_of)
        keys.append((reg, pred[reg], c.index, i))
    keys.sort()
    return tuple(k[-1] for k in keys)


def order_by_makespan(configs):
    keys = sorted((c.makespan, c.index, i) for i, c in enumerate(configs))
    return tuple(k[-1] for k in keys)


def pairwise_concordance(ordering, makespans, backend=None) -> float:
    """Fraction of pairs ranked in the same direction as their makespans.

    Pairs with equal makespans count one half.
    """
    ordering = list(ordering)
    makespans = np.asarray(makespans, dtype=np.float64)
    n = len(makespans)
    if len(ordering) != n:
        raise LengthMismatch(f"ordering has {len(ordering)} entries, makespans {n}")
    if n < 2:
        raise ValueError("pairwise concordance needs at least two configurations")
    if sorted(ordering) != list(range(n)):
        raise ValueError("ordering is not a permutation of 0..n-1")
    rank = np.empty(n, dtype=np.int64)
    rank[np.asarray(ordering)] = np.arange(n)
    conc, ties = kernels.concordance_counts(rank, makespans, backend=backend)
    total = n * (n - 1) // 2
    return (conc + 0.5 * ties) / total


def compare_policies(configs, dag, catalog, model):
    """PC of each heuristic and of the region ordering, with % gap to the region model."""
    y = [c.makespan for c in configs]
    if len(configs) < 2:
        return [(name, None, None) for name in ("FSF", "LTL", "Hybrid", "region_model")]
    pcs = {
        "FSF": pairwise_concordance(order_fsf(configs, catalog), y),
        "LTL": pairwise_concordance(order_ltl(configs, dag), y),
        "Hybrid": pairwise_concordance(order_hybrid(configs, dag, catalog), y),
        "region_model": pairwise_concordance(order_by_regions(model, configs), y),
    }
    ref = pcs["region_model"]
    rows = []
    for name, pc in pcs.items():
        gap = None if name == "region_model" or pc == 0 else 100.0 * (ref - pc) / pc
        rows.append((name, pc, gap))
    return rows
