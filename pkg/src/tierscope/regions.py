"""Performance-region mining.

Configurations are one-hot encoded by stage->tier choice, a regression tree
is grown on makespan and pruned along its cost-complexity path, and the
pruning level is picked by repeated K-fold cross-fitting of held-out error
and adjacent-leaf separation (Hedges' g against a noise-adaptive threshold).
"""

from __future__ import annotations

import heapq
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from statistics import median

import numpy as np

from . import kernels
from .errors import (
    DegenerateVariance,
    InconsistentStageSets,
    InsufficientData,
    NonPositiveMean,
    TooFewRows,
)

SCALE = "@scale"


@dataclass(frozen=True)
class SeparationParams:
    g_floor: float = 0.3
    g_cap: float = 3.0
    delta: float = 0.05
    min_leaf_eval: int = 3
    # ceiling applied to an infinite g (two constant leaves with distinct means)
    g_clip: float = 30.0

    def __post_init__(self):
        if not (0 < self.g_floor <= self.g_cap):
            raise ValueError("need 0 < g_floor <= g_cap")
        if self.delta <= 0:
            raise ValueError("delta must be positive")
        if self.min_leaf_eval < 2:
            raise ValueError("min_leaf_eval must be >= 2")


@dataclass(frozen=True)
class CartParams:
    max_depth: int = 12
    min_leaf: int = 5


# ---------------------------------------------------------------- features

@dataclass
class FeatureMatrix:
    X: np.ndarray
    y: np.ndarray
    columns: list  # (stage, tier) pairs, then (SCALE, None) when present
    groups: dict  # stage -> candidate tiers, fastest first
    ids: np.ndarray  # enumeration index of each row
    scales: np.ndarray | None = None

    @property
    def n(self):
        return self.X.shape[0]

    @property
    def p(self):
        return self.X.shape[1]

    def row_assignment(self, i):
        out = {}
        for j, (stage, tier) in enumerate(self.columns):
            if stage != SCALE and self.X[i, j] == 1.0:
                out[stage] = tier
        return out


def encode(configs, catalog, scale=None, candidates=None) -> FeatureMatrix:
    """One-hot encode per-stage tier choices, plus an optional scale column.

    ``scale`` may be a single number or one value per config.  Columns are
    ordered by stage name, then tier speed rank.
    """
    configs = list(configs)
    if not configs:
        raise ValueError("no configurations to encode")
    stages = sorted(configs[0].assignment.tier_of)
    for c in configs:
        if sorted(c.assignment.tier_of) != stages:
            raise InconsistentStageSets(
                f"config {c.index} covers {sorted(c.assignment.tier_of)}, expected {stages}"
            )
    if candidates is None:
        seen = {s: set() for s in stages}
        for c in configs:
            for s, t in c.assignment.tier_of.items():
                seen[s].add(t)
        candidates = seen
    groups = {s: tuple(sorted(candidates[s], key=catalog.rank)) for s in stages}
    columns = [(s, t) for s in stages for t in groups[s]]
    col_of = {c: j for j, c in enumerate(columns)}
    n = len(configs)
    width = len(columns) + (scale is not None)
    X = np.zeros((n, width), dtype=np.float64)
    for i, c in enumerate(configs):
        for s, t in c.assignment.tier_of.items():
            X[i, col_of[(s, t)]] = 1.0
    scales = None
    if scale is not None:
        scales = np.broadcast_to(np.asarray(scale, dtype=np.float64), (n,)).copy()
        X[:, -1] = scales
        columns.append((SCALE, None))
    y = np.array([c.makespan for c in configs], dtype=np.float64)
    ids = np.array([c.index for c in configs], dtype=np.int64)
    return FeatureMatrix(X, y, columns, groups, ids, scales)


def encode_batches(batches, catalog, candidates=None) -> FeatureMatrix:
    """Encode ``[(configs, scale), ...]`` into one matrix with a scale column."""
    configs, scales = [], []
    for cs, sc in batches:
        cs = list(cs)
        configs += cs
        scales += [sc] * len(cs)
    return encode(configs, catalog, scale=scales, candidates=candidates)


# ---------------------------------------------------------------- CART

class CartTree:
    """Binary regression tree stored as flat node arrays (node 0 is the root).

    Rows with ``x[feature] <= threshold`` go left.
    """

    def __init__(self, feature, threshold, left, right, value, count, sse, depth, n_rows):
        self.feature = np.asarray(feature, dtype=np.int64)
        self.threshold = np.asarray(threshold, dtype=np.float64)
        self.left = np.asarray(left, dtype=np.int64)
        self.right = np.asarray(right, dtype=np.int64)
        self.value = np.asarray(value, dtype=np.float64)
        self.count = np.asarray(count, dtype=np.int64)
        self.sse = np.asarray(sse, dtype=np.float64)
        self.node_depth = np.asarray(depth, dtype=np.int64)
        self.n_rows = int(n_rows)
        self._prune_alpha = None
        self._path = None

    @property
    def n_nodes(self):
        return len(self.feature)

    def is_leaf(self):
        return self.left < 0

    @property
    def n_leaves(self):
        return int(self.is_leaf().sum())

    @property
    def depth(self):
        return int(self.node_depth[self.is_leaf()].max())

    def _compute_pruning(self):
        """Weakest-link pruning: the alpha at which every internal node collapses."""
        n = self.n_nodes
        left, right = self.left.tolist(), self.right.tolist()
        leaf = self.is_leaf().tolist()
        risk = (self.sse / self.n_rows).tolist()
        parent = [-1] * n
        for t in range(n):
            if left[t] >= 0:
                parent[left[t]] = parent[right[t]] = t
        sub_risk, sub_leaves = [0.0] * n, [0] * n
        # children always carry larger ids than their parent
        for t in range(n - 1, -1, -1):
            if leaf[t]:
                sub_risk[t], sub_leaves[t] = risk[t], 1
            else:
                sub_risk[t] = sub_risk[left[t]] + sub_risk[right[t]]
                sub_leaves[t] = sub_leaves[left[t]] + sub_leaves[right[t]]

        def link(t):
            return (risk[t] - sub_risk[t]) / (sub_leaves[t] - 1)

        # a collapse only changes the links of its ancestors, so stale heap
        # entries are skipped by version instead of rescanning the tree
        version = [0] * n
        dead = [False] * n  # strictly below a collapsed node
        heap = [(link(t), t, 0) for t in range(n) if not leaf[t]]
        heapq.heapify(heap)

        def valid(entry):
            _, t, v = entry
            return not leaf[t] and not dead[t] and version[t] == v

        alpha_of = np.full(n, np.inf)
        alphas = [0.0]
        counts = [sub_leaves[0]]
        while not leaf[0]:
            while not valid(heap[0]):
                heapq.heappop(heap)
            gmin = heap[0][0]
            batch = []
            while heap and (heap[0][0] <= gmin or math.isclose(heap[0][0], gmin, rel_tol=1e-9, abs_tol=0.0)):
                entry = heapq.heappop(heap)
                if valid(entry):
                    batch.append(entry[1])
            a = max(gmin, alphas[-1])
            touched = set()
            for t in batch:
                leaf[t] = True
                alpha_of[t] = a
                sub_risk[t], sub_leaves[t] = risk[t], 1
                p = parent[t]
                while p >= 0 and p not in touched:
                    touched.add(p)
                    p = parent[p]
                stack = [left[t], right[t]]
                while stack:
                    c = stack.pop()
                    if not dead[c]:
                        dead[c] = True
                        if left[c] >= 0:
                            stack += (left[c], right[c])
            for p in sorted(touched, reverse=True):
                if leaf[p] or dead[p]:
                    continue
                sub_risk[p] = sub_risk[left[p]] + sub_risk[right[p]]
                sub_leaves[p] = sub_leaves[left[p]] + sub_leaves[right[p]]
                version[p] += 1
                heapq.heappush(heap, (link(p), p, version[p]))
            if a > alphas[-1]:
                alphas.append(a)
                counts.append(sub_leaves[0])
            else:
                counts[-1] = sub_leaves[0]
        self._prune_alpha = alpha_of
        self._path = PruningPath(tuple(alphas), tuple(counts))

    @property
    def prune_alpha(self):
        if self._prune_alpha is None:
            self._compute_pruning()
        return self._prune_alpha

    @property
    def path(self):
        if self._path is None:
            self._compute_pruning()
        return self._path

    def leaf_mask(self, alpha):
        """Nodes acting as leaves once the tree is pruned at ``alpha``."""
        return self.is_leaf() | (self.prune_alpha <= alpha)

    def apply(self, X, alpha=0.0):
        """Leaf node id reached by each row of ``X`` in the tree pruned at ``alpha``."""
        X = np.asarray(X, dtype=np.float64)
        stop = self.leaf_mask(alpha)
        node = np.zeros(X.shape[0], dtype=np.int64)
        rows = np.arange(X.shape[0])
        while True:
            moving = ~stop[node]
            if not moving.any():
                return node
            r = rows[moving]
            nd = node[moving]
            go_left = X[r, self.feature[nd]] <= self.threshold[nd]
            node[r] = np.where(go_left, self.left[nd], self.right[nd])

    def predict(self, X, alpha=0.0):
        return self.value[self.apply(X, alpha)]

    def leaves(self, alpha=0.0):
        """Leaf ids of the pruned tree in preorder."""
        stop = self.leaf_mask(alpha)
        out, stack = [], [0]
        while stack:
            t = stack.pop()
            if stop[t]:
                out.append(t)
            else:
                stack += [self.right[t], self.left[t]]
        return out

    def to_dict(self):
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
            "count": self.count.tolist(),
            "sse": self.sse.tolist(),
            "depth": self.node_depth.tolist(),
            "n_rows": self.n_rows,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            d["feature"], d["threshold"], d["left"], d["right"], d["value"],
            d["count"], d["sse"], d["depth"], d["n_rows"],
        )


@dataclass(frozen=True)
class PruningPath:
    alphas: tuple
    leaf_counts: tuple

    def __iter__(self):
        return iter(zip(self.alphas, self.leaf_counts))

    def __len__(self):
        return len(self.alphas)


def _sse(y):
    if len(y) == 0:
        return 0.0
    m = y.mean()
    d = y - m
    return float(d @ d)


def _grow(X, y, max_depth, min_leaf, backend=None) -> CartTree:
    feature, threshold, left, right, value, count, sse, depth = ([] for _ in range(8))

    def new_node(rows, d):
        yn = y[rows]
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(float(yn.mean()))
        count.append(len(rows))
        sse.append(_sse(yn))
        depth.append(d)
        return len(feature) - 1

    root = new_node(np.arange(len(y)), 0)
    stack = [(root, np.arange(len(y)))]
    while stack:
        node, rows = stack.pop()
        d = depth[node]
        yn = y[rows]
        if d >= max_depth or len(rows) < 2 * min_leaf or yn.max() == yn.min():
            continue
        Xn = X[rows]
        order = np.argsort(Xn, axis=0, kind="stable")
        col, _, thr, _ = kernels.best_split(Xn, yn, order, min_leaf, backend=backend)
        if col < 0:
            continue
        mask = Xn[:, col] <= thr
        lrows, rrows = rows[mask], rows[~mask]
        if _sse(y[lrows]) + _sse(y[rrows]) >= sse[node] * (1.0 - 1e-12):
            continue
        feature[node] = col
        threshold[node] = thr
        lid = new_node(lrows, d + 1)
        rid = new_node(rrows, d + 1)
        left[node] = lid
        right[node] = rid
        # depth-first, left subtree numbered first
        stack.append((rid, rrows))
        stack.append((lid, lrows))
    return CartTree(feature, threshold, left, right, value, count, sse, depth, len(y))


def fit_cart(X, y=None, params: CartParams = CartParams(), backend=None) -> CartTree:
    """Grow a squared-error regression tree.

    ``X`` may be a :class:`FeatureMatrix` (then ``y`` is taken from it).
    Splits maximize variance reduction; ties keep the lowest column index,
    then the lowest threshold.
    """
    if isinstance(X, FeatureMatrix):
        X, y = X.X, X.y
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if len(y) < 2 * params.min_leaf:
        raise TooFewRows(f"{len(y)} rows, need at least {2 * params.min_leaf}")
    return _grow(X, y, params.max_depth, params.min_leaf, backend)


def ccp_path(tree: CartTree) -> PruningPath:
    return tree.path


# ---------------------------------------------------------------- separation

def hedges_g(Yi, Yj, strict=False) -> float:
    """Absolute pooled-SD effect size with the small-sample correction.

    Two constant samples give 0 when their means agree and ``inf`` otherwise
    (``strict=True`` raises :class:`DegenerateVariance` instead).
    """
    a = np.asarray(Yi, dtype=np.float64)
    b = np.asarray(Yj, dtype=np.float64)
    if len(a) < 2 or len(b) < 2:
        raise ValueError("hedges_g needs at least two observations per sample")
    nu = len(a) + len(b) - 2
    corr = 1.0 - 3.0 / (4.0 * nu - 1.0)
    ma, mb = a.mean(), b.mean()
    va, vb = a.var(ddof=1), b.var(ddof=1)
    diff = abs(ma - mb)
    if va == 0.0 and vb == 0.0:
        if strict:
            raise DegenerateVariance("both samples have zero variance")
        return 0.0 if diff == 0.0 else math.inf
    return float(corr * diff / math.sqrt(0.5 * (va + vb)))


def small_sample_correction(nu) -> float:
    return 1.0 - 3.0 / (4.0 * nu - 1.0)


def pooled_cv(Yi, Yj) -> float:
    a = np.asarray(Yi, dtype=np.float64)
    b = np.asarray(Yj, dtype=np.float64)
    ma, mb = a.mean(), b.mean()
    if ma <= 0 or mb <= 0:
        raise NonPositiveMean("coefficient of variation needs positive means")
    cva = a.std(ddof=1) / ma if len(a) > 1 else 0.0
    cvb = b.std(ddof=1) / mb if len(b) > 1 else 0.0
    return math.sqrt(0.5 * (cva * cva + cvb * cvb))


def threshold_from_cv(cv_pooled, params: SeparationParams) -> float:
    ratio = math.inf if cv_pooled == 0 else params.delta / cv_pooled
    return max(params.g_floor, min(params.g_cap, ratio))


def adaptive_threshold(Yi, Yj, params: SeparationParams = SeparationParams()) -> float:
    return threshold_from_cv(pooled_cv(Yi, Yj), params)


@dataclass(frozen=True)
class SeparationResult:
    value: float
    pairs: tuple  # (g, threshold, weight) per adjacent pair
    degenerate: bool  # fewer than two evaluable leaves

    def __float__(self):
        return self.value


def separation_report(leaf_samples, params: SeparationParams = SeparationParams()) -> SeparationResult:
    samples = [np.asarray(s, dtype=np.float64) for s in leaf_samples]
    samples = [s for s in samples if len(s) >= params.min_leaf_eval]
    samples.sort(key=lambda s: float(np.median(s)))
    if len(samples) < 2:
        return SeparationResult(0.0, (), True)
    num = 0.0
    den = 0.0
    pairs = []
    for a, b in zip(samples, samples[1:]):
        g = hedges_g(a, b)
        if math.isinf(g):
            g = params.g_clip
        thr = adaptive_threshold(a, b, params)
        w = 2.0 * len(a) * len(b) / (len(a) + len(b))
        if g >= thr:
            num += g * w
        den += w
        pairs.append((g, thr, w))
    return SeparationResult(num / den, tuple(pairs), False)


def separation(leaf_samples, params: SeparationParams = SeparationParams()) -> float:
    """Harmonic-size-weighted mean of adjacent-pair g, counting only pairs above threshold."""
    return separation_report(leaf_samples, params).value


def joint_objective(mae_med, sep_med, w=0.5):
    """Min-max normalize both series and combine; constant series normalize to 0.5."""
    def norm(v):
        v = np.asarray(v, dtype=np.float64)
        lo, hi = v.min(), v.max()
        if hi == lo:
            return np.full(len(v), 0.5)
        return (v - lo) / (hi - lo)

    mae_n = norm(mae_med)
    sep_n = norm(sep_med)
    return w * sep_n + (1.0 - w) * (1.0 - mae_n), mae_n, sep_n


# ---------------------------------------------------------------- cross-fitting

def fold_indices(n, K, R, seed):
    """``[(repeat, fold, train_idx, test_idx), ...]`` with one shuffle per repeat."""
    out = []
    for r in range(R):
        rng = np.random.default_rng(np.random.SeedSequence([int(seed), r]))
        perm = rng.permutation(n)
        folds = np.array_split(perm, K)
        for k in range(K):
            test = np.sort(folds[k])
            train = np.sort(np.concatenate([folds[i] for i in range(K) if i != k]))
            out.append((r, k, train, test))
    return out


def alpha_grid(*paths: PruningPath):
    """Geometric midpoints between consecutive alphas of the union of ``paths``, then the largest."""
    a = sorted({float(x) for path in paths for x in path.alphas})
    grid = [math.sqrt(a[i] * a[i + 1]) for i in range(len(a) - 1)]
    grid.append(a[-1])
    return grid


def _grow_split(task):
    X, y, train, cart, backend = task
    tree = _grow(X[train], y[train], cart.max_depth, cart.min_leaf, backend)
    tree.path  # computed here so it travels back with the tree
    return tree


def _score_split(task):
    tree, Xt, yt, grid, params = task
    # the pruned tree only changes at this split's own path alphas
    level = np.searchsorted(np.asarray(tree.path.alphas), np.asarray(grid, dtype=np.float64), side="right")
    cache = {}
    maes, seps = [], []
    for a, lv in zip(grid, level.tolist()):
        if lv not in cache:
            leaf = tree.apply(Xt, a)
            mae = float(np.mean(np.abs(yt - tree.value[leaf])))
            samples = [yt[leaf == node] for node in np.unique(leaf)]
            cache[lv] = (mae, separation(samples, params))
        maes.append(cache[lv][0])
        seps.append(cache[lv][1])
    return maes, seps


@dataclass
class CvReport:
    alphas: list
    leaves: list  # leaf count of the all-data tree at each alpha
    mae_med: list
    sep_med: list
    mae_norm: list
    sep_norm: list
    J: list
    alpha_star: float
    K: int
    R: int
    seed: int

    def rows(self):
        return [
            {"alpha": a, "leaves": l, "mae_med": m, "sep_med": s, "J": j}
            for a, l, m, s, j in zip(self.alphas, self.leaves, self.mae_med, self.sep_med, self.J)
        ]

    def to_dict(self):
        return {"K": self.K, "R": self.R, "seed": self.seed, "alpha_star": self.alpha_star, "table": self.rows()}


def cross_fit_select(
    fm: FeatureMatrix,
    K=5,
    R=3,
    seed=0,
    params: SeparationParams = SeparationParams(),
    cart: CartParams = CartParams(),
    workers=1,
    alphas=None,
    backend=None,
):
    """Pick the pruning level maximizing equal-weight normalized separation and accuracy.

    The candidate grid is the union of the cost-complexity paths of the
    per-split training trees, probed at geometric midpoints (or ``alphas``
    when given).  Each of the K*R splits grows a tree on the training folds
    and scores every candidate on the held-out fold only; scores are
    aggregated by median.  Ties in the objective go to the larger alpha.
    """
    if K < 2 or R < 1:
        raise ValueError("need K >= 2 and R >= 1")
    if fm.n < K * cart.min_leaf:
        raise InsufficientData(f"{fm.n} rows, need at least K*min_leaf = {K * cart.min_leaf}")
    full = _grow(fm.X, fm.y, cart.max_depth, cart.min_leaf, backend)
    splits = fold_indices(fm.n, K, R, seed)
    grow = [(fm.X, fm.y, train, cart, backend) for _, _, train, _ in splits]
    pool = ProcessPoolExecutor(max_workers=workers) if workers and workers > 1 else None
    try:
        trees = list(pool.map(_grow_split, grow)) if pool else [_grow_split(t) for t in grow]
        grid = list(alphas) if alphas is not None else alpha_grid(*(t.path for t in trees))
        score = [(tree, fm.X[test], fm.y[test], grid, params) for tree, (_, _, _, test) in zip(trees, splits)]
        scores = list(pool.map(_score_split, score)) if pool else [_score_split(t) for t in score]
    finally:
        if pool:
            pool.shutdown()
    mae_med = [median(s[0][i] for s in scores) for i in range(len(grid))]
    sep_med = [median(s[1][i] for s in scores) for i in range(len(grid))]
    J, mae_n, sep_n = joint_objective(mae_med, sep_med)
    best = 0
    for i in range(len(grid)):
        if J[i] >= J[best]:
            best = i
    at = np.searchsorted(np.asarray(full.path.alphas), np.asarray(grid, dtype=np.float64), side="right") - 1
    leaves = [full.path.leaf_counts[i] for i in at.tolist()]
    report = CvReport(
        grid, leaves, mae_med, sep_med, mae_n.tolist(), sep_n.tolist(), J.tolist(),
        grid[best], K, R, int(seed),
    )
    return grid[best], report


# ---------------------------------------------------------------- final model

@dataclass
class Region:
    index: int
    leaf: int
    median: float
    prediction: float
    rule: dict  # stage -> admissible tiers (fastest first)
    members: list  # enumeration indices
    rows: list  # row positions in the feature matrix
    makespans: list
    scale_bounds: tuple | None = None  # (low, high]: low < scale <= high

    @property
    def size(self):
        return len(self.members)

    def matches(self, tier_of, scale=None):
        if any(tier_of[s] not in allowed for s, allowed in self.rule.items()):
            return False
        if self.scale_bounds is not None and scale is not None:
            lo, hi = self.scale_bounds
            return lo < scale <= hi
        return True


@dataclass
class RegionModel:
    tree: CartTree
    regions: list
    alpha_star: float
    cv_report: CvReport | None
    columns: list
    groups: dict
    multi_scale: bool = False
    member_scales: dict = field(default_factory=dict)

    def region_of(self, tier_of, scale=None):
        """Region index of an assignment (None if no rule matches)."""
        for r in self.regions:
            if r.matches(tier_of, scale):
                return r.index
        return None

    def region_by_member(self):
        return {m: r.index for r in self.regions for m in r.members}

    def to_dict(self):
        def num(v):
            return None if v is None or not math.isfinite(v) else v

        return {
            "alpha_star": self.alpha_star,
            "cv": self.cv_report.to_dict() if self.cv_report else None,
            "columns": [[s, t] for s, t in self.columns],
            "groups": {s: list(t) for s, t in self.groups.items()},
            "regions": [
                {
                    "index": r.index,
                    "leaf": r.leaf,
                    "median_makespan_s": r.median,
                    "predicted_makespan_s": r.prediction,
                    "size": r.size,
                    "rule": {s: list(t) for s, t in r.rule.items()},
                    "scale_bounds": None
                    if r.scale_bounds is None
                    else [num(r.scale_bounds[0]), num(r.scale_bounds[1])],
                    "members": list(r.members),
                    "member_makespans_s": list(r.makespans),
                }
                for r in self.regions
            ],
            "tree": self.tree.to_dict(),
        }

    @classmethod
    def from_dict(cls, d):
        cv = None
        if d.get("cv"):
            c = d["cv"]
            rows = c["table"]
            J = [r["J"] for r in rows]
            mae = [r["mae_med"] for r in rows]
            sep = [r["sep_med"] for r in rows]
            _, mae_n, sep_n = joint_objective(mae, sep)
            cv = CvReport(
                [r["alpha"] for r in rows], [r["leaves"] for r in rows], mae, sep,
                mae_n.tolist(), sep_n.tolist(), J, c["alpha_star"], c["K"], c["R"], c["seed"],
            )
        regions = []
        for r in d["regions"]:
            sb = r.get("scale_bounds")
            if sb is not None:
                sb = (-math.inf if sb[0] is None else sb[0], math.inf if sb[1] is None else sb[1])
            regions.append(
                Region(
                    r["index"], r["leaf"], r["median_makespan_s"], r["predicted_makespan_s"],
                    {s: tuple(t) for s, t in r["rule"].items()}, list(r["members"]), [],
                    list(r["member_makespans_s"]), sb,
                )
            )
        return cls(
            CartTree.from_dict(d["tree"]), regions, d["alpha_star"], cv,
            [tuple(c) for c in d["columns"]], {s: tuple(t) for s, t in d["groups"].items()},
            any(r.scale_bounds is not None for r in regions),
        )


def _leaf_rules(tree, alpha, columns, groups):
    """Per-leaf (rule, scale_bounds) implied by the root-to-leaf split path."""
    stop = tree.leaf_mask(alpha)
    out = {}
    stack = [(0, {s: tuple(t) for s, t in groups.items()}, (-math.inf, math.inf))]
    while stack:
        node, rule, bounds = stack.pop()
        if stop[node]:
            out[node] = (rule, bounds)
            continue
        stage, tier = columns[tree.feature[node]]
        thr = float(tree.threshold[node])
        if stage == SCALE:
            lo, hi = bounds
            stack.append((tree.right[node], rule, (max(lo, thr), hi)))
            stack.append((tree.left[node], rule, (lo, min(hi, thr))))
        else:
            without = dict(rule)
            without[stage] = tuple(t for t in rule[stage] if t != tier)
            only = dict(rule)
            only[stage] = tuple(t for t in rule[stage] if t == tier)
            stack.append((tree.right[node], only, bounds))
            stack.append((tree.left[node], without, bounds))
    return out


def finalize(fm: FeatureMatrix, alpha_star, cart: CartParams = CartParams(), cv_report=None, backend=None):
    """Refit on every row, prune at ``alpha_star`` and order the leaves by median makespan."""
    tree = _grow(fm.X, fm.y, cart.max_depth, cart.min_leaf, backend)
    leaf_of = tree.apply(fm.X, alpha_star)
    rules = _leaf_rules(tree, alpha_star, fm.columns, fm.groups)
    multi = fm.scales is not None
    raw = []
    for leaf in tree.leaves(alpha_star):
        rows = np.flatnonzero(leaf_of == leaf)
        if len(rows) == 0:
            continue
        ys = fm.y[rows]
        rule, bounds = rules[leaf]
        raw.append((float(np.median(ys)), int(leaf), rows, rule, bounds))
    raw.sort(key=lambda r: (r[0], r[1]))
    regions = []
    member_scales = {}
    for i, (med, leaf, rows, rule, bounds) in enumerate(raw):
        order = sorted(rows.tolist(), key=lambda r: (fm.y[r], fm.ids[r]))
        regions.append(
            Region(
                i, leaf, med, float(tree.value[leaf]), rule,
                [int(fm.ids[r]) for r in order], order, [float(fm.y[r]) for r in order],
                bounds if multi else None,
            )
        )
        if multi:
            member_scales[i] = [float(fm.scales[r]) for r in order]
    return RegionModel(tree, regions, float(alpha_star), cv_report, list(fm.columns), dict(fm.groups), multi, member_scales)


def mine_regions(fm, K=5, R=3, seed=0, params=SeparationParams(), cart=CartParams(), workers=1, backend=None):
    alpha_star, report = cross_fit_select(fm, K, R, seed, params, cart, workers=workers, backend=backend)
    return finalize(fm, alpha_star, cart, report, backend=backend)


@dataclass(frozen=True)
class EpsilonCheck:
    region: int
    passes: bool
    spread: float


def epsilon_check(model: RegionModel, epsilon) -> list:
    """Whether every pair within a region differs by less than ``epsilon`` of its median."""
    out = []
    for r in model.regions:
        ys = r.makespans
        spread = 0.0 if len(ys) < 2 else (max(ys) - min(ys)) / r.median
        out.append(EpsilonCheck(r.index, spread < epsilon, spread))
    return out
