"""Command-line entry point: project, evaluate, regions, compare, query, demo."""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass, field

from . import synthetic
from .baselines import compare_policies
from .configspace import dumps_evaluated, evaluate_all, load_evaluated, space_size
from .errors import CapExceeded, InvalidTemplate, MissingScale, TierscopeError
from .qos import QosQuery, answer, load_query, region_cost_composition, sensitivity_classify
from .regions import CartParams, RegionModel, SeparationParams, encode, encode_batches, epsilon_check, mine_regions
from .report import compare_csv, cost_csv, epsilon_csv, membership_csv, regions_dot
from .storage import dumps_profile, load_profile
from .workflow import builtin_template, load_template, project, template_to_dict, validate

DEFAULT_SEED = 20251017
DEFAULT_CAP = 100_000


@dataclass
class RunConfig:
    seed: int = DEFAULT_SEED
    K: int = 5
    R: int = 3
    delta: float = 0.05
    g_floor: float = 0.3
    g_cap: float = 3.0
    min_leaf: int = 5
    min_leaf_eval: int = 3
    max_depth: int = 12
    epsilon: float = 0.1
    cap: int = DEFAULT_CAP
    top_k: int = 5
    workers: int = 1
    scales: list = field(default_factory=list)

    def separation(self):
        return SeparationParams(self.g_floor, self.g_cap, self.delta, self.min_leaf_eval)

    def cart(self):
        return CartParams(self.max_depth, self.min_leaf)

    @classmethod
    def from_args(cls, args):
        keys = cls.__dataclass_fields__
        return cls(**{k: getattr(args, k) for k in keys if getattr(args, k, None) is not None})


def _write(path, text):
    d = os.path.dirname(path)
    if d:
        os.makedirs(d, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def _dump_json(obj):
    return json.dumps(obj, indent=2, ensure_ascii=False) + "\n"


def _scale(text):
    v = float(text)
    return int(v) if v.is_integer() else v


def _keyed(items, what):
    """Parse ``SCALE=path`` arguments into a dict."""
    out = {}
    for item in items or []:
        if "=" not in item:
            raise TierscopeError(f"{what} must be given as SCALE=path, got {item!r}")
        k, path = item.split("=", 1)
        out[_scale(k)] = path
    return out


def _load_profile(spec):
    if spec == "builtin:staircase":
        return synthetic.staircase_profile()
    if spec == "builtin:genome":
        return synthetic.genome_profile()
    return load_profile(spec)


def _template(args):
    t = load_template(args.spec)
    problems = validate(t)
    if problems:
        raise InvalidTemplate(problems)
    return t


def _region_model(configs, template, cfg, scale=None):
    fm = encode(configs, template.catalog, candidates={s.name: s.tiers for s in template.stages})
    return mine_regions(fm, cfg.K, cfg.R, cfg.seed, cfg.separation(), cfg.cart(), workers=cfg.workers)


# ---------------------------------------------------------------- commands

def cmd_project(args):
    t = _template(args)
    written = []
    for s in args.scales:
        dag = project(t, args.data_scale, s, args.tpn)
        path = os.path.join(args.out, f"{t.name or 'workflow'}_n{s}.json")
        _write(path, _dump_json(dag.to_dict()))
        written.append(path)
    for p in written:
        print(p)
    return 0


def cmd_evaluate(args):
    t = _template(args)
    profile = _load_profile(args.profile)
    dag = project(t, args.data_scale, args.scale, args.tpn)
    size = space_size(dag)
    if size > args.cap:
        raise CapExceeded(size, args.cap)
    configs = evaluate_all(dag, profile, limit=args.cap, workers=args.workers)
    text = dumps_evaluated(configs)
    if args.out:
        _write(args.out, text)
    else:
        sys.stdout.write(text)
    return 0


def _load_tables(items):
    if len(items) == 1 and "=" not in items[0]:
        return {None: load_evaluated(items[0])}
    return {k: load_evaluated(v) for k, v in _keyed(items, "--evaluated").items()}


def cmd_regions(args):
    cfg = RunConfig.from_args(args)
    t = _template(args)
    tables = _load_tables(args.evaluated)
    cands = {s.name: s.tiers for s in t.stages}
    if len(tables) > 1:
        fm = encode_batches([(v, k) for k, v in tables.items()], t.catalog, candidates=cands)
        configs = [c for v in tables.values() for c in v]
    else:
        configs = next(iter(tables.values()))
        fm = encode(configs, t.catalog, candidates=cands)
    model = mine_regions(fm, cfg.K, cfg.R, cfg.seed, cfg.separation(), cfg.cart(), workers=cfg.workers)
    _write(os.path.join(args.out, "region_model.json"), _dump_json(model.to_dict()))
    _write(os.path.join(args.out, "membership.csv"), membership_csv(model))
    _write(os.path.join(args.out, "regions.dot"), regions_dot(model, t, cfg.top_k))
    _write(os.path.join(args.out, "epsilon_check.csv"), epsilon_csv(epsilon_check(model, cfg.epsilon)))
    if len(tables) == 1:
        _write(os.path.join(args.out, "cost_composition.csv"), cost_csv(region_cost_composition(model, configs, t.catalog)))
        rep = sensitivity_classify(configs, model, cfg.epsilon)
        _write(
            os.path.join(args.out, "sensitivity.json"),
            _dump_json(
                {
                    "classification": rep.classification,
                    "per_region": {str(k): {s: list(v) for s, v in lab.items()} for k, lab in rep.per_region.items()},
                    "critical_path_frequency": [[s, tr, f] for (s, tr), f in rep.frequency.items()],
                }
            ),
        )
    print(f"{len(model.regions)} regions, alpha*={model.alpha_star!r}")
    return 0


def cmd_compare(args):
    cfg = RunConfig.from_args(args)
    t = _template(args)
    configs = load_evaluated(args.evaluated)
    if len(configs) < 2:
        text = compare_csv(compare_policies(configs, None, t.catalog, None))
    else:
        dag = project(t, args.data_scale, args.scale, args.tpn)
        if args.model:
            with open(args.model, encoding="utf-8") as fh:
                model = RegionModel.from_dict(json.load(fh))
        else:
            model = _region_model(configs, t, cfg)
        text = compare_csv(compare_policies(configs, dag, t.catalog, model))
    if args.out:
        _write(args.out, text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_query(args):
    q = load_query(args.query)
    tables = {k: load_evaluated(v) for k, v in _keyed(args.evaluated, "--evaluated").items()}
    models = {}
    for k, path in _keyed(args.model, "--model").items():
        with open(path, encoding="utf-8") as fh:
            models[k] = RegionModel.from_dict(json.load(fh))
    needed = q.params.get("candidate_nodes", []) if q.kind == "Q1_node_scaling" else [q.params.get("scale")]
    for s in needed:
        if s is not None and s in tables and s not in models:
            raise MissingScale(f"no region model for scale {s}")
    rec = answer(q, tables, models, k=args.alternatives)
    text = _dump_json({"query": q.to_dict(), "recommendation": rec.to_dict()})
    if args.out:
        _write(args.out, text)
    else:
        sys.stdout.write(text)
    return 0


def run_demo(out, seed=DEFAULT_SEED, workers=1, scales=(2, 5, 10), top_k=5):
    """Full synthetic pipeline; returns the list of files written."""
    cfg = RunConfig(seed=seed, workers=workers, top_k=top_k)
    files = []

    def put(name, text):
        path = os.path.join(out, name)
        _write(path, text)
        files.append(path)

    # genome-shaped workflow across node counts
    t = builtin_template("genome5")
    profile = synthetic.genome_profile()
    put("genome5/workflow.json", _dump_json(template_to_dict(t)))
    put("genome5/profile.csv", dumps_profile(profile))
    tables, models = {}, {}
    for n in scales:
        dag = project(t, 1, n, 4)
        configs = evaluate_all(dag, profile, workers=workers)
        model = _region_model(configs, t, cfg)
        tables[n], models[n] = configs, model
        put(f"genome5/dag_n{n}.json", _dump_json(dag.to_dict()))
        put(f"genome5/evaluated_n{n}.csv", dumps_evaluated(configs))
        put(f"genome5/region_model_n{n}.json", _dump_json(model.to_dict()))
        put(f"genome5/membership_n{n}.csv", membership_csv(model))
        put(f"genome5/regions_n{n}.dot", regions_dot(model, t, top_k))
        put(f"genome5/cost_composition_n{n}.csv", cost_csv(region_cost_composition(model, configs, t.catalog)))
        put(f"genome5/compare_n{n}.csv", compare_csv(compare_policies(configs, dag, t.catalog, model)))
    top = max(scales)
    best = tables[top][0]
    queries = {
        "q1": QosQuery("Q1_node_scaling", {"candidate_nodes": list(scales), "max_nodes": sorted(scales)[-2] if len(scales) > 1 else top}),
        "q2": QosQuery("Q2_allowed_tiers", {"allowed_tiers": ["ssd", "beegfs"], "scale": top}),
        "q3": QosQuery(
            "Q3_deadline_excluding",
            {"deadline_s": best.makespan, "excluded_tiers": sorted(set(best.assignment.tier_of.values()))[:1], "scale": top},
        ),
        "q4": QosQuery("Q4_tier_unavailable", {"unavailable_tiers": ["tmpfs"], "scale": top}),
    }
    for name, q in queries.items():
        rec = answer(q, tables, models)
        put(f"genome5/{name}_query.json", _dump_json(q.to_dict()))
        put(f"genome5/{name}_recommendation.json", _dump_json({"query": q.to_dict(), "recommendation": rec.to_dict()}))

    # staircase workflow: well-separated bands
    dag, sprof, sconfigs = synthetic.staircase_dataset()
    smodel = _region_model(sconfigs, dag.template, cfg)
    put("staircase/evaluated.csv", dumps_evaluated(sconfigs))
    put("staircase/region_model.json", _dump_json(smodel.to_dict()))
    put("staircase/membership.csv", membership_csv(smodel))
    put("staircase/regions.dot", regions_dot(smodel, dag.template, top_k))
    put("staircase/epsilon_check.csv", epsilon_csv(epsilon_check(smodel, cfg.epsilon)))
    put("staircase/compare.csv", compare_csv(compare_policies(sconfigs, dag, dag.template.catalog, smodel)))
    return files


def cmd_demo(args):
    files = run_demo(args.out, args.seed, args.workers, tuple(args.scales or (2, 5, 10)), args.top_k)
    print(f"wrote {len(files)} files to {args.out}")
    return 0


# ---------------------------------------------------------------- parser

def _scales(text):
    return [_scale(x) for x in text.split(",") if x.strip()]


def _add_region_flags(p):
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--K", type=int, default=5, help="cross-fitting folds")
    p.add_argument("--R", type=int, default=3, help="cross-fitting repeats")
    p.add_argument("--delta", type=float, default=0.05)
    p.add_argument("--g-floor", dest="g_floor", type=float, default=0.3)
    p.add_argument("--g-cap", dest="g_cap", type=float, default=3.0)
    p.add_argument("--min-leaf", dest="min_leaf", type=int, default=5)
    p.add_argument("--min-leaf-eval", dest="min_leaf_eval", type=int, default=3)
    p.add_argument("--max-depth", dest="max_depth", type=int, default=12)
    p.add_argument("--epsilon", type=float, default=0.1)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--top-k", dest="top_k", type=int, default=5)


def _add_scale_flags(p):
    p.add_argument("--scale", type=int, default=1, help="node count (task scale)")
    p.add_argument("--data-scale", dest="data_scale", default="1")
    p.add_argument("--tpn", type=int, default=1)


def build_parser():
    ap = argparse.ArgumentParser(prog="tierscope", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("project", help="project a workflow template to target scales")
    p.add_argument("--spec", required=True, help="workflow spec file or builtin:<name>")
    p.add_argument("--scales", type=_scales, required=True, help="comma-separated node counts")
    p.add_argument("--data-scale", dest="data_scale", default="1")
    p.add_argument("--tpn", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_project)

    p = sub.add_parser("evaluate", help="evaluate every stage->tier assignment")
    p.add_argument("--spec", required=True)
    p.add_argument("--profile", required=True, help="profile CSV or builtin:genome|builtin:staircase")
    _add_scale_flags(p)
    p.add_argument("--cap", type=int, default=DEFAULT_CAP)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("regions", help="mine performance regions from evaluated tables")
    p.add_argument("--spec", required=True)
    p.add_argument("--evaluated", nargs="+", required=True, help="table, or SCALE=table for several scales")
    _add_region_flags(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_regions)

    p = sub.add_parser("compare", help="pairwise concordance of heuristic and region orderings")
    p.add_argument("--spec", required=True)
    p.add_argument("--evaluated", required=True)
    p.add_argument("--model")
    _add_scale_flags(p)
    _add_region_flags(p)
    p.add_argument("--out")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("query", help="answer a QoS query")
    p.add_argument("--query", required=True)
    p.add_argument("--evaluated", nargs="+", required=True, help="SCALE=table")
    p.add_argument("--model", nargs="+", default=[], help="SCALE=region_model.json")
    p.add_argument("--alternatives", type=int, default=3)
    p.add_argument("--out")
    p.set_defaults(func=cmd_query)

    p = sub.add_parser("demo", help="run the full synthetic pipeline")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--scales", type=_scales)
    p.add_argument("--top-k", dest="top_k", type=int, default=5)
    p.set_defaults(func=cmd_demo)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except InvalidTemplate as exc:
        for v in exc.violations:
            print(f"error: InvalidTemplate: {v}", file=sys.stderr)
        return 2
    except TierscopeError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
