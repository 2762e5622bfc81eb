"""Acceptance suite: one test per criterion, each reporting a pass/fail line.

The lines are collected in ``RESULTS`` and printed in the terminal summary
(see ``conftest.pytest_terminal_summary``), so they show up under plain
``pytest`` without ``-s``.
"""

import filecmp
import inspect
import itertools
import json
import math
import random
import statistics
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from conftest import fake_config
from oracle import brute_force_makespans, random_instance, random_rates
from tierscope import synthetic
from tierscope.baselines import compare_policies
from tierscope.cli import RunConfig, _region_model, main, run_demo
from tierscope.configspace import dumps_evaluated, evaluate_all
from tierscope.regions import (
    SeparationParams,
    adaptive_threshold,
    cross_fit_select,
    encode,
    epsilon_check,
    hedges_g,
    joint_objective,
    separation,
    separation_report,
)
from tierscope.storage import ProfileRecord, StorageProfile
from tierscope.workflow import builtin_template, default_catalog, project

RESULTS = {}
TESTS = Path(__file__).parent


def record(n, ok, detail):
    RESULTS[n] = f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}"
    assert ok, RESULTS[n]


@pytest.fixture(scope="module")
def staircase():
    dag, _, configs = synthetic.staircase_dataset()
    t0 = time.perf_counter()
    model = _region_model(configs, dag.template, RunConfig())
    return dag, configs, model, time.perf_counter() - t0


# ---------------------------------------------------------------- 1

def test_criterion_1_oracle_equivalence():
    t0 = time.perf_counter()
    rng = random.Random(1)
    instances = compared = mismatches = 0
    while instances < 60:
        t = random_instance(rng, max_levels=4, max_width=3)
        rates = random_rates(rng)
        prof = StorageProfile(ProfileRecord(k[0], k[1], k[2], 1, 1, 1, 1, v) for k, v in rates.items())
        dag = project(t, 1, rng.randint(1, 8), rng.randint(1, 4))
        got = evaluate_all(dag, prof)
        expect = brute_force_makespans(dag, prof.estimate_rate)
        names = sorted(s.name for s in dag.stages)
        if len(got) != len(expect):
            mismatches += 1
        for r in got:
            compared += 1
            mismatches += r.makespan != expect[tuple(r.assignment[n] for n in names)]
        instances += 1
    elapsed = time.perf_counter() - t0
    record(
        1,
        mismatches == 0 and elapsed < 10,
        f"{instances} instances, {compared} configs, {mismatches} mismatches at 0 ULP, {elapsed:.2f} s",
    )


# ---------------------------------------------------------------- 2

def test_criterion_2_formula_fidelity():
    def rel(a, b):
        return abs(a - b) / abs(b)

    errs = {}
    # Hedges' g: means 11 and 21, pooled sd sqrt(2), correction 1 - 3/7
    errs["hedges_g"] = rel(hedges_g([10.0, 12.0], [20.0, 22.0]), (4 / 7) * 10 / math.sqrt(2))
    # threshold: delta over the pooled coefficient of variation
    a, b = [9.0, 10.0, 11.0], [18.0, 20.0, 22.0]
    cv = math.sqrt(0.5 * ((statistics.stdev(a) / 10) ** 2 + (statistics.stdev(b) / 20) ** 2))
    errs["adaptive_threshold"] = rel(adaptive_threshold(a, b), 0.05 / cv)
    p = SeparationParams(g_floor=0.3, g_cap=3.0, delta=0.05)
    errs["threshold_cap"] = rel(adaptive_threshold([5.0, 5.0], [7.0, 7.0], p), 3.0)
    # separation: harmonic-mean weighted average of passing pairs
    p2 = SeparationParams(min_leaf_eval=2)
    errs["separation"] = rel(separation([[10.0, 12.0], [20.0, 22.0]], p2), (4 / 7) * 10 / math.sqrt(2))
    d = 3.5 * math.sqrt(2)
    rep = separation_report(
        [[100.1 + d, 102.1 + d], [100.0, 102.0], [100.0 + d, 102.0 + d]], SeparationParams(min_leaf_eval=2, delta=0.01)
    )
    errs["separation_failing_pair"] = rel(rep.value, 1.0)
    J, _, _ = joint_objective([1.0, 2.0, 3.0], [0.0, 1.0, 0.5])
    errs["J"] = max(rel(x, e) for x, e in zip(J.tolist(), [0.5, 0.75, 0.25]))
    worst = max(errs.values())
    record(2, worst <= 1e-12, "max rel err " + ", ".join(f"{k}={v:.1e}" for k, v in errs.items()))


# ---------------------------------------------------------------- 3

def test_criterion_3_staircase(staircase):
    dag, configs, model, elapsed = staircase
    regions = sorted(model.regions, key=lambda r: r.median)
    gaps = []
    for lo, hi in zip(regions, regions[1:]):
        g = hedges_g(lo.makespans, hi.makespans)
        gaps.append(g >= adaptive_threshold(lo.makespans, hi.makespans))
    eps = epsilon_check(model, 0.1)
    ok = len(regions) >= 3 and all(gaps) and all(e.passes for e in eps) and len(configs) <= 1000 and elapsed < 60
    record(
        3,
        ok,
        f"{len(configs)} configs, {len(regions)} regions, {sum(gaps)}/{len(gaps)} adjacent pairs separated, "
        f"{sum(e.passes for e in eps)}/{len(eps)} pass epsilon=0.1, {elapsed:.2f} s",
    )


# ---------------------------------------------------------------- 4

def test_criterion_4_ordering(staircase):
    dag, configs, model, _ = staircase
    pcs = {name: pc for name, pc, _ in compare_policies(configs, dag, dag.template.catalog, model)}
    region = pcs.pop("region_model")
    ok = region >= 0.9 and all(region > pc for pc in pcs.values())
    record(4, ok, f"region_model {region:.3f} vs " + ", ".join(f"{k} {v:.3f}" for k, v in pcs.items()))


# ---------------------------------------------------------------- 5

def test_criterion_5_q3_denial(tmp_path):
    # genome5 at 4 nodes: the fastest configs all use tmpfs somewhere
    t = builtin_template("genome5")
    configs = evaluate_all(project(t, 1, 4, 4), synthetic.genome_profile())
    model = _region_model(configs, t, RunConfig())
    (tmp_path / "ev.csv").write_text(dumps_evaluated(configs))
    (tmp_path / "model.json").write_text(json.dumps(model.to_dict()))
    best = configs[0]
    without = min(c.makespan for c in configs if "tmpfs" not in c.assignment.tier_of.values())
    assert "tmpfs" in best.assignment.tier_of.values() and best.makespan < without

    def ask(deadline, name):
        q = {"kind": "Q3_deadline_excluding", "params": {"deadline_s": deadline, "excluded_tiers": ["tmpfs"], "scale": 4}}
        (tmp_path / f"{name}.json").write_text(json.dumps(q))
        code = main([
            "query", "--query", str(tmp_path / f"{name}.json"), "--evaluated", f"4={tmp_path}/ev.csv",
            "--model", f"4={tmp_path}/model.json", "--out", str(tmp_path / f"{name}_rec.json"),
        ])
        assert code == 0
        return json.loads((tmp_path / f"{name}_rec.json").read_text())["recommendation"]

    deadline = best.makespan  # met by the global best, which needs tmpfs
    denied = ask(deadline, "tight")
    relaxed = ask(deadline + denied["deadline_gap_s"], "relaxed") if denied.get("deadline_gap_s") else {"status": "n/a"}
    ok = denied["status"] == "denied" and denied["reason"] == "deadline_miss" and relaxed["status"] == "matched"
    record(5, ok, f"deadline {deadline:.4f} s denied ({denied.get('reason')}, gap {denied.get('deadline_gap_s', 0):.4f} s), "
                  f"relaxed -> {relaxed['status']}")


# ---------------------------------------------------------------- 6

def test_criterion_6_determinism(tmp_path):
    run_demo(str(tmp_path / "a"))
    run_demo(str(tmp_path / "b"))
    run_demo(str(tmp_path / "c"), workers=2)
    files = sorted(p.relative_to(tmp_path / "a") for p in (tmp_path / "a").rglob("*") if p.is_file())
    same = [f for f in files if filecmp.cmp(tmp_path / "a" / f, tmp_path / "b" / f, shallow=False)]
    models = [f for f in files if f.name.startswith("region_model")]
    same_models = [f for f in models if filecmp.cmp(tmp_path / "a" / f, tmp_path / "c" / f, shallow=False)]
    ok = len(same) == len(files) and len(same_models) == len(models) > 0
    record(6, ok, f"{len(same)}/{len(files)} artifacts byte-identical across reruns, "
                  f"{len(same_models)}/{len(models)} region models identical with workers=2")


# ---------------------------------------------------------------- 7

def _scaling_matrix(n, stages="ABCDEFG"):
    tiers = ("tmpfs", "ssd", "beegfs")
    rng = random.Random(3)
    effect = {(s, t): rng.uniform(0, 10) * k for s in stages for k, t in enumerate(tiers)}
    picks = random.Random(n).sample(list(itertools.product(tiers, repeat=len(stages))), n)
    noise = random.Random(n + 1)
    configs = [
        fake_config(i, dict(zip(stages, p)), 10 + sum(effect[(s, t)] for s, t in zip(stages, p)) + noise.gauss(0, 1))
        for i, p in enumerate(picks)
    ]
    return encode(configs, default_catalog())


def test_criterion_7_scaling():
    grid = list(np.geomspace(1e-3, 100, 20))
    medians = {}
    for n in (1000, 2000):
        fm = _scaling_matrix(n)
        times = []
        for _ in range(3):
            t0 = time.perf_counter()
            cross_fit_select(fm, K=5, R=3, seed=1, alphas=grid)
            times.append(time.perf_counter() - t0)
        medians[n] = statistics.median(times)
    ratio = medians[2000] / medians[1000]
    record(7, ratio <= 2.6, f"N=1000 {medians[1000]:.2f} s, N=2000 {medians[2000]:.2f} s, ratio {ratio:.2f} (p=21, K=5, R=3, |A|=20)")


# ---------------------------------------------------------------- 8

def _property_tests():
    """Node ids of every hypothesis test in the suite, with its example budget."""
    out = []
    for path in sorted(TESTS.glob("test_*.py")):
        if path.name == Path(__file__).name:
            continue
        mod = __import__(path.stem)
        for name, fn in inspect.getmembers(mod, inspect.isfunction):
            if name.startswith("test_") and getattr(fn, "is_hypothesis_test", False):
                budget = fn._hypothesis_internal_use_settings.max_examples
                out.append((f"{path.name}::{name}", budget))
    return out


def test_criterion_8_property_suites():
    props = _property_tests()
    small = [n for n, b in props if b < 200]
    proc = subprocess.run(
        [sys.executable, "-m", "pytest", "-q", "-p", "no:cacheprovider", *[n for n, _ in props]],
        cwd=TESTS, capture_output=True, text=True,
    )
    tail = proc.stdout.strip().splitlines()[-1] if proc.stdout.strip() else proc.stderr.strip()
    ok = bool(props) and not small and proc.returncode == 0
    record(8, ok, f"{len(props)} property tests, min budget {min(b for _, b in props)} cases, {tail}")
