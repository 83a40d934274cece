"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

The 30-seed three-method run over the default trace is computed once and
shared by the migration, control-plane and optimality-dominance checks.
"""
import math
import time
from functools import lru_cache

import numpy as np

import oracles
from conftest import brute_force, mutate_config, random_config, random_exact_instance, report
from rsucrm.configuration import check_feasibility, control_plane_overhead, deployment_objective, vm_migrations
from rsucrm.delay import QueueParams, build_lut, edge_delay
from rsucrm.exact import ExactInfeasible, exact_deployment
from rsucrm.harness import RunSpec, compare_methods, emit_csv, run_trace, sweep_k
from rsucrm.harness.runner import _step_seed
from rsucrm.planner import dominates, generate_pof
from rsucrm.scenario import default_scenario, sample_demands

SEEDS = tuple(range(30))


@lru_cache(maxsize=None)
def trend_run():
    record = {}
    rows = run_trace(RunSpec(None, ("heuristic", "exact", "purist"), 100, SEEDS), record)
    return rows, record


@lru_cache(maxsize=None)
def k_sweep():
    record = {}
    rows = sweep_k(RunSpec(None, seeds=SEEDS), (1, 10, 100), record)
    return rows, record


def test_criterion_1_overhead_oracle():
    rng = np.random.default_rng(20240101)
    t0 = time.perf_counter()
    mismatches = 0
    for i in range(1000):
        a = random_config(rng, max_rules=20 if i % 2 else 16)
        b = random_config(rng) if i % 2 else mutate_config(rng, a)
        assert len(a.flow_rules | a.group_rules) <= 20 and len(b.flow_rules | b.group_rules) <= 20
        want_ops = oracles.overhead(a.flow_rules, a.group_rules, b.flow_rules, b.group_rules)
        want_mig = oracles.migrations(a.hosts, b.hosts)
        got_mig = vm_migrations(a, b)
        if control_plane_overhead(a, b) != want_ops or got_mig != want_mig:
            mismatches += 1
    elapsed = time.perf_counter() - t0
    ok = mismatches == 0 and elapsed < 5.0
    assert report(1, ok, f"{mismatches} mismatches in 1000 pairs, {elapsed:.2f}s (limit 5s)")


def test_criterion_2_kingman_fidelity():
    worst = 0.0
    non_monotone = 0
    checked = 0
    for c in (0.5, 1.0, 2.0):
        for interval in (1.0, 2.0, 5.0):
            p = QueueParams(ca=c, cs=c)
            lut = build_lut(100.0, interval, p)
            prev = edge_delay(lut, 0.0)
            for j in range(1, int(100 / interval)):
                load = j * interval
                got = edge_delay(lut, load)
                ref = oracles.edge_delay_formula(load, 100.0, p.processing_delay, p.packet_size, c, c, 0.0)
                worst = max(worst, abs(got - ref) / ref)
                non_monotone += got < prev
                prev = got
                checked += 1
    ok = worst <= 1e-12 and non_monotone == 0
    assert report(2, ok, f"{checked} buckets, max relative error {worst:.2e} (limit 1e-12), "
                         f"{non_monotone} monotonicity breaks")


def test_criterion_3_exact_vs_brute_force():
    rng = np.random.default_rng(31337)
    t0 = time.perf_counter()
    worst, feasible, infeasible_agree, disagreements = 0.0, 0, 0, 0
    while feasible < 20:
        sc, d, omega, bound = random_exact_instance(rng)
        assert sc.graph.n_nodes <= 5 and d.units.sum() <= 10
        want, _ = brute_force(sc, d, omega, bound)
        try:
            got = deployment_objective(exact_deployment(sc, d, omega, bound), sc, omega)
        except ExactInfeasible:
            got = math.inf
        if math.isinf(want) or math.isinf(got):
            if math.isinf(want) and math.isinf(got):
                infeasible_agree += 1
            else:
                disagreements += 1
            continue
        feasible += 1
        worst = max(worst, abs(got - want))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-9 and disagreements == 0 and elapsed < 60
    assert report(3, ok, f"20 feasible instances, max |exact - brute force| {worst:.1e} (limit 1e-9), "
                         f"{infeasible_agree} infeasible agreed, {disagreements} feasibility disagreements, "
                         f"{elapsed:.1f}s (limit 60s)")


def _frontier_violations(pof, sc, d):
    bad = 0
    for a in pof:
        if not check_feasibility(a.config, sc, d):
            bad += 1
        for b in pof:
            if a is not b and dominates((a.host_count, a.delay), (b.host_count, b.delay)):
                bad += 1
    return bad


def test_criterion_4_pareto_property():
    sc = default_scenario()
    frontiers = violations = 0
    for seed in range(50):
        for step in range(len(sc.trace.steps)):
            d = sample_demands(sc, step, seed)
            pof = generate_pof(sc, d, 100, _step_seed(seed, step))
            violations += _frontier_violations(pof, sc, d)
            frontiers += 1
    _, record = trend_run()
    for (seed, step, method), rec in record.items():
        if method == "exact":
            violations += _frontier_violations(rec.frontier, sc, sample_demands(sc, step, seed))
            frontiers += 1
    assert report(4, violations == 0, f"{frontiers} frontiers (350 heuristic K=100 + exact from the 30-seed run), "
                                      f"{violations} violations")


def test_criterion_5_migration_trend():
    rows, _ = trend_run()
    s = compare_methods(rows).methods
    h, e, p = (s[m].totals["vm_migrations_added"] for m in ("heuristic", "exact", "purist"))
    ok = h < p and e <= p
    assert report(5, ok, f"mean total vm_migrations_added over 30 seeds: heuristic-K100 {h:.3f}, "
                         f"exact {e:.3f}, purist {p:.3f} (need heuristic < purist, exact <= purist)")


def test_criterion_6_control_plane_trend():
    rows, _ = trend_run()
    s = compare_methods(rows).methods
    h, e, p = (s[m].totals["control_plane_ops"] for m in ("heuristic", "exact", "purist"))
    worst = max(s, key=lambda m: s[m].totals["control_plane_ops"])
    ok = h >= e
    assert report(6, ok, f"mean total control_plane_ops: heuristic-K100 {h:.3f} >= exact {e:.3f} "
                         f"(purist {p:.3f}; highest overall: {worst})")


def test_criterion_7_replication_trend():
    rows, record = k_sweep()
    names = ("heuristic-k1", "heuristic-k10", "heuristic-k100")
    # per-level frontier delay, seed by seed
    comparisons = violations = 0
    sc = default_scenario()
    for seed in SEEDS:
        for step in range(len(sc.trace.steps)):
            levels = []
            for m in names:
                rec = record.get((seed, step, m))
                levels.append({} if rec is None else {e.host_count: e.delay for e in rec.frontier})
            for lo, hi in ((0, 1), (1, 2)):
                for h in set(levels[lo]) & set(levels[hi]):
                    comparisons += 1
                    violations += levels[hi][h] > levels[lo][h]
    share = violations / max(comparisons, 1)
    s = compare_methods(rows).methods
    trend = {}
    means_ok = True
    for metric in ("total_infrastructure_delay", "vm_migrations_added", "control_plane_ops"):
        vals = [s[m].totals[metric] for m in names]
        trend[metric] = vals
        means_ok &= vals[0] >= vals[1] >= vals[2]
    infeasible = {m: s[m].infeasible for m in names}
    ok = share <= 0.05 and means_ok
    detail = (f"per-level delay: {violations}/{comparisons} seed-level comparisons worse with more K "
              f"({share:.1%}, limit 5%); means K=1/10/100: "
              + "; ".join(f"{k} " + "/".join(f"{v:.3f}" for v in vals) for k, vals in trend.items())
              + f"; infeasible steps {infeasible}")
    assert report(7, ok, detail)


def test_criterion_8_optimality_dominance():
    _, record = trend_run()
    sc = default_scenario()
    checked = violations = 0
    worst = -math.inf
    for (seed, step, method), rec in record.items():
        if method != "heuristic":
            continue
        levels = record[(seed, step, "exact")].levels
        for e in rec.frontier:
            exact = levels.get(e.host_count)
            for omega in (0.0, 0.5, 1.0):
                checked += 1
                if exact is None:
                    violations += 1
                    continue
                gap = deployment_objective(exact, sc, omega) - deployment_objective(e.config, sc, omega)
                worst = max(worst, gap)
                violations += gap > 1e-9
    assert report(8, violations == 0, f"{checked} (step, seed, host count, omega) checks, {violations} violations, "
                                      f"largest exact - heuristic gap {worst:.2e}")


def test_criterion_9_determinism_and_speed(tmp_path):
    spec = RunSpec(None, ("heuristic", "exact", "purist"), 100, (0,))
    times, blobs = [], []
    for i in range(2):
        t0 = time.perf_counter()
        rows = run_trace(spec)
        path = emit_csv(rows, tmp_path / f"run{i}.csv")
        times.append(time.perf_counter() - t0)
        blobs.append(path.read_bytes())
        assert len(rows) == 21
    same = blobs[0] == blobs[1]
    ok = same and max(times) < 60
    assert report(9, ok, f"byte-identical CSV: {same}; run times {times[0]:.1f}s, {times[1]:.1f}s (limit 60s)")
