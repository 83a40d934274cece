"""Trace runner: every strategy over the demand trace, one metrics row per step."""
from __future__ import annotations

import logging
import math
import re
import time
from collections import defaultdict
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from ..configuration import Configuration, reconfig_report, total_infrastructure_delay
from ..exact import ExactInfeasible, exact_levels, purist_cost
from ..planner import EmptyFrontier, ParetoFrontier, SelectionPolicy, generate_pof, pareto_filter, select_configuration
from ..scenario import Scenario, default_scenario, load_scenario, sample_demands

log = logging.getLogger(__name__)

METHODS = ("heuristic", "exact", "purist")
_HEUR = re.compile(r"^heuristic(?:-k(\d+))?$")


@dataclass
class MetricsRow:
    seed: int
    step: int
    method: str
    demand_mbps: float
    vm_migrations_added: int | None
    vm_migrations_eq1_literal: int | None
    control_plane_ops: int | None
    host_count: int | None
    total_infrastructure_delay: float | None
    mean_unit_delay: float | None
    max_edge_utilization: float | None
    wall_time: float | None
    feasible: bool = True


COLUMNS = tuple(f.name for f in fields(MetricsRow))


@dataclass(frozen=True)
class RunSpec:
    scenario: str | Path | None = None  # None: bundled default
    methods: tuple[str, ...] = METHODS
    K: int = 100
    seeds: tuple[int, ...] = (0,)
    policy: SelectionPolicy = field(default_factory=SelectionPolicy)
    out: str | Path | None = None

    def __post_init__(self):
        if self.K < 1:
            raise ValueError("K must be >= 1")
        if not self.seeds:
            raise ValueError("at least one seed is required")
        if not self.methods:
            raise ValueError("at least one method is required")
        for m in self.methods:
            parse_method(m)


def parse_method(name: str) -> tuple[str, int | None]:
    m = _HEUR.match(name)
    if m:
        return "heuristic", (int(m.group(1)) if m.group(1) else None)
    if name in ("exact", "purist"):
        return name, None
    raise ValueError(f"unknown method {name!r}")


def _step_seed(seed: int, step: int) -> int:
    return int(np.random.SeedSequence([int(seed), int(step)]).generate_state(1)[0])


def _metrics(config: Configuration, scenario: Scenario, demands) -> dict:
    a = config.assignment
    total = total_infrastructure_delay(config, scenario.luts)
    n_units = len(a.units)
    util = max((load * a.interval / lut.capacity for load, lut in zip(a.edge_units, scenario.luts)), default=0.0)
    return {
        "host_count": config.host_count,
        "total_infrastructure_delay": total,
        "mean_unit_delay": total / n_units if n_units else 0.0,
        "max_edge_utilization": util,
    }


@dataclass
class StepRecord:
    """Per-(seed, step, method) detail kept for inspection."""

    frontier: ParetoFrontier | None = None
    levels: dict | None = None  # exact: host bound -> configuration
    selected: Configuration | None = None


def run_seed(scenario: Scenario, seed: int, methods, K: int, policy: SelectionPolicy,
             record: dict | None = None) -> list[MetricsRow]:
    """Run the whole trace for one seed.

    Demands are drawn once per step and shared by every method. CRM methods
    select against their own previous configuration; the purist baseline is
    solved afresh each step and only diffed afterwards.
    """
    rows = []
    prev: dict[str, Configuration | None] = {m: None for m in methods}
    for step, d in enumerate(scenario.trace.steps):
        demands = sample_demands(scenario, step, seed)
        for method in methods:
            kind, k_override = parse_method(method)
            t0 = time.perf_counter()
            rec = StepRecord()
            try:
                if kind == "heuristic":
                    pof = generate_pof(scenario, demands, k_override or K, _step_seed(seed, step))
                    chosen = select_configuration(pof, prev[method], policy, scenario)
                    rec.frontier = pof
                elif kind == "exact":
                    levels = exact_levels(scenario, demands)
                    if not levels:
                        raise ExactInfeasible("no feasible host bound")
                    pof = pareto_filter(levels.values(), scenario)
                    chosen = select_configuration(pof, prev[method], policy, scenario)
                    rec.frontier, rec.levels = pof, levels
                else:
                    chosen = purist_cost(scenario, demands)
            except (EmptyFrontier, ExactInfeasible) as exc:
                log.warning("seed %s step %s %s infeasible: %s", seed, step, method, exc)
                rows.append(MetricsRow(seed, step, method, d, None, None, None, None, None, None, None,
                                       time.perf_counter() - t0, feasible=False))
                continue
            wall = time.perf_counter() - t0
            chosen = Configuration(chosen.hosts, chosen.flow_rules, chosen.group_rules, chosen.assignment, step)
            rep = reconfig_report(prev[method], chosen)
            rows.append(MetricsRow(seed, step, method, d, rep.vm_migrations_added, rep.vm_migrations_eq1_literal,
                                   rep.control_plane_ops, wall_time=wall, **_metrics(chosen, scenario, demands)))
            prev[method] = chosen
            rec.selected = chosen
            if record is not None:
                record[(seed, step, method)] = rec
    return rows


def _load(spec: RunSpec) -> Scenario:
    return load_scenario(spec.scenario) if spec.scenario is not None else default_scenario()


def run_trace(spec: RunSpec, record: dict | None = None) -> list[MetricsRow]:
    scenario = _load(spec)
    rows = []
    for seed in spec.seeds:
        rows.extend(run_seed(scenario, seed, spec.methods, spec.K, spec.policy, record))
    order = {m: i for i, m in enumerate(spec.methods)}
    rows.sort(key=lambda r: (r.seed, r.step, order[r.method]))
    return rows


def sweep_k(spec: RunSpec, values=(1, 10, 100), record: dict | None = None) -> list[MetricsRow]:
    """Heuristic only, once per K; methods are named ``heuristic-k<K>``.

    Replication streams do not depend on K, so smaller sweeps see a prefix
    of the candidates drawn for larger ones.
    """
    if not values or any(int(v) < 1 for v in values):
        raise ValueError("K values must be >= 1")
    methods = tuple(f"heuristic-k{int(v)}" for v in values)
    return run_trace(RunSpec(spec.scenario, methods, spec.K, spec.seeds, spec.policy, spec.out), record)


# -- summaries ---------------------------------------------------------------

SUMMARY_METRICS = ("vm_migrations_added", "vm_migrations_eq1_literal", "control_plane_ops", "host_count",
                   "total_infrastructure_delay", "mean_unit_delay", "max_edge_utilization")


@dataclass
class MethodSummary:
    method: str
    seeds: int
    steps: int
    infeasible: int
    totals: dict  # metric -> sum over steps, averaged over seeds
    means: dict  # metric -> mean over all feasible rows


@dataclass
class Comparison:
    methods: dict  # name -> MethodSummary
    verdicts: dict  # metric -> list of methods attaining the minimum mean total

    def table(self) -> list[dict]:
        out = []
        for name, s in self.methods.items():
            row = {"method": name, "seeds": s.seeds, "steps": s.steps, "infeasible": s.infeasible}
            for m in SUMMARY_METRICS:
                row[f"total_{m}"] = s.totals[m]
                row[f"mean_{m}"] = s.means[m]
            out.append(row)
        return out

    def verdict_lines(self) -> list[str]:
        return [f"{' = '.join(best)} minimizes {metric}" for metric, best in self.verdicts.items()]


def compare_methods(rows: list[MetricsRow]) -> Comparison:
    if not rows:
        raise ValueError("no rows to compare")
    by_method = defaultdict(list)
    for r in rows:
        by_method[r.method].append(r)
    summaries = {}
    for method, rs in by_method.items():
        seeds = sorted({r.seed for r in rs})
        totals, means = {}, {}
        for m in SUMMARY_METRICS:
            per_seed = defaultdict(float)
            vals = []
            for r in rs:
                v = getattr(r, m)
                if v is not None:
                    per_seed[r.seed] += v
                    vals.append(v)
            totals[m] = sum(per_seed[s] for s in seeds) / len(seeds)
            means[m] = sum(vals) / len(vals) if vals else math.nan
        summaries[method] = MethodSummary(method, len(seeds), len({r.step for r in rs}),
                                          sum(not r.feasible for r in rs), totals, means)
    verdicts = {}
    for m in SUMMARY_METRICS:
        best = min(s.totals[m] for s in summaries.values())
        verdicts[m] = [name for name, s in summaries.items() if s.totals[m] == best]
    return Comparison(summaries, verdicts)
