"""Pareto frontiers of configurations and the selection between them."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Literal

import numpy as np

from .configuration import (
    Configuration, build_configuration, canonical_json, check_feasibility,
    control_plane_overhead, deployment_objective, reconfig_cost, total_infrastructure_delay,
    vm_migrations,
)
from .routing import RoutingInfeasible, route_loads, route_units, total_delay_from_loads


class EmptyFrontier(RuntimeError):
    """No host-count level produced a feasible configuration."""


@dataclass(frozen=True)
class FrontierEntry:
    config: Configuration
    host_count: int
    delay: float  # total infrastructure delay, seconds


@dataclass(frozen=True)
class ParetoFrontier:
    entries: tuple[FrontierEntry, ...]

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    @property
    def configs(self) -> list[Configuration]:
        return [e.config for e in self.entries]

    def by_host_count(self) -> dict[int, FrontierEntry]:
        return {e.host_count: e for e in self.entries}


@dataclass(frozen=True)
class SelectionPolicy:
    mode: Literal["lex", "weighted"] = "lex"
    rho: float = 0.5
    omega: float = 0.5

    def __post_init__(self):
        if self.mode not in ("lex", "weighted"):
            raise ValueError(f"unknown selection mode {self.mode!r}")
        if not (0 <= self.rho <= 1 and 0 <= self.omega <= 1):
            raise ValueError("rho and omega must lie in [0, 1]")


def seed_for(base, *keys) -> np.random.SeedSequence:
    """Independent stream for (base, keys...), stable under any scheduling."""
    return np.random.SeedSequence([int(base), *(int(k) for k in keys)])


def halving_levels(n_nodes: int) -> list[int]:
    levels = []
    h = math.ceil(n_nodes / 2)
    while True:
        levels.append(h)
        if h == 1:
            return levels
        h = math.ceil(h / 2)


def _draw_hosts(rng, n_nodes: int, n_services: int, host_count: int) -> frozenset:
    hosts = set()
    for k in range(n_services):
        for m in rng.choice(n_nodes, size=host_count, replace=False):
            hosts.add((int(m), k))
    return frozenset(hosts)


def _draw(scenario, host_count, seed):
    rng = np.random.default_rng(seed)
    hosts = _draw_hosts(rng, scenario.graph.n_nodes, scenario.n_services, host_count)
    order_seed = int(rng.integers(2**63))
    return hosts, order_seed


def generate_candidate(scenario, demands, host_count: int, seed) -> Configuration | None:
    """Random host set of the given size per service, greedily routed.

    Returns None when the demand cannot be routed or the result violates a
    constraint.
    """
    if not 1 <= host_count <= scenario.graph.n_nodes:
        raise ValueError("host_count out of range")
    hosts, order_seed = _draw(scenario, host_count, seed)
    try:
        a = route_units(demands, hosts, scenario.paths, scenario.luts, order_seed)
    except RoutingInfeasible:
        return None
    config = build_configuration(hosts, a)
    if not check_feasibility(config, scenario, demands):
        return None
    return config


def _qos_bounded(scenario) -> bool:
    return any(not math.isinf(s.qos_bound) for s in scenario.services)


def best_of_level(scenario, demands, host_count: int, K: int, base_seed, level_key=None):
    """Minimum-delay feasible candidate among K replications, or None.

    Replication ``r`` uses stream ``(base_seed, level_key, r)``, so the K=10
    candidates are a prefix of the K=100 ones.
    """
    key = host_count if level_key is None else level_key
    if _qos_bounded(scenario) or any(s.host_bound < host_count for s in scenario.services):
        best = None
        for r in range(K):
            c = generate_candidate(scenario, demands, host_count, seed_for(base_seed, key, r))
            if c is None:
                continue
            d = total_infrastructure_delay(c, scenario.luts)
            if best is None or d < best[0]:
                best = (d, c)
        return None if best is None else best[1]

    best = None
    for r in range(K):
        hosts, order_seed = _draw(scenario, host_count, seed_for(base_seed, key, r))
        loads = route_loads(demands, hosts, scenario.paths, scenario.luts, order_seed)
        if loads is None:
            continue
        d = total_delay_from_loads(loads, scenario.luts)
        if best is None or d < best[0]:
            best = (d, r)
    if best is None:
        return None
    return generate_candidate(scenario, demands, host_count, seed_for(base_seed, key, best[1]))


def generate_pof(scenario, demands, K: int, seed) -> ParetoFrontier:
    """Heuristic frontier: best-of-K random placements at halving host counts."""
    if K < 1:
        raise ValueError("K must be >= 1")
    kept = []
    for h in halving_levels(scenario.graph.n_nodes):
        c = best_of_level(scenario, demands, h, K, seed)
        if c is not None:
            kept.append(c)
    if not kept:
        raise EmptyFrontier("no feasible configuration at any host-count level")
    return pareto_filter(kept, scenario)


def dominates(a: tuple[float, float], b: tuple[float, float]) -> bool:
    return a[0] <= b[0] and a[1] <= b[1] and (a[0] < b[0] or a[1] < b[1])


def pareto_filter(configs: Iterable[Configuration], scenario) -> ParetoFrontier:
    """Keep configurations not dominated in (host count, total infrastructure delay)."""
    scored = {}
    for c in configs:
        obj = (c.host_count, total_infrastructure_delay(c, scenario.luts))
        if obj in scored:
            # identical objectives: keep the canonically smallest
            if canonical_json(c) < canonical_json(scored[obj]):
                scored[obj] = c
        else:
            scored[obj] = c
    keep = [o for o in scored if not any(dominates(p, o) for p in scored if p != o)]
    keep.sort()
    return ParetoFrontier(tuple(FrontierEntry(scored[o], o[0], o[1]) for o in keep))


def select_configuration(pof: ParetoFrontier, prev: Configuration | None, policy: SelectionPolicy,
                         scenario) -> Configuration:
    """Pick one frontier entry.

    Without a previous configuration the deployment objective (weight
    ``policy.omega``) decides. Otherwise ``lex`` minimises hosts added, then
    rule changes; ``weighted`` minimises the rho-weighted sum of the two.
    Remaining ties go to the canonically smallest configuration.
    """
    if not len(pof):
        raise EmptyFrontier("cannot select from an empty frontier")
    if prev is None:
        key = lambda c: (deployment_objective(c, scenario, policy.omega), canonical_json(c))
    elif policy.mode == "lex":
        key = lambda c: (vm_migrations(prev, c)[0], control_plane_overhead(prev, c), canonical_json(c))
    else:
        key = lambda c: (reconfig_cost(prev, c, policy.rho), canonical_json(c))
    return min(pof.configs, key=key)
