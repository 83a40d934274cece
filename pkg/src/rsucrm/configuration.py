"""Configurations (hosts, flow rules, group rules) and the costs defined on them."""
from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass, field

from .delay import OverloadError, path_delay
from .routing import Assignment, FlowRule, GroupRule, derive_rules

__all__ = [
    "FlowRule", "GroupRule", "Configuration", "ReconfigReport", "Verdict",
    "build_configuration", "vm_migrations", "control_plane_overhead", "reconfig_cost",
    "reconfig_report", "deployment_objective", "check_feasibility", "total_infrastructure_delay",
    "canonical_json",
]


@dataclass(frozen=True)
class Configuration:
    hosts: frozenset  # of (node, service)
    flow_rules: frozenset
    group_rules: frozenset
    assignment: Assignment = field(compare=False, repr=False)
    step: int | None = field(default=None, compare=False)

    @property
    def host_count(self) -> int:
        return len(self.hosts)

    def hosts_of(self, service: int) -> list[int]:
        return sorted(m for m, k in self.hosts if k == service)


def build_configuration(hosts, assignment: Assignment, step: int | None = None) -> Configuration:
    flows, groups = derive_rules(assignment)
    return Configuration(frozenset(hosts), flows, groups, assignment, step)


@dataclass(frozen=True)
class ReconfigReport:
    vm_migrations_added: int
    vm_migrations_eq1_literal: int
    control_plane_ops: int
    weighted_cost: float | None = None


def vm_migrations(prev: Configuration, nxt: Configuration) -> tuple[int, int]:
    """Return (hosts added, hosts removed) going from ``prev`` to ``nxt``.

    Additions are the migration count that matters: tearing a host down
    moves no VM image over the network. Removals are the literal
    ``|X_prev - X_next|`` count and are reported alongside.
    """
    return len(nxt.hosts - prev.hosts), len(prev.hosts - nxt.hosts)


def control_plane_overhead(prev: Configuration, nxt: Configuration) -> int:
    y0, y1 = prev.flow_rules, nxt.flow_rules
    z0, z1 = prev.group_rules, nxt.group_rules
    # same-type differences compare whole rules; cross-type terms match on (switch, service, dst)
    y0_keys = {r.key for r in y0}
    z0_keys = {r.key for r in z0}
    cross = sum(1 for r in z1 if r.key in y0_keys) + sum(1 for r in y1 if r.key in z0_keys)
    return len(y0 - y1) + len(y1 - y0) + len(z0 - z1) + len(z1 - z0) + cross


def reconfig_cost(prev: Configuration, nxt: Configuration, rho: float) -> float:
    if not 0 <= rho <= 1:
        raise ValueError("rho must lie in [0, 1]")
    added, _ = vm_migrations(prev, nxt)
    return rho * added + (1 - rho) * control_plane_overhead(prev, nxt)


def reconfig_report(prev: Configuration | None, nxt: Configuration, rho: float | None = None) -> ReconfigReport:
    if prev is None:
        return ReconfigReport(0, 0, 0, 0.0 if rho is not None else None)
    added, removed = vm_migrations(prev, nxt)
    ops = control_plane_overhead(prev, nxt)
    cost = None if rho is None else rho * added + (1 - rho) * ops
    return ReconfigReport(added, removed, ops, cost)


def total_infrastructure_delay(config: Configuration, luts) -> float:
    """Sum over routed units of their path delay at the configuration's edge loads."""
    a = config.assignment
    total = 0.0
    for e, load in enumerate(a.edge_units):
        if load:
            total += load * float(luts[e].buckets[load])
    return total


def delay_term(assignment: Assignment, luts, idle_edges: bool = True) -> float:
    """Sum over edges of edge delay normalised by the edge's last-bucket delay."""
    total = 0.0
    for e, load in enumerate(assignment.edge_units):
        if load == 0 and not idle_edges:
            continue
        lut = luts[e]
        if load >= len(lut.buckets):
            raise OverloadError(f"edge {e} load {load * assignment.interval} >= capacity {lut.capacity}")
        total += float(lut.buckets[load]) / lut.max_delay
    return total


def deployment_objective(config: Configuration, scenario, omega: float, idle_edges: bool = True) -> float:
    """Weighted host count plus normalised edge delay.

    ``idle_edges=False`` drops unloaded edges from the delay sum.
    """
    if not 0 <= omega <= 1:
        raise ValueError("omega must lie in [0, 1]")
    return omega * config.host_count + (1 - omega) * delay_term(config.assignment, scenario.luts, idle_edges)


@dataclass(frozen=True)
class Verdict:
    violations: tuple[tuple[str, str], ...]  # (constraint id, detail)

    @property
    def feasible(self) -> bool:
        return not self.violations

    @property
    def constraints(self) -> set[str]:
        return {c for c, _ in self.violations}

    def __bool__(self):
        return self.feasible


def check_feasibility(config: Configuration, scenario, demands=None) -> Verdict:
    """List every violated constraint.

    (i) demand satisfied, (ii) capacity, (iii) loads are whole intervals and
    match the units, (iv) hosts serve themselves locally, (v) per-unit path
    delay within the service QoS bound, (vi) host count within the service
    bound. (i) is skipped when ``demands`` is None.
    """
    a = config.assignment
    paths = scenario.paths
    luts = scenario.luts
    out: list[tuple[str, str]] = []

    if demands is not None:
        counts = a.unit_counts()
        n_nodes, n_services = demands.units.shape
        for n in range(n_nodes):
            for k in range(n_services):
                if counts.get((n, k), 0) != int(demands.units[n, k]):
                    out.append(("i", f"node {n} service {k}: {counts.get((n, k), 0)} units "
                                     f"for demand {int(demands.units[n, k])}"))

    for e, load in enumerate(a.edge_units):
        if load > luts[e].max_units:
            out.append(("ii", f"edge {e} load {load * a.interval} exceeds {luts[e].capacity - a.interval}"))

    recount = [0] * len(a.edge_units)
    bad_path = False
    for u in a.units:
        if not u.path or u.path[0] != u.node or u.path[-1] != u.host or not paths.contains_path(u.path):
            out.append(("iii", f"unit {u} path is not a candidate path"))
            bad_path = True
            continue
        for e in paths.edges(u.path):
            recount[e] += 1
    if not bad_path and tuple(recount) != tuple(a.edge_units):
        out.append(("iii", "edge loads are not the sum of unit intervals"))

    for u in a.units:
        if u.node == u.host and len(u.path) > 1:
            out.append(("iv", f"host {u.node} routes its own demand over {u.path}"))
        elif (u.node, u.service) in config.hosts and u.host != u.node:
            out.append(("iv", f"host {u.node} sends demand to {u.host}"))
        if (u.host, u.service) not in config.hosts:
            out.append(("iv", f"unit served by non-host {u.host}"))

    if not any(c == "ii" for c, _ in out) and not bad_path:
        loads = a.edge_loads
        seen = set()
        for u in a.units:
            bound = scenario.services[u.service].qos_bound
            if math.isinf(bound) or len(u.path) < 2 or (u.service, u.path) in seen:
                continue
            seen.add((u.service, u.path))
            d = path_delay(luts, loads, paths.edges(u.path))
            if d > bound:
                out.append(("v", f"path {u.path} delay {d:.3e}s exceeds {bound:.3e}s"))

    per_service = Counter(k for _, k in config.hosts)
    for k, spec in enumerate(scenario.services):
        if per_service.get(k, 0) > spec.host_bound:
            out.append(("vi", f"service {spec.id}: {per_service[k]} hosts > {spec.host_bound}"))
    return Verdict(tuple(out))


def _route_summary(assignment: Assignment) -> list:
    c = Counter((u.node, u.service, u.host, u.path) for u in assignment.units)
    return sorted([n, k, m, list(p), cnt] for (n, k, m, p), cnt in c.items())


def canonical_dict(config: Configuration, scenario=None) -> dict:
    a = config.assignment
    name = (lambda n: scenario.graph.nodes[n]) if scenario is not None else (lambda n: n)
    sid = (lambda k: scenario.services[k].id) if scenario is not None else (lambda k: k)
    return {
        "hosts": sorted([name(m), sid(k)] for m, k in config.hosts),
        "flow_rules": sorted(
            [name(r.switch), sid(r.service), name(r.destination), [name(r.out_edge[0]), name(r.out_edge[1])]]
            for r in config.flow_rules),
        "group_rules": sorted(
            [name(r.switch), sid(r.service), name(r.destination),
             [[[name(e[0]), name(e[1])], f"{w.numerator}/{w.denominator}"] for e, w in r.branches]]
            for r in config.group_rules),
        "edge_loads": [] if a is None else [load * a.interval for load in a.edge_units],
        "routes": [] if a is None else [[name(n), sid(k), name(m), [name(x) for x in p], cnt]
                                        for n, k, m, p, cnt in _route_summary(a)],
        "step": config.step,
    }


def canonical_json(config: Configuration, scenario=None) -> str:
    return json.dumps(canonical_dict(config, scenario), sort_keys=True, separators=(",", ":"))
