import math
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from rsucrm.delay import QueueParams
from rsucrm.scenario import DemandMatrix, DemandTrace, NetworkGraph, Scenario, ServiceSpec, default_scenario


def make_scenario(n_nodes, edges, *, host_bound=None, qos=float("inf"), path_limit=4, params=None,
                  interval=1.0, steps=(50.0,), sigma=0.0):
    graph = NetworkGraph(tuple(str(i) for i in range(n_nodes)), tuple(edges))
    svc = ServiceSpec("s0", host_bound or n_nodes, qos)
    return Scenario(graph, (svc,), DemandTrace(steps, sigma), interval, params or QueueParams(), path_limit, 0)


def triangle(capacity=100.0, **kw):
    return make_scenario(3, [(0, 1, capacity), (1, 2, capacity), (0, 2, capacity)], **kw)


def demand(values, interval=1.0):
    return DemandMatrix(np.asarray(values, dtype=np.int64).reshape(-1, 1), interval)


@pytest.fixture(scope="session")
def default_sc():
    return default_scenario()


@pytest.fixture
def tri():
    return triangle()


def random_rules(rng, max_rules=20, n_switch=4, n_service=2):
    """Random flow/group rule sets with at most one rule per (switch, service, destination).

    Small alphabets make content and key collisions between draws common.
    """
    from fractions import Fraction

    from rsucrm.configuration import FlowRule, GroupRule

    keys = [(s, k, m) for s in range(n_switch) for k in range(n_service) for m in range(n_switch) if m != s]
    n = int(rng.integers(0, max_rules + 1))
    picked = rng.choice(len(keys), size=min(n, len(keys)), replace=False)
    flows, groups = set(), set()
    for i in picked:
        s, k, m = keys[i]
        nbrs = [t for t in range(n_switch) if t != s]
        if rng.random() < 0.6:
            flows.add(FlowRule(s, k, m, (s, int(rng.choice(nbrs)))))
        else:
            outs = rng.choice(nbrs, size=2, replace=False)
            w = Fraction(int(rng.integers(1, 3)), 3)
            groups.add(GroupRule(s, k, m, (((s, int(outs[0])), w), ((s, int(outs[1])), 1 - w))))
    return frozenset(flows), frozenset(groups)


def random_config(rng, n_nodes=4, max_rules=20):
    from rsucrm.configuration import Configuration

    flows, groups = random_rules(rng, max_rules)
    hosts = frozenset((m, k) for m in range(n_nodes) for k in range(2) if rng.random() < 0.4)
    return Configuration(hosts, flows, groups, None)


def mutate_config(rng, c):
    """Nearby configuration: drop, keep or re-draw each rule and host, so diffs stay small."""
    from rsucrm.configuration import Configuration

    extra_f, extra_g = random_rules(rng, max_rules=4)
    taken = {r.key for r in extra_f | extra_g}
    flows = {r for r in c.flow_rules if rng.random() < 0.8 and r.key not in taken} | set(extra_f)
    taken |= {r.key for r in flows}
    groups = {r for r in c.group_rules if rng.random() < 0.8 and r.key not in taken} | set(extra_g)
    hosts = {h for h in c.hosts if rng.random() < 0.8} | {(int(rng.integers(4)), int(rng.integers(2)))}
    return Configuration(frozenset(hosts), frozenset(flows), frozenset(groups), None)


def random_exact_instance(rng):
    """Small single-service instance: |V| <= 5, total demand <= 10 units, tight capacities.

    Returns (scenario, demands, omega, host_bound).
    """
    n = int(rng.integers(3, 6))
    edges = {}
    for i in range(1, n):
        j = int(rng.integers(0, i))
        edges[(j, i)] = None
    for u in range(n):
        for v in range(u + 1, n):
            if (u, v) not in edges and rng.random() < 0.35:
                edges[(u, v)] = None
    caps = [float(rng.choice([4.0, 6.0, 10.0])) for _ in edges]
    qos = math.inf
    if rng.random() < 0.4:
        # between one and three idle hops at the smallest capacities
        qos = float(rng.uniform(1.5, 4.0)) * 10e-6 + float(rng.uniform(1.0, 2.5)) * 6400 / 6e6
    sc = make_scenario(n, [(u, v, c) for (u, v), c in zip(edges, caps)], qos=qos,
                       path_limit=int(rng.integers(1, 5)), host_bound=int(rng.integers(1, n + 1)))
    total = int(rng.integers(1, 11))
    units = np.bincount(rng.integers(0, n, size=total), minlength=n)
    omega = float(rng.choice([0.0, 0.25, 0.5, 0.9, 1.0]))
    bound = int(rng.integers(1, n + 1))
    return sc, demand(units), omega, bound


def brute_force(sc, d, omega, bound):
    import oracles

    luts = [[oracles.edge_delay_formula(j, cap, sc.queue_params.processing_delay, sc.queue_params.packet_size,
                                        sc.queue_params.ca, sc.queue_params.cs, sc.queue_params.propagation_delay)
             for j in range(int(cap / sc.lut_interval))] for _, _, cap in sc.graph.edges]
    svc = sc.services[0]
    return oracles.brute_force_objective(sc.graph.n_nodes, sc.graph.edges, [int(x) for x in d.units[:, 0]],
                                         sc.path_limit, luts, omega, min(bound, svc.host_bound), svc.qos_bound)


# -- acceptance report ---------------------------------------------------------

ACCEPTANCE: dict[int, str] = {}


def report(criterion: int, ok: bool, detail: str) -> bool:
    line = f"criterion {criterion}: {'PASS' if ok else 'FAIL'} - {detail}"
    ACCEPTANCE[criterion] = line
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[k])
