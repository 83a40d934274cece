"""Exact deployment: joint host selection and unit routing as a MILP.

Edge delay is convex in load, so the normalised delay of an edge is written
as its idle delay plus a sum of unit-wide load segments with increasing
slopes; at any optimum the segments fill in order and the linear model is
exact at whole-interval loads. Solved with HiGHS through scipy.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import Bounds, LinearConstraint, milp
from scipy.sparse import coo_matrix

from .configuration import Configuration, build_configuration, check_feasibility
from .planner import ParetoFrontier, pareto_filter
from .routing import Assignment, Unit

# HiGHS keeps an absolute MIP gap of 1e-6; scaling the objective pushes that
# far below the resolution of the normalised delay term.
_SCALE = 1e4
_TIE_EPS = 1e-5
MAX_EXACT_NODES = 12


class ExactInfeasible(RuntimeError):
    pass


class InstanceTooLarge(ValueError):
    pass


@dataclass
class _Model:
    n_vars: int
    host_var: dict  # (m, k) -> col
    options: list  # (n, k, m, path, col)
    z_cols: np.ndarray
    seg_cols: list  # per edge: array of cols
    slopes: list  # per edge: slopes of the segments
    idle: np.ndarray  # per edge idle delay
    qmax: np.ndarray  # per edge last-bucket delay
    rows: list
    lb: list
    ub: list
    integrality: np.ndarray
    lo: np.ndarray
    hi: np.ndarray

    def add_row(self, coefs: dict, lb: float, ub: float):
        self.rows.append(coefs)
        self.lb.append(lb)
        self.ub.append(ub)

    def constraint(self):
        r, c, v = [], [], []
        for i, coefs in enumerate(self.rows):
            for col, val in coefs.items():
                r.append(i)
                c.append(col)
                v.append(val)
        a = coo_matrix((v, (r, c)), shape=(len(self.rows), self.n_vars)).tocsr()
        return LinearConstraint(a, np.array(self.lb), np.array(self.ub))


def min_host_count(scenario, demands) -> int:
    """Lower bound on hosts per service from the capacity around the host set.

    Every routed unit enters its host over an incident edge, so h hosts can
    serve at most their own demand plus their incident capacity.
    """
    luts = scenario.luts
    cap = np.zeros(scenario.graph.n_nodes)
    for e, (u, v, _) in enumerate(scenario.graph.edges):
        cap[u] += luts[e].max_units
        cap[v] += luts[e].max_units
    lower = 1
    for k in range(demands.units.shape[1]):
        b = demands.units[:, k]
        need = b.sum()
        reach = np.cumsum(np.sort(cap + b)[::-1])
        h = int(np.searchsorted(reach, need) + 1)
        lower = max(lower, h)
    return lower


def _build(scenario, demands, host_bound: int, ignore_qos: bool, lower: int = 1) -> _Model:
    graph = scenario.graph
    paths = scenario.paths
    luts = scenario.luts
    n_nodes, n_services = demands.units.shape
    col = 0
    host_var = {}
    for m in range(n_nodes):
        for k in range(n_services):
            host_var[(m, k)] = col
            col += 1
    n_host = col

    options = []
    for n in range(n_nodes):
        for k in range(n_services):
            if demands.units[n, k] == 0:
                continue
            for m in range(n_nodes):
                if m == n:
                    continue
                for p in paths[(n, m)]:
                    options.append((n, k, m, p, col))
                    col += 1
    n_int_end = col

    seg_cols, slopes = [], []
    idle = np.empty(len(luts))
    qmax = np.empty(len(luts))
    for e, lut in enumerate(luts):
        b = lut.buckets
        seg_cols.append(np.arange(col, col + len(b) - 1))
        slopes.append(np.diff(b))
        col += len(b) - 1
        idle[e] = b[0]
        qmax[e] = lut.max_delay

    qos = {}
    if not ignore_qos:
        for o, (n, k, m, p, c) in enumerate(options):
            if not math.isinf(scenario.services[k].qos_bound):
                qos[o] = col
                col += 1

    integrality = np.zeros(col)
    integrality[:n_int_end] = 1
    z_cols = np.arange(n_host, n_int_end)
    for c in qos.values():
        integrality[c] = 1
    lo = np.zeros(col)
    hi = np.ones(col)
    model = _Model(col, host_var, options, z_cols, seg_cols, slopes, idle, qmax, [], [], [], integrality, lo, hi)

    for n, k, m, p, c in options:
        hi[c] = demands.units[n, k]

    for n in range(n_nodes):
        for k in range(n_services):
            b = int(demands.units[n, k])
            if b == 0:
                continue
            row = {c: 1.0 for (nn, kk, _, _, c) in options if nn == n and kk == k}
            row[host_var[(n, k)]] = float(b)
            model.add_row(row, b, b)

    for n, k, m, p, c in options:
        model.add_row({c: 1.0, host_var[(m, k)]: -float(demands.units[n, k])}, -np.inf, 0.0)

    on_edge = [dict() for _ in luts]
    for n, k, m, p, c in options:
        for e in paths.edges(p):
            on_edge[e][c] = 1.0
    for e in range(len(luts)):
        row = dict(on_edge[e])
        for c in seg_cols[e]:
            row[int(c)] = -1.0
        model.add_row(row, 0.0, 0.0)

    for k, spec in enumerate(scenario.services):
        bound = min(host_bound, spec.host_bound)
        model.add_row({host_var[(m, k)]: 1.0 for m in range(n_nodes)}, float(lower), float(bound))

    for o, u in qos.items():
        n, k, m, p, c = options[o]
        sigma = scenario.services[k].qos_bound
        edges = paths.edges(p)
        base = sum(idle[e] for e in edges)
        if base > sigma:
            hi[c] = 0
            hi[u] = 0
            continue
        big = sum(qmax[e] - idle[e] for e in edges)
        row = {}
        for e in edges:
            for cc, s in zip(seg_cols[e], slopes[e]):
                row[int(cc)] = row.get(int(cc), 0.0) + s
        row[u] = big
        model.add_row(row, -np.inf, sigma - base + big)
        model.add_row({c: 1.0, u: -float(demands.units[n, k])}, -np.inf, 0.0)

    return model


def _objective(model: _Model, host_weight: float, delay_weight: float) -> np.ndarray:
    c = np.zeros(model.n_vars)
    for col in model.host_var.values():
        c[col] = host_weight
    for e, cols in enumerate(model.seg_cols):
        c[cols] = delay_weight * model.slopes[e] / model.qmax[e]
    return c * _SCALE


def _fractional(model: _Model, x: np.ndarray) -> bool:
    z = x[model.z_cols]
    return bool(np.any(np.abs(z - np.round(z)) > 1e-6))


def _solve(model: _Model, c: np.ndarray, extra=()):
    """Solve with unit counts relaxed to reals; re-solve as integers if the optimum is fractional.

    The relaxation is exact whenever its optimum is integral, which is the
    common case and several times faster than branching on every count.
    """
    cons = [model.constraint(), *extra]
    bounds = Bounds(model.lo, model.hi)
    integrality = model.integrality.copy()
    integrality[model.z_cols] = 0
    for attempt in (integrality, model.integrality):
        res = milp(c, integrality=attempt, bounds=bounds, constraints=cons,
                   options={"mip_rel_gap": 0.0})
        if res.status == 2:
            return None
        if res.x is None:
            raise RuntimeError(f"MILP solver failed: {res.message}")
        if not _fractional(model, res.x):
            return res.x
    return res.x


def _extract(model: _Model, x: np.ndarray, scenario, demands) -> Configuration:
    hosts = frozenset(key for key, col in model.host_var.items() if x[col] > 0.5)
    units = []
    n_nodes, n_services = demands.units.shape
    for n in range(n_nodes):
        for k in range(n_services):
            if (n, k) in hosts:
                units.extend([Unit(n, k, n, (n,))] * int(demands.units[n, k]))
    for n, k, m, p, col in model.options:
        cnt = int(round(x[col]))
        units.extend([Unit(n, k, m, p)] * cnt)
    a = Assignment.from_units(units, scenario.paths, demands.interval)
    return build_configuration(hosts, a)


def _guard(scenario, max_nodes):
    if scenario.graph.n_nodes > max_nodes:
        raise InstanceTooLarge(f"{scenario.graph.n_nodes} nodes exceeds exact-search guard of {max_nodes}")


def exact_deployment(scenario, demands, omega: float, host_bound: int, *,
                     ignore_qos: bool = False, max_nodes: int = MAX_EXACT_NODES) -> Configuration:
    """Configuration with the least deployment objective under all constraints.

    Host count per service is limited by ``host_bound`` and the service's own
    bound. With ``omega == 1`` ties in host count are broken by the delay
    term and then by the smallest host indices.
    """
    _guard(scenario, max_nodes)
    if not 0 <= omega <= 1:
        raise ValueError("omega must lie in [0, 1]")
    if host_bound < 1:
        raise ValueError("host_bound must be >= 1")
    lower = min_host_count(scenario, demands)
    if lower > host_bound:
        raise ExactInfeasible(f"at least {lower} hosts are needed to carry the demand")
    model = _build(scenario, demands, host_bound, ignore_qos, lower)
    if omega < 1.0:
        c = _objective(model, omega, 1.0 - omega)
    else:
        # one host outweighs the whole normalised delay term (each edge adds at most 1);
        # the index term separates ties and can only override delay gaps below ~1e-7
        c = _objective(model, len(scenario.luts) + 1.0, 1.0)
        for (m, k), col in model.host_var.items():
            c[col] += _TIE_EPS * (m + 1)
    x = _solve(model, c)
    if x is None:
        raise ExactInfeasible(f"no feasible deployment with at most {host_bound} hosts")

    config = _extract(model, x, scenario, demands)
    verdict = check_feasibility(config, _NoQos(scenario) if ignore_qos else scenario, demands)
    if not verdict:
        raise RuntimeError(f"exact solution violates constraints: {verdict.violations}")
    return config


class _NoQos:
    """Scenario view with every QoS bound lifted."""

    def __init__(self, scenario):
        from dataclasses import replace
        self._sc = scenario
        self.services = tuple(replace(s, qos_bound=math.inf) for s in scenario.services)

    def __getattr__(self, name):
        return getattr(self._sc, name)


def exact_levels(scenario, demands, *, max_nodes: int = MAX_EXACT_NODES) -> dict[int, Configuration]:
    """Delay-optimal configuration for every host bound that admits one.

    Feasibility is monotone in the bound, so the scan runs downward from |V|
    and stops at the first infeasible bound.
    """
    _guard(scenario, max_nodes)
    out = {}
    for h in range(scenario.graph.n_nodes, 0, -1):
        try:
            out[h] = exact_deployment(scenario, demands, 0.0, h, max_nodes=max_nodes)
        except ExactInfeasible:
            break
    return dict(sorted(out.items()))


def exact_pof(scenario, demands, *, max_nodes: int = MAX_EXACT_NODES) -> ParetoFrontier:
    levels = exact_levels(scenario, demands, max_nodes=max_nodes)
    if not levels:
        raise ExactInfeasible("no feasible deployment at any host bound")
    return pareto_filter(levels.values(), scenario)


def purist_cost(scenario, demands, *, max_nodes: int = MAX_EXACT_NODES) -> Configuration:
    """Fewest hosts that carry the demand, ignoring delay and QoS bounds."""
    return exact_deployment(scenario, demands, 1.0, scenario.graph.n_nodes,
                            ignore_qos=True, max_nodes=max_nodes)
