"""Candidate paths, unit-by-unit demand routing, and flow/group rule derivation."""
from __future__ import annotations

from collections import Counter, defaultdict
from dataclasses import dataclass
from fractions import Fraction
from typing import NamedTuple, Sequence

import numba
import numpy as np

from .delay import DelayLUT


class RoutingInfeasible(RuntimeError):
    """The host set cannot carry the demand within edge capacities."""


# -- candidate paths ---------------------------------------------------------

class CandidatePaths:
    """Loopless candidate paths per ordered node pair.

    Paths are node tuples; ``(n,)`` is the empty path used for local service.
    Per pair they are ordered by hop count, then lexicographically.
    """

    def __init__(self, graph, table: dict, limit: int):
        self.graph = graph
        self.limit = limit
        self._table = table
        self._edges: dict[tuple[int, ...], tuple[int, ...]] = {}

    def __getitem__(self, pair: tuple[int, int]) -> tuple[tuple[int, ...], ...]:
        return self._table[pair]

    def __contains__(self, pair):
        return pair in self._table

    def __iter__(self):
        return iter(self._table)

    def __len__(self):
        return len(self._table)

    def items(self):
        return self._table.items()

    def edges(self, path: Sequence[int]) -> tuple[int, ...]:
        """Edge indices traversed by a node-sequence path."""
        path = tuple(path)
        got = self._edges.get(path)
        if got is None:
            idx = self.graph.edge_index
            got = tuple(idx[(path[i], path[i + 1])] for i in range(len(path) - 1))
            self._edges[path] = got
        return got

    def contains_path(self, path: Sequence[int]) -> bool:
        path = tuple(path)
        return path in self._table.get((path[0], path[-1]), ())


def _paths_between(adj, s: int, t: int, limit: int, n: int) -> list[tuple[int, ...]]:
    found: list[tuple[int, ...]] = []
    # iterative deepening on hop count; sorted neighbours give lexicographic order
    for hops in range(1, n):
        stack = [(s,)]
        while stack and len(found) < limit:
            path = stack.pop()
            last = path[-1]
            if len(path) - 1 == hops:
                if last == t:
                    found.append(path)
                continue
            for v in reversed(adj[last]):
                if v in path:
                    continue
                if v == t and len(path) != hops:
                    continue
                stack.append(path + (v,))
        if len(found) >= limit:
            break
    return found


def enumerate_paths(graph, limit: int) -> CandidatePaths:
    if limit < 1:
        raise ValueError("limit must be >= 1")
    adj = graph.adjacency
    n = graph.n_nodes
    table = {}
    for s in range(n):
        for t in range(n):
            table[(s, t)] = ((s,),) if s == t else tuple(_paths_between(adj, s, t, limit, n))
    return CandidatePaths(graph, table, limit)


# -- assignments --------------------------------------------------------------

class Unit(NamedTuple):
    node: int
    service: int
    host: int
    path: tuple[int, ...]


@dataclass(frozen=True)
class Assignment:
    """One record per LUT interval of demand, plus resulting per-edge loads (in intervals)."""

    units: tuple[Unit, ...]
    edge_units: tuple[int, ...]
    interval: float

    @property
    def edge_loads(self) -> tuple[float, ...]:
        return tuple(u * self.interval for u in self.edge_units)

    @classmethod
    def from_units(cls, units, paths: CandidatePaths, interval: float) -> "Assignment":
        units = tuple(Unit(*u) for u in units)
        loads = [0] * len(paths.graph.edges)
        for u in units:
            for e in paths.edges(u.path):
                loads[e] += 1
        return cls(units, tuple(loads), interval)

    def unit_counts(self) -> Counter:
        return Counter((u.node, u.service) for u in self.units)

    def routed(self) -> list[Unit]:
        return [u for u in self.units if len(u.path) > 1]


def _lut_matrix(luts: Sequence[DelayLUT]) -> tuple[np.ndarray, np.ndarray]:
    width = max(len(l.buckets) for l in luts)
    mat = np.full((len(luts), width), np.inf)
    cap = np.empty(len(luts), dtype=np.int64)
    for e, l in enumerate(luts):
        mat[e, : len(l.buckets)] = l.buckets
        cap[e] = len(l.buckets) - 1
    return mat, cap


_LUT_CACHE: dict[int, tuple] = {}


def lut_matrix(luts: Sequence[DelayLUT]):
    key = id(luts)
    hit = _LUT_CACHE.get(key)
    if hit is None or hit[0] is not luts:
        hit = (luts,) + _lut_matrix(luts)
        _LUT_CACHE[key] = hit
    return hit[1], hit[2]


@numba.njit(cache=True)
def _greedy(seq, tie_u, opt_start, opt_end, opt_edges, opt_len, lut, cap, loads):
    n = seq.shape[0]
    choice = np.full(n, -1, dtype=np.int64)
    costs = np.empty(opt_edges.shape[0])
    for i in range(n):
        g = seq[i]
        best = np.inf
        nties = 0
        for o in range(opt_start[g], opt_end[g]):
            c = 0.0
            ok = True
            for t in range(opt_len[o]):
                e = opt_edges[o, t]
                l = loads[e] + 1
                if l > cap[e]:
                    ok = False
                    break
                c += lut[e, l]
            if not ok:
                costs[o] = np.inf
                continue
            costs[o] = c
            if c < best:
                best = c
                nties = 1
            elif c == best:
                nties += 1
        if nties == 0:
            return choice, i
        pick = int(tie_u[i] * nties)
        if pick >= nties:
            pick = nties - 1
        for o in range(opt_start[g], opt_end[g]):
            if costs[o] == best:
                if pick == 0:
                    choice[i] = o
                    for t in range(opt_len[o]):
                        loads[opt_edges[o, t]] += 1
                    break
                pick -= 1
    return choice, n


class _Plan(NamedTuple):
    local: list  # (node, service, count)
    groups: list  # (node, service)
    options: list  # (host, path)
    seq: np.ndarray
    choice: np.ndarray
    loads: np.ndarray
    failed_at: int


def _plan(demand_units: np.ndarray, hosts, paths: CandidatePaths, luts, order_seed) -> _Plan:
    n_nodes, n_services = demand_units.shape
    by_service = defaultdict(list)
    for m, k in sorted(hosts):
        by_service[k].append(m)
    hosted = set(hosts)
    local, groups, reps = [], [], []
    for n in range(n_nodes):
        for k in range(n_services):
            b = int(demand_units[n, k])
            if b == 0:
                continue
            if (n, k) in hosted:
                local.append((n, k, b))
            else:
                if not by_service[k]:
                    raise ValueError(f"no host for service {k}")
                groups.append((n, k))
                reps.append(b)

    options, starts, ends, edge_rows = [], [], [], []
    for n, k in groups:
        starts.append(len(options))
        for m in by_service[k]:
            for p in paths[(n, m)]:
                options.append((m, p))
                edge_rows.append(paths.edges(p))
        ends.append(len(options))
    width = max((len(r) for r in edge_rows), default=1)
    opt_edges = np.zeros((max(len(options), 1), max(width, 1)), dtype=np.int64)
    opt_len = np.zeros(max(len(options), 1), dtype=np.int64)
    for o, r in enumerate(edge_rows):
        opt_edges[o, : len(r)] = r
        opt_len[o] = len(r)

    rng = np.random.default_rng(order_seed)
    seq = np.repeat(np.arange(len(groups), dtype=np.int64), reps)
    seq = seq[rng.permutation(len(seq))]
    tie_u = rng.random(len(seq))
    lut, cap = lut_matrix(luts)
    loads = np.zeros(len(luts), dtype=np.int64)
    choice, failed_at = _greedy(seq, tie_u, np.array(starts, dtype=np.int64),
                                np.array(ends, dtype=np.int64), opt_edges, opt_len, lut, cap, loads)
    return _Plan(local, groups, options, seq, choice, loads, int(failed_at))


def route_loads(demands, hosts, paths: CandidatePaths, luts, order_seed) -> np.ndarray | None:
    """Edge loads (in intervals) that :func:`route_units` would produce, or None if infeasible."""
    plan = _plan(demands.units, hosts, paths, luts, order_seed)
    if plan.failed_at < len(plan.seq):
        return None
    return plan.loads


def route_units(demands, hosts, paths: CandidatePaths, luts, order_seed) -> Assignment:
    """Greedy per-unit routing.

    Hosts serve their own demand locally. Every other unit of demand, taken
    in an order drawn from ``order_seed``, goes to the (host, candidate path)
    with the least path delay once the unit is added; exact ties are broken
    at random. Raises :class:`RoutingInfeasible` if some unit fits nowhere.
    """
    plan = _plan(demands.units, hosts, paths, luts, order_seed)
    if plan.failed_at < len(plan.seq):
        n, k = plan.groups[plan.seq[plan.failed_at]]
        raise RoutingInfeasible(f"unit from node {n} (service {k}) exceeds capacity on every path")
    units = []
    for n, k, b in plan.local:
        units.extend([Unit(n, k, n, (n,))] * b)
    for g, o in zip(plan.seq, plan.choice):
        n, k = plan.groups[g]
        m, p = plan.options[o]
        units.append(Unit(n, k, m, p))
    return Assignment(tuple(units), tuple(int(x) for x in plan.loads), demands.interval)


def total_delay_from_loads(loads, luts) -> float:
    """Sum of per-unit path delays: every unit on an edge sees that edge's delay."""
    lut, _ = lut_matrix(luts)
    loads = np.asarray(loads)
    idx = np.arange(len(loads))
    return float(np.sum(loads * lut[idx, loads]))


# -- rules --------------------------------------------------------------------

@dataclass(frozen=True, order=True)
class FlowRule:
    switch: int
    service: int
    destination: int
    out_edge: tuple[int, int]

    def __post_init__(self):
        if self.out_edge[0] != self.switch:
            raise ValueError("out_edge must leave the switch")

    @property
    def key(self):
        return (self.switch, self.service, self.destination)


@dataclass(frozen=True, order=True)
class GroupRule:
    switch: int
    service: int
    destination: int
    branches: tuple[tuple[tuple[int, int], Fraction], ...]

    def __post_init__(self):
        br = tuple(sorted((tuple(e), Fraction(w)) for e, w in self.branches))
        object.__setattr__(self, "branches", br)
        if len(br) < 2:
            raise ValueError("group rule needs at least two branches")
        if len({e for e, _ in br}) != len(br):
            raise ValueError("duplicate out_edge in group rule")
        if any(e[0] != self.switch for e, _ in br):
            raise ValueError("out_edge must leave the switch")
        if any(w <= 0 for _, w in br) or sum(w for _, w in br) != 1:
            raise ValueError("weights must be positive and sum to 1")

    @property
    def key(self):
        return (self.switch, self.service, self.destination)


def derive_rules(assignment: Assignment) -> tuple[frozenset, frozenset]:
    out = defaultdict(Counter)
    for u in assignment.units:
        p = u.path
        for i in range(len(p) - 1):
            out[(p[i], u.service, u.host)][(p[i], p[i + 1])] += 1
    flows, groups = set(), set()
    for (s, k, m), counts in out.items():
        if len(counts) == 1:
            (edge,) = counts
            flows.add(FlowRule(s, k, m, edge))
        else:
            total = sum(counts.values())
            groups.add(GroupRule(s, k, m, tuple((e, Fraction(c, total)) for e, c in counts.items())))
    return frozenset(flows), frozenset(groups)


def _solve_fraction(a: list[list[Fraction]], b: list[Fraction]) -> list[Fraction]:
    n = len(b)
    m = [row[:] + [b[i]] for i, row in enumerate(a)]
    for col in range(n):
        piv = next(r for r in range(col, n) if m[r][col] != 0)
        m[col], m[piv] = m[piv], m[col]
        pv = m[col][col]
        m[col] = [x / pv for x in m[col]]
        for r in range(n):
            if r != col and m[r][col] != 0:
                f = m[r][col]
                m[r] = [x - f * y for x, y in zip(m[r], m[col])]
    return [m[i][n] for i in range(n)]


def replay_rules(flow_rules, group_rules, origins: dict) -> dict[tuple[int, int], Fraction]:
    """Push traffic through forwarding rules and return per-edge loads in intervals.

    ``origins`` maps ``(switch, service, destination)`` to the number of units
    entering the network at that switch. Traffic arriving at a switch is split
    by the rule's weights; the resulting linear system is solved exactly.
    """
    weights = defaultdict(dict)  # (k, m) -> switch -> {next: w}
    for r in flow_rules:
        weights[(r.service, r.destination)][r.switch] = {r.out_edge[1]: Fraction(1)}
    for r in group_rules:
        weights[(r.service, r.destination)][r.switch] = {e[1]: w for e, w in r.branches}
    loads: dict[tuple[int, int], Fraction] = defaultdict(Fraction)
    for (k, m), table in weights.items():
        switches = sorted(table)
        pos = {s: i for i, s in enumerate(switches)}
        n = len(switches)
        a = [[Fraction(int(i == j)) for j in range(n)] for i in range(n)]
        b = [Fraction(origins.get((s, k, m), 0)) for s in switches]
        for s, nxt in table.items():
            for t, w in nxt.items():
                if t in pos:
                    a[pos[t]][pos[s]] -= w
        vol = _solve_fraction(a, b)
        for s, nxt in table.items():
            for t, w in nxt.items():
                loads[(min(s, t), max(s, t))] += vol[pos[s]] * w
    return dict(loads)
