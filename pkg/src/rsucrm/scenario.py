"""Scenario definition: network graph, services, demand trace and bounds."""
from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from importlib import resources
from pathlib import Path

import numpy as np

from .delay import DelayError, DelayLUT, QueueParams, build_lut


class ScenarioError(ValueError):
    """Invalid scenario; ``key`` is the offending key path (e.g. ``edges[3]``)."""

    def __init__(self, key: str, message: str):
        self.key = key
        super().__init__(f"{key}: {message}" if key else message)


@dataclass(frozen=True)
class NetworkGraph:
    """Undirected graph. Edges are stored as ``(u, v, capacity)`` node indices with ``u < v``."""

    nodes: tuple[str, ...]
    edges: tuple[tuple[int, int, float], ...]

    def __post_init__(self):
        n = len(self.nodes)
        if n == 0:
            raise ScenarioError("nodes", "empty node list")
        if len(set(self.nodes)) != n:
            raise ScenarioError("nodes", "duplicate node identifier")
        norm = []
        seen = set()
        for i, (u, v, cap) in enumerate(self.edges):
            key = f"edges[{i}]"
            if not (0 <= u < n and 0 <= v < n):
                raise ScenarioError(key, "unknown node")
            if u == v:
                raise ScenarioError(key, "self-loop")
            if not cap > 0:
                raise ScenarioError(key, "capacity must be > 0")
            a, b = min(u, v), max(u, v)
            if (a, b) in seen:
                raise ScenarioError(key, "duplicate edge")
            seen.add((a, b))
            norm.append((a, b, float(cap)))
        object.__setattr__(self, "edges", tuple(norm))
        if not self._connected():
            raise ScenarioError("edges", "graph is disconnected")

    def _connected(self) -> bool:
        adj = self.adjacency
        seen = {0}
        todo = deque([0])
        while todo:
            u = todo.popleft()
            for v in adj[u]:
                if v not in seen:
                    seen.add(v)
                    todo.append(v)
        return len(seen) == len(self.nodes)

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @cached_property
    def adjacency(self) -> tuple[tuple[int, ...], ...]:
        adj = [set() for _ in self.nodes]
        for u, v, _ in self.edges:
            adj[u].add(v)
            adj[v].add(u)
        return tuple(tuple(sorted(a)) for a in adj)

    @cached_property
    def edge_index(self) -> dict[tuple[int, int], int]:
        idx = {}
        for e, (u, v, _) in enumerate(self.edges):
            idx[(u, v)] = e
            idx[(v, u)] = e
        return idx

    def degree(self, node: int) -> int:
        return len(self.adjacency[node])

    @classmethod
    def from_names(cls, nodes, edges) -> "NetworkGraph":
        pos = {name: i for i, name in enumerate(nodes)}
        out = []
        for i, (u, v, cap) in enumerate(edges):
            if u not in pos or v not in pos:
                raise ScenarioError(f"edges[{i}]", f"unknown node in {u!r}-{v!r}")
            out.append((pos[u], pos[v], cap))
        return cls(tuple(nodes), tuple(out))


@dataclass(frozen=True)
class ServiceSpec:
    id: str
    host_bound: int
    qos_bound: float = math.inf  # seconds

    def __post_init__(self):
        if int(self.host_bound) != self.host_bound or self.host_bound < 1:
            raise ScenarioError("host_bound", "must be a positive integer")
        if not self.qos_bound > 0:
            raise ScenarioError("qos_bound", "must be > 0")


@dataclass(frozen=True)
class DemandTrace:
    steps: tuple[float, ...]  # Mbps
    sigma: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "steps", tuple(float(d) for d in self.steps))
        if not self.steps:
            raise ScenarioError("trace.steps_mbps", "empty trace")
        for i, d in enumerate(self.steps):
            if not d > 0:
                raise ScenarioError(f"trace.steps_mbps[{i}]", "demand must be > 0")
        if self.sigma < 0:
            raise ScenarioError("trace.sigma", "must be >= 0")


@dataclass(frozen=True)
class Scenario:
    graph: NetworkGraph
    services: tuple[ServiceSpec, ...]
    trace: DemandTrace
    lut_interval: float = 1.0
    queue_params: QueueParams = field(default_factory=QueueParams)
    path_limit: int = 4
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "services", tuple(self.services))
        if not self.services:
            raise ScenarioError("services", "no services")
        ids = [s.id for s in self.services]
        if len(set(ids)) != len(ids):
            raise ScenarioError("services", "duplicate service id")
        for i, s in enumerate(self.services):
            if s.host_bound > self.graph.n_nodes:
                raise ScenarioError(f"services[{i}].host_bound", "exceeds node count")
        if not self.lut_interval > 0:
            raise ScenarioError("lut_interval_mbps", "must be > 0")
        for i, (_, _, cap) in enumerate(self.graph.edges):
            q = cap / self.lut_interval
            if abs(q - round(q)) > 1e-9 * max(1.0, q) or round(q) < 1:
                raise ScenarioError(f"edges[{i}]", "interval does not divide capacity")
        if int(self.path_limit) != self.path_limit or self.path_limit < 1:
            raise ScenarioError("path_limit", "must be >= 1")

    @cached_property
    def luts(self) -> tuple[DelayLUT, ...]:
        cache: dict[float, DelayLUT] = {}
        out = []
        for _, _, cap in self.graph.edges:
            if cap not in cache:
                cache[cap] = build_lut(cap, self.lut_interval, self.queue_params)
            out.append(cache[cap])
        return tuple(out)

    @cached_property
    def paths(self):
        from .routing import enumerate_paths
        return enumerate_paths(self.graph, self.path_limit)

    @property
    def n_services(self) -> int:
        return len(self.services)


@dataclass(frozen=True, eq=False)
class DemandMatrix:
    """Per-(node, service) demand counted in LUT intervals."""

    units: np.ndarray  # int, shape (n_nodes, n_services)
    interval: float

    def __post_init__(self):
        u = np.array(self.units, dtype=np.int64)
        if u.ndim != 2:
            raise ValueError("demand units must be a 2-D array")
        if (u < 0).any():
            raise ValueError("negative demand")
        u.setflags(write=False)
        object.__setattr__(self, "units", u)

    def mbps(self, node: int, service: int) -> float:
        return float(self.units[node, service]) * self.interval

    @property
    def entries(self) -> dict[tuple[int, int], float]:
        n, s = self.units.shape
        return {(i, k): self.mbps(i, k) for i in range(n) for k in range(s)}

    def __eq__(self, other):
        if not isinstance(other, DemandMatrix):
            return NotImplemented
        return self.interval == other.interval and np.array_equal(self.units, other.units)

    def __hash__(self):
        return hash((self.interval, self.units.shape, self.units.tobytes()))

    @classmethod
    def from_mbps(cls, values, interval: float) -> "DemandMatrix":
        arr = np.asarray(values, dtype=float)
        if arr.ndim == 1:
            arr = arr[:, None]
        q = arr / interval
        units = np.rint(q)
        if np.any(np.abs(q - units) > 1e-9):
            raise ValueError("demand must be a multiple of the LUT interval")
        return cls(units.astype(np.int64), interval)


def default_topology(capacity: float = 100.0) -> NetworkGraph:
    """Ten-node ring with chords 0-5, 2-7, 4-9; stand-in for the unpublished FDOT layout."""
    nodes = tuple(str(i) for i in range(10))
    edges = [(i, (i + 1) % 10, capacity) for i in range(10)]
    edges += [(0, 5, capacity), (2, 7, capacity), (4, 9, capacity)]
    return NetworkGraph(nodes, tuple(edges))


def default_scenario_path() -> Path:
    return Path(str(resources.files("rsucrm") / "data" / "default_scenario.json"))


def default_scenario() -> Scenario:
    return load_scenario(default_scenario_path())


_TOP_KEYS = {"nodes", "edges", "services", "trace", "lut_interval_mbps", "queue", "path_limit", "seed"}
_SERVICE_KEYS = {"id", "host_bound", "qos_bound_us"}
_TRACE_KEYS = {"steps_mbps", "sigma"}
_QUEUE_KEYS = {"processing_delay_us", "packet_size_bytes", "ca", "cs", "propagation_delay_us"}


def _check_keys(obj, allowed: set, path: str, required: set | None = None):
    if not isinstance(obj, dict):
        raise ScenarioError(path or "<root>", "expected an object")
    for k in obj:
        if k not in allowed:
            raise ScenarioError(f"{path}.{k}" if path else k, "unknown key")
    for k in (allowed if required is None else required):
        if k not in obj:
            raise ScenarioError(f"{path}.{k}" if path else k, "missing key")


def _num(value, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ScenarioError(path, "expected a number")
    return float(value)


def _int(value, path: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ScenarioError(path, "expected an integer")
    return value


def scenario_from_dict(doc: dict) -> Scenario:
    _check_keys(doc, _TOP_KEYS, "")
    nodes = doc["nodes"]
    if not isinstance(nodes, list) or not all(isinstance(n, str) for n in nodes):
        raise ScenarioError("nodes", "expected an array of strings")
    edges = []
    for i, e in enumerate(doc["edges"]):
        if not isinstance(e, list) or len(e) != 3:
            raise ScenarioError(f"edges[{i}]", "expected [u, v, capacity_mbps]")
        edges.append((e[0], e[1], _num(e[2], f"edges[{i}][2]")))
    graph = NetworkGraph.from_names(nodes, edges)

    services = []
    for i, s in enumerate(doc["services"]):
        p = f"services[{i}]"
        _check_keys(s, _SERVICE_KEYS, p)
        qos = s["qos_bound_us"]
        qos = math.inf if qos is None else _num(qos, f"{p}.qos_bound_us") / 1e6
        try:
            services.append(ServiceSpec(str(s["id"]), _int(s["host_bound"], f"{p}.host_bound"), qos))
        except ScenarioError as exc:
            raise ScenarioError(f"{p}.{exc.key}", str(exc).split(": ", 1)[-1]) from None

    _check_keys(doc["trace"], _TRACE_KEYS, "trace")
    steps = doc["trace"]["steps_mbps"]
    if not isinstance(steps, list):
        raise ScenarioError("trace.steps_mbps", "expected an array")
    trace = DemandTrace(tuple(_num(d, f"trace.steps_mbps[{i}]") for i, d in enumerate(steps)),
                        _num(doc["trace"]["sigma"], "trace.sigma"))

    q = doc["queue"]
    _check_keys(q, _QUEUE_KEYS, "queue")
    try:
        params = QueueParams(
            processing_delay=_num(q["processing_delay_us"], "queue.processing_delay_us") / 1e6,
            packet_size=_num(q["packet_size_bytes"], "queue.packet_size_bytes") * 8,
            ca=_num(q["ca"], "queue.ca"),
            cs=_num(q["cs"], "queue.cs"),
            propagation_delay=_num(q["propagation_delay_us"], "queue.propagation_delay_us") / 1e6,
        )
    except DelayError as exc:
        raise ScenarioError("queue", str(exc)) from None

    return Scenario(
        graph=graph,
        services=tuple(services),
        trace=trace,
        lut_interval=_num(doc["lut_interval_mbps"], "lut_interval_mbps"),
        queue_params=params,
        path_limit=_int(doc["path_limit"], "path_limit"),
        seed=_int(doc["seed"], "seed"),
    )


def _scaled(value: float, divisor: float) -> float:
    """x with ``x / divisor == value`` exactly when one is within a few ulps, so reloading is lossless."""
    x = value * divisor
    for cand in (x, math.nextafter(x, math.inf), math.nextafter(x, -math.inf),
                 math.nextafter(math.nextafter(x, math.inf), math.inf),
                 math.nextafter(math.nextafter(x, -math.inf), -math.inf)):
        if cand / divisor == value:
            return cand
    return x


def scenario_to_dict(sc: Scenario) -> dict:
    g = sc.graph
    qp = sc.queue_params
    return {
        "nodes": list(g.nodes),
        "edges": [[g.nodes[u], g.nodes[v], cap] for u, v, cap in g.edges],
        "services": [
            {"id": s.id, "host_bound": s.host_bound,
             "qos_bound_us": None if math.isinf(s.qos_bound) else _scaled(s.qos_bound, 1e6)}
            for s in sc.services
        ],
        "trace": {"steps_mbps": list(sc.trace.steps), "sigma": sc.trace.sigma},
        "lut_interval_mbps": sc.lut_interval,
        "queue": {
            "processing_delay_us": _scaled(qp.processing_delay, 1e6),
            "packet_size_bytes": qp.packet_size / 8,
            "ca": qp.ca,
            "cs": qp.cs,
            "propagation_delay_us": _scaled(qp.propagation_delay, 1e6),
        },
        "path_limit": sc.path_limit,
        "seed": sc.seed,
    }


def load_scenario(path) -> Scenario:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ScenarioError("", f"parse failure: {exc}") from None
    return scenario_from_dict(doc)


def dump_scenario(sc: Scenario, path) -> None:
    Path(path).write_text(json.dumps(scenario_to_dict(sc), indent=2) + "\n")


def sample_demands(scenario: Scenario, step_index: int, seed: int | None = None) -> DemandMatrix:
    """Draw per-node demands for one trace step.

    Each entry is normal around the step's average with relative spread
    ``trace.sigma``, rounded half-up to a multiple of the LUT interval and
    clamped to at least one interval. Pure in (scenario, step_index, seed).
    """
    steps = scenario.trace.steps
    if not 0 <= step_index < len(steps):
        raise IndexError(f"step_index {step_index} outside trace of length {len(steps)}")
    if seed is None:
        seed = scenario.seed
    d = steps[step_index]
    phi = scenario.lut_interval
    rng = np.random.default_rng([int(seed), int(step_index)])
    z = rng.standard_normal((scenario.graph.n_nodes, scenario.n_services))
    values = d + scenario.trace.sigma * d * z
    units = np.floor(values / phi + 0.5).astype(np.int64)
    return DemandMatrix(np.maximum(units, 1), phi)
