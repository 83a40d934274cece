"""Edge delay model: G/G/1 queueing (Kingman) materialized as a lookup table.

An edge's delay at a given load is processing + transmission + propagation
plus the Kingman waiting time. Loads are bucketed at the LUT interval, and a
load equal to the edge capacity is never representable (the queue diverges).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np


class DelayError(ValueError):
    pass


class SaturationError(DelayError):
    """Arrival rate reached or exceeded the service rate."""


class OverloadError(DelayError):
    """Edge load is at or above capacity."""


@dataclass(frozen=True)
class QueueParams:
    processing_delay: float = 10e-6  # seconds
    packet_size: float = 6400.0  # bits
    ca: float = 1.5
    cs: float = 1.5
    propagation_delay: float = 0.0  # seconds

    def __post_init__(self):
        if self.processing_delay < 0:
            raise DelayError("processing_delay must be >= 0")
        if self.packet_size <= 0:
            raise DelayError("packet_size must be > 0")
        if self.ca < 0 or self.cs < 0:
            raise DelayError("coefficients of variation must be >= 0")
        if self.propagation_delay < 0:
            raise DelayError("propagation_delay must be >= 0")


def kingman_queue_delay(lam: float, mu: float, ca: float, cs: float) -> float:
    """Mean waiting time in a G/G/1 queue, Kingman's approximation.

    Returns ``((ca**2 + cs**2) / 2) * (rho / (mu - lam))`` with ``rho = lam / mu``.
    """
    if lam < 0 or mu < 0 or ca < 0 or cs < 0:
        raise DelayError("negative input")
    if mu == 0:
        raise DelayError("mu must be > 0")
    if lam >= mu:
        raise SaturationError(f"lambda={lam} >= mu={mu}")
    return ((ca * ca + cs * cs) / 2.0) * ((lam / mu) / (mu - lam))


def _divides(interval: float, capacity: float) -> bool:
    if interval <= 0:
        return False
    q = capacity / interval
    return abs(q - round(q)) <= 1e-9 * max(1.0, abs(q))


@dataclass(frozen=True, eq=False)
class DelayLUT:
    interval: float
    capacity: float
    buckets: np.ndarray  # seconds, indexed by load // interval

    def __len__(self):
        return len(self.buckets)

    @property
    def max_delay(self) -> float:
        """Delay of the last representable bucket (load = capacity - interval)."""
        return float(self.buckets[-1])

    @property
    def max_units(self) -> int:
        """Largest representable load, in intervals."""
        return len(self.buckets) - 1

    def __eq__(self, other):
        if not isinstance(other, DelayLUT):
            return NotImplemented
        return (self.interval == other.interval and self.capacity == other.capacity
                and np.array_equal(self.buckets, other.buckets))

    def __hash__(self):
        return hash((self.interval, self.capacity, self.buckets.tobytes()))


def closed_form_delay(load: float, capacity: float, params: QueueParams) -> float:
    """Total edge delay at ``load`` Mbps, computed directly without a table."""
    mu = capacity * 1e6 / params.packet_size
    lam = load * 1e6 / params.packet_size
    transmission = params.packet_size / (capacity * 1e6)
    return (params.processing_delay + transmission + params.propagation_delay
            + kingman_queue_delay(lam, mu, params.ca, params.cs))


def build_lut(capacity: float, interval: float, params: QueueParams) -> DelayLUT:
    if capacity <= 0:
        raise DelayError("capacity must be > 0")
    if not _divides(interval, capacity):
        raise DelayError(f"interval {interval} does not divide capacity {capacity}")
    n = int(round(capacity / interval))
    mu = capacity * 1e6 / params.packet_size
    fixed = params.processing_delay + params.packet_size / (capacity * 1e6) + params.propagation_delay
    buckets = np.empty(n, dtype=float)
    for j in range(n):
        lam = j * interval * 1e6 / params.packet_size
        buckets[j] = fixed + kingman_queue_delay(lam, mu, params.ca, params.cs)
    buckets.setflags(write=False)
    return DelayLUT(interval=interval, capacity=capacity, buckets=buckets)


def load_index(lut: DelayLUT, load: float) -> int:
    if load < 0:
        raise DelayError(f"negative load {load}")
    q = load / lut.interval
    j = int(round(q))
    if abs(q - j) > 1e-9 * max(1.0, abs(q)):
        raise DelayError(f"load {load} is not a multiple of {lut.interval}")
    if j >= len(lut.buckets):
        raise OverloadError(f"load {load} >= capacity {lut.capacity}")
    return j


def edge_delay(lut: DelayLUT, load: float) -> float:
    return float(lut.buckets[load_index(lut, load)])


def path_delay(luts: Sequence[DelayLUT] | Mapping, loads, path: Sequence[int]) -> float:
    """Sum of edge delays along ``path`` (edge indices) at the given per-edge loads (Mbps).

    An empty path is local service and costs nothing.
    """
    total = 0.0
    for e in path:
        total += edge_delay(luts[e], loads[e])
    return total
