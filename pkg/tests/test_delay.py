import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import edge_delay_formula, kingman
from rsucrm.delay import (
    DelayError, OverloadError, QueueParams, SaturationError, build_lut, edge_delay, kingman_queue_delay,
    path_delay,
)

UNIT = QueueParams(processing_delay=10e-6, packet_size=6400.0, ca=1.0, cs=1.0, propagation_delay=0.0)


@pytest.fixture(scope="module")
def lut100():
    return build_lut(100.0, 1.0, UNIT)


def test_kingman_empty_system():
    assert kingman_queue_delay(0, 100, 1, 1) == 0.0


def test_kingman_half_load():
    assert kingman_queue_delay(50, 100, 1, 1) == pytest.approx(0.01, rel=1e-15)


def test_kingman_packet_rate():
    # 100 Mbps over 6400-bit packets is 15625 packets/s
    assert kingman_queue_delay(7812.5, 15625, 1, 1) == pytest.approx(64e-6, rel=1e-12)


def test_kingman_errors():
    with pytest.raises(SaturationError):
        kingman_queue_delay(100, 100, 1, 1)
    with pytest.raises(DelayError):
        kingman_queue_delay(-1, 100, 1, 1)
    with pytest.raises(DelayError):
        kingman_queue_delay(1, 100, -1, 1)


def test_lut_buckets(lut100):
    assert len(lut100) == 100
    assert lut100.buckets[0] == pytest.approx(74e-6, rel=1e-12)
    assert lut100.buckets[50] == pytest.approx(138e-6, rel=1e-12)
    assert lut100.max_units == 99
    assert lut100.max_delay == lut100.buckets[99]


def test_lut_interval_must_divide():
    with pytest.raises(DelayError, match="does not divide"):
        build_lut(100.0, 3.0, UNIT)


def test_lut_coarse_interval():
    lut = build_lut(100.0, 5.0, UNIT)
    assert len(lut) == 20
    assert edge_delay(lut, 50.0) == pytest.approx(138e-6, rel=1e-12)
    with pytest.raises(DelayError, match="multiple"):
        edge_delay(lut, 52.0)


def test_edge_delay_examples(lut100):
    assert edge_delay(lut100, 0) == pytest.approx(74e-6, rel=1e-12)
    assert edge_delay(lut100, 50) == pytest.approx(138e-6, rel=1e-12)
    with pytest.raises(OverloadError):
        edge_delay(lut100, 100)
    with pytest.raises(DelayError):
        edge_delay(lut100, 0.5)


def test_path_delay_examples(lut100):
    luts = [lut100, lut100]
    assert path_delay(luts, [0, 50], []) == 0.0
    assert path_delay(luts, [0, 50], [1]) == pytest.approx(138e-6, rel=1e-12)
    assert path_delay(luts, [0, 50], [0, 1]) == pytest.approx(212e-6, rel=1e-12)


def test_path_delay_propagates_overload(lut100):
    with pytest.raises(OverloadError):
        path_delay([lut100], [100], [0])


def test_default_params():
    p = QueueParams()
    assert (p.processing_delay, p.packet_size, p.ca, p.cs, p.propagation_delay) == (10e-6, 6400.0, 1.5, 1.5, 0.0)


@pytest.mark.parametrize("c", [0.5, 1.0, 2.0])
def test_lut_matches_formula(c):
    p = QueueParams(ca=c, cs=c)
    lut = build_lut(100.0, 1.0, p)
    for j in range(1, 100):
        ref = edge_delay_formula(j, 100.0, 10e-6, 6400.0, c, c, 0.0)
        assert abs(lut.buckets[j] - ref) <= 1e-12 * ref


@given(lam=st.floats(0, 0.999), ca=st.floats(0, 3), cs=st.floats(0, 3))
def test_kingman_symmetric(lam, ca, cs):
    assert kingman_queue_delay(lam, 1.0, ca, cs) == kingman_queue_delay(lam, 1.0, cs, ca)


@given(a=st.floats(0, 0.99), b=st.floats(0, 0.99), c=st.floats(0.1, 3))
def test_kingman_strictly_increasing(a, b, c):
    if a == b:
        return
    lo, hi = min(a, b), max(a, b)
    assert kingman_queue_delay(lo, 1.0, c, c) < kingman_queue_delay(hi, 1.0, c, c)


@given(lam=st.floats(0, 0.999), ca=st.floats(0, 3), cs=st.floats(0, 3))
def test_kingman_against_oracle(lam, ca, cs):
    assert kingman_queue_delay(lam, 1.0, ca, cs) == pytest.approx(kingman(lam, 1.0, ca, cs), rel=1e-12, abs=0)


@settings(max_examples=30)
@given(cap=st.sampled_from([10.0, 40.0, 100.0, 1000.0]), interval=st.sampled_from([1.0, 2.0, 5.0]),
       proc=st.floats(0, 1e-4), prop=st.floats(0, 1e-4), ca=st.floats(0, 3))
def test_lut_non_decreasing_and_idle(cap, interval, proc, prop, ca):
    p = QueueParams(proc, 6400.0, ca, ca, prop)
    lut = build_lut(cap, interval, p)
    assert len(lut) == int(cap / interval)
    assert np.all(np.diff(lut.buckets) >= 0)
    assert lut.buckets[0] == pytest.approx(proc + 6400.0 / (cap * 1e6) + prop, rel=1e-12)


@given(loads=st.lists(st.integers(0, 99), min_size=4, max_size=4), cut=st.integers(0, 4),
       order=st.permutations(range(4)))
def test_path_delay_additive(lut100, loads, cut, order):
    luts = [lut100] * 4
    path = list(order)
    whole = path_delay(luts, loads, path)
    parts = path_delay(luts, loads, path[:cut]) + path_delay(luts, loads, path[cut:])
    assert math.isclose(whole, parts, rel_tol=1e-12)
