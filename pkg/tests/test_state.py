"""Impulse state, event streams, the d_X metric and discrepancies."""

import io
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hawkes_stability.errors import DomainError
from hawkes_stability.kernels import Kernel
from hawkes_stability.state import (ROOT, EventStream, ImpulseState, PreHistory, SumInitial, discrepancy_after,
                                    metric_dX)

# scripts/oracles.py
IMPULSE_TWO_EVENTS = 0.35846544338504252
DX_UNIT_GAP_N20 = 0.61370472681056304


def _run(st_, ops):
    for kind, x in ops:
        if kind == "adv":
            st_.advance(x)
        else:
            st_.jump()
    return st_


def test_pure_initial_condition():
    g0 = Kernel.tabulated([0, 1, 2, 3, 4], [1.0, 0.25, 1 / 9, 0.0625, 0.04])
    st_ = ImpulseState(Kernel.exponential(), g0).advance(1.0)
    assert st_.evaluate(2.0) == pytest.approx(0.0625, rel=1e-15)


def test_single_and_double_event_sums():
    st_ = ImpulseState(Kernel.exponential()).jump().advance(1.0)
    assert st_.evaluate(0.0) == pytest.approx(math.exp(-1), rel=1e-12)
    st_ = ImpulseState(Kernel.exponential()).jump().advance(0.5).jump().advance(0.5)
    assert st_.evaluate(1.0) == pytest.approx(IMPULSE_TWO_EVENTS, rel=1e-12)


def test_advance_is_a_translation():
    k = Kernel.powerlaw(2)
    a = ImpulseState(k, Kernel.exponential(0.5)).jump().advance(0.2).jump()
    before = a.evaluate(1.5)
    a.advance(1.5)
    assert a.evaluate(0.0) == pytest.approx(before, rel=1e-14)
    b = ImpulseState(k).jump().advance(0.3).advance(0.7)
    c = ImpulseState(k).jump().advance(1.0)
    s = np.linspace(0, 5, 11)
    assert np.allclose(b.evaluate(s), c.evaluate(s), rtol=1e-14, atol=0)


def test_jump_adds_h0_and_counts():
    k = Kernel.powerlaw(2)
    st_ = ImpulseState(k).jump().advance(0.4)
    z = st_.z
    st_.jump()
    assert st_.z - z == pytest.approx(k.h0, rel=1e-14)
    assert st_.n_events == 2
    st_.advance(1.0)
    assert st_.evaluate(2.0) == pytest.approx(k.eval(3.0) + k.eval(3.4), rel=1e-14)


def test_simultaneous_jumps_with_bounded_kernel():
    st_ = ImpulseState(Kernel.tabulated([0, 1], [1, 0])).jump().jump()
    assert st_.z == 2.0


def test_negative_lag_raises():
    with pytest.raises(DomainError):
        ImpulseState(Kernel.exponential()).evaluate(-1.0)


def test_star_decomposition():
    g0 = Kernel.powerlaw(1)
    st_ = ImpulseState(Kernel.powerlaw(2), g0).jump().advance(0.3).jump().advance(2.0)
    s = np.linspace(0, 3, 7)
    assert np.allclose(st_.evaluate(s) - g0.eval(st_.now + s), st_.star(s), rtol=1e-14, atol=1e-15)


def test_prehistory_equals_events():
    k = Kernel.exponential(1.3)
    pre = PreHistory(k, [-2.0, -0.5])
    t = np.linspace(0, 4, 9)
    assert np.allclose(pre.eval(t), k.eval(t + 2.0) + k.eval(t + 0.5), rtol=1e-15)
    both = SumInitial([pre, Kernel.powerlaw(2)])
    assert np.allclose(both.eval(t), pre.eval(t) + Kernel.powerlaw(2).eval(t))


def test_snapshot_round_trip():
    st_ = ImpulseState(Kernel.powerlaw(2), PreHistory(Kernel.powerlaw(2), [-1.0])).jump().advance(0.25).jump().advance(0.1)
    back = ImpulseState.from_snapshot(st_.to_json())
    assert back.now == st_.now and np.array_equal(back.times, st_.times)
    assert back.evaluate(0.7) == st_.evaluate(0.7)


def test_metric_examples():
    g = lambda x: np.exp(-x)
    assert metric_dX(g, g).value == 0.0
    res = metric_dX(lambda x: np.ones_like(x), lambda x: np.zeros_like(x), n_max=20)
    assert res.value == pytest.approx(DX_UNIT_GAP_N20, abs=1e-12)
    assert res.remainder == 2.0**-20


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(0, 3), min_size=3, max_size=6), st.lists(st.floats(0, 3), min_size=3, max_size=6))
def test_metric_symmetric(va, vb):
    a = Kernel.tabulated(np.linspace(0, 10, len(va)), va)
    b = Kernel.tabulated(np.linspace(0, 10, len(vb)), vb)
    assert metric_dX(a.eval, b.eval, n_max=12).value == metric_dX(b.eval, a.eval, n_max=12).value


def test_discrepancy_examples():
    assert discrepancy_after([1, 2], [1, 2]) == discrepancy_after([], [])
    assert discrepancy_after([1, 2], [1, 2]).last is None
    d = discrepancy_after([1, 2], [1], 0.0)
    assert (d.delta_count, d.last) == (1, 2.0)
    d = discrepancy_after([1, 2, 5], [1, 3, 5], 2.5)
    assert (d.delta_count, d.last) == (1, 3.0)


def test_event_stream_validation_and_csv():
    ev = EventStream(np.array([0.1, 0.5, 0.7]), parent=[ROOT, 0, 1], generation=[0, 1, 2])
    ev.validate()
    text = ev.to_csv(comment="x=1")
    back = EventStream.from_csv(io.StringIO(text))
    assert np.array_equal(back.times, ev.times) and np.array_equal(back.parent, ev.parent)
    with pytest.raises(ValueError):
        EventStream(np.array([0.1, 0.1])).validate()
    with pytest.raises(ValueError):
        EventStream(np.array([0.1, 0.2]), parent=[ROOT, 0], generation=[0, 3]).validate()
    with pytest.raises(ValueError):
        EventStream(np.array([0.1, 0.2]), parent=[1, ROOT]).validate()


def test_csv_floats_round_trip_exactly():
    t = np.cumsum(np.random.default_rng(3).exponential(size=50))
    back = EventStream.from_csv(EventStream(t).to_csv())
    assert np.array_equal(back.times, t)


ops = st.lists(st.tuples(st.sampled_from(["adv", "jump"]), st.floats(1e-4, 3.0)), min_size=1, max_size=60)


@settings(max_examples=200, deadline=None)
@given(ops, st.floats(0.05, 5.0), st.floats(0, 10))
def test_fast_path_matches_direct_sum(seq, rate, s):
    st_ = _run(ImpulseState(Kernel.exponential(rate), Kernel.exponential(1.0)), seq)
    fast, direct = st_.evaluate(s), st_.evaluate_direct(s)
    assert fast == pytest.approx(direct, rel=1e-10, abs=1e-300)


@settings(max_examples=60, deadline=None)
@given(ops)
def test_non_increasing_between_events(seq):
    st_ = _run(ImpulseState(Kernel.powerlaw(2), Kernel.powerlaw(1)), seq)
    v = st_.evaluate(np.linspace(0, 20, 200))
    assert np.all(np.diff(v) <= 1e-15)


def test_fast_path_long_random_sequences():
    rng = np.random.default_rng(11)
    worst = 0.0
    for _ in range(200):
        st_ = ImpulseState(Kernel.exponential(rng.uniform(0.1, 4)))
        for _ in range(500):
            if rng.random() < 0.5:
                st_.jump()
            else:
                st_.advance(rng.exponential(0.5))
        d = st_.evaluate_direct(0.0)
        if d > 0:
            worst = max(worst, abs(st_.evaluate(0.0) - d) / d)
    assert worst <= 1e-10
