"""Canonical coupling, domination, overlap and the recurrence scheme."""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hawkes_stability.coupling import (JBound, binomial_ci, check_ordering, compute_K, couple, jensen_bound,
                                       lambda_ordered, overlap_estimate, phi_integral, recurrence_run,
                                       verify_domination)
from hawkes_stability.errors import PreconditionError
from hawkes_stability.intensity import IntensityFn, Modulus
from hawkes_stability.kernels import Kernel
from hawkes_stability.noise import CanonicalNoise
from hawkes_stability.samplers import SimConfig

K1 = Kernel.exponential(1.0)
BASE = SimConfig(K1, IntensityFn.linear(1.0, 0.5), horizon=20.0)
PHI = Modulus.identity(1.0)


def test_identical_configs_never_differ():
    for s in range(20):
        rec = couple(BASE, BASE, CanonicalNoise(s))
        assert rec.coupled and rec.last_discrepancy is None
        assert verify_domination(rec, BASE, BASE)


def test_dominated_pair_is_nested():
    a = SimConfig(Kernel.exponential(1.0, 0.8), IntensityFn.sqrtcap(0.5, 0.5, envelope=(0.5625, 1.0)), horizon=30.0)
    b = SimConfig(K1, IntensityFn.linear(1.0, 0.6), initial=Kernel.powerlaw(2), horizon=30.0)
    assert check_ordering(a, b).ok
    for s in range(200):
        rec = couple(a, b, CanonicalNoise(s))
        assert verify_domination(rec, a, b)
        assert set(rec.stream_a.times) <= set(rec.stream_b.times)
        # the symmetric difference is exactly b minus a
        assert np.array_equal(rec.delta_times(), np.setdiff1d(rec.stream_b.times, rec.stream_a.times))


def test_broken_ordering_refused_up_front():
    a = BASE.replace(kernel=Kernel.exponential(2.0))  # h_a(0) = 2 > h_b(0) = 1
    rec = couple(a, BASE, CanonicalNoise(0))
    assert not check_ordering(a, BASE).ok
    with pytest.raises(PreconditionError):
        verify_domination(rec, a, BASE)


def test_lambda_ordering_check():
    assert lambda_ordered(IntensityFn.linear(0.5, 0.5), IntensityFn.linear(1, 0.5))[0]
    ok, where = lambda_ordered(IntensityFn.linear(0.5, 0.9), IntensityFn.linear(1, 0.5))
    assert not ok and where > 0


def test_common_events_are_bit_identical():
    a, b = BASE, BASE.replace(initial=Kernel.exponential(1.0, 0.5))
    for s in range(20):
        rec = couple(a, b, CanonicalNoise(s))
        common = np.intersect1d(rec.stream_a.times, rec.stream_b.times)
        assert len(common) >= min(len(rec.stream_a), len(rec.stream_b)) - rec.delta_count


def test_jensen_bound_forms():
    assert jensen_bound(PHI, Kernel.zero()) == 1.0
    f = Kernel.exponential(1.0, 0.5)
    assert jensen_bound(PHI, f) == pytest.approx(math.exp(-0.5))
    phi = Modulus.power(0.5)
    assert jensen_bound(phi, Kernel.exponential(1.0, 2.0)) < jensen_bound(phi, f)
    assert phi_integral(phi, f) == pytest.approx(2 * math.sqrt(0.5), rel=1e-8)


def test_overlap_zero_perturbation():
    rep = overlap_estimate(Kernel.zero(), BASE, PHI, 50, seed=1)
    assert rep.empirical_overlap == 1.0 and rep.jensen_lower_bound == 1.0


def test_overlap_above_bound_small():
    f = Kernel.exponential(1.0, 0.5)
    rep = overlap_estimate(f, BASE, PHI, 1000, seed=2)
    sigma = math.sqrt(rep.jensen_lower_bound * (1 - rep.jensen_lower_bound) / rep.replicas)
    assert rep.empirical_overlap >= rep.jensen_lower_bound - 3 * sigma


def test_overlap_with_burn_in_start():
    rep = overlap_estimate(Kernel.exponential(1.0, 0.1), BASE, PHI, 100, seed=3, burn_in=20.0)
    assert rep.burn_in == 20.0 and 0 <= rep.empirical_overlap <= 1


def test_binomial_ci():
    p, se, (lo, hi) = binomial_ci(50, 100)
    assert p == 0.5 and se == pytest.approx(0.05) and lo < 0.5 < hi


def test_K_for_population_model():
    assert compute_K(IntensityFn.linear(1, 0.5), PHI, K1) == pytest.approx(2.0, rel=1e-12)
    with pytest.raises(PreconditionError):
        compute_K(IntensityFn.linear(1, 1.2), PHI, K1)


def test_recurrence_zero_start_enters_immediately():
    log = recurrence_run(BASE, PHI, 2.0, CanonicalNoise(0))
    assert log.sigmas[0] == 0.0
    times = [t for _, t in log.stopping_times()]
    assert times == sorted(times)


def test_recurrence_outcomes():
    cfg = BASE.replace(horizon=60.0, initial=Kernel.exponential(0.2, 10.0))
    jb = JBound(PHI, cfg.kernel, cfg.initial)
    logs = [recurrence_run(cfg, PHI, 2.0, CanonicalNoise(s), jbound=jb) for s in range(100)]
    assert all(l.sigmas[0] > 0 for l in logs)  # J(0) = 10 > K
    assert np.mean([l.outcome == "coupled-forever" for l in logs]) > 0.9
    for l in logs:
        seq = [t for _, t in l.stopping_times()]
        assert all(x <= y for x, y in zip(seq, seq[1:]))


def test_jbound_upper_bounds_exact_J():
    jb = JBound(PHI, K1, Kernel.exponential(1.0, 2.0))
    ev = np.array([0.3, 1.0, 1.1])
    t = 1.5
    # identity phi: exact J is int g_t = 2 e^{-t} + sum e^{-(t - tau)}
    exact = 2 * math.exp(-t) + np.sum(np.exp(-(t - ev)))
    assert jb(t, ev) == pytest.approx(exact, rel=1e-12)


@settings(max_examples=25, deadline=None)
@given(st.floats(0.05, 1.0), st.floats(0.0, 1.0), st.integers(0, 10_000))
def test_domination_property(scale, frac, seed):
    a = SimConfig(Kernel.exponential(1.0, scale), IntensityFn.linear(0.5 + frac * 0.5, 0.4), horizon=15.0)
    b = SimConfig(K1, IntensityFn.linear(1.0, 0.5), initial=Kernel.exponential(1.0, frac), horizon=15.0)
    rec = couple(a, b, CanonicalNoise(seed))
    assert verify_domination(rec, a, b).ok
