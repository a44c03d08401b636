"""Kernel evaluation, tail integrals, moments and the structural checks."""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from hawkes_stability.errors import DomainError
from hawkes_stability.kernels import Kernel

# frozen from scripts/oracles.py (mpmath)
POWERLAW2_H_AT_1 = 0.25
EXP1_H_AT_2 = 0.13533528323661269


def test_powerlaw_values():
    k = Kernel.powerlaw(1)
    assert k.eval(0.0) == 1.0
    assert k.eval(1.0) == pytest.approx(0.25, rel=1e-15)


def test_exponential_at_zero():
    assert Kernel.exponential(1.0).eval(0.0) == 1.0


def test_negative_time_raises():
    with pytest.raises(DomainError):
        Kernel.exponential(1.0).eval(-0.1)


def test_tail_integrals():
    assert Kernel.powerlaw(2).tail_integral(0.0) == pytest.approx(1.0, abs=1e-14)
    assert Kernel.powerlaw(2).tail_integral(1.0) == pytest.approx(POWERLAW2_H_AT_1, rel=1e-12)
    assert Kernel.exponential(1.0).tail_integral(2.0) == pytest.approx(EXP1_H_AT_2, rel=1e-12)


def test_first_moments():
    assert Kernel.exponential(1.0).first_moment() == pytest.approx(1.0, rel=1e-10)
    assert Kernel.powerlaw(2).first_moment() == pytest.approx(1.0, rel=1e-8)
    assert Kernel.powerlaw(0.5).first_moment() == math.inf


def test_tabulated_interpolates_and_vanishes_beyond_grid():
    k = Kernel.tabulated([0, 1, 2], [2.0, 1.0, 0.5])
    assert k.eval(0.5) == pytest.approx(1.5)
    assert k.eval(1.5) == pytest.approx(0.75)
    assert k.eval(2.5) == 0.0
    assert k.mass == pytest.approx(1.5 + 0.75)


def test_tabulated_rejects_negative_nodes():
    with pytest.raises(ValueError):
        Kernel.tabulated([0, 1], [1.0, -0.1])


def test_normalized_flag():
    k = Kernel.tabulated([0, 1, 3], [1.0, 2.0, 0.0], normalized=True)
    assert k.mass == pytest.approx(1.0, abs=1e-12)
    assert integrate.quad(k.eval, 0, 3, points=[1])[0] == pytest.approx(1.0, abs=1e-10)


def test_hypothesis3_reports():
    rep = Kernel.powerlaw(2).check_hypothesis3()
    assert rep.bounded and rep.convex and rep.log_deriv_subexp and rep.first_moment_finite
    assert rep.holds
    # log|h'| = -x for e^{-x}: linear growth is allowed, the literal o(x) test is not met
    rep = Kernel.exponential(1.0).check_hypothesis3()
    assert rep.bounded and rep.convex and rep.log_deriv_linear and rep.first_moment_finite
    assert not rep.log_deriv_subexp
    assert not Kernel.dyadic_counterexample().check_hypothesis3().convex


def test_dyadic_counterexample_shape():
    k = Kernel.dyadic_counterexample(levels=30)
    assert k.eval(0.5) == 0.0
    assert k.eval(1.0) == 0.5
    assert k.eval(3.0) == pytest.approx(2.0**-3)
    # sum 2^i 2^(-2i-1) = sum 2^(-i-1)
    assert k.mass == pytest.approx(1.0 - 2.0**-30, rel=1e-12)
    assert not k.non_increasing


@pytest.mark.parametrize("k", [Kernel.exponential(2.0), Kernel.powerlaw(2), Kernel.powerlaw(3, scale=0.5)])
def test_mass_matches_quadrature(k):
    val, _ = integrate.quad(k.eval, 0, np.inf, limit=500)
    assert k.tail_integral(0.0) == pytest.approx(val, abs=1e-8)


@pytest.mark.parametrize("k", [Kernel.exponential(0.7), Kernel.powerlaw(2.5)])
def test_first_moment_is_integral_of_tail(k):
    val, _ = integrate.quad(lambda s: k.tail_integral(s), 0, np.inf, limit=500)
    assert k.first_moment() == pytest.approx(val, abs=1e-6)


def test_sample_age_matches_tail():
    k = Kernel.powerlaw(2)
    x = k.sample_age(np.random.default_rng(1), 20000)
    for t in (0.5, 1.0, 4.0):
        assert np.mean(x > t) == pytest.approx(k.tail_integral(t), abs=0.015)


def test_round_trip():
    for k in (Kernel.exponential(1.3, 0.5), Kernel.powerlaw(2), Kernel.dyadic_counterexample(5),
              Kernel.tabulated([0, 0.5, 1], [1, 0.2, 0]), Kernel.zero()):
        assert Kernel.from_dict(k.to_dict()) == k
    with pytest.raises(ValueError):
        Kernel.from_dict({"family": "exponential", "params": {"rate": 1}, "colour": "red"})


kernels = st.one_of(
    st.builds(Kernel.exponential, st.floats(0.05, 20), st.floats(0, 5)),
    st.builds(Kernel.powerlaw, st.floats(0.1, 6), st.floats(0, 5)),
    st.lists(st.floats(0, 3), min_size=2, max_size=8).map(
        lambda v: Kernel.tabulated(np.linspace(0, 2, len(v)), v)),
)


@settings(max_examples=60, deadline=None)
@given(kernels)
def test_eval_non_negative_on_dense_grid(k):
    t = np.linspace(0, 50, 10_000)
    assert np.all(k.eval(t) >= 0)


@settings(max_examples=60, deadline=None)
@given(kernels, st.floats(0, 30), st.floats(0, 30))
def test_tail_monotone(k, a, b):
    s1, s2 = sorted((a, b))
    assert k.tail_integral(s2) <= k.tail_integral(s1) + 1e-15
