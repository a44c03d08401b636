"""Neumann-series bound, Volterra MGF, stationary estimators and tails."""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hawkes_stability.analysis import (GridFunction, discretize, dominating_tree_mc, empirical_mgf,
                                       mean_field_check, solve_lambda_theta, solve_renewal, stationary_runs,
                                       tail_estimate, tilde_functions, tv_bound, tv_bound_for)
from hawkes_stability.errors import PreconditionError
from hawkes_stability.intensity import IntensityFn, Modulus
from hawkes_stability.kernels import Kernel
from hawkes_stability.samplers import SimConfig

PHI = Modulus.identity(1.0)
STEP, M = 0.05, 800


def _grids(g, h):
    return discretize(g.tail_integral, STEP, M), discretize(h.tail_integral, STEP, M)


def test_zero_forcing_gives_zero_bound():
    g, h = _grids(Kernel.zero(), Kernel.exponential())
    res = tv_bound(g, h, 0.5)
    assert not res.bound.any() and res.total_mass == 0


def test_no_feedback_is_tail_of_forcing():
    g0 = Kernel.exponential(0.5, 2.0)
    g, h = _grids(g0, Kernel.exponential())
    res = tv_bound(g, h, 0.0, B=0.7)
    t = res.t
    assert np.allclose(res.bound, 0.7 * g0.tail_integral(t), rtol=1e-12, atol=1e-15)


@pytest.mark.parametrize("k", [Kernel.exponential(1.0), Kernel.powerlaw(2)])
@pytest.mark.parametrize("Bt", [0.3, 0.5, 0.8])
def test_mass_identity(k, Bt):
    g, h = _grids(Kernel.exponential(1.0, 1.5), k)
    res = tv_bound(g, h, Bt)
    assert abs(res.total_mass - 1.5 / (1 - Bt)) <= 1e-8
    assert np.all(np.diff(res.bound) <= 1e-15)


def test_refuses_supercritical():
    g, h = _grids(Kernel.exponential(), Kernel.exponential())
    with pytest.raises(PreconditionError):
        tv_bound(g, h, 1.0)


def test_neumann_series_matches_renewal_solve():
    g, h = _grids(Kernel.powerlaw(1.5), Kernel.powerlaw(2))
    res = tv_bound(g, h, 0.6)
    r = solve_renewal(g, h, 0.6)
    assert np.max(np.abs(res.r.values - r)) <= 1e-10 * max(1.0, r.max())


def test_grid_function_tail():
    gf = GridFunction(0.5, [1.0, 2.0, 0.0], tail_mass=0.25)
    assert gf.mass == pytest.approx(1.75)
    assert gf.tail_from(0.25) == pytest.approx(0.25 * 1 + 0.5 * 2 + 0.25)
    with pytest.raises(ValueError):
        gf.tail_from(5.0)
    with pytest.raises(ValueError):
        GridFunction(0.0, [1.0])


@settings(max_examples=20, deadline=None)
@given(st.floats(0.1, 3.0), st.floats(0.0, 2.0), st.floats(0.05, 0.9))
def test_bound_monotone_in_forcing(scale, extra, Bt):
    h = discretize(Kernel.powerlaw(2).tail_integral, 0.1, 300)
    g1 = discretize(Kernel.exponential(1.0, scale).tail_integral, 0.1, 300)
    g2 = discretize(lambda x: Kernel.exponential(1.0, scale).tail_integral(x)
                    + Kernel.powerlaw(1.5, extra).tail_integral(x), 0.1, 300)
    b1, b2 = tv_bound(g1, h, Bt).bound, tv_bound(g2, h, Bt).bound
    assert np.all(b2 >= b1 - 1e-12)


def test_tilde_functions_identity_modulus():
    tf = tilde_functions(IntensityFn.linear(1, 0.5), PHI, Kernel.powerlaw(2), Kernel.exponential(1.0, 0.3))
    assert tf.B_tilde == pytest.approx(0.5) and tf.h_tilde.mass == pytest.approx(1.0)
    assert tf.g_tilde.mass == pytest.approx(0.3)
    tf = tilde_functions(IntensityFn.linear(1, 0.2), Modulus.power(0.5), Kernel.powerlaw(3), Kernel.exponential())
    assert tf.h_tilde.mass == pytest.approx(1.0, rel=1e-3)


def test_forest_empty_for_zero_roots():
    res = dominating_tree_mc(Kernel.zero(), Kernel.exponential(), 0.5, 100, np.random.default_rng(0), [0.0, 1.0])
    assert not res.survival.any() and np.all(np.isnan(res.last))


def test_forest_below_bound():
    f = IntensityFn.linear(1, 0.5)
    g0 = Kernel.exponential(1.0, 0.5)
    tf = tilde_functions(f, PHI, Kernel.powerlaw(2), g0)
    tv = tv_bound_for(f, PHI, Kernel.powerlaw(2), g0, 0.05, 2000)
    t = np.array([0.5, 1.0, 2.0, 5.0, 10.0])
    mc = dominating_tree_mc(tf.g_tilde, tf.h_tilde, tf.B_tilde, 4000, np.random.default_rng(5), t)
    assert np.all(mc.survival <= tv.at(t) / tv.B + 3 * np.maximum(mc.stderr, 1 / 4000))


def test_volterra_trivial_cases():
    k = Kernel.exponential()
    z = solve_lambda_theta(k, 0.5, 0.0, 0.01, 2000)
    assert not z.values.values.any() and z.total == 0.0
    b0 = solve_lambda_theta(k, 0.0, 0.3, 0.01, 2000)
    t = b0.values.grid()
    assert np.array_equal(b0.values.values, 0.3 * k.eval(t))


def test_volterra_decays():
    res = solve_lambda_theta(Kernel.exponential(), 0.5, 0.1, 0.01, 4000)
    tail = res.values.values[-len(res.values.values) // 10:]
    assert not res.diverged and tail.max() < 1e-3 and np.all(res.values.values >= 0)


def test_volterra_divergence_flag():
    res = solve_lambda_theta(Kernel.exponential(), 0.9, 5.0, 0.01, 3000)
    assert res.diverged and res.total == math.inf and res.diverged_at is not None


def test_volterra_step_refinement():
    a = solve_lambda_theta(Kernel.exponential(), 0.5, 0.1, 0.02, 2000).total
    b = solve_lambda_theta(Kernel.exponential(), 0.5, 0.1, 0.01, 4000).total
    assert a == pytest.approx(b, rel=1e-3)


def test_mean_field_poisson_case():
    cfg = SimConfig(Kernel.exponential(), IntensityFn.linear(1.0, 0.0), horizon=1.0)
    runs = stationary_runs(cfg, 20.0, 200.0, 50, seed=3)
    rep = mean_field_check(cfg, runs)
    # B = 0: lambda(z) = A, so E[g(s)] = A H(s) holds up to Monte Carlo error
    assert all(rep.within_ci) and rep.max_rel_err < 0.05
    assert rep.rate == pytest.approx(1.0, abs=4 * rep.rate_se)


def test_tail_estimates_shot_noise():
    cfg = SimConfig(Kernel.exponential(), IntensityFn.linear(1.0, 0.0), horizon=1.0)
    runs = stationary_runs(cfg, 20.0, 500.0, 20, seed=4, sample_step=0.5)
    z = np.concatenate([r.z_samples for r in runs])
    rep = tail_estimate(z, cfg.intensity.lam, cfg.kernel.h0, thetas=[0.1, 0.5])
    assert rep.slope > 0
    assert rep.hist_mass == pytest.approx(1.0, abs=1e-12)
    assert not any(rep.diverged)


def test_empirical_mgf_half_slope_finite():
    cfg = SimConfig(Kernel.exponential(), IntensityFn.linear(1.0, 0.5), horizon=1.0)
    runs = stationary_runs(cfg, 50.0, 300.0, 20, seed=6, sample_step=0.5)
    z = np.concatenate([r.z_samples for r in runs])
    rep = tail_estimate(z, cfg.intensity.lam, cfg.kernel.h0)
    est = empirical_mgf(runs, [rep.slope / 2])[0]
    assert math.isfinite(est.estimate) and est.estimate >= 1.0
