"""Rate maps, envelopes, moduli and the hypothesis checkers."""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hawkes_stability.errors import DomainError, PreconditionError
from hawkes_stability.intensity import (IntensityFn, Modulator, Modulus, check_hyp1, check_hyp2, check_hyp4,
                                        modulus_sup_increment)
from hawkes_stability.kernels import Kernel

# scripts/oracles.py: the gap 1.25 + z - (1 + sqrt z) is minimised at z = 0.25 with value 0
SQRTCAP_ARGMIN = 0.25


def test_linear_rates():
    assert IntensityFn.linear(1, 0.5).rate(2.0) == 2.0
    assert IntensityFn.linear(1, 1).rate(0.0) == 1.0


def test_outer_modulator():
    f = IntensityFn.linear(2, 3, modulator_q=Modulator("constant", 1.0))
    assert f.rate(1.0, 7.0) == 6.0


def test_inner_modulator_shifts_argument():
    f = IntensityFn.linear(1, 2, modulator_p=Modulator("sine", 1.0, 0.5, 4.0))
    assert f.rate(0.0, 1.0) == pytest.approx(1 + 2 * 1.5)


def test_negative_z_raises():
    with pytest.raises(DomainError):
        IntensityFn.linear(1, 1).rate(-1.0)


def test_hyp1():
    rep = check_hyp1(IntensityFn.linear(1, 0.5))
    assert rep.holds and rep.B == 0.5 and rep.subcritical
    rep = check_hyp1(IntensityFn.linear(1, 1.5))
    assert rep.holds and not rep.subcritical
    f = IntensityFn.sqrtcap(1.0, 1.0, envelope=(1.25, 1.0))
    rep = check_hyp1(f)
    assert rep.holds
    assert rep.min_margin == pytest.approx(0.0, abs=1e-4)  # grid resolution near z = 0.25
    assert 1.25 + SQRTCAP_ARGMIN - f.lam(SQRTCAP_ARGMIN) == pytest.approx(0.0, abs=1e-15)


def test_hyp1_catches_bad_envelope():
    assert not check_hyp1(IntensityFn.sqrtcap(1.0, 1.0, envelope=(1.0, 1.0))).holds


def test_hyp2_constants():
    phi = Modulus.identity(1.0)
    f = IntensityFn.linear(1, 1)
    assert check_hyp2(f, phi, Kernel.exponential(1.0)).C == pytest.approx(1.0, rel=1e-10)
    assert check_hyp2(f, phi, Kernel.powerlaw(2)).C == pytest.approx(1.0, rel=1e-8)
    rep = check_hyp2(IntensityFn.sqrtcap(0.0, 1.0), Modulus.power(0.5), Kernel.powerlaw(1))
    assert rep.C == math.inf and not rep.C_finite


def test_hyp2_quadrature_path():
    # tabulated phi forces the generic quadrature route
    phi = Modulus("tabulated", {"grid": [0, 1, 2], "values": [0, 1, 1.5]})
    rep = check_hyp2(IntensityFn.linear(0, 0.5), phi, Kernel.exponential(1.0))
    assert rep.modulus_valid and rep.C == pytest.approx(1.0, rel=1e-8)


def test_hyp2_refuses_non_monotone():
    f = IntensityFn.custom([0, 1, 2], [1, 2, 1])
    with pytest.raises(PreconditionError):
        check_hyp2(f, Modulus.identity(), Kernel.exponential())


def test_hyp2_flags_bad_modulus():
    assert not check_hyp2(IntensityFn.linear(1, 2), Modulus.identity(1.0), Kernel.exponential()).modulus_valid


def test_hyp4_examples():
    phi = Modulus.identity(1.0)
    rep = check_hyp4(IntensityFn.linear(1, 0.5), phi, Kernel.exponential(1.0))
    assert rep.B_tilde == pytest.approx(0.5, rel=1e-12)
    rep = check_hyp4(IntensityFn.linear(1, 0.5), phi, Kernel.powerlaw(2))
    assert rep.subcritical_tilde and math.isfinite(rep.C4_estimate) and rep.C4_stabilized
    bad = check_hyp4(IntensityFn.linear(1, 0.5), phi, Kernel.dyadic_counterexample())
    assert not bad.C4_stabilized
    assert not check_hyp4(IntensityFn.linear(1, 1.5), phi, Kernel.exponential()).subcritical_tilde


def test_hyp4_initial_condition_integrability():
    rep = check_hyp4(IntensityFn.linear(1, 0.2), Modulus.power(0.5), Kernel.powerlaw(2), g0=Kernel.powerlaw(1))
    assert not rep.g_tilde_integrable
    rep = check_hyp4(IntensityFn.linear(1, 0.5), Modulus.identity(), Kernel.powerlaw(2), g0=Kernel.exponential(2.0))
    assert rep.g_tilde_integrable and rep.g_tilde_mass == pytest.approx(1.0, rel=1e-9)


def test_step_lambda_is_right_continuous():
    f = IntensityFn.step([1.0, 2.0], [0.5, 1.0, 1.5])
    assert f.lam(0.999) == 0.5 and f.lam(1.0) == 1.0 and f.lam(5.0) == 1.5
    assert f.monotone


def test_round_trip():
    mods = {"q": Modulator("sine", 1.0, 0.5, 3.0)}
    f = IntensityFn.sqrtcap(1, 2, envelope=(2.0, 1.0), modulator_q=mods["q"])
    g = IntensityFn.from_dict(f.to_dict(), mods)
    assert g.lam(3.0) == f.lam(3.0) and g.envelope == f.envelope
    phi = Modulus.power(0.3, 2.0)
    assert Modulus.from_dict(phi.to_dict()) == phi


lambdas = st.one_of(
    st.builds(IntensityFn.linear, st.floats(0, 5), st.floats(0, 2)),
    st.builds(IntensityFn.sqrtcap, st.floats(0, 5), st.floats(0, 3)),
    st.lists(st.floats(0, 2), min_size=1, max_size=5).map(
        lambda inc: IntensityFn.step(np.arange(1, len(inc) + 1, dtype=float), np.cumsum([0.1, *inc]))),
)


@settings(max_examples=50, deadline=None)
@given(lambdas)
def test_monotone_and_enveloped(f):
    z = np.concatenate([[0.0], np.geomspace(1e-6, 1e6, 1000)])
    lz = f.lam(z)
    assert np.all(np.diff(lz) >= 0)
    A, B = f.envelope
    assert np.min(A + B * z - lz) >= -1e-12


@settings(max_examples=50, deadline=None)
@given(st.floats(0.01, 3), st.floats(0, 1))
def test_identity_modulus_exact_for_linear(L, frac):
    B = L * frac
    f = IntensityFn.linear(1.0, B)
    s = np.geomspace(1e-3, 1e3, 50)
    assert np.array_equal(modulus_sup_increment(f, s), B * s)
    assert check_hyp2(f, Modulus.identity(L), Kernel.exponential()).modulus_valid


moduli = st.one_of(st.builds(Modulus.identity, st.floats(0.01, 5)),
                   st.builds(Modulus.power, st.floats(0.05, 1), st.floats(0.01, 5)))


@settings(max_examples=50, deadline=None)
@given(moduli, st.lists(st.floats(1e-4, 1e4), min_size=2, max_size=2), st.floats(1e-3, 1e3))
def test_modulus_properties(phi, ab, c):
    a, b = ab
    assert phi.validate()["valid"]
    assert phi(a + b) <= (phi(a) + phi(b)) * (1 + 1e-12)
    assert phi(c * a) <= max(c, 1.0) * phi(a) * (1 + 1e-12)
