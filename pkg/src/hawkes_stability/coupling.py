"""Canonical coupling of Hawkes processes driven by one planar noise.

Two legs read the same Poisson points and each keeps the points below its own
rate.  Ordered configurations give nested event sets; an additive change of
the initial condition is invisible with probability at least
``exp(-int phi(f))``; and the recurrence scheme alternates entries into a
small-memory class with fresh coupling attempts against a zero-start leg.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import PreconditionError
from .intensity import Z_GRID, IntensityFn, Modulus, check_hyp2, phi_of_tail
from .kernels import Kernel
from .noise import CanonicalNoise
from .quadrature import integrate_to_infinity
from .samplers import SimConfig, map_replicas, simulate_thinning
from .state import EventStream, PreHistory, SumInitial, discrepancy_after

T_CHECK_FRACTION = 0.8


@dataclass
class CouplingRecord:
    stream_a: EventStream
    stream_b: EventStream
    noise_id: dict
    delta_count: int
    last_discrepancy: float | None

    @property
    def coupled(self) -> bool:
        return self.delta_count == 0

    def delta_times(self) -> np.ndarray:
        return np.setxor1d(self.stream_a.times, self.stream_b.times)


def couple(cfg_a: SimConfig, cfg_b: SimConfig, noise: CanonicalNoise, *, start: float = 0.0) -> CouplingRecord:
    """Run both legs on the same noise and record their symmetric difference."""
    if cfg_a.horizon != cfg_b.horizon:
        raise ValueError("coupled legs must share the horizon")
    a = simulate_thinning(cfg_a, noise, start=start)
    b = simulate_thinning(cfg_b, noise, start=start)
    d = discrepancy_after(a, b, 0.0)
    return CouplingRecord(a, b, noise.id(), d.delta_count, d.last)


# ------------------------------------------------------------------ ordering
def _time_grid(*funcs) -> np.ndarray:
    base = np.concatenate([[0.0], np.geomspace(1e-6, 1e4, 2000)])
    extra = []
    for f in funcs:
        for b in f.breakpoints():
            extra += [b, max(b * (1 - 1e-12) - 1e-12, 0.0)]
    return np.unique(np.concatenate([base, np.asarray(extra, dtype=float)]))


def lambda_ordered(fa: IntensityFn, fb: IntensityFn, grid=None) -> tuple[bool, float | None]:
    """``lambda_a(x) <= lambda_b(y)`` whenever ``x <= y``, on a z grid."""
    z = np.unique(np.concatenate([fa.test_grid(), fb.test_grid()])) if grid is None else np.asarray(grid)
    la = np.asarray(fa.lam(z), dtype=float)
    lb = np.asarray(fb.lam(z), dtype=float)
    suffix_min = np.minimum.accumulate(lb[::-1])[::-1]
    bad = np.nonzero(la > suffix_min * (1 + 1e-12) + 1e-15)[0]
    return (len(bad) == 0, None if len(bad) == 0 else float(z[bad[0]]))


@dataclass(frozen=True)
class OrderingReport:
    ok: bool
    failures: dict = field(default_factory=dict)


def check_ordering(cfg_a: SimConfig, cfg_b: SimConfig) -> OrderingReport:
    """Grid check of ``h_a <= h_b``, ``g_a <= g_b`` and the lambda ordering."""
    fails = {}
    t = _time_grid(cfg_a.kernel, cfg_b.kernel)
    bad = np.nonzero(np.asarray(cfg_a.kernel.eval(t)) > np.asarray(cfg_b.kernel.eval(t)) * (1 + 1e-12))[0]
    if len(bad):
        fails["kernel"] = float(t[bad[0]])
    t = _time_grid(cfg_a.initial, cfg_b.initial)
    bad = np.nonzero(np.asarray(cfg_a.initial.eval(t)) > np.asarray(cfg_b.initial.eval(t)) * (1 + 1e-12))[0]
    if len(bad):
        fails["initial"] = float(t[bad[0]])
    ok, z = lambda_ordered(cfg_a.intensity, cfg_b.intensity)
    if not ok:
        fails["lambda"] = z
    if cfg_a.intensity.has_modulators or cfg_b.intensity.has_modulators:
        fails["modulators"] = "ordering with modulators is not checked"
    return OrderingReport(not fails, fails)


@dataclass(frozen=True)
class DominationResult:
    ok: bool
    violation_time: float | None = None
    reason: str = ""

    def __bool__(self):
        return self.ok


def _z_before(times: np.ndarray, kernel: Kernel, initial, at: np.ndarray, chunk: int = 1024) -> np.ndarray:
    """``g0(t) + sum_{tau < t} h(t - tau)`` at each ``t`` in ``at``."""
    at = np.asarray(at, dtype=float)
    out = np.array([float(initial.eval(float(t))) for t in at]) if len(at) else np.empty(0)
    for lo in range(0, len(at), chunk):
        lag = at[lo:lo + chunk, None] - times[None, :]
        pos = lag > 0
        out[lo:lo + chunk] += np.where(pos, kernel.eval(np.where(pos, lag, 1.0)), 0.0).sum(axis=1)
    return out


def verify_domination(rec: CouplingRecord, cfg_a: SimConfig, cfg_b: SimConfig) -> DominationResult:
    """``stream_a`` is a subset of ``stream_b`` and the rates are ordered at every event.

    The ordering hypotheses are checked first; if they fail the pair is
    refused with :class:`PreconditionError`.
    """
    rep = check_ordering(cfg_a, cfg_b)
    if not rep.ok:
        raise PreconditionError(f"configurations are not ordered: {rep.failures}")
    ta, tb = rec.stream_a.times, rec.stream_b.times
    extra = np.setdiff1d(ta, tb)
    if len(extra):
        return DominationResult(False, float(extra[0]), "event of leg a missing from leg b")
    at = np.union1d(ta, tb)
    za = _z_before(ta, cfg_a.kernel, cfg_a.initial, at)
    zb = _z_before(tb, cfg_b.kernel, cfg_b.initial, at)
    la = np.asarray(cfg_a.intensity.lam(za), dtype=float)
    lb = np.asarray(cfg_b.intensity.lam(zb), dtype=float)
    bad = np.nonzero(la > lb * (1 + 1e-12) + 1e-15)[0]
    if len(bad):
        return DominationResult(False, float(at[bad[0]]), "rate of leg a exceeds rate of leg b")
    return DominationResult(True)


# ------------------------------------------------------------------- overlap
def phi_integral(phi: Modulus, f) -> float:
    """``int_0^inf phi(f(t)) dt``."""
    if phi.family == "identity":
        return phi.params["L"] * float(f.tail_integral(0.0))
    res = integrate_to_infinity(lambda t: float(phi(f.eval(float(t)))), 0.0, breakpoints=f.breakpoints())
    return res.value


def jensen_bound(phi: Modulus, f) -> float:
    return math.exp(-phi_integral(phi, f))


def binomial_ci(k: int, n: int, z: float = 1.96) -> tuple[float, float, float]:
    """Point estimate, standard error and Wilson interval half-width."""
    p = k / n
    se = math.sqrt(max(p * (1 - p), 0.0) / n)
    denom = 1 + z * z / n
    centre = (p + z * z / (2 * n)) / denom
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom
    return p, se, (centre - half, centre + half)


@dataclass
class OverlapReport:
    empirical_overlap: float
    jensen_lower_bound: float
    phi_integral: float
    successes: int
    replicas: int
    stderr: float
    ci95: tuple
    burn_in: float

    def to_dict(self):
        return dict(self.__dict__)


def _prehistory(cfg: SimConfig, noise: CanonicalNoise, burn_in: float):
    pre = simulate_thinning(cfg.replace(horizon=burn_in), noise.substream(1))
    return PreHistory(cfg.kernel, pre.times - burn_in)


def overlap_estimate(f, cfg: SimConfig, phi: Modulus, replicas: int, seed: int, *,
                     burn_in: float = 0.0, threads: int = 1, stream=0) -> OverlapReport:
    """Fraction of coupled runs with empty symmetric difference on ``[0, T]``.

    Leg a starts from ``g`` and leg b from ``g + f``.  ``g`` is the configured
    initial condition, or with ``burn_in > 0`` the memory left by a burn-in run
    (a stand-in for a stationary start).
    """
    if not check_hyp2(cfg.intensity, phi, cfg.kernel).modulus_valid:
        raise PreconditionError("phi does not dominate the increments of lambda")
    base_stream = (stream,) if isinstance(stream, int) else tuple(stream)

    def one(i):
        noise = CanonicalNoise(seed, (*base_stream, i))
        g = cfg.initial
        if burn_in > 0:
            g = _prehistory(cfg, noise, burn_in)
        rec = couple(cfg.replace(initial=g), cfg.replace(initial=SumInitial([g, f])), noise)
        return rec.coupled

    ok = map_replicas(one, replicas, threads)
    k = int(sum(ok))
    p, se, ci = binomial_ci(k, replicas)
    I = phi_integral(phi, f)
    return OverlapReport(p, math.exp(-I), I, k, replicas, se, ci, burn_in)


# ---------------------------------------------------------------- recurrence
def compute_K(f: IntensityFn, phi: Modulus, k: Kernel) -> float:
    """``max(A / (1 - B), 1) * int phi(H)`` with the dominating linear stationary rate."""
    A, B = f.envelope
    if B >= 1:
        raise PreconditionError("K needs a subcritical envelope (B < 1)")
    C = check_hyp2(f, phi, k).C
    return max(A / (1.0 - B), 1.0) * C


class JBound:
    """Upper bound ``J(t) <= Phi_g0(t) + sum_tau Phi_h(t - tau)``, ``Phi_x(a) = int_a^inf phi(x)``.

    Subadditivity of ``phi`` makes the sum an upper bound for
    ``int phi(g_t(s)) ds``.  The bound is non-increasing between events.
    """

    def __init__(self, phi: Modulus, kernel: Kernel, initial):
        self.phi_h = phi_of_tail(phi, kernel)
        self.phi_g = phi_of_tail(phi, initial) if not (isinstance(initial, Kernel) and initial.family == "zero") else None

    def __call__(self, t: float, events: np.ndarray) -> float:
        prior = events[events <= t]
        j = 0.0 if self.phi_g is None else float(self.phi_g(t))
        if len(prior):
            j += float(np.sum(self.phi_h(t - prior)))
        return j


@dataclass
class RecurrenceLog:
    sigmas: list
    upsilons: list
    outcome: str  # "coupled-forever" or "exhausted-budget"
    horizon: float
    K: float
    j_is_upper_bound: bool = True

    @property
    def attempts(self) -> int:
        return len(self.sigmas)

    def stopping_times(self) -> list:
        out = []
        for i, s in enumerate(self.sigmas):
            out.append(("sigma", s))
            if i < len(self.upsilons):
                out.append(("upsilon", self.upsilons[i]))
        return out

    def to_dict(self):
        return {"sigmas": self.sigmas, "upsilons": self.upsilons, "outcome": self.outcome,
                "horizon": self.horizon, "K": self.K, "attempts": self.attempts,
                "j_is_upper_bound": self.j_is_upper_bound}


def _entry_time(J, events, lo, hi, K, tol=1e-9):
    """First ``t`` in ``[lo, hi)`` with ``J(t) <= K``; J is non-increasing there."""
    if J(lo, events) <= K:
        return lo
    if J(hi * (1 - 1e-15) if hi > 0 else hi, events) > K:
        return None
    a, b = lo, hi
    while b - a > tol * max(1.0, b):
        m = 0.5 * (a + b)
        if J(m, events) <= K:
            b = m
        else:
            a = m
    return b


def recurrence_run(cfg: SimConfig, phi: Modulus, K: float, noise: CanonicalNoise, *,
                   budget: int = 100, jbound: JBound | None = None) -> RecurrenceLog:
    """Alternating stopping times on one trajectory.

    ``sigma_i``: first time after ``upsilon_{i-1}`` with ``J <= K``; a
    zero-start leg is then coupled to the trajectory from ``sigma_i`` on.
    ``upsilon_i``: first discrepancy of that attempt.  The run counts as
    coupled when an attempt survives ``[T_check, T]``, ``T_check = 0.8 T``.
    """
    A, B = cfg.intensity.envelope
    if B >= 1:
        raise PreconditionError("the recurrence scheme needs B < 1")
    T = cfg.horizon
    main = simulate_thinning(cfg, noise).times
    J = jbound or JBound(phi, cfg.kernel, cfg.initial)
    zero_cfg = cfg.replace(initial=Kernel.zero())
    sigmas, upsilons = [], []
    t = 0.0
    T_check = T_CHECK_FRACTION * T
    while len(sigmas) < budget:
        # scan event intervals for entry into {J <= K}
        sigma = None
        cuts = np.concatenate([[t], main[main > t], [T]])
        for lo, hi in zip(cuts[:-1], cuts[1:]):
            sigma = _entry_time(J, main, lo, hi, K) if hi > lo else (lo if J(lo, main) <= K else None)
            if sigma is not None:
                break
        if sigma is None or sigma >= T_check:
            break
        sigmas.append(float(sigma))
        leg = simulate_thinning(zero_cfg, noise, start=sigma).times
        d = discrepancy_after(main, leg, sigma)
        if d.delta_count == 0:
            return RecurrenceLog(sigmas, upsilons, "coupled-forever", T, K)
        diff = np.setxor1d(main[main > sigma], leg[leg > sigma])
        ups = float(diff[0])
        upsilons.append(ups)
        if ups >= T_check:
            break
        t = ups
    return RecurrenceLog(sigmas, upsilons, "exhausted-budget", T, K)
