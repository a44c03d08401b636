"""Exact Hawkes samplers: planar thinning, cluster construction, parent attribution."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import AttributionError, EnvelopeViolation, ExplosionError, PreconditionError
from .intensity import ENVELOPE_TOL, IntensityFn
from .kernels import Kernel
from .noise import CanonicalNoise
from .state import ROOT, EventStream, ImpulseState

ATTRIBUTION_TOL = 1e-12


@dataclass
class SimConfig:
    """Everything a single trajectory needs apart from the noise.

    ``envelope`` is either ``None`` (automatic), a constant rate bound, or a
    callable ``(state, t) -> (M, t_end)`` giving a bound valid on ``[t, t_end]``.
    """

    kernel: Kernel
    intensity: IntensityFn
    initial: object = None
    horizon: float = 1.0
    max_events: int = 1_000_000
    envelope: float | Callable | None = None
    window: float = 1.0

    def __post_init__(self):
        if self.initial is None:
            self.initial = Kernel.zero()
        if not (self.horizon > 0 and math.isfinite(self.horizon)):
            raise ValueError("horizon must be finite and positive")
        if self.max_events <= 0:
            raise ValueError("max_events must be positive")

    def replace(self, **kw) -> "SimConfig":
        d = dict(self.__dict__)
        d.update(kw)
        return SimConfig(**d)


# ----------------------------------------------------------------- envelopes
class Envelope:
    """Piecewise-constant dominating rate for one thinning leg."""

    def __init__(self, cfg: SimConfig, state: ImpulseState):
        self.cfg = cfg
        self.state = state
        f = cfg.intensity
        self.f = f
        self.user = cfg.envelope
        self.natural = (self.user is None and cfg.kernel.non_increasing
                        and cfg.initial.non_increasing)
        if f.monotone:
            self._bound = f.rate_bound
        else:
            A, B = f.envelope
            pbar = 0.0 if f.modulator_p is None else f.modulator_p.bound
            qbar = 0.0 if f.modulator_q is None else f.modulator_q.bound
            self._bound = lambda z: A + B * (z + pbar) + qbar

    def at(self, t: float) -> tuple[float, float]:
        """``(M, t_end)``: a rate bound valid on ``(t, t_end]``."""
        if self.user is not None:
            if callable(self.user):
                return self.user(self.state, t)
            return float(self.user), math.inf
        if self.natural:
            return self._bound(self.state.evaluate(0.0)), math.inf
        w = self.cfg.window
        st = self.state
        zbar = st.base.sup_on(t - st.origin, t - st.origin + w)
        for tau in st.times:
            zbar += st.kernel.sup_on(t - tau, t + w - tau)
        return self._bound(zbar), t + w


def _check(t, rate, M):
    if rate > M * (1.0 + ENVELOPE_TOL) + ENVELOPE_TOL:
        raise EnvelopeViolation(t, rate, M)


# ------------------------------------------------------------------ thinning
def simulate_thinning(cfg: SimConfig, noise: CanonicalNoise, *, start: float = 0.0,
                      return_state: bool = False):
    """Hawkes events on ``[start, horizon]`` by thinning the canonical planar noise.

    A noise point ``(t, u)`` is an event iff ``u < rate(z_{t-}, t)``.  The
    envelope only decides which points are inspected.  A positive ``start``
    runs a leg whose initial condition is anchored at ``start`` while reading
    the noise in absolute time, so event times stay comparable across legs.
    """
    f = cfg.intensity
    T = cfg.horizon
    st = ImpulseState(cfg.kernel, cfg.initial, now=start, origin=start)
    env = Envelope(cfg, st)
    cur = noise.cursor()
    t = float(start)
    M, t_end = env.at(t)
    while True:
        s, u = cur.next(t, M)
        if s > t_end:
            if t_end >= T:
                break
            t = t_end
            st.advance_to(t)
            M, t_end = env.at(t)
            continue
        if s > T:
            break
        st.advance_to(s)
        z = st.evaluate(0.0)
        r = f.rate(z, s)
        _check(s, r, M)
        t = s
        if u < r:
            if st.n_events >= cfg.max_events:
                raise ExplosionError(
                    f"more than {cfg.max_events} events before t={s!r}; check subcriticality (B < 1)")
            st.jump()
            M, t_end = env.at(t)
        elif env.natural:
            M = env._bound(z)
    events = st.events
    return (events, st) if return_state else events


# ------------------------------------------------------------------- cluster
def _require_linear(cfg: SimConfig):
    f = cfg.intensity
    if f.family != "linear" or f.has_modulators:
        raise PreconditionError("the cluster sampler needs an unmodulated linear lambda(z) = A + B z")
    A, B = f.params["A"], f.params["B"]
    mu = B * cfg.kernel.mass
    if mu >= 1:
        raise PreconditionError(
            f"offspring mean B*|h|_1 = {mu!r} >= 1: supercritical, the cluster construction explodes")
    return A, B, mu


def _inhomogeneous_roots(rng, A, B, g0, T):
    parts = []
    if A > 0:
        parts.append(rng.random(rng.poisson(A * T)) * T)
    if B > 0 and not (isinstance(g0, Kernel) and g0.family == "zero"):
        gbar = g0.sup_on(0.0, T)
        if gbar > 0:
            cand = rng.random(rng.poisson(B * gbar * T)) * T
            keep = rng.random(len(cand)) * gbar < np.asarray(g0.eval(cand))
            parts.append(cand[keep])
    if not parts:
        return np.empty(0)
    return np.sort(np.concatenate(parts))


def simulate_cluster(cfg: SimConfig, noise: CanonicalNoise, *, truncate: bool = True) -> EventStream:
    """Branching construction for linear lambda.

    Roots arrive at rate ``A + B g0(t)``; every event has Poisson(``B |h|_1``)
    children at ages drawn from ``h / |h|_1``.  With ``truncate`` children past
    the horizon are discarded; without it the whole forest is returned.
    """
    A, B, mu = _require_linear(cfg)
    T = cfg.horizon
    rng = noise.rng(0)
    roots = _inhomogeneous_roots(rng, A, B, cfg.initial, T)
    times = [roots]
    parents = [np.full(len(roots), ROOT, dtype=np.int64)]
    gens = [np.zeros(len(roots), dtype=np.int64)]
    cur_t, cur_idx, total, g = roots, np.arange(len(roots)), len(roots), 0
    while len(cur_t):
        counts = rng.poisson(mu, len(cur_t))
        n = int(counts.sum())
        if n == 0:
            break
        ct = np.repeat(cur_t, counts) + cfg.kernel.sample_age(rng, n)
        cp = np.repeat(cur_idx, counts)
        if truncate:
            keep = ct <= T
            ct, cp = ct[keep], cp[keep]
        g += 1
        idx = np.arange(total, total + len(ct))
        total += len(ct)
        if total > cfg.max_events:
            raise ExplosionError(f"cluster forest exceeded {cfg.max_events} events")
        times.append(ct)
        parents.append(cp)
        gens.append(np.full(len(ct), g, dtype=np.int64))
        cur_t, cur_idx = ct, idx
    t = np.concatenate(times)
    p = np.concatenate(parents)
    gen = np.concatenate(gens)
    order = np.argsort(t, kind="stable")
    rank = np.empty_like(order)
    rank[order] = np.arange(len(order))
    p = p[order]
    p = np.where(p >= 0, rank[np.maximum(p, 0)], p)
    return EventStream(t[order], p, gen[order])


def offspring_normalized(cfg: SimConfig) -> bool:
    """False when the kernel mass is not 1, i.e. the offspring mean is ``B |h|_1``."""
    return abs(cfg.kernel.mass - 1.0) < 1e-12


# --------------------------------------------------------------- attribution
def parent_probabilities(f: IntensityFn, g0_at: float, h_vals: np.ndarray):
    """``(p_root, p_prior)`` for one event; ``h_vals`` are ``h(tau_i - tau_j)``."""
    z = g0_at + float(np.sum(h_vals))
    if z == 0.0:
        return 1.0, np.zeros_like(h_vals)
    lz = f.lam(z)
    l0 = f.lam(0.0)
    share = (lz - l0) / lz
    p_root = l0 / lz + share * g0_at / z
    p_prior = share * h_vals / z
    return p_root, p_prior


def attribute_parents(events: EventStream, cfg: SimConfig, rng: np.random.Generator) -> EventStream:
    """Random parent for every event: ROOT or an earlier event."""
    f = cfg.intensity
    if f.has_modulators:
        raise PreconditionError("parent attribution is defined for unmodulated lambda only")
    t = events.times
    n = len(t)
    parent = np.empty(n, dtype=np.int64)
    gen = np.empty(n, dtype=np.int64)
    u = rng.random(n)
    for i in range(n):
        hv = np.asarray(cfg.kernel.eval(t[i] - t[:i]), dtype=float) if i else np.empty(0)
        p_root, p_prior = parent_probabilities(f, float(cfg.initial.eval(t[i])), hv)
        resid = abs(p_root + float(np.sum(p_prior)) - 1.0)
        if resid > ATTRIBUTION_TOL:
            raise AttributionError(f"parent probabilities at t={t[i]!r} sum to 1 +- {resid:.3e}")
        norm = p_root + float(np.sum(p_prior))
        x = u[i] * norm
        if x < p_root or i == 0:
            parent[i], gen[i] = ROOT, 0
        else:
            j = int(np.searchsorted(np.cumsum(p_prior), x - p_root, side="right"))
            j = min(j, i - 1)
            parent[i], gen[i] = j, gen[j] + 1
    return EventStream(t.copy(), parent, gen, events.types.copy())


# --------------------------------------------------------------- replicas
def map_replicas(fn, n: int, threads: int = 1) -> list:
    """``[fn(0), ..., fn(n-1)]``, computed on up to ``threads`` workers."""
    if threads <= 1:
        return [fn(i) for i in range(n)]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, range(n)))


def summarize(streams, horizon: float) -> dict:
    counts = [int(np.count_nonzero(s.times <= horizon)) for s in streams]
    hist: dict[int, int] = {}
    for s in streams:
        g = s.generation[(s.times <= horizon) & (s.generation >= 0)]
        for k, c in zip(*np.unique(g, return_counts=True)):
            hist[int(k)] = hist.get(int(k), 0) + int(c)
    return {
        "replicas": len(counts),
        "counts": counts,
        "mean_count": float(np.mean(counts)) if counts else 0.0,
        "mean_rate": float(np.mean(counts)) / horizon if counts else 0.0,
        "generation_histogram": {str(k): hist[k] for k in sorted(hist)},
    }
