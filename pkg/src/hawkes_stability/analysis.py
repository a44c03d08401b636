"""Quantitative checks: mean-field identity, exponential moments, tails, and
the total-variation bound with its dominating-forest Monte Carlo.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import signal

from .errors import ExplosionError, PreconditionError
from .intensity import IntensityFn, Modulus, check_hyp4, phi_of_tail
from .kernels import Kernel
from .noise import CanonicalNoise
from .samplers import SimConfig, map_replicas, simulate_thinning
from .state import ImpulseState

SERIES_TOL = 1e-12


# ------------------------------------------------------------- grid functions
@dataclass
class GridFunction:
    """Function on ``[0, m*step)`` stored on a uniform grid.

    With ``nodal=False`` (default) ``values[k]`` is the average over cell
    ``[k*step, (k+1)*step)``; with ``nodal=True`` it is the value at
    ``k*step``.  ``tail_mass`` is mass known to sit beyond the grid.
    """

    step: float
    values: np.ndarray
    tail_mass: float = 0.0
    nodal: bool = False

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if not self.step > 0:
            raise ValueError("grid step must be positive")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("grid values must be finite")

    @property
    def m(self) -> int:
        return len(self.values)

    @property
    def end(self) -> float:
        return self.m * self.step

    def grid(self) -> np.ndarray:
        return np.arange(self.m) * self.step

    @property
    def grid_mass(self) -> float:
        v = self.values
        if self.nodal:
            return float(self.step * (v.sum() - 0.5 * (v[0] + v[-1])))
        return float(self.step * v.sum())

    @property
    def mass(self) -> float:
        return self.grid_mass + self.tail_mass

    def tail_from(self, t):
        """``int_t^inf`` for cell-average functions (exact within a cell)."""
        if self.nodal:
            raise ValueError("tail_from needs cell averages")
        d = self.step
        cum = np.concatenate([np.cumsum(self.values[::-1])[::-1], [0.0]]) * d + self.tail_mass
        t = np.asarray(t, dtype=float)
        if np.any(t > self.end * (1 + 1e-12)) or np.any(t < 0):
            raise ValueError(f"t outside the grid [0, {self.end}]")
        k = np.minimum((t / d).astype(int), self.m - 1)
        part = ((k + 1) * d - t) * self.values[k]
        out = cum[k + 1] + part
        return float(out) if out.ndim == 0 else out


def discretize(tail_fn, step: float, m: int) -> GridFunction:
    """Cell averages from a tail-integral function ``x -> int_x^inf f``."""
    edges = np.arange(m + 1) * step
    tails = np.asarray(tail_fn(edges), dtype=float)
    vals = np.maximum(-np.diff(tails), 0.0) / step
    return GridFunction(step, vals, float(max(tails[-1], 0.0)))


def _cell_conv(a: np.ndarray, b: np.ndarray, step: float) -> np.ndarray:
    """Cell averages (length ``2m``) of the convolution of two cell-constant functions."""
    if len(a) * len(b) <= 1 << 16:
        S = np.convolve(a, b)
    else:
        S = signal.fftconvolve(a, b)
    out = np.zeros(len(S) + 1)
    out[:-1] += 0.5 * S
    out[1:] += 0.5 * S
    return step * out


# ------------------------------------------------------------------ tv bound
@dataclass
class TVBoundResult:
    t: np.ndarray
    bound: np.ndarray
    r: GridFunction
    B: float
    B_tilde: float
    terms: int
    total_mass: float
    expected_mass: float
    tail_ratio: dict = field(default_factory=dict)

    def at(self, t):
        return self.B * self.r.tail_from(t)


def tv_bound(g_tilde: GridFunction, h_tilde: GridFunction, B_tilde: float, B: float = 1.0,
             series_tol: float = SERIES_TOL, max_terms: int = 100_000) -> TVBoundResult:
    """``t -> B int_t^inf r``, ``r = sum_n B~^n h~^{*n} * g~``.

    Mass pushed past the grid end by a convolution is kept as ``tail_mass``
    so the total mass of the series is conserved exactly; the bound counts it
    at every ``t`` inside the grid (conservative for heavy tails).
    """
    if not B_tilde < 1:
        raise PreconditionError(f"B~ = {B_tilde!r} >= 1: the Neumann series diverges")
    if g_tilde.step != h_tilde.step or g_tilde.m != h_tilde.m or g_tilde.nodal or h_tilde.nodal:
        raise ValueError("g~ and h~ need the same cell-average grid")
    d, m = g_tilde.step, g_tilde.m
    h_full = h_tilde.mass
    term = g_tilde.values.copy()
    term_tail = g_tilde.tail_mass
    r = term.copy()
    r_tail = term_tail
    n = 0
    acc = g_tilde.mass
    while acc > 0 and n < max_terms:
        conv = _cell_conv(term, h_tilde.values, d)
        in_grid = np.maximum(conv[:m], 0.0)
        lost = float(conv[m:].sum()) * d
        term_mass = float(term.sum()) * d
        new_tail = B_tilde * (term_tail * h_full + term_mass * h_tilde.tail_mass + lost)
        term = B_tilde * in_grid
        term_tail = new_tail
        n += 1
        r += term
        r_tail += term_tail
        tm = float(term.sum()) * d + term_tail
        acc += tm
        if tm < series_tol * acc:
            break
    rg = GridFunction(d, r, r_tail)
    t = rg.grid()
    bound = B * rg.tail_from(t)
    expected = g_tilde.mass / (1.0 - B_tilde * h_full) if g_tilde.mass > 0 else 0.0
    ratio = _tail_ratio(t, bound, g_tilde, h_tilde, B_tilde, B)
    return TVBoundResult(t, bound, rg, B, B_tilde, n, rg.mass, expected, ratio)


def _tail_ratio(t, bound, g, h, B_tilde, B):
    """Largest-decade ratio ``bound(t) / int_{t/2}^inf (phi(g) + phi(h))``."""
    end = g.end
    sel = (t >= end / 20.0) & (t <= end / 2.0) & (t > 0)
    if not np.any(sel):
        return {}
    ts = t[sel]
    tg = g.tail_from(ts / 2.0)
    th = h.tail_from(ts / 2.0) * (B_tilde / B if B > 0 else 0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        comb = np.where(tg + th > 0, bound[sel] / (tg + th), np.nan)
        rg = np.where(tg > 0, bound[sel] / tg, np.nan)
        rh = np.where(th > 0, bound[sel] / th, np.nan)
    f = lambda a: float(np.nanmax(a)) if np.any(np.isfinite(a)) else math.nan
    return {"combined": f(comb), "g_only": f(rg), "h_only": f(rh), "t_range": [float(ts[0]), float(ts[-1])]}


def solve_renewal(g_tilde: GridFunction, h_tilde: GridFunction, B_tilde: float) -> np.ndarray:
    """Cell values of ``r = g~ + B~ (h~ * r)`` by forward substitution (O(m^2))."""
    d, m = g_tilde.step, g_tilde.m
    g, h = g_tilde.values, h_tilde.values
    r = np.zeros(m)
    S_prev = 0.0
    c = B_tilde * d / 2.0
    denom = 1.0 - c * h[0]
    for k in range(m):
        P = float(np.dot(h[1:k + 1], r[k - 1::-1])) if k else 0.0
        r[k] = (g[k] + c * (P + S_prev)) / denom
        S_prev = h[0] * r[k] + P
    return r


@dataclass
class TildeFunctions:
    g_tilde: Kernel
    h_tilde: Kernel
    B_tilde: float
    B: float
    g_tail: object
    h_tail: object


def tilde_functions(f: IntensityFn, phi: Modulus, k: Kernel, g0=None, B: float | None = None) -> TildeFunctions:
    """``g~ = phi(g0)``, ``h~ = B phi(h) / B~`` (unit mass), ``B~ = B int phi(h)``.

    Exact for the identity modulus; tabulated otherwise.
    """
    B = f.B if B is None else B
    g0 = Kernel.zero() if g0 is None else g0
    htail_raw = phi_of_tail(phi, k)
    m_h = float(htail_raw(0.0))
    B_tilde = B * m_h
    h_tail = lambda x: htail_raw(x) / m_h
    if phi.family == "identity":
        h_t = Kernel(k.family, dict(k.params), 1.0, True)
    else:
        h_t = check_hyp4(f, phi, k, B=B).h_tilde
    if isinstance(g0, Kernel) and g0.family == "zero":
        g_t = Kernel.zero()
        g_tail = lambda x: np.zeros(np.shape(x)) if np.ndim(x) else 0.0
    elif phi.family == "identity" and isinstance(g0, Kernel):
        L = phi.params["L"]
        g_t = Kernel(g0.family, dict(g0.params), g0.scale * L, g0.normalized)
        g_tail = g_t.tail_integral
    else:
        grid = np.concatenate([[0.0], np.geomspace(1e-4, 1e4, 2000)])
        g_t = Kernel.tabulated(grid, np.asarray(phi(np.asarray(g0.eval(grid)))))
        g_tail = phi_of_tail(phi, g0)
    return TildeFunctions(g_t, h_t, B_tilde, B, g_tail, h_tail)


def tv_bound_for(f: IntensityFn, phi: Modulus, k: Kernel, g0, step: float, m: int) -> TVBoundResult:
    tf = tilde_functions(f, phi, k, g0)
    return tv_bound(discretize(tf.g_tail, step, m), discretize(tf.h_tail, step, m), tf.B_tilde, tf.B)


# ------------------------------------------------------- dominating forest MC
@dataclass
class ForestResult:
    t: np.ndarray
    survival: np.ndarray
    stderr: np.ndarray
    last: np.ndarray  # NaN where the forest is empty
    points: np.ndarray


def dominating_tree_mc(g_tilde: Kernel, h_tilde: Kernel, B_tilde: float, replicas: int,
                       rng: np.random.Generator, t_grid, *, root_scale: float = 1.0,
                       max_points: int = 50_000_000) -> ForestResult:
    """Empirical survival of the last point ``L_D`` of the dominating forest.

    Roots form a Poisson process with intensity ``root_scale * g~``; each
    point has Poisson(``B~ |h~|``) children at ages drawn from ``h~``.
    """
    if not B_tilde * h_tilde.mass < 1:
        raise PreconditionError("dominating forest is supercritical")
    mu_root = root_scale * g_tilde.mass
    n_roots = rng.poisson(mu_root, replicas) if mu_root > 0 else np.zeros(replicas, dtype=int)
    rep = np.repeat(np.arange(replicas), n_roots)
    times = g_tilde.sample_age(rng, len(rep)) if len(rep) else np.empty(0)
    last = np.full(replicas, -np.inf)
    count = np.zeros(replicas, dtype=np.int64)
    mu = B_tilde * h_tilde.mass
    total = 0
    while len(times):
        np.maximum.at(last, rep, times)
        np.add.at(count, rep, 1)
        total += len(times)
        if total > max_points:
            raise ExplosionError("dominating forest exceeded the point cap")
        kids = rng.poisson(mu, len(times))
        rep = np.repeat(rep, kids)
        times = np.repeat(times, kids) + h_tilde.sample_age(rng, int(kids.sum()))
    t_grid = np.asarray(t_grid, dtype=float)
    surv = (last[None, :] > t_grid[:, None]).mean(axis=1)
    se = np.sqrt(surv * (1 - surv) / replicas)
    return ForestResult(t_grid, surv, se, np.where(np.isfinite(last), last, np.nan), count)


# ------------------------------------------------------------------ Volterra
@dataclass
class LambdaThetaResult:
    values: GridFunction
    total: float
    remainder: float
    diverged: bool
    diverged_at: float | None
    theta: float


def solve_lambda_theta(k: Kernel, B: float, theta: float, step: float, m: int, A: float = 1.0,
                       overflow: float = 50.0, tol: float = 1e-12, max_iter: int = 500) -> LambdaThetaResult:
    """Implicit trapezoid stepping of
    ``L(t) = theta h(t) + B int_0^t (exp(L(t-s)) - 1) h(s) ds`` and
    ``Lambda = A int_0^inf (exp(L(s)) - 1) ds``.
    """
    if not B < 1:
        raise PreconditionError("B must be < 1")
    if theta < 0:
        raise ValueError("theta must be >= 0")
    if not math.isfinite(k.h0):
        raise PreconditionError("kernel must be bounded")
    t = np.arange(m) * step
    h = np.asarray(k.eval(t), dtype=float)
    L = np.zeros(m)
    E = np.zeros(m)  # exp(L) - 1
    a = B * step * 0.5 * h[0]
    diverged_at = None
    for n in range(m):
        if n == 0:
            c = theta * h[0]
        else:
            inner = float(np.dot(E[1:n], h[n - 1:0:-1])) if n > 1 else 0.0
            c = theta * h[n] + B * step * (inner + 0.5 * E[0] * h[n])
        x = c
        for _ in range(max_iter):
            x_new = c + a * math.expm1(x)
            if abs(x_new - x) <= tol * max(1.0, abs(x_new)):
                x = x_new
                break
            x = x_new
            if x > overflow:
                break
        else:
            diverged_at = t[n]
        if x > overflow or not math.isfinite(x) or diverged_at is not None:
            diverged_at = t[n]
            L[n:] = np.nan
            break
        L[n] = x
        E[n] = math.expm1(x)
    if diverged_at is not None:
        good = L[~np.isnan(L)]
        return LambdaThetaResult(GridFunction(step, good, nodal=True), math.inf, math.inf, True,
                                 float(diverged_at), theta)
    total = A * step * (E.sum() - 0.5 * (E[0] + E[-1]))
    # beyond the grid exp(L) - 1 ~ L, which decays like the kernel's tail
    hk = h[-1]
    rem = A * E[-1] * (k.tail_integral(t[-1]) / hk) if hk > 0 else 0.0
    return LambdaThetaResult(GridFunction(step, L, nodal=True), float(total + rem), float(rem), False, None, theta)


# ------------------------------------------------------------ stationary runs
@dataclass
class StationaryRun:
    count: int
    count_first: int
    count_second: int
    window: float
    g_avg: np.ndarray
    z_samples: np.ndarray
    lam_avg: float


def stationary_run(cfg: SimConfig, noise: CanonicalNoise, burn_in: float, horizon: float,
                   s_grid=(0.0, 0.5, 1.0, 2.0, 4.0), sample_step: float = 1.0) -> StationaryRun:
    """One long trajectory summarised over ``[burn_in, burn_in + horizon]``.

    ``g_avg[j]`` is the exact time average of ``g_t(s_j)`` over the window,
    computed from tail integrals of ``h``.
    """
    b, W = float(burn_in), float(horizon)
    ev = simulate_thinning(cfg.replace(horizon=b + W), noise).times
    k = cfg.kernel
    s = np.asarray(s_grid, dtype=float)
    lo = np.maximum(b, ev)[None, :] + s[:, None] - ev[None, :]
    hi = (b + W) + s[:, None] - ev[None, :]
    g_ev = np.sum(k.tail_integral(lo) - k.tail_integral(hi), axis=1) if len(ev) else np.zeros(len(s))
    g_base = np.asarray(cfg.initial.tail_integral(b + s)) - np.asarray(cfg.initial.tail_integral(b + W + s))
    g_avg = (g_ev + g_base) / W
    in_win = ev[ev > b]
    mid = b + W / 2
    sample_t = b + sample_step * np.arange(1, int(W / sample_step) + 1)
    z = _z_at(cfg, ev, sample_t)
    f = cfg.intensity
    if f.family == "linear" and not f.has_modulators:
        # exact time average of A + B z_t; needs s_grid[0] == 0
        z_avg = g_avg[0] if s[0] == 0 else float(np.mean(z))
        lam_avg = f.params["A"] + f.params["B"] * z_avg
    else:
        lam_avg = float(np.mean(f.lam(z)))
    return StationaryRun(len(in_win), int(np.count_nonzero(in_win <= mid)),
                         int(np.count_nonzero(in_win > mid)), W, g_avg, z, float(lam_avg))


def _z_at(cfg: SimConfig, events: np.ndarray, times: np.ndarray) -> np.ndarray:
    st = ImpulseState(cfg.kernel, cfg.initial, capacity=len(events) + 1)
    out = np.empty(len(times))
    i = 0
    for j, t in enumerate(times):
        while i < len(events) and events[i] < t:
            st.advance_to(events[i])
            st.jump()
            i += 1
        st.advance_to(t)
        out[j] = st.evaluate(0.0)
    return out


def stationary_runs(cfg, burn_in, horizon, replicas, seed, *, s_grid=(0.0, 0.5, 1.0, 2.0, 4.0),
                    sample_step=1.0, threads=1, stream=0):
    def one(i):
        return stationary_run(cfg, CanonicalNoise(seed, (stream, i)), burn_in, horizon, s_grid, sample_step)
    return map_replicas(one, replicas, threads)


@dataclass
class MeanFieldReport:
    s: list
    E_g: list
    E_g_se: list
    E_lam_H: list
    rel_err: list
    z_score: list
    within_ci: list
    max_rel_err: float
    rate: float
    rate_se: float
    drift_z: float
    drift_flag: bool
    ci_sigmas: float = 3.0

    def to_dict(self):
        return dict(self.__dict__)


def mean_field_check(cfg: SimConfig, runs, s_grid=(0.0, 0.5, 1.0, 2.0, 4.0), ci_sigmas: float = 3.0) -> MeanFieldReport:
    """Compare ``E[g(s)]`` with ``E[lambda(z)] H(s)`` from stationary runs.

    ``E[lambda(z)]`` is the time average of ``lambda(z_t)``, not the event
    count, so the two sides only agree in expectation.  Differences are formed
    per replica and their standard error gives the Monte Carlo interval.
    ``rate`` (events per unit time) is reported separately.
    """
    s = np.asarray(s_grid, dtype=float)
    G = np.array([r.g_avg for r in runs])
    rates = np.array([r.count / r.window for r in runs])
    H = np.asarray(cfg.kernel.tail_integral(s))
    R = len(runs)
    Eg = G.mean(axis=0)
    Eg_se = G.std(axis=0, ddof=1) / math.sqrt(R)
    lam = np.array([r.lam_avg for r in runs])
    rhs = lam.mean() * H
    diff = G - lam[:, None] * H[None, :]
    d_mean = diff.mean(axis=0)
    d_se = diff.std(axis=0, ddof=1) / math.sqrt(R)
    with np.errstate(divide="ignore", invalid="ignore"):
        rel = np.abs(d_mean) / rhs
        zs = np.where(d_se > 0, np.abs(d_mean) / d_se, np.where(d_mean == 0, 0.0, np.inf))
    half = np.array([(r.count_first - r.count_second) / (r.window / 2) for r in runs])
    drift_z = float(abs(half.mean()) / (half.std(ddof=1) / math.sqrt(R))) if R > 1 and half.std() > 0 else 0.0
    return MeanFieldReport(s.tolist(), Eg.tolist(), Eg_se.tolist(), rhs.tolist(), rel.tolist(), zs.tolist(),
                           (zs <= ci_sigmas).tolist(), float(np.max(rel)), float(rates.mean()),
                           float(rates.std(ddof=1) / math.sqrt(R)) if R > 1 else 0.0,
                           drift_z, drift_z > 3.0, ci_sigmas)


@dataclass
class MGFEstimate:
    theta: float
    estimate: float
    stderr: float
    ci95: tuple


def empirical_mgf(runs, thetas) -> list:
    """``E[exp(theta z)]`` from per-replica means of the sampled ``z``."""
    out = []
    for th in thetas:
        per = np.array([np.mean(np.exp(th * r.z_samples)) for r in runs])
        est = float(per.mean())
        se = float(per.std(ddof=1) / math.sqrt(len(per))) if len(per) > 1 else math.inf
        out.append(MGFEstimate(float(th), est, se, (est - 1.96 * se, est + 1.96 * se)))
    return out


# --------------------------------------------------------------------- tails
@dataclass
class TailReport:
    theta: list
    Lambda_hat: list
    diverged: list
    slope: float
    threshold: float
    n_beyond: int
    low_power: bool
    hist_edges: np.ndarray
    hist_density: np.ndarray
    hist_mass: float
    c_prime: float
    c_prime_bins: int

    def to_dict(self):
        d = dict(self.__dict__)
        d["hist_edges"] = self.hist_edges.tolist()
        d["hist_density"] = self.hist_density.tolist()
        return d


def tail_estimate(z, lam, h0: float, thetas=(0.05, 0.1, 0.2), upper_quantile: float = 0.9,
                  min_tail: int = 100, min_bin_count: int = 10) -> TailReport:
    """Exponential tail slope, histogram density and the local density constant.

    The slope is fitted to ``log P[z >= x]`` over ``x`` above the
    ``upper_quantile``.  ``c_prime`` is the smallest ``c`` with
    ``psi(x) <= c lambda(x) P[z >= x + h(0)]`` on bins where the right-hand
    probability rests on at least ``min_bin_count`` samples.
    """
    z = np.sort(np.asarray(z, dtype=float))
    n = len(z)
    lam_hat, div = [], []
    for th in thetas:
        with np.errstate(over="ignore"):
            v = float(np.log(np.mean(np.exp(th * z))))
        lam_hat.append(v)
        div.append(not math.isfinite(v))
    thr = float(np.quantile(z, upper_quantile))
    beyond = z[z >= thr]
    nb = len(beyond)
    slope = math.nan
    if nb >= 3:
        xs = beyond[: max(nb - 10, 2)]
        surv = 1.0 - np.searchsorted(z, xs, side="left") / n
        ok = surv > 0
        if np.count_nonzero(ok) >= 2 and np.ptp(xs[ok]) > 0:
            slope = float(-np.polyfit(xs[ok], np.log(surv[ok]), 1)[0])
    iqr = float(np.subtract(*np.quantile(z, [0.75, 0.25])))
    width = 2 * iqr / n ** (1 / 3) if iqr > 0 else (np.ptp(z) or 1.0) / 10
    nbins = max(int(math.ceil(np.ptp(z) / width)), 1)
    dens, edges = np.histogram(z, bins=nbins, density=True)
    mass = float(np.sum(dens * np.diff(edges)))
    centres = 0.5 * (edges[:-1] + edges[1:])
    cnt_right = n - np.searchsorted(z, centres + h0, side="left")
    rhs = np.asarray(lam(centres), dtype=float) * cnt_right / n
    use = (cnt_right >= min_bin_count) & (dens > 0)
    c = float(np.max(dens[use] / rhs[use])) if np.any(use) else math.nan
    return TailReport(list(map(float, thetas)), lam_hat, div, slope, thr, nb, nb < min_tail,
                      edges, dens, mass, c, int(np.count_nonzero(use)))
