"""Multi-type Hawkes processes.

Type ``i`` events excite the ``d x d`` matrix ``z`` through kernels ``h_ij``:
``z_ij(t) = g_ij(t) + sum_{tau in S_i, tau <= t} h_ij(t - tau)``, and type
``e`` fires at rate ``lambda_e(z)``, dominated by ``c_e + sum_ij k^e_ij z_ij``.
Stability is judged by the spectral radius of ``m[i, e] = sum_j k^e_ij``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.sparse import csgraph

from .errors import EnvelopeViolation, ExplosionError, PreconditionError
from .intensity import ENVELOPE_TOL, IntensityFn
from .kernels import Kernel
from .noise import CanonicalNoise
from .state import EventStream, ImpulseState


@dataclass
class TypedIntensity:
    """Rate of one type.

    Affine by default: ``c + sum k[i, j] z[i, j]``.  ``fn`` may replace the
    rate by any non-decreasing map of the ``z`` matrix provided the affine
    expression is a valid envelope; an :class:`IntensityFn` is applied to
    ``z[0, 0]`` (the embedding of a single-type model).
    """

    c: float
    k: np.ndarray
    fn: object = None

    def __post_init__(self):
        self.c = float(self.c)
        self.k = np.atleast_2d(np.asarray(self.k, dtype=float))
        if self.c < 0 or np.any(self.k < 0):
            raise ValueError("envelope coefficients must be non-negative")

    @classmethod
    def from_single(cls, f: IntensityFn) -> "TypedIntensity":
        if f.has_modulators:
            raise PreconditionError("time modulators are not supported in the multi-type model")
        A, B = f.envelope
        return cls(A, [[B]], f)

    def __call__(self, z: np.ndarray) -> float:
        if self.fn is None:
            return self.c + float(np.sum(self.k * z))
        if isinstance(self.fn, IntensityFn):
            return self.fn.lam(float(z[0, 0]))
        return float(self.fn(z))

    def bound(self, z: np.ndarray) -> float:
        """Rate bound for every ``z' <= z`` (monotone rate)."""
        if isinstance(self.fn, IntensityFn):
            return self.fn.rate_bound(float(z[0, 0]))
        return self(z)

    def envelope(self, z: np.ndarray) -> float:
        return self.c + float(np.sum(self.k * z))


@dataclass
class MultiTypeModel:
    kernels: list
    intensities: list
    initial: list | None = None
    normalized: bool = False

    def __post_init__(self):
        d = len(self.intensities)
        if len(self.kernels) != d or any(len(row) != d for row in self.kernels):
            raise ValueError("kernels must be a d x d matrix")
        if self.initial is None:
            self.initial = [[Kernel.zero() for _ in range(d)] for _ in range(d)]
        if len(self.initial) != d or any(len(row) != d for row in self.initial):
            raise ValueError("initial conditions must be a d x d matrix")
        for lam in self.intensities:
            if lam.k.shape != (d, d):
                raise ValueError("envelope matrices must be d x d")
        if self.normalized:
            for row in self.kernels:
                for k in row:
                    if abs(k.mass - 1.0 / d) > 1e-10:
                        raise ValueError("normalized model needs |h_ij|_1 = 1/d")

    @property
    def d(self) -> int:
        return len(self.intensities)

    @classmethod
    def from_single(cls, kernel: Kernel, f: IntensityFn, initial=None) -> "MultiTypeModel":
        return cls([[kernel]], [TypedIntensity.from_single(f)], [[initial or Kernel.zero()]])

    def certify_envelopes(self, rng=None, n: int = 2000) -> bool:
        """Random-grid check that each custom rate stays below its affine envelope."""
        rng = np.random.default_rng(0) if rng is None else rng
        d = self.d
        for lam in self.intensities:
            if lam.fn is None:
                continue
            zs = np.concatenate([np.zeros((1, d, d)), rng.exponential(1.0, (n, d, d)) * 10 ** rng.uniform(-3, 3, (n, 1, 1))])
            for z in zs:
                if lam(z) > lam.envelope(z) * (1 + 1e-12) + 1e-12:
                    return False
        return True


def _z_matrix(model: MultiTypeModel, events: EventStream, t: float) -> np.ndarray:
    d = model.d
    z = np.empty((d, d))
    for i in range(d):
        ti = events.times[(events.types == i) & (events.times <= t)]
        for j in range(d):
            zij = float(model.initial[i][j].eval(t))
            if len(ti):
                zij += float(np.sum(model.kernels[i][j].eval(t - ti)))
            z[i, j] = zij
    return z


def typed_rate(model: MultiTypeModel, events: EventStream, e: int, t: float) -> float:
    """``lambda_e(z(t))`` with ``z`` assembled from events at times ``<= t``."""
    if not 0 <= e < model.d:
        raise IndexError(f"type {e} out of range for d={model.d}")
    return model.intensities[e](_z_matrix(model, events, t))


# --------------------------------------------------------------- stability
@dataclass
class SpectralReport:
    matrix: np.ndarray
    radius: float
    lower: float
    upper: float
    converged: bool
    verdict: str  # "stable", "unstable" or "bounded-only"
    iterations: int
    branching_matrix: np.ndarray = field(default=None)

    @property
    def stable(self) -> bool:
        return self.verdict == "stable"

    def to_dict(self):
        return {"matrix": self.matrix.tolist(), "radius": self.radius, "lower": self.lower, "upper": self.upper,
                "converged": self.converged, "verdict": self.verdict, "iterations": self.iterations,
                "branching_matrix": None if self.branching_matrix is None else self.branching_matrix.tolist()}


def _block_root(S: np.ndarray, tol: float, max_iter: int, rng) -> tuple[float, float, int]:
    """Collatz-Wielandt bracket of the Perron root of a primitive block."""
    x = np.ones(S.shape[0]) + 0.1 * rng.random(S.shape[0])
    lo, hi, it = 0.0, math.inf, 0
    for it in range(1, max_iter + 1):
        y = S @ x
        q = y / x
        lo, hi = float(q.min()), float(q.max())
        x = y / y.max()
        if hi - lo <= tol * max(1.0, hi):
            break
    return lo, hi, it


def spectral_radius(M, tol: float = 1e-12, max_iter: int = 100_000, seed: int = 0) -> SpectralReport:
    """Perron root of a non-negative matrix by power iteration.

    The matrix is split into strongly connected blocks; on each irreducible
    block ``B + I`` is primitive, so power iteration converges even for cyclic
    blocks and the Collatz-Wielandt quotients bracket the root.  The radius is
    the largest block root.  On non-convergence the bracket is intersected
    with the diagonal and row/column-sum bounds and the verdict is
    "bounded-only" unless the bracket alone decides it.
    """
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1] or np.any(M < 0):
        raise ValueError("need a square non-negative matrix")
    n = M.shape[0]
    lo_sane = float(np.max(np.diag(M))) if n else 0.0
    hi_sane = float(min(M.sum(axis=1).max(), M.sum(axis=0).max())) if n else 0.0
    if hi_sane == 0.0:
        return SpectralReport(M, 0.0, 0.0, 0.0, True, "stable", 0)
    ncomp, labels = csgraph.connected_components(sparse.csr_matrix(M > 0), directed=True, connection="strong")
    rng = np.random.default_rng(seed)
    lo, hi, iters = 0.0, 0.0, 0
    for c in range(ncomp):
        idx = np.nonzero(labels == c)[0]
        block = M[np.ix_(idx, idx)]
        if len(idx) == 1:
            b_lo = b_hi = float(block[0, 0])
        else:
            b_lo, b_hi, it = _block_root(block + np.eye(len(idx)), tol, max_iter, rng)
            b_lo, b_hi = b_lo - 1.0, b_hi - 1.0
            iters += it
        lo, hi = max(lo, b_lo), max(hi, b_hi)
    lo = max(lo, lo_sane)
    hi = min(hi, hi_sane)
    converged = hi - lo <= tol * max(1.0, hi)
    radius = 0.5 * (lo + hi)
    if converged:
        verdict = "stable" if radius < 1 else "unstable"
    elif hi < 1:
        verdict = "stable"
    elif lo >= 1:
        verdict = "unstable"
    else:
        verdict = "bounded-only"
    return SpectralReport(M, radius, lo, hi, converged, verdict, iters)


def stability_matrix(model: MultiTypeModel) -> SpectralReport:
    """``m[i, e] = sum_j k^e_ij`` and its spectral radius.

    Also reports the mean-offspring matrix ``sum_j k^e_ij |h_ij|_1``.
    """
    d = model.d
    m = np.empty((d, d))
    br = np.empty((d, d))
    for e, lam in enumerate(model.intensities):
        m[:, e] = lam.k.sum(axis=1)
        br[:, e] = [sum(lam.k[i, j] * model.kernels[i][j].mass for j in range(d)) for i in range(d)]
    rep = spectral_radius(m)
    rep.branching_matrix = br
    return rep


# --------------------------------------------------------------- simulation
def simulate_multitype(model: MultiTypeModel, horizon: float, noise: CanonicalNoise, *,
                       max_events: int = 1_000_000, allow_unstable: bool = False) -> EventStream:
    """Superposed thinning with one planar noise per type.

    Type 0 reads ``noise`` itself and type ``e`` reads ``noise.substream(e)``,
    so a one-type model consumes exactly the single-type noise.
    """
    d = model.d
    if not allow_unstable and not stability_matrix(model).stable:
        raise PreconditionError("spectral radius of the stability matrix is not < 1")
    for row in model.kernels:
        for k in row:
            if not k.non_increasing:
                raise PreconditionError("multi-type thinning needs non-increasing kernels")
    for row in model.initial:
        for g in row:
            if not g.non_increasing:
                raise PreconditionError("multi-type thinning needs non-increasing initial conditions")
    states = [[ImpulseState(model.kernels[i][j], model.initial[i][j]) for j in range(d)] for i in range(d)]
    cursors = [(noise if e == 0 else noise.substream(e)).cursor() for e in range(d)]
    lams = model.intensities

    def zmat():
        z = np.empty((d, d))
        for i in range(d):
            for j in range(d):
                z[i, j] = states[i][j].evaluate(0.0)
        return z

    times, types = [], []
    t = 0.0
    z = zmat()
    M = [lam.bound(z) for lam in lams]
    while True:
        best_s, best_u, best_e = math.inf, math.inf, -1
        for e in range(d):
            s, u = cursors[e].next(t, M[e])
            if s < best_s:
                best_s, best_u, best_e = s, u, e
        s, u, e = best_s, best_u, best_e
        if s > horizon:
            break
        for row in states:
            for st in row:
                st.advance_to(s)
        z = zmat()
        r = lams[e](z)
        if r > M[e] * (1.0 + ENVELOPE_TOL) + ENVELOPE_TOL:
            raise EnvelopeViolation(s, r, M[e])
        t = s
        if u < r:
            if len(times) >= max_events:
                raise ExplosionError(f"more than {max_events} events before t={s!r}; check the spectral radius")
            for st in states[e]:
                st.jump()
            times.append(s)
            types.append(e)
            z = zmat()
        M = [lam.bound(z) for lam in lams]
    return EventStream(np.array(times, dtype=float), types=np.array(types, dtype=np.int64))
