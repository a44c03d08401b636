"""Rate maps lambda, their linear envelopes, moduli phi and hypothesis checks.

The rate of the process at time ``t`` is ``lambda(z + p(t)) + q(t)`` with
``z = g_t(0)`` and optional bounded stationary modulators ``p``, ``q``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .errors import DomainError, PreconditionError
from .kernels import Kernel
from .quadrature import integrate_to_infinity

LAMBDA_FAMILIES = ("linear", "sqrtcap", "step", "custom")
PHI_FAMILIES = ("identity", "power", "tabulated")

# falsification surface for the "for all z" hypotheses
Z_GRID = np.concatenate([[0.0], np.geomspace(1e-6, 1e6, 1000)])
ENVELOPE_TOL = 1e-12


# ---------------------------------------------------------------- modulators
@dataclass(frozen=True)
class Modulator:
    """Deterministic bounded signal: a constant or ``offset + amplitude*sin(2 pi t / period)``."""

    kind: str = "constant"
    offset: float = 0.0
    amplitude: float = 0.0
    period: float = 1.0

    def __post_init__(self):
        if self.kind not in ("constant", "sine"):
            raise ValueError(f"unknown modulator kind {self.kind!r}")
        if self.kind == "sine" and not self.period > 0:
            raise ValueError("sine modulator needs period > 0")
        if self.offset - abs(self.amplitude) < 0:
            raise ValueError("modulator must be non-negative")

    @property
    def bound(self) -> float:
        return self.offset + abs(self.amplitude) if self.kind == "sine" else self.offset

    def __call__(self, t):
        if self.kind == "constant":
            return self.offset if np.ndim(t) == 0 else np.full(np.shape(t), self.offset)
        return self.offset + self.amplitude * np.sin(2.0 * np.pi * np.asarray(t) / self.period)

    def to_dict(self):
        if self.kind == "constant":
            return {"kind": "constant", "value": self.offset}
        return {"kind": "sine", "offset": self.offset, "amplitude": self.amplitude, "period": self.period}

    @classmethod
    def from_dict(cls, d):
        if d.get("kind", "constant") == "constant":
            return cls("constant", float(d["value"]))
        return cls("sine", float(d["offset"]), float(d["amplitude"]), float(d["period"]))


# ------------------------------------------------------------------ lambda
@dataclass(frozen=True, eq=False)
class IntensityFn:
    """The rate map lambda with a declared envelope ``lambda(z) <= A + B z``.

    Families and params:

    * ``linear``: ``A``, ``B``
    * ``sqrtcap``: ``min(base + slope*sqrt(z), cap)``
    * ``step``: ``jumps`` (increasing), ``levels`` (one more than jumps);
      right-continuous, ``lambda(z) = levels[k]`` on ``[jumps[k-1], jumps[k])``
    * ``custom``: tabulated ``grid``/``values``, linear in between, flat beyond
    """

    family: str
    params: dict = field(default_factory=dict)
    envelope: tuple | None = None
    modulator_p: Modulator | None = None
    modulator_q: Modulator | None = None

    def __post_init__(self):
        fam = self.family
        if fam not in LAMBDA_FAMILIES:
            raise ValueError(f"unknown lambda family {fam!r}; expected one of {LAMBDA_FAMILIES}")
        p = dict(self.params)
        if fam == "linear":
            p = {"A": float(p["A"]), "B": float(p["B"])}
            if p["A"] < 0 or p["B"] < 0:
                raise ValueError("linear lambda needs A, B >= 0")
            default_env = (p["A"], p["B"])
        elif fam == "sqrtcap":
            p = {"base": float(p["base"]), "slope": float(p["slope"]), "cap": float(p.get("cap", math.inf))}
            if p["base"] < 0 or p["slope"] < 0:
                raise ValueError("sqrtcap needs base, slope >= 0")
            # slope*sqrt(z) <= slope^2/4 + z
            default_env = (p["cap"], 0.0) if math.isfinite(p["cap"]) else (p["base"] + p["slope"] ** 2 / 4.0, 1.0)
        elif fam == "step":
            jumps = np.asarray(p["jumps"], dtype=float)
            levels = np.asarray(p["levels"], dtype=float)
            if len(levels) != len(jumps) + 1 or np.any(np.diff(jumps) <= 0) or np.any(jumps < 0):
                raise ValueError("step lambda needs increasing jumps >= 0 and len(levels) == len(jumps) + 1")
            if np.any(levels < 0) or np.any(np.diff(levels) < 0):
                raise ValueError("step lambda levels must be non-negative and non-decreasing")
            p = {"jumps": jumps.tolist(), "levels": levels.tolist()}
            object.__setattr__(self, "_jumps", jumps)
            object.__setattr__(self, "_levels", levels)
            default_env = (float(levels[-1]), 0.0)
        else:
            grid = np.asarray(p["grid"], dtype=float)
            values = np.asarray(p["values"], dtype=float)
            if grid.shape != values.shape or grid[0] != 0 or np.any(np.diff(grid) <= 0):
                raise ValueError("custom lambda needs a grid starting at 0, strictly increasing")
            if np.any(values < 0):
                raise ValueError("custom lambda values must be non-negative")
            p = {"grid": grid.tolist(), "values": values.tolist()}
            object.__setattr__(self, "_grid", grid)
            object.__setattr__(self, "_values", values)
            default_env = (float(values.max()), 0.0)
        object.__setattr__(self, "params", p)
        env = default_env if self.envelope is None else (float(self.envelope[0]), float(self.envelope[1]))
        object.__setattr__(self, "envelope", env)
        if fam == "linear":
            A, B = p["A"], p["B"]
            object.__setattr__(self, "_lam", lambda z: A + B * z)
        elif fam == "sqrtcap":
            base, slope, cap = p["base"], p["slope"], p["cap"]
            object.__setattr__(self, "_lam", lambda z: np.minimum(base + slope * np.sqrt(z), cap))
        elif fam == "step":
            jumps, levels = self._jumps, self._levels
            object.__setattr__(self, "_lam", lambda z: levels[np.searchsorted(jumps, z, side="right")])
        else:
            g, v = self._grid, self._values
            object.__setattr__(self, "_lam", lambda z: np.interp(z, g, v))

    # ----------------------------------------------------------- constructors
    @classmethod
    def linear(cls, A, B, **kw):
        return cls("linear", {"A": A, "B": B}, **kw)

    @classmethod
    def sqrtcap(cls, base, slope, cap=math.inf, **kw):
        return cls("sqrtcap", {"base": base, "slope": slope, "cap": cap}, **kw)

    @classmethod
    def step(cls, jumps, levels, **kw):
        return cls("step", {"jumps": list(jumps), "levels": list(levels)}, **kw)

    @classmethod
    def custom(cls, grid, values, **kw):
        return cls("custom", {"grid": list(grid), "values": list(values)}, **kw)

    # ------------------------------------------------------------- evaluation
    @property
    def A(self) -> float:
        return self.envelope[0]

    @property
    def B(self) -> float:
        return self.envelope[1]

    @property
    def has_modulators(self) -> bool:
        return self.modulator_p is not None or self.modulator_q is not None

    def lam(self, z):
        """The bare map ``lambda(z)``."""
        if isinstance(z, (int, float)):
            if z < 0:
                raise DomainError(f"lambda evaluated at negative z={z!r}")
            v = self._lam(z)
            return float(v)
        z = np.asarray(z, dtype=float)
        if np.any(z < 0):
            raise DomainError("lambda evaluated at negative z")
        return self._lam(z)

    def __call__(self, z):
        return self.lam(z)

    def lam0(self, z):
        """``lambda(z) - lambda(0)``."""
        return self.lam(z) - self.lam(0.0)

    def rate(self, z, t=0.0):
        """``lambda(z + p(t)) + q(t)``; absent modulators count as zero."""
        if self.modulator_p is None and self.modulator_q is None:
            return self.lam(z)
        if np.any(np.asarray(z) < 0):
            raise DomainError("rate evaluated at negative z")
        zp = z if self.modulator_p is None else z + self.modulator_p(t)
        q = 0.0 if self.modulator_q is None else self.modulator_q(t)
        return self.lam(zp) + q

    def rate_bound(self, z):
        """Upper bound on ``rate(z, t)`` over all ``t`` (monotone lambda)."""
        zp = z if self.modulator_p is None else z + self.modulator_p.bound
        q = 0.0 if self.modulator_q is None else self.modulator_q.bound
        return self.lam(zp) + q

    @property
    def monotone(self) -> bool:
        if self.family == "custom":
            return bool(np.all(np.diff(self._values) >= 0))
        return True

    def jump_points(self):
        if self.family == "step":
            return self._jumps
        if self.family == "custom":
            return self._grid
        return np.empty(0)

    def test_grid(self):
        pts = self.jump_points()
        eps = np.concatenate([pts, np.maximum(pts * (1 - 1e-12) - 1e-12, 0.0)])
        return np.unique(np.concatenate([Z_GRID, eps]))

    def with_params(self, **kw) -> "IntensityFn":
        p = dict(self.params)
        p.update(kw)
        return IntensityFn(self.family, p, None if self.family == "linear" else self.envelope,
                           self.modulator_p, self.modulator_q)

    # ---------------------------------------------------------------- config
    def to_dict(self) -> dict[str, Any]:
        d = {"family": self.family, "params": dict(self.params), "envelope": list(self.envelope)}
        if self.family == "sqrtcap" and not math.isfinite(self.params["cap"]):
            d["params"] = {k: v for k, v in self.params.items() if k != "cap"}
        return d

    @classmethod
    def from_dict(cls, d, modulators=None) -> "IntensityFn":
        unknown = set(d) - {"family", "params", "envelope"}
        if unknown:
            raise ValueError(f"unknown lambda keys: {sorted(unknown)}")
        modulators = modulators or {}
        env = d.get("envelope")
        return cls(
            d["family"], dict(d.get("params", {})), tuple(env) if env is not None else None,
            modulators.get("p"), modulators.get("q"),
        )

    def __eq__(self, other):
        return (isinstance(other, IntensityFn) and self.to_dict() == other.to_dict()
                and self.modulator_p == other.modulator_p and self.modulator_q == other.modulator_q)

    __hash__ = object.__hash__


# ------------------------------------------------------------------ modulus
@dataclass(frozen=True, eq=False)
class Modulus:
    """Concave non-decreasing phi with phi(0) = 0.

    ``identity``: ``L*s``; ``power``: ``c*s**alpha``; ``tabulated``: linear
    interpolation on a grid from 0, continued with the last slope.
    """

    family: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.family not in PHI_FAMILIES:
            raise ValueError(f"unknown phi family {self.family!r}")
        p = dict(self.params)
        if self.family == "identity":
            p = {"L": float(p.get("L", 1.0))}
        elif self.family == "power":
            p = {"alpha": float(p["alpha"]), "c": float(p.get("c", 1.0))}
            if not 0 < p["alpha"] <= 1:
                raise ValueError("power modulus needs alpha in (0, 1]")
        else:
            g = np.asarray(p["grid"], dtype=float)
            v = np.asarray(p["values"], dtype=float)
            if g[0] != 0 or np.any(np.diff(g) <= 0) or g.shape != v.shape:
                raise ValueError("tabulated modulus needs grid from 0, strictly increasing")
            p = {"grid": g.tolist(), "values": v.tolist()}
            object.__setattr__(self, "_g", g)
            object.__setattr__(self, "_v", v)
            object.__setattr__(self, "_last_slope", (v[-1] - v[-2]) / (g[-1] - g[-2]))
        object.__setattr__(self, "params", p)

    @classmethod
    def identity(cls, L=1.0):
        return cls("identity", {"L": L})

    @classmethod
    def power(cls, alpha, c=1.0):
        return cls("power", {"alpha": alpha, "c": c})

    def __call__(self, s):
        scalar = np.ndim(s) == 0
        x = np.asarray(s, dtype=float)
        if self.family == "identity":
            out = self.params["L"] * x
        elif self.family == "power":
            out = self.params["c"] * x ** self.params["alpha"]
        else:
            out = np.where(x <= self._g[-1], np.interp(x, self._g, self._v),
                           self._v[-1] + self._last_slope * (x - self._g[-1]))
        return float(out) if scalar else out

    def validate(self, rng=None, n_random=2000) -> dict:
        """Grid checks: phi(0)=0, monotone, concave, subadditive."""
        rng = np.random.default_rng(0) if rng is None else rng
        x = Z_GRID
        v = self(x)
        zero = abs(self(0.0)) <= 1e-15
        mono = bool(np.all(np.diff(v) >= -1e-12))
        slopes = np.diff(v) / np.diff(x)
        concave = bool(np.all(np.diff(slopes) <= 1e-9 * np.maximum(1.0, np.abs(slopes[1:]))))
        a = np.exp(rng.uniform(np.log(1e-6), np.log(1e6), n_random))
        b = np.exp(rng.uniform(np.log(1e-6), np.log(1e6), n_random))
        sub = bool(np.all(self(a + b) <= (self(a) + self(b)) * (1 + 1e-12) + 1e-15))
        return {"phi0_zero": zero, "non_decreasing": mono, "concave": concave,
                "subadditive": sub, "valid": zero and mono and concave and sub}

    def to_dict(self):
        return {"family": self.family, "params": dict(self.params)}

    @classmethod
    def from_dict(cls, d):
        unknown = set(d) - {"family", "params"}
        if unknown:
            raise ValueError(f"unknown phi keys: {sorted(unknown)}")
        return cls(d["family"], dict(d.get("params", {})))

    def __eq__(self, other):
        return isinstance(other, Modulus) and self.to_dict() == other.to_dict()

    __hash__ = object.__hash__


def phi_of_tail(phi: Modulus, k: Kernel):
    """``x -> int_x^inf phi(h(u)) du`` as a vectorised callable.

    Exact for an identity modulus; otherwise tabulated once by panel
    quadrature on a geometric grid and interpolated in log space.
    """
    if phi.family == "identity":
        L = phi.params["L"]
        return lambda x: L * k.tail_integral(x)
    f = lambda u: float(phi(k.eval(float(u))))
    total = integrate_to_infinity(f, 0.0, breakpoints=k.breakpoints())
    if not total.finite:
        return lambda x: np.full(np.shape(x), math.inf) if np.ndim(x) else math.inf
    from .quadrature import quad_panel

    edges = np.concatenate([[0.0], np.geomspace(1e-6, 1e9, 901)])
    pieces = np.array([quad_panel(f, a, b, points=k.breakpoints()) for a, b in zip(edges[:-1], edges[1:])])
    beyond = max(total.value - pieces.sum(), 0.0)
    tails = np.concatenate([np.cumsum(pieces[::-1])[::-1], [0.0]]) + beyond
    logt = np.log(np.maximum(tails, 1e-300))

    def tail(x):
        xa = np.asarray(x, dtype=float)
        out = np.exp(np.interp(xa, edges, logt))
        out = np.where(xa > edges[-1], beyond * edges[-1] / np.maximum(xa, edges[-1]), out)
        return float(out) if np.ndim(x) == 0 else out

    return tail


# --------------------------------------------------------------- hypotheses
@dataclass(frozen=True)
class Hyp1Report:
    holds: bool
    A: float
    B: float
    subcritical: bool
    min_margin: float
    verdict: str

    def to_dict(self):
        return dict(self.__dict__)


def check_hyp1(f: IntensityFn) -> Hyp1Report:
    """Verify ``lambda(z) <= A + B z`` on the test grid; subcritical iff ``B < 1``."""
    A, B = f.envelope
    z = f.test_grid()
    margin = float(np.min(A + B * z - f.lam(z)))
    holds = margin >= -ENVELOPE_TOL
    certified = f.family == "linear" and (A, B) == (f.params["A"], f.params["B"])
    return Hyp1Report(holds, A, B, B < 1.0, margin, "certified" if certified else "numerical")


def modulus_sup_increment(f: IntensityFn, s):
    """``sup_x (lambda(x+s) - lambda(x))`` over the test grid, for each ``s``."""
    s = np.atleast_1d(np.asarray(s, dtype=float))
    if f.family == "linear":
        return f.params["B"] * s
    x = f.test_grid()
    lx = f.lam(x)
    return np.array([np.max(f.lam(x + si) - lx) for si in s])


@dataclass(frozen=True)
class Hyp2Report:
    modulus_valid: bool
    C: float
    C_finite: bool
    modulus_checks: dict
    verdict: str

    def to_dict(self):
        return dict(self.__dict__)


def _phi_H_integral(phi: Modulus, k: Kernel):
    """``int_0^inf phi(H(s)) ds`` with an analytic verdict where one is known."""
    alpha = {"identity": 1.0, "power": phi.params.get("alpha")}.get(phi.family)
    if alpha is not None and k.family == "powerlaw" and k.mass > 0 and k.params["exponent"] * alpha <= 1.0:
        return math.inf, False, "certified"
    if phi.family == "identity" and k.family in ("exponential", "powerlaw", "stepsum", "tabulated", "zero"):
        # int_0^inf H(s) ds is the first moment
        fm = phi.params["L"] * k.first_moment()
        return fm, math.isfinite(fm), "certified"
    res = integrate_to_infinity(lambda s: float(phi(k.tail_integral(float(s)))), 0.0,
                                breakpoints=k.breakpoints())
    verdict = "certified" if alpha is not None and k.family == "powerlaw" else res.verdict
    return res.value, res.finite, verdict


def check_hyp2(f: IntensityFn, phi: Modulus, k: Kernel) -> Hyp2Report:
    """Modulus validity and ``C = int_0^inf phi(H(s)) ds``."""
    if not f.monotone:
        raise PreconditionError("Hypothesis 2 requires a non-decreasing lambda")
    checks = phi.validate()
    s = Z_GRID[1:]
    inc = modulus_sup_increment(f, s)
    valid = bool(checks["valid"] and np.all(inc <= phi(s) * (1 + 1e-12) + 1e-12))
    C, finite, verdict = _phi_H_integral(phi, k)
    if f.family == "linear" and phi.family == "identity":
        valid = bool(f.params["B"] <= phi.params["L"])
    else:
        verdict = "numerical"
    return Hyp2Report(valid, C, finite, checks, verdict)


@dataclass(frozen=True)
class Hyp4Report:
    B_tilde: float
    subcritical_tilde: bool
    C4_estimate: float
    C4_stabilized: bool
    C4_trace: dict
    g_tilde_integrable: bool
    g_tilde_mass: float
    modulus_valid: bool
    h_tilde: Kernel | None
    verdict: str = "numerical"

    def to_dict(self):
        d = dict(self.__dict__)
        d.pop("h_tilde")
        d["C4_trace"] = {k: list(map(float, v)) for k, v in self.C4_trace.items()}
        return d


def c4_ratio(tail_tilde, B_tilde, t, series_tol=1e-12):
    """``sum_n B~^n n H~(t/2n) / H~(t)`` with the series cut at ``B~^n n < tol``."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    num = np.zeros_like(t)
    n = 1
    while B_tilde > 0 and B_tilde**n * n >= series_tol:
        num += B_tilde**n * n * tail_tilde(t / (2.0 * n))
        n += 1
        if n > 100000:
            break
    den = tail_tilde(t)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        return np.where(den > 0, num / den, math.inf)


def estimate_c4(tail_tilde, B_tilde, t_min=1.0, t_max=1e6, per_decade=100, osc_tol=1e-2):
    """Evaluate the C4 ratio on a geometric grid and judge stabilisation.

    Stabilised means the ratio settles: over the last decade its relative
    spread ``(max - min)/max`` is below ``osc_tol``.  A ratio that keeps
    growing or keeps oscillating is flagged.
    """
    decades = int(round(math.log10(t_max / t_min)))
    t = np.geomspace(t_min, t_max, decades * per_decade + 1)
    r = c4_ratio(tail_tilde, B_tilde, t)
    last = t >= t_max / 10.0
    prev = (t >= t_max / 100.0) & (t <= t_max / 10.0)
    lmax, lmin = float(np.max(r[last])), float(np.min(r[last]))
    pmax = float(np.max(r[prev]))
    spread = (lmax - lmin) / lmax if math.isfinite(lmax) and lmax > 0 else math.inf
    growth = lmax / pmax - 1.0 if pmax > 0 else math.inf
    stabilized = bool(math.isfinite(lmax) and spread <= osc_tol and growth <= osc_tol)
    return lmax, stabilized, {"t": t, "ratio": r, "last_decade_spread": [spread], "decade_growth": [growth]}


def check_hyp4(f: IntensityFn, phi: Modulus, k: Kernel, g0=None, B=None) -> Hyp4Report:
    """Speed-of-convergence hypothesis.

    ``phi`` is read relative to the envelope slope: ``lambda(x+s) - lambda(x)
    <= B phi(s)``.  For linear lambda with slope ``B`` the identity modulus
    is then exact and ``B~ = B ||h||_1``.
    """
    B = f.B if B is None else B
    ftail = phi_of_tail(phi, k)
    mass_phi_h = float(ftail(0.0))
    B_tilde = B * mass_phi_h
    s = Z_GRID[1:]
    checks = phi.validate()
    inc = modulus_sup_increment(f, s)
    mod_valid = bool(checks["valid"] and np.all(inc <= B * phi(s) * (1 + 1e-12) + 1e-12))
    if g0 is None:
        g_mass, g_int = 0.0, True
    else:
        res = integrate_to_infinity(lambda u: float(phi(g0.eval(float(u)))), 0.0,
                                    breakpoints=getattr(g0, "breakpoints", lambda: [])())
        g_mass, g_int = res.value, res.finite
    if not (math.isfinite(B_tilde) and 0 < B_tilde < 1):
        # the Neumann series behind C4 only converges for B~ < 1
        return Hyp4Report(B_tilde, 0 < B_tilde < 1, math.inf, False, {}, g_int, g_mass, mod_valid, None)
    tail_tilde = lambda x: ftail(x) / mass_phi_h  # unit-mass h~ tail
    c4, stab, trace = estimate_c4(tail_tilde, B_tilde)
    grid = np.concatenate([[0.0], np.geomspace(1e-4, 1e4, 2000)])
    h_t = Kernel.tabulated(grid, B * np.asarray(phi(k.eval(grid))) / B_tilde)
    return Hyp4Report(B_tilde, B_tilde < 1.0, c4, stab, trace, g_int, g_mass, mod_valid, h_t)
