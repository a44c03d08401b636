"""Markov state of a Hawkes process: the impulse function g_t and its events.

``g_t(s) = g_0(t + s) + sum_{tau in S, tau <= t} h(t + s - tau)`` and the
intensity argument is ``z_t = g_t(0)``.  Between events the state moves by
translation; an event adds a copy of ``h``.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError
from .kernels import Kernel

ROOT = -1
UNMARKED = -2


# -------------------------------------------------------- initial conditions
class PreHistory:
    """Initial condition generated by points before time 0: ``sum_tau h(t - tau)``."""

    def __init__(self, kernel: Kernel, points):
        pts = np.asarray(points, dtype=float)
        if np.any(pts > 0):
            raise ValueError("pre-history points must be <= 0")
        self.kernel = kernel
        self.points = np.sort(pts)

    def eval(self, t):
        if np.ndim(t) == 0:
            if t < 0:
                raise DomainError(f"initial condition evaluated at negative time {t!r}")
            if len(self.points) == 0:
                return 0.0
            return float(np.sum(self.kernel.eval(t - self.points)))
        x = np.asarray(t, dtype=float)
        if np.any(x < 0):
            raise DomainError("initial condition evaluated at negative time")
        if len(self.points) == 0:
            return np.zeros_like(x)
        return np.sum(self.kernel.eval(x[..., None] - self.points), axis=-1)

    __call__ = eval

    def tail_integral(self, s):
        if np.ndim(s) == 0:
            return float(np.sum(self.kernel.tail_integral(s - self.points))) if len(self.points) else 0.0
        x = np.asarray(s, dtype=float)
        return np.sum(self.kernel.tail_integral(x[..., None] - self.points), axis=-1)

    def sup_on(self, a, b):
        if self.kernel.non_increasing:
            return self.eval(float(a))
        return float(sum(self.kernel.sup_on(a - p, b - p) for p in self.points))

    @property
    def non_increasing(self):
        return self.kernel.non_increasing

    @property
    def mass(self):
        return self.tail_integral(0.0)

    def breakpoints(self):
        return sorted({b - p for p in self.points for b in self.kernel.breakpoints() if b - p > 0})

    def to_dict(self):
        return {"family": "prehistory", "kernel": self.kernel.to_dict(), "points": self.points.tolist()}

    def __eq__(self, other):
        return isinstance(other, PreHistory) and self.to_dict() == other.to_dict()

    __hash__ = object.__hash__


class SumInitial:
    """Pointwise sum of initial conditions."""

    def __init__(self, parts):
        self.parts = list(parts)

    def eval(self, t):
        vals = [p.eval(t) for p in self.parts]
        return sum(vals[1:], vals[0]) if vals else 0.0

    __call__ = eval

    def tail_integral(self, s):
        vals = [p.tail_integral(s) for p in self.parts]
        return sum(vals[1:], vals[0]) if vals else 0.0

    def sup_on(self, a, b):
        return float(sum(p.sup_on(a, b) for p in self.parts))

    @property
    def non_increasing(self):
        return all(p.non_increasing for p in self.parts)

    @property
    def mass(self):
        return float(sum(p.mass for p in self.parts))

    def breakpoints(self):
        return sorted({b for p in self.parts for b in p.breakpoints()})

    def to_dict(self):
        return {"family": "sum", "parts": [p.to_dict() for p in self.parts]}

    def __eq__(self, other):
        return isinstance(other, SumInitial) and self.to_dict() == other.to_dict()

    __hash__ = object.__hash__


def initial_from_dict(d):
    fam = d.get("family")
    if fam == "prehistory":
        return PreHistory(Kernel.from_dict(d["kernel"]), d["points"])
    if fam == "sum":
        return SumInitial([initial_from_dict(p) for p in d["parts"]])
    return Kernel.from_dict(d)


def initial_from_prehistory(kernel: Kernel, points) -> PreHistory:
    return PreHistory(kernel, points)


# ------------------------------------------------------------- event stream
@dataclass
class EventStream:
    """Strictly increasing event times with optional marks.

    ``parent`` holds the index of the parent event, ``ROOT`` or ``UNMARKED``;
    ``generation`` is -1 when unknown.
    """

    times: np.ndarray
    parent: np.ndarray = None
    generation: np.ndarray = None
    types: np.ndarray = None

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        n = len(self.times)
        self.parent = np.full(n, UNMARKED, dtype=np.int64) if self.parent is None else np.asarray(self.parent, dtype=np.int64)
        self.generation = np.full(n, -1, dtype=np.int64) if self.generation is None else np.asarray(self.generation, dtype=np.int64)
        self.types = np.zeros(n, dtype=np.int64) if self.types is None else np.asarray(self.types, dtype=np.int64)

    def __len__(self):
        return len(self.times)

    @property
    def has_parents(self) -> bool:
        return bool(len(self) == 0 or np.all(self.parent != UNMARKED))

    def validate(self):
        t = self.times
        if len(t) > 1 and np.any(np.diff(t) <= 0):
            raise ValueError("event times must be strictly increasing")
        if np.any(t < 0):
            raise ValueError("event times must be non-negative")
        idx = np.arange(len(t))
        marked = self.parent >= 0
        if np.any(self.parent[marked] >= idx[marked]):
            raise ValueError("parent must be a strictly earlier event")
        known = marked & (self.generation >= 0)
        if np.any(self.generation[known] != self.generation[self.parent[known]] + 1):
            raise ValueError("generation(child) must equal generation(parent) + 1")
        roots = self.parent == ROOT
        if np.any((self.generation[roots] != 0) & (self.generation[roots] != -1)):
            raise ValueError("roots must have generation 0")
        return self

    def restrict(self, t_max: float) -> "EventStream":
        """Events with time <= t_max; parent links stay valid since parents are earlier."""
        keep = self.times <= t_max
        return EventStream(self.times[keep], self.parent[keep], self.generation[keep], self.types[keep])

    def count_in(self, a, b) -> int:
        return int(np.count_nonzero((self.times > a) & (self.times <= b)))

    def offspring_counts(self) -> np.ndarray:
        return np.bincount(self.parent[self.parent >= 0], minlength=len(self))

    # -------------------------------------------------------------- CSV
    COLUMNS = ("time", "parent", "generation", "type")

    def csv_rows(self):
        for t, p, g, e in zip(self.times, self.parent, self.generation, self.types):
            ps = "ROOT" if p == ROOT else ("" if p == UNMARKED else str(int(p)))
            gs = "" if g < 0 else str(int(g))
            yield [format_float(t), ps, gs, str(int(e))]

    def to_csv(self, fh=None, comment: str | None = None) -> str | None:
        buf = io.StringIO() if fh is None else fh
        if comment:
            buf.write(f"# {comment}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.COLUMNS)
        w.writerows(self.csv_rows())
        return buf.getvalue() if fh is None else None

    @classmethod
    def from_csv(cls, fh) -> "EventStream":
        if isinstance(fh, str):
            fh = io.StringIO(fh)
        rows = [r for r in csv.reader(line for line in fh if not line.startswith("#"))]
        header, rows = rows[0], rows[1:]
        col = {name: i for i, name in enumerate(header)}
        times = [float(r[col["time"]]) for r in rows]
        parent = [ROOT if r[col["parent"]] == "ROOT" else (UNMARKED if r[col["parent"]] == "" else int(r[col["parent"]])) for r in rows]
        gen = [-1 if r[col["generation"]] == "" else int(r[col["generation"]]) for r in rows]
        types = [int(r[col["type"]]) for r in rows]
        return cls(np.array(times), np.array(parent), np.array(gen), np.array(types))


def format_float(x: float) -> str:
    """17 significant digits: round-trip safe."""
    return format(float(x), ".17g")


# ------------------------------------------------------------ impulse state
class ImpulseState:
    """Single-owner mutable impulse function ``g_t``.

    Exponential kernels use a decaying accumulator so ``evaluate`` is O(1);
    every other kernel sums over all recorded events.
    """

    def __init__(self, kernel: Kernel, base=None, now: float = 0.0, origin: float = 0.0, capacity: int = 64):
        self.kernel = kernel
        self.base = Kernel.zero() if base is None else base
        self.now = float(now)
        self.origin = float(origin)
        self._times = np.empty(max(capacity, 1))
        self._n = 0
        self._marks = []
        self._fast = kernel.family == "exponential"
        self._base_zero = isinstance(self.base, Kernel) and self.base.family == "zero"
        if self._fast:
            self._beta = kernel.params["rate"]
            self._coef = kernel.weight * self._beta
            self._acc = 0.0

    # ---------------------------------------------------------------- views
    @property
    def n_events(self) -> int:
        return self._n

    @property
    def times(self) -> np.ndarray:
        return self._times[: self._n]

    @property
    def events(self) -> EventStream:
        return EventStream(self.times.copy())

    @property
    def z(self) -> float:
        return self.evaluate(0.0)

    def _base_at(self, s):
        if self._base_zero:
            return 0.0 if np.ndim(s) == 0 else np.zeros(np.shape(s))
        return self.base.eval(self.now - self.origin + s)

    # ----------------------------------------------------------- evaluation
    def evaluate(self, s=0.0):
        """``g_now(s)``; events at exactly ``now`` are included."""
        if np.ndim(s) == 0:
            if s < 0:
                raise DomainError(f"impulse function evaluated at negative lag {s!r}")
            base = self._base_at(s)
            if self._n == 0:
                return base
            if self._fast:
                return base + self._coef * self._acc * math.exp(-self._beta * s)
            return base + float(np.sum(self.kernel.eval(self.now + s - self.times)))
        s = np.asarray(s, dtype=float)
        if np.any(s < 0):
            raise DomainError("impulse function evaluated at negative lag")
        return self._base_at(s) + self.star(s)

    def star(self, s=0.0):
        """Event part ``g*_t(s) = sum_tau h(t + s - tau)``."""
        if self._n == 0:
            return 0.0 if np.ndim(s) == 0 else np.zeros(np.shape(s))
        if self._fast:
            return self._coef * self._acc * np.exp(-self._beta * np.asarray(s, dtype=float))
        return self.star_direct(s)

    def star_direct(self, s=0.0):
        if self._n == 0:
            return 0.0 if np.ndim(s) == 0 else np.zeros(np.shape(s))
        s = np.asarray(s, dtype=float)
        out = np.sum(self.kernel.eval(self.now + s[..., None] - self.times), axis=-1)
        return float(out) if out.ndim == 0 else out

    def evaluate_direct(self, s=0.0):
        """Plain summation over all events, bypassing the accumulator."""
        return self._base_at(s) + self.star_direct(s)

    # ------------------------------------------------------------- dynamics
    def advance(self, delta: float) -> "ImpulseState":
        if delta < 0:
            raise DomainError(f"cannot advance by a negative amount {delta!r}")
        if delta == 0:
            return self
        self.now += delta
        if self._fast and self._n:
            self._acc *= math.exp(-self._beta * delta)
        return self

    def advance_to(self, t: float) -> "ImpulseState":
        """Move to absolute time ``t``; ``now`` is set to ``t`` exactly."""
        delta = t - self.now
        if delta < 0:
            raise DomainError(f"cannot move back in time from {self.now!r} to {t!r}")
        if delta > 0 and self._fast and self._n:
            self._acc *= math.exp(-self._beta * delta)
        self.now = float(t)
        return self

    def jump(self, mark=None) -> "ImpulseState":
        if self._n == len(self._times):
            grown = np.empty(2 * len(self._times))
            grown[: self._n] = self._times[: self._n]
            self._times = grown
        if not math.isfinite(self.kernel.h0):
            if self._n and self._times[self._n - 1] == self.now:
                raise DomainError("repeated jump at the same time needs a kernel bounded at 0")
        self._times[self._n] = self.now
        self._n += 1
        self._marks.append(mark)
        if self._fast:
            self._acc += 1.0
        return self

    # ------------------------------------------------------------ snapshots
    def snapshot(self) -> dict:
        return {
            "kernel": self.kernel.to_dict(),
            "base": self.base.to_dict(),
            "events": [format_float(t) for t in self.times],
            "now": format_float(self.now),
            "origin": format_float(self.origin),
        }

    def to_json(self) -> str:
        return json.dumps(self.snapshot(), sort_keys=True)

    @classmethod
    def from_snapshot(cls, d) -> "ImpulseState":
        if isinstance(d, str):
            d = json.loads(d)
        kernel = Kernel.from_dict(d["kernel"])
        st = cls(kernel, initial_from_dict(d["base"]), origin=float(d.get("origin", 0.0)))
        for t in d["events"]:
            st.advance_to(float(t))
            st.jump()
        st.advance_to(float(d["now"]))
        return st


# ------------------------------------------------------------------ metrics
@dataclass(frozen=True)
class MetricResult:
    value: float
    remainder: float


def metric_dX(g, f, n_max: int = 30, points_per_unit: int = 512) -> MetricResult:
    """``sum_{n=1}^{n_max} 2^-n I_n / (1 + I_n)``, ``I_n = int_0^n |g - f|``.

    ``g`` and ``f`` are vectorised callables on ``[0, n_max]``.  The omitted
    tail of the series is at most ``2^-n_max``.
    """
    x = np.linspace(0.0, float(n_max), n_max * points_per_unit + 1)
    d = np.abs(np.asarray(g(x), dtype=float) - np.asarray(f(x), dtype=float))
    cum = np.concatenate([[0.0], np.cumsum(0.5 * (d[1:] + d[:-1]) * np.diff(x))])
    I = cum[points_per_unit::points_per_unit]
    n = np.arange(1, n_max + 1)
    return MetricResult(float(np.sum(2.0**-n * I / (1.0 + I))), 2.0**-n_max)


@dataclass(frozen=True)
class Discrepancy:
    delta_count: int
    last: float | None


def _times_of(x):
    return x.times if isinstance(x, EventStream) else np.asarray(x, dtype=float)


def discrepancy_after(a, b, T: float = 0.0) -> Discrepancy:
    """Symmetric difference of two event sets restricted to times > T."""
    ta, tb = _times_of(a), _times_of(b)
    diff = np.setxor1d(ta[ta > T], tb[tb > T])
    if len(diff) == 0:
        return Discrepancy(0, None)
    return Discrepancy(int(len(diff)), float(diff.max()))
