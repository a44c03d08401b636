"""Canonical planar Poisson noise.

A unit-rate Poisson process on ``[0, inf) x [0, inf)`` is generated lazily in
horizontal bands ``[j, j+1)``.  Each band has its own generator keyed by
``(seed, stream, j)``, so the point set does not depend on how far up or how
far forward anyone has looked.  Samplers read it through cursors; two cursors
on one noise object see the same points, which is the canonical coupling.
"""

from __future__ import annotations

import math

import numpy as np

BLOCK = 64


class _Band:
    __slots__ = ("rng", "times", "heights", "offset", "last")

    def __init__(self, rng: np.random.Generator, offset: float):
        self.rng = rng
        self.times: list[float] = []
        self.heights: list[float] = []
        self.offset = offset
        self.last = 0.0

    def extend(self):
        gaps = self.rng.exponential(1.0, BLOCK)
        u = self.rng.random(BLOCK)
        t = self.last + np.cumsum(gaps)
        self.last = float(t[-1])
        self.times.extend(t.tolist())
        self.heights.extend((self.offset + u).tolist())


def _stream_key(stream) -> tuple[int, ...]:
    if isinstance(stream, (int, np.integer)):
        return (int(stream),)
    return tuple(int(s) for s in stream)


class CanonicalNoise:
    """Unit-rate planar Poisson points ``(t, u)`` for a given ``(seed, stream)``."""

    def __init__(self, seed: int, stream=0):
        self.seed = int(seed)
        self.stream = _stream_key(stream)
        self._bands: list[_Band] = []

    def band(self, j: int) -> _Band:
        while len(self._bands) <= j:
            k = len(self._bands)
            ss = np.random.SeedSequence(entropy=self.seed, spawn_key=(0, *self.stream, k))
            self._bands.append(_Band(np.random.Generator(np.random.PCG64(ss)), float(k)))
        return self._bands[j]

    def substream(self, *keys) -> "CanonicalNoise":
        return CanonicalNoise(self.seed, (*self.stream, *(_stream_key(k)[0] for k in keys)))

    def rng(self, tag: int = 0) -> np.random.Generator:
        """Auxiliary generator, independent of the planar points."""
        ss = np.random.SeedSequence(entropy=self.seed, spawn_key=(1, *self.stream, int(tag)))
        return np.random.Generator(np.random.PCG64(ss))

    def cursor(self) -> "NoiseCursor":
        return NoiseCursor(self)

    def points(self, t_max: float, u_max: float):
        """All points in ``[0, t_max] x [0, u_max)`` sorted by time (for tests)."""
        out = []
        for j in range(int(math.ceil(u_max))):
            b = self.band(j)
            while b.last <= t_max:
                b.extend()
            out.extend((t, u) for t, u in zip(b.times, b.heights) if t <= t_max and u < u_max)
        out.sort()
        return out

    def id(self) -> dict:
        return {"seed": self.seed, "stream": list(self.stream)}


class NoiseCursor:
    """Forward-only reader of one noise object.

    ``next(after, below)`` returns the first point with ``t > after`` and
    ``u < below``.  Calls must use non-decreasing ``after``; ``below`` may
    change freely between calls.
    """

    def __init__(self, noise: CanonicalNoise):
        self.noise = noise
        self._pos: list[int] = []

    def _first_after(self, j: int, after: float) -> int:
        while len(self._pos) <= j:
            self._pos.append(0)
        b = self.noise.band(j)
        i = self._pos[j]
        times = b.times
        while True:
            if i >= len(times):
                b.extend()
                times = b.times
            if times[i] > after:
                break
            i += 1
        self._pos[j] = i
        return i

    def next(self, after: float, below: float):
        if not below > 0:
            return math.inf, math.inf
        if math.isinf(below):
            raise ValueError("unbounded envelope")
        best_t, best_u = math.inf, math.inf
        full = int(math.floor(below))
        for j in range(full):
            i = self._first_after(j, after)
            b = self.noise.band(j)
            t = b.times[i]
            if t < best_t:
                best_t, best_u = t, b.heights[i]
        if below > full:
            j = full
            i = self._first_after(j, after)
            b = self.noise.band(j)
            while True:
                if i >= len(b.times):
                    b.extend()
                t = b.times[i]
                if t >= best_t:
                    break
                if b.heights[i] < below:
                    best_t, best_u = t, b.heights[i]
                    break
                i += 1
        return best_t, best_u
