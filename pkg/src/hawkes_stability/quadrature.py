"""Quadrature helpers for integrals over half-lines.

Backed by :func:`scipy.integrate.quad` on dyadic panels.  Divergence is
detected from the growth ratio of successive panel masses.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate

PANEL_ABS_TOL = 1e-10


@dataclass(frozen=True)
class HalfLineIntegral:
    value: float
    finite: bool
    verdict: str  # "certified" or "numerical"
    remainder: float = 0.0


def quad_panel(f, a, b, epsabs=PANEL_ABS_TOL, points=None):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        if points is not None:
            points = [p for p in points if a < p < b] or None
        val, _ = integrate.quad(f, a, b, epsabs=epsabs, epsrel=1e-12, limit=400, points=points)
    return val


def integrate_to_infinity(f, a=0.0, *, max_doublings=70, rel_tol=1e-13, breakpoints=None):
    """Integrate a non-negative ``f`` over ``[a, inf)``.

    Panels are ``[a, a+1]`` then ``[a+2^k, a+2^(k+1)]``.  For an integrand
    decaying like ``x^-q`` the panel masses shrink by ``2^(1-q)``; a ratio that
    stays >= 1 over the trailing panels is reported as divergence.
    """
    total = quad_panel(f, a, a + 1.0, points=breakpoints)
    panels = []
    lo = 1.0
    for _ in range(max_doublings):
        hi = 2.0 * lo
        p = quad_panel(f, a + lo, a + hi, points=breakpoints)
        panels.append(p)
        total += p
        lo = hi
        if len(panels) >= 4 and all(q <= rel_tol * max(total, 1e-300) for q in panels[-3:]):
            return HalfLineIntegral(total, True, "numerical", panels[-1])
    tail = [q for q in panels[-8:] if q > 0]
    if len(tail) < 2:
        return HalfLineIntegral(total, True, "numerical", 0.0)
    ratios = np.array(tail[1:]) / np.array(tail[:-1])
    r = float(np.median(ratios))
    if r >= 1.0 - 1e-3:
        return HalfLineIntegral(math.inf, False, "numerical", math.inf)
    rem = tail[-1] * r / (1.0 - r)
    return HalfLineIntegral(total + rem, True, "numerical", rem)
