"""Direction sequences on the sphere and a vectorized ray root finder."""

from __future__ import annotations

import math

import numpy as np
from scipy.special import gamma as gamma_fn
from scipy.stats import norm, qmc

GOLDEN = (1.0 + math.sqrt(5.0)) / 2.0


def sphere_area(n: int) -> float:
    """Area of the unit sphere S^{n-1} in R^n."""
    return 2.0 * math.pi ** (n / 2.0) / float(gamma_fn(n / 2.0))


def sphere_directions(count: int, n: int) -> np.ndarray:
    """Deterministic low-discrepancy unit vectors, shape ``(count, n)``.

    Spherical Fibonacci lattice for n = 3, otherwise an unscrambled Halton
    sequence pushed through the Gaussian inverse CDF.
    """
    if count < 1:
        raise ValueError("need at least one direction")
    if n == 3:
        i = np.arange(count, dtype=float)
        z = 1.0 - (2.0 * i + 1.0) / count
        rho = np.sqrt(np.maximum(0.0, 1.0 - z * z))
        phi = 2.0 * math.pi * np.mod(i / GOLDEN, 1.0)
        return np.stack([rho * np.cos(phi), rho * np.sin(phi), z], axis=1)
    if n == 2:
        phi = 2.0 * math.pi * (np.arange(count) + 0.5) / count
        return np.stack([np.cos(phi), np.sin(phi)], axis=1)
    pts = qmc.Halton(d=n, scramble=False).random(count + 1)[1:]
    v = norm.ppf(np.clip(pts, 1e-12, 1.0 - 1e-12))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


class NoCrossing(ValueError):
    """A ray left the search interval without crossing the level."""


def find_crossing(fun, P: int, t_max: float, tol: float, max_iter: int = 200):
    """First root of increasing-through-zero functions along ``P`` rays.

    ``fun(t, idx)`` returns ``(phi, dphi)`` for the rays ``idx`` at
    parameters ``t``; every ``phi(0) < 0`` is assumed. The first sign change
    is bracketed on a doubling grid up to ``t_max`` and then refined with
    Newton steps safeguarded by bisection. Rays without a sign change get
    ``nan``.
    """
    all_idx = np.arange(P)
    lo = np.zeros(P)
    hi = np.full(P, np.nan)
    todo = all_idx
    t_probe = t_max / 64.0
    while todo.size:
        t = np.full(todo.size, min(t_probe, t_max))
        phi, _ = fun(t, todo)
        pos = phi > 0.0
        hi[todo[pos]] = t[pos]
        lo[todo[~pos]] = t[~pos]
        todo = todo[~pos]
        if t_probe >= t_max:
            break
        t_probe *= 2.0
    found = np.isfinite(hi)
    t = np.where(found, hi, np.nan)
    active = all_idx[found]
    for _ in range(max_iter):
        if not active.size:
            break
        phi, dphi = fun(t[active], active)
        done = np.abs(phi) <= tol
        pos = phi > 0.0
        hi[active[pos]] = t[active[pos]]
        lo[active[~pos]] = t[active[~pos]]
        with np.errstate(divide="ignore", invalid="ignore"):
            step = t[active] - phi / dphi
        a_lo, a_hi = lo[active], hi[active]
        bad = ~np.isfinite(step) | (step <= a_lo) | (step >= a_hi)
        step = np.where(bad, 0.5 * (a_lo + a_hi), step)
        tiny = (a_hi - a_lo) <= 4e-16 * np.maximum(1.0, a_hi)
        keep = ~(done | tiny)
        t[active[keep]] = step[keep]
        active = active[keep]
    return t
