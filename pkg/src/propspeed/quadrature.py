"""Adaptive Clenshaw-Curtis quadrature.

Each panel is integrated with nested Clenshaw-Curtis rules of 2**k + 1
points; the difference between consecutive levels is the error estimate
(dyadic refinement).  Panels that do not settle are bisected.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np
from scipy.optimize import brentq

from propspeed.errors import AccuracyError

_MIN_LEVEL = 3
_MAX_LEVEL = 7


@lru_cache(maxsize=None)
def cc_rule(level: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights of the ``2**level + 1`` point rule on ``[-1, 1]``."""
    n = 2**level
    theta = np.pi * np.arange(n + 1) / n
    nodes = np.cos(theta)
    w = np.zeros(n + 1)
    v = np.ones(n - 1)
    if n % 2 == 0:
        w[0] = w[n] = 1.0 / (n * n - 1)
        for k in range(1, n // 2):
            v -= 2.0 * np.cos(2 * k * theta[1:-1]) / (4 * k * k - 1)
        v -= np.cos(n * theta[1:-1]) / (n * n - 1)
    w[1:-1] = 2.0 * v / n
    nodes.setflags(write=False)
    w.setflags(write=False)
    return nodes, w


def _panel(fn, a, b, tol):
    """Return ``(estimate, error)`` for one panel, refining dyadically."""
    half, mid = 0.5 * (b - a), 0.5 * (a + b)
    x, w = cc_rule(_MIN_LEVEL)
    prev = half * float(np.dot(w, fn(mid + half * x)))
    for level in range(_MIN_LEVEL + 1, _MAX_LEVEL + 1):
        x, w = cc_rule(level)
        est = half * float(np.dot(w, fn(mid + half * x)))
        err = abs(est - prev)
        if err <= max(tol(est, b - a), 0.0):
            break
        prev = est
    return est, err


def integrate(fn, a: float, b: float, rtol: float = 1e-10, atol: float = 1e-300,
              max_panels: int = 4096) -> tuple[float, float]:
    """Integrate a vectorised ``fn`` over ``[a, b]``.

    Returns ``(value, error_estimate)``.  Raises :class:`AccuracyError`
    (carrying the best estimate) if ``max_panels`` is exhausted.
    """
    if a == b:
        return 0.0, 0.0
    sign = 1.0
    if b < a:
        a, b, sign = b, a, -1.0
    length = b - a

    def tol(est, width):
        return max(atol * width / length, rtol * abs(est))

    stack = [(a, b)]
    total = 0.0
    total_err = 0.0
    panels = 0
    while stack:
        lo, hi = stack.pop()
        est, err = _panel(fn, lo, hi, tol)
        panels += 1
        tiny = (hi - lo) <= 1e-13 * max(1.0, abs(lo), abs(hi))
        if err <= tol(est, hi - lo) or tiny:
            total += est
            total_err += err
            continue
        if panels >= max_panels:
            rest = sum(_panel(fn, l2, h2, tol)[0] for l2, h2 in stack)
            raise AccuracyError(
                f"quadrature on [{a}, {b}] did not converge within {max_panels} panels",
                estimate=sign * (total + est + rest),
                error=total_err + err,
            )
        m = 0.5 * (lo + hi)
        stack.append((m, hi))
        stack.append((lo, m))
    return sign * total, total_err


def sign_change_points(fn, a: float, b: float, samples: int) -> list[float]:
    """Roots of ``fn`` bracketed by sign changes on a uniform sample grid."""
    x = np.linspace(a, b, samples)
    y = fn(x)
    s = np.sign(y)
    # zeros in the sample (exact or underflowed) do not count as crossings
    nz = np.flatnonzero(s != 0)
    roots = []
    for i0, i1 in zip(nz[:-1], nz[1:]):
        if s[i0] != s[i1]:
            if i1 == i0 + 1:
                roots.append(brentq(lambda t: float(fn(np.array([t]))[0]), x[i0], x[i1],
                                    xtol=1e-15, rtol=1e-15))
            else:
                roots.append(0.5 * (x[i0 + 1] + x[i1 - 1]) if i1 - i0 > 2 else x[i0 + 1])
    return roots


def abs_integral(fn, a: float, b: float, samples: int, rtol: float = 1e-10,
                 atol: float = 1e-300) -> tuple[float, float, list[float]]:
    """``int_a^b |fn|`` with panels split at sign changes.

    Returns ``(value, error_estimate, breakpoints)``; on each sign-definite
    piece ``|int fn| = int |fn|``, so the kink of ``|.|`` never reaches the
    quadrature rule.
    """
    roots = sign_change_points(fn, a, b, samples)
    pts = [a, *roots, b]
    total = 0.0
    err = 0.0
    for lo, hi in zip(pts[:-1], pts[1:]):
        v, e = integrate(fn, lo, hi, rtol=rtol, atol=atol)
        total += abs(v)
        err += e
    return total, err, pts
