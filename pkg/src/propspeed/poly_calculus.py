"""Chebyshev/Jackson functional calculus on a box and kernel decay bounds.

The operator is scaled to ``H_s = (2H - a - b) / (b - a)`` so that an
enclosure ``[a, b]`` of the spectrum maps onto ``[-1, 1]``.  Then

    <phi1, f(H) phi2>  ~  sum_n c_n g_n mu_n,   mu_n = <phi1, T_n(H_s) phi2>,

with Chebyshev coefficients ``c_n`` of ``s -> f((a+b)/2 + (b-a)/2 s)`` and
Jackson damping weights ``g_n``.  Because ``T_n`` has degree ``n``,
``mu_n = 0`` for ``n < |x - y|_1`` when ``phi1 = delta_x, phi2 = delta_y``;
this is what makes kernel entries decay.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np
from numpy.polynomial import chebyshev as C

from propspeed.errors import DegenerateFitError, EnclosureError
from propspeed.lattice import (
    LatticeBox,
    Potential,
    SiteVector,
    SpectralInterval,
    _apply_float,
    spectral_interval,
)
from propspeed.smoothfn import l1_norm

#: kernel magnitudes at or below this are treated as zero in decay fits
ZERO_THRESHOLD = 1e-13
_ENCLOSURE_SLACK = 1e-8
_SUP_GRID = 10_001


@dataclass(frozen=True, eq=False)
class ScaledOperator:
    """``H_s = (2H - a - b)/(b - a)`` for the box operator ``H``."""

    box: LatticeBox
    v: Potential
    interval: SpectralInterval

    @classmethod
    def gershgorin(cls, box: LatticeBox, v: Potential) -> "ScaledOperator":
        return cls(box, v.to_float(), spectral_interval(box, v))

    def __post_init__(self):
        if self.v.exact:
            object.__setattr__(self, "v", self.v.to_float())

    def to_unit(self, lam):
        a, b = self.interval.a, self.interval.b
        return (2.0 * np.asarray(lam, dtype=float) - a - b) / (b - a)

    def from_unit(self, s):
        a, b = self.interval.a, self.interval.b
        return 0.5 * (a + b) + 0.5 * (b - a) * np.asarray(s, dtype=float)

    def apply(self, x: np.ndarray) -> np.ndarray:
        a, b = self.interval.a, self.interval.b
        hx = _apply_float(self.box, self.v.values, x)
        return (2.0 * hx - (a + b) * x) / (b - a)

    def unit_function(self, f: Callable) -> Callable:
        """``s -> f(from_unit(s))``."""
        return lambda s: f(self.from_unit(s))


@dataclass(frozen=True)
class ChebyshevMoments:
    """``values[n] = <phi1, T_n(H_s) phi2>``."""

    values: np.ndarray
    norm_product: float

    def __len__(self):
        return len(self.values)


def chebyshev_moments(scaled: ScaledOperator, phi1: SiteVector, phi2: SiteVector,
                      N: int) -> ChebyshevMoments:
    """Moments ``mu_0..mu_N`` by the three-term recurrence (two work vectors).

    Raises :class:`EnclosureError` when some ``|mu_n|`` exceeds
    ``||phi1|| ||phi2||`` (``||T_n(H_s)|| <= 1`` fails off the enclosure).
    """
    if N < 0:
        raise ValueError("N must be >= 0")
    a = phi1.to_float().values
    t_prev = phi2.to_float().values
    bound = math.sqrt(float(np.dot(a, a)) * float(np.dot(t_prev, t_prev)))
    mu = np.empty(N + 1)
    mu[0] = np.dot(a, t_prev)
    if N >= 1:
        t = scaled.apply(t_prev)
        mu[1] = np.dot(a, t)
        for n in range(2, N + 1):
            t_prev, t = t, 2.0 * scaled.apply(t) - t_prev
            mu[n] = np.dot(a, t)
    over = np.flatnonzero(np.abs(mu) > bound * (1 + _ENCLOSURE_SLACK))
    if len(over):
        n = int(over[0])
        raise EnclosureError(
            f"|mu_{n}| = {abs(mu[n]):.6g} exceeds ||phi1|| ||phi2|| = {bound:.6g}; "
            f"[{scaled.interval.a}, {scaled.interval.b}] does not enclose the spectrum"
        )
    mu.setflags(write=False)
    return ChebyshevMoments(mu, bound)


def jackson_weights(N: int) -> np.ndarray:
    """Jackson damping factors ``g_0..g_N`` (``g_0 = 1``)."""
    M = N + 2
    n = np.arange(N + 1)
    return ((M - n) * np.cos(np.pi * n / M) + np.sin(np.pi * n / M) / np.tan(np.pi / M)) / M


@dataclass(frozen=True)
class ChebyshevExpansion:
    """``p(s) = sum_n coefficients[n] * weights[n] * T_n(s)`` on ``[-1, 1]``.

    ``sup_error`` is ``max |f - p|`` over a uniform grid of 10^4 + 1 points.
    ``tail_warning`` flags coefficients that are not decaying at the top of
    the expansion (quadrature not resolved or ``N`` too small).
    """

    degree: int
    coefficients: np.ndarray
    weights: np.ndarray
    target: str
    sup_error: float
    tail_warning: bool

    @property
    def damped(self) -> np.ndarray:
        return self.coefficients * self.weights

    def __call__(self, s):
        return C.chebval(np.asarray(s, dtype=float), self.damped)


def chebyshev_coefficients(g: Callable, N: int) -> np.ndarray:
    """Chebyshev coefficients of ``g`` on ``[-1, 1]`` by Chebyshev-Gauss quadrature.

    Uses ``max(2N + 2, 64)`` nodes.
    """
    M = max(2 * N + 2, 64)
    theta = np.pi * (np.arange(M) + 0.5) / M
    vals = np.asarray(g(np.cos(theta)), dtype=float)
    n = np.arange(N + 1)
    c = (2.0 / M) * np.cos(np.outer(n, theta)) @ vals
    c[0] *= 0.5
    return c


def jackson_coefficients(f: Callable, N: int, damping: bool = True,
                         target: str | None = None) -> ChebyshevExpansion:
    """Degree-``N`` expansion of ``f`` on ``[-1, 1]``.

    ``damping=False`` gives the plain Chebyshev interpolant (weights 1),
    which reproduces polynomials of degree ``<= N`` exactly.
    """
    if N < 0:
        raise ValueError("N must be >= 0")
    c = chebyshev_coefficients(f, N)
    w = jackson_weights(N) if damping else np.ones(N + 1)
    grid = np.linspace(-1.0, 1.0, _SUP_GRID)
    err = float(np.max(np.abs(np.asarray(f(grid), dtype=float) - C.chebval(grid, c * w))))
    scale = float(np.max(np.abs(c))) if len(c) else 0.0
    k = max(2, (N + 1) // 10)
    tail = float(np.max(np.abs(c[-k:]))) if N >= 2 else 0.0
    warn = bool(scale > 0 and tail > 1e-6 * scale)
    name = target or getattr(f, "describe", lambda: getattr(f, "__name__", "f"))()
    c.setflags(write=False)
    w.setflags(write=False)
    return ChebyshevExpansion(N, c, w, name, err, warn)


def kpm_form(scaled: ScaledOperator, f: Callable, phi1: SiteVector, phi2: SiteVector, N: int,
             damping: bool = True) -> float:
    """``<phi1, p_N(H_s) phi2>`` with ``p_N`` the expansion of ``f`` in the scaled variable."""
    exp = jackson_coefficients(scaled.unit_function(f), N, damping=damping)
    mu = chebyshev_moments(scaled, phi1, phi2, N)
    return float(np.dot(exp.damped, mu.values))


def kernel_entry_kpm(scaled: ScaledOperator, f: Callable, x: Sequence[int], y: Sequence[int],
                     N: int, damping: bool = True) -> float:
    """Approximate ``<delta_x, f(H) delta_y>`` by a degree-``N`` expansion."""
    if N < 1:
        raise ValueError("N must be >= 1")
    box = scaled.box
    return kpm_form(scaled, f, SiteVector.delta(box, x), SiteVector.delta(box, y), N, damping)


def t41_bound(f, interval: SpectralInterval, R: int, n: int, norm: float | None = None) -> float:
    """``||f^(n+1)||_{L1(a,b)} * (5 (b - a) / (2 R))**n`` for ``1 <= n <= R - 1``.

    ``norm`` may supply a precomputed ``||f^(n+1)||_{L1(a,b)}``.
    """
    if not 1 <= n <= R - 1:
        raise ValueError(f"order n={n} outside 1..R-1 (R={R})")
    if norm is None:
        norm = l1_norm(f, n + 1, (interval.a, interval.b))
    return norm * (5.0 * interval.width / (2.0 * R)) ** n


def t41_norms(f, interval: SpectralInterval, R_max: int) -> dict:
    """``{n: ||f^(n+1)||_{L1(a,b)}}`` for ``n = 1..R_max - 1``."""
    return {n: l1_norm(f, n + 1, (interval.a, interval.b)) for n in range(1, R_max)}


def t41_best_bound(f, interval: SpectralInterval, R: int,
                   norms: dict | None = None) -> tuple[int, float]:
    """``min_n t41_bound`` over ``n = 1..R-1``; ties go to the smallest ``n``."""
    if R < 2:
        raise ValueError("need R >= 2")
    best_n, best = None, math.inf
    for n in range(1, R):
        val = t41_bound(f, interval, R, n, None if norms is None else norms[n])
        if val < best:
            best_n, best = n, val
    return best_n, best


def trivial_bound(f, interval: SpectralInterval) -> float:
    """``sup_{[a,b]} |f|`` (grid estimate), the bound any kernel entry obeys."""
    grid = np.linspace(interval.a, interval.b, _SUP_GRID)
    return float(np.max(np.abs(f(grid))))


@dataclass(frozen=True)
class DecayFit:
    """``|k(R)| ~ C exp(-gamma R^(1/s))``.

    ``residual`` is ``sqrt(SS_res / SS_tot)`` of the fit of ``log|k|``
    (0 for a perfect fit); ``dropped`` lists ``R`` values below threshold.
    """

    C: float
    gamma: float
    s: float
    residual: float
    used: tuple
    dropped: tuple

    def __call__(self, R):
        return self.C * np.exp(-self.gamma * np.asarray(R, dtype=float) ** (1.0 / self.s))


def gevrey_decay_fit(entries: Iterable[tuple[float, float]], s: float,
                     threshold: float = ZERO_THRESHOLD) -> DecayFit:
    """Least-squares fit of ``log|k|`` against ``R^(1/s)``."""
    entries = [(float(R), abs(float(k))) for R, k in entries]
    used = [(R, k) for R, k in entries if k > threshold]
    dropped = tuple(R for R, k in entries if k <= threshold)
    if not used:
        raise DegenerateFitError("all kernel magnitudes are below the float threshold")
    Rs = np.array([R for R, _ in used])
    if len(np.unique(Rs)) < 4:
        raise DegenerateFitError(
            f"need at least 4 distinct R values above threshold, got {len(np.unique(Rs))}")
    X = Rs ** (1.0 / s)
    y = np.log([k for _, k in used])
    A = np.column_stack([np.ones_like(X), X])
    (c0, c1), *_ = np.linalg.lstsq(A, y, rcond=None)
    res = y - (c0 + c1 * X)
    ss_res = float(np.dot(res, res))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    resid = 0.0 if ss_res == 0.0 else (math.sqrt(ss_res / ss_tot) if ss_tot > 0 else math.inf)
    return DecayFit(float(math.exp(c0)), float(-c1), float(s), resid, tuple(used), dropped)
