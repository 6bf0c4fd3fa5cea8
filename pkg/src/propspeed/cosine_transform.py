"""Cosine-transform coefficients of ``f(lam) = g(sqrt(lam))`` and their bounds.

    f(lam) = int_0^inf ft(t) cos(t sqrt(lam)) dt,
    ft(t)  = (1/pi) int_0^inf f(lam) cos(t sqrt(lam)) dlam / sqrt(lam)
           = (2/pi) int_0^inf g(k) cos(t k) dk.

Integrating by parts ``n + 1`` times (``g`` extended evenly to R) gives
``|ft(t)| <= 2 ||g^(n+1)||_{L1(0,inf)} / (pi t^(n+1))``; integrating that
over ``[R, inf)`` bounds the error of truncating the expansion at ``t = R``.
Only these integral identities are computed here; no continuum operator.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import cached_property, lru_cache

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy import integrate as sp_integrate

from propspeed import quadrature
from propspeed.errors import AccuracyError, DomainError
from propspeed.poly_calculus import DecayFit, gevrey_decay_fit
from propspeed.smoothfn import GevreyFit, ScaledBump, SmoothFunction, l1_norm

_GL_ORDER = 16


@lru_cache(maxsize=None)
def _gl(order: int):
    x, w = leggauss(order)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def _panels(lo: float, hi: float, width: float):
    n = max(1, int(math.ceil((hi - lo) / width)))
    edges = np.linspace(lo, hi, n + 1)
    x, w = _gl(_GL_ORDER)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return nodes, weights


@dataclass(frozen=True)
class CosineProfile:
    """``g`` on ``[0, inf)``, evenly extended; ``f(lam) = g(sqrt(lam))``.

    ``g`` must be even-compatible: either supported in ``[0, inf)`` (flat at
    0 for bump families) or an even function about 0.
    """

    g: SmoothFunction
    rtol: float = 1e-12

    def __post_init__(self):
        supp = self.g.support
        even = self.g.family in ("gaussian", "cosine_window") and self.g.center == 0
        if not (even or (supp is not None and supp[0] >= 0)):
            raise ValueError("profile g must be even about 0 or supported in [0, inf)")
        if self.g.family == "cosine_window":
            raise ValueError("cosine_window does not decay; g^(j) must be in L1(0, inf)")

    def f(self, lam):
        lam = np.asarray(lam, dtype=float)
        if np.any(lam < 0):
            raise DomainError("f(lam) = g(sqrt(lam)) needs lam >= 0")
        return self.g(np.sqrt(lam))

    def k_max(self, n: int = 0) -> float:
        """Truncation radius in ``k`` for ``g`` and ``g^(n)``."""
        supp = self.g.support
        if supp is not None:
            return supp[1]
        return self.g.center + self.g.decay_radius(n)

    @cached_property
    def k_min(self) -> float:
        supp = self.g.support
        return 0.0 if supp is None else max(0.0, supp[0])

    def g_norm(self, n: int) -> float:
        """``||g^(n)||_{L1(0, inf)}``."""
        val = l1_norm(self.g, n, (0.0, math.inf))
        if not math.isfinite(val):
            raise AccuracyError(f"||g^({n})||_1 diverges")
        return val


def cosine_coefficient(p: CosineProfile, t: float) -> float:
    """``(2/pi) int_0^inf g(k) cos(t k) dk`` by adaptive quadrature (k form)."""
    if t < 0:
        raise ValueError("t must be >= 0")
    lo, hi = p.k_min, p.k_max(0)
    val, err = quadrature.integrate(lambda k: p.g(k) * np.cos(t * k), lo, hi,
                                    rtol=p.rtol, atol=1e-17)
    return 2.0 / math.pi * val


def cosine_coefficient_lambda(p: CosineProfile, t: float) -> float:
    """``(1/pi) int_0^inf f(lam) cos(t sqrt(lam)) dlam / sqrt(lam)`` (lambda form).

    The ``lam^(-1/2)`` endpoint singularity is handled by QUADPACK's
    algebraic-weight rule; kept independent of the ``k``-form path.
    """
    if t < 0:
        raise ValueError("t must be >= 0")
    lo, hi = p.k_min ** 2, p.k_max(0) ** 2

    def h(lam):
        return float(p.g(np.sqrt(max(lam, 0.0))) * math.cos(t * math.sqrt(max(lam, 0.0))))

    with warnings.catch_warnings():
        # roundoff warnings fire on values near 1e-17; the error estimate decides
        warnings.simplefilter("ignore", sp_integrate.IntegrationWarning)
        if lo == 0.0:
            val, err = sp_integrate.quad(h, 0.0, hi, weight="alg", wvar=(-0.5, 0.0), limit=2000,
                                         epsabs=1e-15, epsrel=1e-13)
        else:
            val, err = sp_integrate.quad(lambda lam: h(lam) / math.sqrt(lam), lo, hi, limit=2000,
                                         epsabs=1e-15, epsrel=1e-13)
    if err > 1e-10:
        raise AccuracyError(f"lambda-form quadrature error {err:.3g} at t={t}", val / math.pi,
                            err / math.pi)
    return val / math.pi


def cosine_coefficients(p: CosineProfile, ts) -> np.ndarray:
    """Vectorised k-form over many ``t`` (composite Gauss-Legendre in ``k``).

    Panels are narrow enough to resolve ``cos(t_max k)`` and the flat
    endpoints of bump profiles (width ``g.width / 20``).
    """
    ts = np.atleast_1d(np.asarray(ts, dtype=float))
    t_max = float(np.max(np.abs(ts))) if ts.size else 0.0
    lo, hi = p.k_min, p.k_max(0)
    width = min(0.05 * p.g.width, 2.0 * math.pi / max(t_max, 1.0))
    k, w = _panels(lo, hi, width)
    gw = p.g(k) * w
    out = np.empty(ts.shape)
    step = max(1, 4_000_000 // max(1, k.size))
    for s in range(0, ts.size, step):
        out[s:s + step] = np.cos(np.outer(ts[s:s + step], k)) @ gw
    return 2.0 / math.pi * out


def coeff_decay_bound(p: CosineProfile, n: int, t: float) -> float:
    """``2 ||g^(n+1)||_{L1(0,inf)} / (pi t^(n+1))``."""
    if not t > 0:
        raise ValueError("t must be > 0")
    if n < 0:
        raise ValueError("n must be >= 0")
    return 2.0 * p.g_norm(n + 1) / (math.pi * t ** (n + 1))


@dataclass(frozen=True)
class TailIntegral:
    """``int_R^T |ft(t)| dt``; ``T`` is where ``|ft|`` dropped below the cutoff."""

    value: float
    R: float
    T: float


# float noise floor of the vectorised transform is ~1e-14 at t ~ 10^3
_TAIL_CUTOFF = 1e-13


def _t_cutoff(p: CosineProfile, R: float, t_cap: float) -> float:
    peak = abs(cosine_coefficient(p, 0.0))
    T = max(2.0 * R, 8.0)
    while T < t_cap:
        probe = np.linspace(T, 2 * T, 801)
        if np.max(np.abs(cosine_coefficients(p, probe))) < _TAIL_CUTOFF * peak:
            return T
        T *= 2.0
    raise AccuracyError(f"|ft(t)| did not decay below cutoff before t = {t_cap}")


def tail_integral(p: CosineProfile, R: float, t_cap: float = 8192.0) -> TailIntegral:
    """Quadrature of ``int_R^inf |ft(t)| dt``, truncated once ``|ft|`` is negligible.

    ``|ft|`` is split at its sign changes (located on a grid of spacing
    ``pi / (4 k_max)``) and each piece integrated with Gauss-Legendre.
    """
    T = _t_cutoff(p, R, t_cap)
    spacing = math.pi / (4.0 * max(p.k_max(0), 1.0))
    grid = np.linspace(R, T, int(math.ceil((T - R) / spacing)) + 1)
    vals = cosine_coefficients(p, grid)
    s = np.sign(vals)
    cuts = [R]
    for i in np.flatnonzero(s[:-1] * s[1:] < 0):
        # linear interpolation, refined by one secant step
        a, b, fa, fb = grid[i], grid[i + 1], vals[i], vals[i + 1]
        r = a - fa * (b - a) / (fb - fa)
        fr = cosine_coefficients(p, [r])[0]
        if fr * fa < 0:
            r = a - fa * (r - a) / (fr - fa)
        else:
            r = r - fr * (b - r) / (fb - fr)
        cuts.append(float(r))
    cuts.append(T)
    x, w = _gl(_GL_ORDER)
    edges = np.array(cuts)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    nodes = (mid[:, None] + half[:, None] * x[None, :])
    vals = cosine_coefficients(p, nodes.ravel()).reshape(nodes.shape)
    pieces = np.abs(np.sum(vals * w[None, :], axis=1) * half)
    return TailIntegral(float(np.sum(pieces)), float(R), float(T))


@dataclass(frozen=True)
class TailBound:
    n: int
    R: float
    bound: float
    quadrature: float


def t42_tail_bound(p: CosineProfile, n: int, R: float,
                   tail: TailIntegral | None = None) -> TailBound:
    """``2 ||g^(n+1)||_{L1(0,inf)} / (pi n R^n)`` with the quadrature tail alongside."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if not R > 0:
        raise ValueError("R must be > 0")
    bound = 2.0 * p.g_norm(n + 1) / (math.pi * n * R**n)
    tail = tail_integral(p, R) if tail is None else tail
    return TailBound(n, float(R), bound, tail.value)


def t42_bound(p: CosineProfile, n: int, R: float, norm1: float = 1.0, norm2: float = 1.0) -> float:
    """``2 ||phi1|| ||phi2|| ||g^(n+1)||_{L1(0,inf)} / (pi n R^n)``."""
    return norm1 * norm2 * t42_tail_bound_value(p, n, R)


def t42_tail_bound_value(p: CosineProfile, n: int, R: float) -> float:
    if n < 1 or not R > 0:
        raise ValueError("need n >= 1 and R > 0")
    return 2.0 * p.g_norm(n + 1) / (math.pi * n * R**n)


def truncated_expansion(p: CosineProfile, R: float, lam, panel: float = 0.5) -> np.ndarray:
    """``h(lam) = int_0^R ft(t) cos(t sqrt(lam)) dt`` by composite Gauss-Legendre in ``t``."""
    lam = np.atleast_1d(np.asarray(lam, dtype=float))
    t, w = _panels(0.0, float(R), panel)
    ft = cosine_coefficients(p, t)
    return np.cos(np.outer(np.sqrt(lam), t)) @ (ft * w)


# ---------------------------------------------------------------------------
# k-scaled bumps


def scaled_coefficient(sb: ScaledBump, t: float) -> float:
    """``(2 eps / pi) int f(s) cos(eps t s + t sqrt(lam0)) ds`` for a k-scaled bump."""
    if sb.variant != "k":
        raise ValueError("needs a k-scaled bump")
    f, eps, k0 = sb.base, sb.eps, math.sqrt(sb.lam0)
    lo, hi = f.support
    val, _ = quadrature.integrate(lambda s: f(s) * np.cos(eps * t * s + t * k0), lo, hi,
                                  rtol=1e-12, atol=1e-17)
    return 2.0 * eps / math.pi * val


def t32_coeff_bound(sb: ScaledBump, n: int, t: float) -> float:
    """``2 eps ||f^(n+1)||_1 / (pi (eps t)^(n+1))``; independent of ``lam0``."""
    if not t > 0:
        raise ValueError("t must be > 0")
    eps = sb.eps
    return 2.0 * eps * l1_norm(sb.base, n + 1) / (math.pi * (eps * t) ** (n + 1))


def t32_final_bound(sb: ScaledBump, n: int, R: float, phi_norm2: float = 1.0) -> float:
    """``4 ||phi||^2 ||f^(n+1)||_1 / (n pi (2 eps R)^n)``."""
    if n < 1 or not R > 0:
        raise ValueError("need n >= 1 and R > 0")
    return 4.0 * phi_norm2 * l1_norm(sb.base, n + 1) / (n * math.pi * (2.0 * sb.eps * R) ** n)


# ---------------------------------------------------------------------------
# Gevrey version


@dataclass(frozen=True)
class C52Result:
    """Minimised Gevrey tail bound at one ``R``.

    ``n_star``/``bound``: minimiser over ``1 <= n <= n_max`` (ties to
    smallest ``n``).  ``n_recipe``/``recipe_bound``: the choice
    ``R/(2eB) <= n^s <= R/(eB)`` (largest admissible ``n``), or ``n_max``
    when no integer qualifies (``recipe_admissible`` False).
    """

    R: float
    n_star: int
    bound: float
    n_recipe: int
    recipe_bound: float
    recipe_admissible: bool
    B: float


def _log_c52_terms(C: float, s: float, n_max: int, R: float) -> np.ndarray:
    n = np.arange(1, n_max + 1, dtype=float)
    return (math.log(2.0 / math.pi) - np.log(n) + (n + 2) * math.log(C)
            + s * (n + 1) * np.log(n + 1) - n * math.log(R))


def c52_B(gfit: GevreyFit, n_max: int | None = None) -> float:
    """Smallest ``B >= 2/e`` with ``(2/(pi n)) C^(n+2) (n+1)^(s(n+1)) <= (B n^s)^n``."""
    n_max = gfit.n_max if n_max is None else n_max
    n = np.arange(1, n_max + 1, dtype=float)
    logs = _log_c52_terms(gfit.C, gfit.s, n_max, 1.0)
    logB = np.max(logs / n - gfit.s * np.log(n))
    return max(2.0 / math.e, math.exp(logB))


def c52_bound(p: CosineProfile | None, s: float, gfit: GevreyFit, R: float,
              n_max: int | None = None) -> C52Result:
    """Minimise ``(2/(pi n)) C^(n+2) (n+1)^(s(n+1)) / R^n`` over ``n <= n_max``.

    ``C`` comes from ``gfit``; ``p`` is accepted for symmetry with the other
    bounds and is not needed by the formula.
    """
    if not gfit.ok or gfit.C is None:
        raise ValueError("Gevrey fit did not certify a constant")
    if abs(gfit.s - s) > 1e-12:
        raise ValueError(f"fit was made for s={gfit.s}, asked for s={s}")
    n_max = gfit.n_max if n_max is None else n_max
    logs = _log_c52_terms(gfit.C, s, n_max, float(R))
    i = int(np.argmin(logs))
    B = c52_B(gfit, n_max)
    lo, hi = R / (2 * math.e * B), R / (math.e * B)
    cands = [n for n in range(1, n_max + 1) if lo <= n**s <= hi]
    if cands:
        n_rec, ok = max(cands), True
    else:
        n_rec, ok = n_max, False
    return C52Result(float(R), i + 1, float(math.exp(logs[i])), n_rec,
                     float(math.exp(logs[n_rec - 1])), ok, B)


def c52_decay(p: CosineProfile | None, s: float, gfit: GevreyFit, R_grid,
              n_max: int | None = None) -> tuple[list, DecayFit]:
    """Minimised bounds over an ``R`` grid and their fitted ``C exp(-gamma R^(1/s))``."""
    rows = [c52_bound(p, s, gfit, R, n_max) for R in R_grid]
    fit = gevrey_decay_fit([(r.R, r.bound) for r in rows], s, threshold=0.0)
    return rows, fit
