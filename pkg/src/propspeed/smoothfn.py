"""Smooth test functions with exact derivative recurrences.

Every function is an affine reparametrisation ``f(lam) = base((lam - c) / w)``
of one of a few base profiles:

``gaussian``      ``exp(-u**2)``
``gevrey_bump``   ``exp(1 - (1 - u**2)**(-b))`` on ``(-1, 1)``, zero outside
``bump``          ``gevrey_bump`` with ``b = 1``
``polynomial``    a polynomial in ``lam`` (no reparametrisation)
``cosine_window`` ``cos(omega * u)``

For ``exp(P(u))`` profiles the derivatives are ``f^(n) = R_n f`` with
``R_{n+1} = R_n' + R_n P'``.  ``R_n`` is kept exactly: a sum of terms
``p(u) * (1 - u**2)**(-(j*b + k))`` with ``Fraction`` polynomial
coefficients.  Expanded in monomials these prefactors cancel badly in
floating point past ``n ~ 15``, so float values of bump derivatives come
from Taylor jets of the same relation ``f' = P' f``.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Sequence

import numpy as np

from propspeed import quadrature
from propspeed.errors import DomainError

MAX_RECURRENCE_ORDER = 60
TAIL_THRESHOLD = 1e-16
L1_RTOL = 1e-10


# ---------------------------------------------------------------------------
# exact polynomial helpers (coefficients low -> high, Fractions)


def _padd(p, q):
    if len(p) < len(q):
        p, q = q, p
    out = list(p)
    for i, c in enumerate(q):
        out[i] += c
    return _ptrim(out)


def _pmul(p, q):
    if not p or not q:
        return ()
    out = [Fraction(0)] * (len(p) + len(q) - 1)
    for i, a in enumerate(p):
        if a:
            for j, b in enumerate(q):
                out[i + j] += a * b
    return _ptrim(out)


def _pscale(p, c):
    return _ptrim([a * c for a in p])


def _pderiv(p):
    return _ptrim([i * p[i] for i in range(1, len(p))])


def _ptrim(p):
    p = list(p)
    while p and p[-1] == 0:
        p.pop()
    return tuple(p)


def _pval(coeffs, x: np.ndarray) -> np.ndarray:
    out = np.zeros_like(x, dtype=float)
    for c in coeffs[::-1]:
        out = out * x + c
    return out


class Prefactors:
    """Exact ``R_n`` for ``f = exp(P)``, ``P'`` a sum of ``p(u) q^(-(j b + k))``.

    ``q = 1 - u**2``.  Terms are keyed by ``(j, k)``; for integer ``b`` the
    key is collapsed to ``(0, j*b + k)``.  Results are memoised; growth is
    sequential in ``n`` under a lock, reads of finished orders are lock-free.
    """

    def __init__(self, b: Fraction, dP: dict):
        self.b = Fraction(b)
        self._integer_b = self.b.denominator == 1
        self.dP = {self._key(*k): _ptrim(v) for k, v in dP.items()}
        self._orders = [{(0, 0): (Fraction(1),)}]
        self._lock = threading.Lock()

    def _key(self, j, k):
        if self._integer_b:
            return (0, int(j * self.b) + k)
        return (j, k)

    def alpha(self, key) -> Fraction:
        j, k = key
        return j * self.b + k

    def _next(self, terms):
        out: dict = {}

        def add(key, poly):
            if not poly:
                return
            key = self._key(*key)
            out[key] = _padd(out.get(key, ()), poly)
            if not out[key]:
                del out[key]

        for (j, k), p in terms.items():
            add((j, k), _pderiv(p))
            a = j * self.b + k
            if a:
                # d/du q^(-a) = 2 a u q^(-a-1)
                add((j, k + 1), _pscale(_pmul((Fraction(0), Fraction(1)), p), 2 * a))
            for (jp, kp), pp in self.dP.items():
                add((j + jp, k + kp), _pmul(p, pp))
        return out

    def exact(self, n: int) -> dict:
        if n < 0:
            raise ValueError("derivative order must be >= 0")
        if n > MAX_RECURRENCE_ORDER:
            raise ValueError(f"derivative order {n} exceeds {MAX_RECURRENCE_ORDER}")
        if n < len(self._orders):
            return self._orders[n]
        with self._lock:
            while len(self._orders) <= n:
                self._orders.append(self._next(self._orders[-1]))
        return self._orders[n]


@lru_cache(maxsize=None)
def _gaussian_prefactors() -> Prefactors:
    return Prefactors(Fraction(0), {(0, 0): (Fraction(0), Fraction(-2))})


@lru_cache(maxsize=None)
def _bump_prefactors(b: Fraction) -> Prefactors:
    # P = 1 - q^(-b), P' = -2 b u q^(-b-1)
    return Prefactors(b, {(1, 1): (Fraction(0), -2 * b)})


def _bump_jet(u: np.ndarray, n: int, b: float) -> np.ndarray:
    """``n``-th derivative of ``exp(1 - q**(-b))``, ``q = 1 - u**2``, via Taylor jets.

    Works with the series of ``q(u + q0 t)`` in the rescaled step ``t``
    (``q0 = q(u)``), normalised by ``exp(P(u))``; the scale factors are
    restored in log space.  Points with ``P(u) < -700`` return 0.
    """
    out = np.zeros_like(u)
    q0 = 1.0 - u * u
    inside = q0 > 0
    P0 = np.full_like(u, -np.inf)
    P0[inside] = 1.0 - q0[inside] ** (-b)
    m = P0 > -700.0
    if not np.any(m):
        return out
    q0, x, P0 = q0[m], u[m], P0[m]
    if n == 0:
        out[m] = np.exp(P0)
        return out
    # q(u + q0 t) / q0 = 1 - 2 u t - q0 t^2
    a1, a2 = -2.0 * x, -q0
    c = -b
    B = [np.ones_like(x)]
    for k in range(1, n + 1):
        acc = (c - (k - 1)) * a1 * B[k - 1]
        if k >= 2:
            acc = acc + (2 * c - (k - 2)) * a2 * B[k - 2]
        B.append(acc / k)
    # P-series (minus constant term) in t is -q0^(-b) * B_k
    scale = -(q0 ** (-b))
    E = [np.ones_like(x)]
    for k in range(1, n + 1):
        acc = np.zeros_like(x)
        for j in range(1, k + 1):
            acc += j * B[j] * E[k - j]
        E.append(scale * acc / k)
    out[m] = E[n] * np.exp(P0 - n * np.log(q0) + math.lgamma(n + 1))
    return out


# ---------------------------------------------------------------------------
# base profiles (functions of the reduced variable u)


@dataclass(frozen=True)
class _Gaussian:
    family = "gaussian"

    def params(self):
        return {}

    def support(self):
        return None

    def value(self, u):
        return np.exp(-u * u)

    def deriv(self, n, u):
        if n == 0:
            return self.value(u)
        # physicists' Hermite recurrence: f^(n) = (-1)^n H_n(u) e^{-u^2}
        h_prev, h = np.ones_like(u), 2.0 * u
        for m in range(1, n):
            h_prev, h = h, 2.0 * u * h - 2.0 * m * h_prev
        return (-1) ** n * h * np.exp(-u * u)

    def prefactors(self):
        return _gaussian_prefactors()

    def sup_abs(self):
        return 1.0


@dataclass(frozen=True)
class _GevreyBump:
    b: Fraction = Fraction(1)
    family = "gevrey_bump"

    def __post_init__(self):
        object.__setattr__(self, "b", Fraction(self.b))
        if self.b <= 0:
            raise ValueError("gevrey_bump needs b > 0")

    def params(self):
        return {"b": str(self.b)}

    def support(self):
        return (-1.0, 1.0)

    def _exponent(self, u):
        q = 1.0 - u * u
        return q, 1.0 - q ** (-float(self.b))

    def value(self, u):
        u = np.asarray(u, dtype=float)
        out = np.zeros_like(u)
        m = np.abs(u) < 1.0
        _, P = self._exponent(u[m])
        out[m] = np.exp(P)
        return out

    def deriv(self, n, u):
        return _bump_jet(np.asarray(u, dtype=float), n, float(self.b))

    def prefactors(self):
        return _bump_prefactors(self.b)

    def sup_abs(self):
        return 1.0


@dataclass(frozen=True)
class _Cosine:
    omega: float = 1.0
    family = "cosine_window"

    def params(self):
        return {"omega": self.omega}

    def support(self):
        return None

    def value(self, u):
        return np.cos(self.omega * np.asarray(u, dtype=float))

    def deriv(self, n, u):
        return self.omega**n * np.cos(self.omega * np.asarray(u, dtype=float) + n * np.pi / 2)

    def prefactors(self):
        return None

    def sup_abs(self):
        return 1.0


@dataclass(frozen=True)
class _Polynomial:
    coeffs: tuple = (0.0,)
    family = "polynomial"

    def params(self):
        return {"coeffs": list(self.coeffs)}

    def support(self):
        return None

    def degree(self):
        c = list(self.coeffs)
        while len(c) > 1 and c[-1] == 0:
            c.pop()
        return len(c) - 1 if any(c) else -1

    def value(self, u):
        return _pval(np.array(self.coeffs, dtype=float), np.asarray(u, dtype=float))

    def deriv(self, n, u):
        u = np.asarray(u, dtype=float)
        c = [Fraction(x) for x in self.coeffs]
        for _ in range(n):
            c = list(_pderiv(c))
        if not c:
            return np.zeros_like(u)
        return _pval(np.array([float(x) for x in c]), u)

    def prefactors(self):
        return None

    def sup_abs(self):
        return None


# ---------------------------------------------------------------------------
# public function type


@dataclass(frozen=True)
class SmoothFunction:
    """``f(lam) = base((lam - center) / width)``.

    Callable on arrays.  ``support`` is the closure of the set where ``f``
    can be nonzero (``None`` for non-compact families); ``domain`` is the
    evaluability domain (``None`` means all of R).
    """

    base: object
    center: float = 0.0
    width: float = 1.0
    domain: tuple | None = field(default=None, compare=True)

    def __post_init__(self):
        if not self.width > 0:
            raise ValueError(f"width must be positive, got {self.width}")

    @property
    def family(self) -> str:
        return self.base.family

    @property
    def params(self) -> dict:
        p = dict(self.base.params())
        p.update(center=self.center, width=self.width)
        return p

    @property
    def support(self):
        s = self.base.support()
        if s is None:
            return None
        return (self.center + self.width * s[0], self.center + self.width * s[1])

    def _u(self, lam):
        return (np.asarray(lam, dtype=float) - self.center) / self.width

    def _check_domain(self, lam):
        if self.domain is not None:
            lam = np.asarray(lam, dtype=float)
            lo, hi = self.domain
            if np.any(lam < lo) or np.any(lam > hi):
                raise DomainError(f"{self.family} evaluated outside its domain [{lo}, {hi}]")

    def __call__(self, lam):
        self._check_domain(lam)
        return self.base.value(self._u(lam))

    def derivative(self, n: int, lam):
        """``f^(n)(lam)``; zero outside the support of bump families."""
        if n < 0:
            raise ValueError("derivative order must be >= 0")
        if self.base.prefactors() is not None and n > MAX_RECURRENCE_ORDER:
            raise ValueError(f"derivative order {n} exceeds {MAX_RECURRENCE_ORDER}")
        self._check_domain(lam)
        scalar = np.ndim(lam) == 0
        out = self.base.deriv(n, np.atleast_1d(self._u(lam))) / self.width**n
        return float(out[0]) if scalar else out

    def sup_abs(self):
        return self.base.sup_abs()

    def scaled(self, center: float, width: float) -> "SmoothFunction":
        """``lam -> self((lam - center) / width)``."""
        return SmoothFunction(
            self.base,
            center=center + width * self.center,
            width=width * self.width,
            domain=None if self.domain is None else (
                center + width * self.domain[0], center + width * self.domain[1]),
        )

    def decay_radius(self, n: int) -> float:
        """Distance from ``center`` beyond which ``|f|`` and ``|f^(n)|`` are negligible.

        First point (in steps of ``width/2``) where both drop below
        ``1e-16 * peak``, then doubled.  Only for decaying families.
        """
        if self.support is not None:
            return self.width * max(abs(s) for s in self.base.support())
        if self.family != "gaussian":
            raise DomainError(f"{self.family} does not decay; give a finite interval")
        r0 = math.sqrt(2 * n + 1) + 1.0
        u = np.linspace(-r0, r0, 2001)
        peak_n = np.max(np.abs(self.base.deriv(n, u)))
        peak_0 = 1.0
        r = r0
        while True:
            pts = np.array([-r, r])
            if (np.all(np.abs(self.base.deriv(n, pts)) < TAIL_THRESHOLD * peak_n)
                    and np.all(np.abs(self.base.value(pts)) < TAIL_THRESHOLD * peak_0)):
                return 2.0 * r * self.width
            r += 0.5

    def describe(self) -> str:
        parts = ", ".join(f"{k}={v}" for k, v in self.params.items())
        return f"{self.family}({parts})"


def gaussian(center: float = 0.0, width: float = 1.0) -> SmoothFunction:
    """``exp(-(lam - center)**2 / width**2)``."""
    return SmoothFunction(_Gaussian(), center, width)


def bump(center: float = 0.0, width: float = 1.0) -> SmoothFunction:
    """``exp(1 - 1/(1 - u**2))``, ``u = (lam - center)/width``; maximum 1."""
    return SmoothFunction(_GevreyBump(Fraction(1)), center, width)


def gevrey_bump(b=1, center: float = 0.0, width: float = 1.0) -> SmoothFunction:
    """``exp(1 - (1 - u**2)**(-b))``; Gevrey index ``1 + 1/b``."""
    return SmoothFunction(_GevreyBump(Fraction(b)), center, width)


def polynomial(coeffs: Sequence) -> SmoothFunction:
    """``sum coeffs[i] * lam**i``."""
    return SmoothFunction(_Polynomial(tuple(coeffs)))


def cosine_window(omega: float = 1.0, center: float = 0.0, width: float = 1.0) -> SmoothFunction:
    """``cos(omega * (lam - center) / width)``."""
    return SmoothFunction(_Cosine(float(omega)), center, width)


def prefactor_terms(f: SmoothFunction, n: int) -> dict:
    """Exact ``R_n`` of an ``exp(P)`` family, keyed by ``q``-exponent data."""
    pref = f.base.prefactors()
    if pref is None:
        raise ValueError(f"{f.family} has no exponential prefactor recurrence")
    return pref.exact(n)


def derivative(f, n: int, x):
    return f.derivative(n, x)


# ---------------------------------------------------------------------------
# smoothed indicators and scaled bumps


def _ramp_norm() -> float:
    val, _ = quadrature.integrate(_GevreyBump().value, -1.0, 1.0, rtol=1e-14)
    return val


@dataclass(frozen=True)
class SmoothedIndicator:
    """Smooth ``0 -> 1 -> 0`` plateau built from bump ramps.

    Rises on ``[rise, rise + eps]`` and falls on ``[fall, fall + eps]``.  The
    ramp is ``r(u) = int_{-1}^{2u-1} bump / int bump`` on ``[0, 1]``, so
    ``r^(n)(u) = 2**(n-1) bump^(n-1)(2u - 1) / Z`` for ``n >= 1``.
    """

    rise: float
    fall: float
    eps: float
    domain = None

    def __post_init__(self):
        if not self.eps > 0 or self.fall < self.rise + self.eps:
            raise ValueError("need eps > 0 and fall >= rise + eps")

    family = "smoothed_indicator"

    @property
    def support(self):
        return (self.rise, self.fall + self.eps)

    @staticmethod
    @lru_cache(maxsize=1)
    def _z() -> float:
        return 0.5 * _ramp_norm()

    def _ramp(self, u):
        u = np.atleast_1d(np.asarray(u, dtype=float))
        out = np.where(u >= 1.0, 1.0, 0.0)
        inner = np.flatnonzero((u > 0.0) & (u < 1.0))
        base = _GevreyBump()
        for i in inner:
            # integrate the smaller side; the bump is even
            w = min(u[i], 1.0 - u[i])
            half, _ = quadrature.integrate(base.value, -1.0, 2.0 * w - 1.0, rtol=1e-14, atol=1e-18)
            r = 0.5 * half / self._z()
            out[i] = r if u[i] <= 0.5 else 1.0 - r
        return out

    def __call__(self, lam):
        lam = np.asarray(lam, dtype=float)
        val = self._ramp((lam - self.rise) / self.eps) - self._ramp((lam - self.fall) / self.eps)
        return val.reshape(lam.shape)

    def derivative(self, n: int, lam):
        if n == 0:
            return self(lam)
        base = _GevreyBump()
        lam = np.asarray(lam, dtype=float)

        def rn(u):
            return 2.0 ** (n - 1) * base.deriv(n - 1, 2.0 * u - 1.0) / self._z()

        u1 = np.atleast_1d((lam - self.rise) / self.eps)
        u2 = np.atleast_1d((lam - self.fall) / self.eps)
        val = (rn(u1) - rn(u2)) / self.eps**n
        return val.reshape(lam.shape)

    def sup_abs(self):
        return 1.0


def smoothed_indicator(alpha: float, beta: float, eps: float, outer: bool) -> SmoothedIndicator:
    """Smooth minorant (``outer=False``) or majorant of ``chi_[alpha, beta]``.

    The minorant is 1 on ``[alpha+eps, beta-eps]`` and 0 outside
    ``(alpha, beta)``; the majorant is 1 on ``[alpha, beta]`` and 0 outside
    ``(alpha-eps, beta+eps)``.
    """
    if outer:
        return SmoothedIndicator(alpha - eps, beta, eps)
    return SmoothedIndicator(alpha, beta - eps, eps)


@dataclass(frozen=True)
class ScaledBump:
    """``f_eps`` for a base ``f`` supported in ``(-1, 1)``.

    ``variant="lambda"``: ``f((lam - lam0)/eps)``.
    ``variant="k"``: ``f((sqrt(lam) - sqrt(lam0))/eps)``; its ``k``-profile
    ``g(k) = f((k - sqrt(lam0))/eps)`` is what the cosine transform uses.
    """

    base: SmoothFunction
    lam0: float
    eps: float
    variant: str = "lambda"

    def __post_init__(self):
        if self.variant not in ("lambda", "k"):
            raise ValueError(f"unknown variant {self.variant!r}")
        if not self.eps > 0:
            raise ValueError("eps must be positive")
        if self.variant == "k" and not (self.lam0 > 0 and self.eps <= math.sqrt(self.lam0)):
            raise ValueError("k-scaled bump needs lam0 > 0 and eps <= sqrt(lam0)")

    def as_function(self) -> SmoothFunction:
        """Lambda variant as a function of ``lam``; k variant as ``g(k)``."""
        c = self.lam0 if self.variant == "lambda" else math.sqrt(self.lam0)
        return self.base.scaled(c, self.eps)

    def __call__(self, lam):
        lam = np.asarray(lam, dtype=float)
        if self.variant == "lambda":
            return self.as_function()(lam)
        if np.any(lam < 0):
            raise DomainError("k-scaled bump is defined for lam >= 0")
        return self.as_function()(np.sqrt(lam))

    @property
    def support(self):
        s = self.as_function().support
        if self.variant == "k":
            return (max(s[0], 0.0) ** 2, s[1] ** 2)
        return s

    def sup_abs(self):
        return self.base.sup_abs()


# ---------------------------------------------------------------------------
# L1 norms and Gevrey constants


def _resolve_interval(f, n, interval):
    supp = getattr(f, "support", None)
    if interval is None:
        if supp is None:
            raise DomainError(f"{f.family} has no compact support; give an interval")
        return supp
    lo, hi = float(interval[0]), float(interval[1])
    if supp is not None:
        lo, hi = max(lo, supp[0]), min(hi, supp[1])
        if lo >= hi:
            return (lo, lo)
    if math.isinf(lo) or math.isinf(hi):
        r = f.decay_radius(n)
        lo = max(lo, f.center - r)
        hi = min(hi, f.center + r)
    return (lo, hi)


@lru_cache(maxsize=4096)
def _l1_cached(f, n, lo, hi):
    if lo >= hi:
        return 0.0
    if isinstance(f, SmoothFunction) and f.family == "polynomial" and n > f.base.degree():
        return 0.0
    width = hi - lo
    oscill = getattr(getattr(f, "base", None), "omega", 0.0) * width / getattr(f, "width", 1.0)
    samples = 200 + 80 * (n + 2) + int(4 * oscill)
    val, _, _ = quadrature.abs_integral(
        lambda x: f.derivative(n, x), lo, hi, samples=samples, rtol=L1_RTOL, atol=1e-300
    )
    return val


def l1_norm(f, n: int, interval=None) -> float:
    """``||f^(n)||_{L1(interval)}``.

    ``interval`` defaults to the support of ``f``.  Infinite endpoints are
    truncated at :meth:`SmoothFunction.decay_radius`.  The integrand is split
    at sign changes of ``f^(n)`` and each piece is integrated adaptively.
    """
    lo, hi = _resolve_interval(f, n, interval)
    return _l1_cached(f, int(n), float(lo), float(hi))


@dataclass(frozen=True)
class GevreyFit:
    """Outcome of :func:`gevrey_constant_fit`.

    ``C`` is ``None`` when no constant up to ``C_MAX`` is certified.
    ``required`` holds the per-order minimal constants
    ``(||f^(n)|| / n^(s n))^(1/(n+1))``.
    """

    s: float
    C: float | None
    norms: tuple
    required: tuple
    ok: bool
    reason: str = ""

    @property
    def n_max(self) -> int:
        return len(self.norms) - 1

    def holds(self, C: float | None = None) -> bool:
        C = self.C if C is None else C
        return C is not None and all(
            nrm <= C ** (n + 1) * _npow(n, self.s * n) * (1 + 1e-12)
            for n, nrm in enumerate(self.norms)
        )


C_MAX = 1e6
_GRID_STEP = math.log(1.01)


def _npow(n, e):
    return 1.0 if n == 0 else float(n) ** e


def required_constants(norms: Sequence[float], s: float) -> list[float]:
    out = []
    for n, nrm in enumerate(norms):
        if nrm <= 0:
            out.append(0.0)
        else:
            out.append(math.exp((math.log(nrm) - (0.0 if n == 0 else s * n * math.log(n))) / (n + 1)))
    return out


def fit_from_norms(norms: Sequence[float], s: float) -> GevreyFit:
    """Smallest ``C = 1.01**k`` with ``norms[n] <= C^(n+1) n^(s n)`` for all ``n``.

    The fit is declared failed when the required constant exceeds ``C_MAX``
    or is still growing over the upper half of the orders: a growing
    per-order constant means the class condition cannot hold for all ``n``.
    """
    norms = tuple(float(x) for x in norms)
    if len(norms) < 3:
        raise ValueError("need norms for n = 0..n_max with n_max >= 2")
    req = required_constants(norms, s)
    need = max(req)
    if need <= 0:
        return GevreyFit(s, 1.0, norms, tuple(req), True, "all norms vanish")
    k = math.ceil(math.log(need) / _GRID_STEP - 1e-12)
    C = math.exp(k * _GRID_STEP)
    while any(nrm > C ** (n + 1) * _npow(n, s * n) * (1 + 1e-12) for n, nrm in enumerate(norms)):
        k += 1
        C = math.exp(k * _GRID_STEP)
    n_max = len(norms) - 1
    half = n_max // 2
    lower = max(req[: half + 1])
    upper = max(req[half + 1:])
    if C > C_MAX:
        return GevreyFit(s, None, norms, tuple(req), False, f"required constant > {C_MAX:g}")
    if upper > lower * (1 + 1e-9) and _growing(req[half:]):
        return GevreyFit(s, None, norms, tuple(req), False,
                         f"not G_s^1 up to n_max={n_max}: required constant still growing")
    return GevreyFit(s, C, norms, tuple(req), True)


def _growing(seq) -> bool:
    tail = [x for x in seq if x > 0]
    if len(tail) < 2:
        return False
    n = np.arange(len(tail), dtype=float)
    slope = np.polyfit(n, np.log(tail), 1)[0]
    return slope > 0


def gevrey_constant_fit(f, s: float, n_max: int, interval=None) -> GevreyFit:
    """Fit the constant of ``||f^(n)||_{L1(I)} <= C^(n+1) n^(s n)`` for ``n <= n_max``."""
    if n_max < 2:
        raise ValueError("n_max must be >= 2")
    norms = [l1_norm(f, n, interval) for n in range(n_max + 1)]
    return fit_from_norms(norms, s)
