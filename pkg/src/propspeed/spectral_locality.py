"""Local a-priori estimates for spectral measures.

If ``V1 = V2`` on the ``R``-neighbourhood of ``supp phi``, the first ``2R``
power moments of the two spectral measures of ``phi`` coincide, hence so do
``<phi, p(H_j) phi>`` for every polynomial of degree ``<= 2R``.  Smooth
``f_eps(lam) = f((lam - lam0)/eps)`` are approximated by such polynomials,
which bounds ``|<phi, f_eps(H1) phi> - <phi, f_eps(H2) phi>|``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from propspeed.errors import EnclosureError
from propspeed.lattice import (
    EigenSystem,
    LatticeBox,
    Potential,
    SiteVector,
    SpectralInterval,
    dense_eigendecomposition,
    spectral_interval,
)
from propspeed.poly_calculus import ScaledOperator, chebyshev_moments, jackson_coefficients
from propspeed.propagation import _l1_set_distance
from propspeed.smoothfn import SmoothFunction, l1_norm, smoothed_indicator

_RATIO_SLACK = 1e-8


@dataclass(frozen=True, eq=False)
class LocalityExperiment:
    """Two potentials, a vector, and a scaled bump ``f((lam - lam0)/eps)``.

    ``f`` is the unscaled profile, supported in ``[-1, 1]``.  ``R`` and the
    shared enclosure ``[a, b]`` (union of both Gershgorin intervals) are
    derived.
    """

    box: LatticeBox
    phi: SiteVector
    v1: Potential
    v2: Potential
    f: SmoothFunction
    lam0: float
    eps: float
    interval: SpectralInterval | None = None

    def __post_init__(self):
        if not 0 < self.eps <= 1:
            raise ValueError(f"eps must lie in (0, 1], got {self.eps}")
        supp = self.f.support
        if supp is None or supp[0] < -1 or supp[1] > 1:
            raise ValueError("profile f must be supported in [-1, 1]")
        if self.interval is None:
            iv = spectral_interval(self.box, self.v1).union(spectral_interval(self.box, self.v2))
            object.__setattr__(self, "interval", iv)

    @cached_property
    def R(self) -> int | None:
        """``dist_1(supp phi, supp(v1 - v2))``; ``None`` if the potentials coincide."""
        idx = self.v1.difference_support(self.v2)
        if len(idx) == 0:
            return None
        return _l1_set_distance(self.phi.support_coords(), self.box.coords[idx])

    @property
    def f_eps(self) -> SmoothFunction:
        return self.f.scaled(self.lam0, self.eps)

    @property
    def phi_norm2(self) -> float:
        return float(self.phi.to_float().norm2())


def t33_bound(exp: LocalityExperiment, n: int, norm: float | None = None) -> float:
    """``2 ||phi||^2 ||f^(n+1)||_1 (5 (b - a) / (4 eps R))**n`` for ``1 <= n <= 2R``.

    The L1 norm is that of the unscaled profile over ``[-1, 1]``.
    """
    R = exp.R
    if R is None or R < 1:
        raise ValueError("bound needs R >= 1")
    if not 1 <= n <= 2 * R:
        raise ValueError(f"order n={n} outside 1..2R (R={R})")
    if norm is None:
        norm = l1_norm(exp.f, n + 1)
    x = 5.0 * exp.interval.width / (4.0 * exp.eps * R)
    return 2.0 * exp.phi_norm2 * norm * x**n


def t33_best_bound(exp: LocalityExperiment) -> tuple[int, float]:
    """Minimum of :func:`t33_bound` over ``n = 1..2R``; ties to smallest ``n``."""
    best_n, best = None, math.inf
    for n in range(1, 2 * exp.R + 1):
        val = t33_bound(exp, n)
        if val < best:
            best_n, best = n, val
    return best_n, best


@dataclass(frozen=True)
class LocalityReport:
    R: int | None
    value1: float
    value2: float
    measured: float
    n_star: int | None
    bound: float
    trivial_bound: float
    ratio: float
    vacuous: bool
    passed: bool


def _check_enclosure(eig: EigenSystem, iv: SpectralInterval):
    if not iv.contains(eig.eigenvalues):
        raise EnclosureError(
            f"spectrum [{eig.eigenvalues[0]}, {eig.eigenvalues[-1]}] not inside "
            f"[{iv.a}, {iv.b}]"
        )


def t33_experiment(exp: LocalityExperiment, eigs: tuple | None = None) -> LocalityReport:
    """Measured ``|<phi, f_eps(H1) phi> - <phi, f_eps(H2) phi>|`` against the best bound.

    Dense oracles are used for both operators (pass ``eigs`` to reuse them).
    ``vacuous`` marks bounds above the trivial ``2 ||phi||^2 sup|f|``.
    """
    e1, e2 = eigs if eigs is not None else (
        dense_eigendecomposition(exp.box, exp.v1), dense_eigendecomposition(exp.box, exp.v2))
    _check_enclosure(e1, exp.interval)
    _check_enclosure(e2, exp.interval)
    fe = exp.f_eps
    val1 = e1.form(fe, exp.phi, exp.phi)
    val2 = e2.form(fe, exp.phi, exp.phi)
    measured = abs(val1 - val2)
    trivial = 2.0 * exp.phi_norm2 * exp.f.sup_abs()
    if exp.R is None:
        return LocalityReport(None, val1, val2, measured, None, 0.0, trivial,
                              0.0 if measured == 0 else math.inf, False, measured == 0.0)
    n_star, bound = t33_best_bound(exp)
    ratio = measured / bound if bound > 0 else (0.0 if measured == 0 else math.inf)
    return LocalityReport(exp.R, val1, val2, measured, n_star, bound, trivial, ratio,
                          bound > trivial, ratio <= 1 + _RATIO_SLACK)


@dataclass(frozen=True)
class MomentConsistency:
    """Chebyshev moments of both operators and the re-expanded difference."""

    mu1: np.ndarray
    mu2: np.ndarray
    max_diff_up_to_2R: float
    reexpanded: float
    degree: int = field(default=0)


def moment_consistency(exp: LocalityExperiment, N: int) -> MomentConsistency:
    """Re-expand the measured difference in Chebyshev moments of degree ``N``.

    Moments ``mu_n`` with ``n <= 2R`` coincide for both operators, so only
    ``n > 2R`` contributes to ``sum_n c_n (mu1_n - mu2_n)``.
    """
    s1 = ScaledOperator(exp.box, exp.v1, exp.interval)
    s2 = ScaledOperator(exp.box, exp.v2, exp.interval)
    mu1 = chebyshev_moments(s1, exp.phi, exp.phi, N).values
    mu2 = chebyshev_moments(s2, exp.phi, exp.phi, N).values
    top = N if exp.R is None else min(N, 2 * exp.R)
    head = float(np.max(np.abs(mu1[: top + 1] - mu2[: top + 1])))
    coeffs = jackson_coefficients(s1.unit_function(exp.f_eps), N, damping=False).damped
    return MomentConsistency(mu1, mu2, head, float(np.dot(coeffs, mu1 - mu2)), N)


@dataclass(frozen=True)
class IntervalMeasure:
    lower: float
    upper: float
    eps: float

    def contains(self, value: float, slack: float = 1e-12) -> bool:
        return self.lower - slack <= value <= self.upper + slack


def interval_measure_estimate(box: LatticeBox, v: Potential, phi: SiteVector,
                              interval: tuple[float, float], eps: float,
                              eig: EigenSystem | None = None) -> IntervalMeasure:
    """Bracket ``rho(I)`` by smooth minorant/majorant of ``chi_I``.

    ``rho`` is the spectral measure of ``phi``.  Needs
    ``eps <= (beta - alpha) / 4``.
    """
    alpha, beta = map(float, interval)
    if not beta > alpha:
        raise ValueError("interval must have beta > alpha")
    if not 0 < eps <= (beta - alpha) / 4:
        raise ValueError(f"eps={eps} must lie in (0, (beta - alpha)/4]")
    eig = dense_eigendecomposition(box, v) if eig is None else eig
    w = eig.spectral_weights(phi)
    inner = smoothed_indicator(alpha, beta, eps, outer=False)
    outer = smoothed_indicator(alpha, beta, eps, outer=True)
    lam = eig.eigenvalues
    return IntervalMeasure(float(np.dot(inner(lam), w)), float(np.dot(outer(lam), w)), eps)


def oracle_interval_measure(eig: EigenSystem, phi: SiteVector, interval) -> float:
    """``rho([alpha, beta]) = sum_{lam_k in I} |<v_k, phi>|^2``."""
    alpha, beta = interval
    lam = eig.eigenvalues
    m = (lam >= alpha) & (lam <= beta)
    return float(np.sum(eig.spectral_weights(phi)[m]))
