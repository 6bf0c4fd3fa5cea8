"""Power moments ``<phi1, H^n phi2>`` and finite propagation speed checks.

Support of ``H psi`` lies in the 1-neighbourhood of ``supp psi``, so

* ``<phi1, H^n phi2> = 0`` for ``n < R = dist_1(supp phi1, supp phi2)``;
* if ``V1 = V2`` off a set at distance ``R`` from ``supp phi``, then
  ``<phi, H1^n phi> = <phi, H2^n phi>`` for ``n <= 2R``.

In exact mode both statements are checked with ``Fraction`` arithmetic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from propspeed.errors import ResourceError
from propspeed.lattice import (
    LatticeBox,
    Potential,
    SiteVector,
    apply_h,
    dense_matrix,
    spectral_interval,
)

#: bit length above which an exact moment computation is aborted
MAX_RATIONAL_BITS = 200_000


def _l1_set_distance(a: np.ndarray, b: np.ndarray) -> int:
    best = None
    chunk = max(1, 2_000_000 // max(1, len(b)))
    for start in range(0, len(a), chunk):
        block = a[start:start + chunk]
        d = np.abs(block[:, None, :] - b[None, :, :]).sum(axis=2).min()
        best = d if best is None else min(best, d)
    return int(best)


def separation(phi1: SiteVector, phi2: SiteVector) -> int:
    """``|.|_1`` distance between the supports of two vectors."""
    if phi1.box.d != phi2.box.d:
        raise ValueError("vectors live in different dimensions")
    a, b = phi1.support_coords(), phi2.support_coords()
    if len(a) == 0 or len(b) == 0:
        raise ValueError("separation needs two vectors with nonempty support")
    return _l1_set_distance(a, b)


def support_radius(*vectors: SiteVector) -> int:
    """Largest ``|x_i|`` over the supports of the given vectors."""
    r = 0
    for phi in vectors:
        c = phi.support_coords()
        if len(c):
            r = max(r, int(np.abs(c).max()))
    return r


def sufficient_box(box: LatticeBox, vectors: Sequence[SiteVector], n: int) -> LatticeBox:
    """Smallest box containing ``box`` with ``L >= support radius + n``.

    On such a box ``H^k phi`` (``k <= n``) never reaches the boundary, so the
    box moments coincide with those on the infinite lattice.
    """
    need = support_radius(*vectors) + n
    return box if box.L >= need else LatticeBox(box.d, need)


@dataclass(frozen=True)
class MomentSequence:
    """``values[n] = <phi1, H^n phi2>`` for ``n = 0..N``."""

    values: tuple
    exact: bool
    separation: int
    box_half_width: int
    extended: bool = False
    metadata: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.values)

    def __getitem__(self, n):
        return self.values[n]


def _check_size(vec: SiteVector):
    bits = 0
    for i in vec.support():
        a = vec.values[i]
        bits = max(bits, a.numerator.bit_length(), a.denominator.bit_length())
    if bits > MAX_RATIONAL_BITS:
        raise ResourceError(f"rational entries reached {bits} bits (limit {MAX_RATIONAL_BITS})")


def _prepare(box, potentials, vectors, N, auto_extend):
    big = sufficient_box(box, vectors, N) if auto_extend else box
    if big is box:
        return box, list(potentials), list(vectors), False
    return (big, [v.embedded(big) for v in potentials], [phi.embedded(big) for phi in vectors],
            True)


def power_vectors(box: LatticeBox, v: Potential, phi: SiteVector, N: int):
    """Yield ``H^n phi`` for ``n = 0..N`` (never forming ``H^n``)."""
    psi = phi
    yield psi
    for _ in range(N):
        psi = apply_h(box, v, psi)
        if psi.exact:
            _check_size(psi)
        yield psi


def moments(box: LatticeBox, v: Potential, phi1: SiteVector, phi2: SiteVector, N: int,
            auto_extend: bool = True) -> MomentSequence:
    """``m_n = <phi1, H^n phi2>`` for ``n = 0..N`` by iterated :func:`apply_h`.

    With ``auto_extend`` the computation runs on :func:`sufficient_box`; the
    potential is continued by zero on the added sites.
    """
    if N < 0:
        raise ValueError("N must be >= 0")
    big, (vv,), (p1, p2), extended = _prepare(box, [v], [phi1, phi2], N, auto_extend)
    vals = tuple(p1.inner(psi) for psi in power_vectors(big, vv, p2, N))
    return MomentSequence(vals, p1.exact, separation(phi1, phi2), big.L, extended)


def shortest_walk_count(x: Sequence[int], y: Sequence[int]) -> int:
    """Number of shortest lattice walks from ``x`` to ``y``: ``R! / prod |x_i - y_i|!``."""
    delta = [abs(int(a) - int(b)) for a, b in zip(x, y)]
    out = math.factorial(sum(delta))
    for k in delta:
        out //= math.factorial(k)
    return out


@dataclass(frozen=True)
class VanishingReport:
    """Outcome of :func:`check_vanishing`.

    ``max_residual`` is ``max |m_n|`` over ``n < R`` (a ``Fraction`` in exact
    mode, ``0`` when ``R = 0``); ``m_R`` is the first moment allowed to be
    nonzero.
    """

    R: int
    max_residual: object
    m_R: object
    tolerance: object
    passed: bool
    moments: MomentSequence


def check_vanishing(box: LatticeBox, v: Potential, phi1: SiteVector,
                    phi2: SiteVector) -> VanishingReport:
    """Check ``<phi1, H^n phi2> = 0`` for ``n < separation(phi1, phi2)``.

    Exact mode demands exact zeros; float mode allows
    ``1e-12 * (b - a)**R`` with ``[a, b]`` the Gershgorin enclosure.
    """
    R = separation(phi1, phi2)
    seq = moments(box, v, phi1, phi2, R)
    below = seq.values[:R]
    if phi1.exact:
        resid = max((abs(m) for m in below), default=Fraction(0))
        tol = Fraction(0)
        ok = resid == 0
    else:
        resid = max((abs(m) for m in below), default=0.0)
        iv = spectral_interval(box, v)
        tol = 1e-12 * iv.width**R
        ok = resid <= tol
    return VanishingReport(R, resid, seq.values[R], tol, bool(ok), seq)


@dataclass(frozen=True)
class AgreementReport:
    """Outcome of :func:`moment_agreement`.

    ``R`` is ``None`` when the potentials coincide (all moments agree).
    ``differences[n]`` is ``<phi, H1^n phi> - <phi, H2^n phi>``.
    ``first_disagreement`` is recorded for ``n > 2R`` only, never asserted.
    """

    R: int | None
    checked_up_to: int
    differences: tuple
    passed: bool
    first_disagreement: int | None
    moments1: MomentSequence
    moments2: MomentSequence

    @property
    def infinite_R(self) -> bool:
        return self.R is None


def moment_agreement(box: LatticeBox, v1: Potential, v2: Potential, phi: SiteVector,
                     N: int | None = None) -> AgreementReport:
    """Compare ``<phi, H1^n phi>`` and ``<phi, H2^n phi>`` for ``n <= N``.

    ``R = dist_1(supp phi, supp(v1 - v2))``.  Equality is required for
    ``n <= min(N, 2R)``; ``N`` defaults to ``2R + 1``.
    """
    diff_idx = v1.difference_support(v2)
    if len(diff_idx) == 0:
        R = None
        N = 0 if N is None else N
    else:
        R = _l1_set_distance(phi.support_coords(), box.coords[diff_idx])
        N = 2 * R + 1 if N is None else N
    m1 = moments(box, v1, phi, phi, N)
    m2 = moments(box, v2, phi, phi, N)
    diffs = tuple(a - b for a, b in zip(m1.values, m2.values))
    limit = N if R is None else min(N, 2 * R)
    ok = all(d == 0 for d in diffs[: limit + 1])
    first = None
    if R is not None:
        for n in range(2 * R + 1, N + 1):
            if diffs[n] != 0:
                first = n
                break
    return AgreementReport(R, limit, diffs, bool(ok), first, m1, m2)


def dense_power_moments(box: LatticeBox, v: Potential, phi1: SiteVector, phi2: SiteVector,
                        N: int) -> list:
    """Brute-force ``<phi1, H^n phi2>`` from dense matrix powers (small boxes).

    Exact mode scales ``H`` and the vectors by a common denominator and takes
    integer matrix powers (``int64`` when an entry bound rules out overflow,
    Python integers otherwise), then divides back.
    """
    if box.n_sites > 4096:
        raise ValueError("dense power oracle is meant for small boxes (<= 4096 sites)")
    if not phi1.exact:
        h = dense_matrix(box, v)
        a, b = phi1.values, phi2.values
        out, w = [], b.copy()
        for _ in range(N + 1):
            out.append(float(a.dot(w)))
            w = h.dot(w)
        return out
    n = box.n_sites
    den = math.lcm(*(Fraction(x).denominator for x in v.values))
    va = math.lcm(*(Fraction(x).denominator for x in phi1.values))
    vb = math.lcm(*(Fraction(x).denominator for x in phi2.values))
    rows = []
    for i in range(n):
        row = [0] * n
        for j in box.neighbors[i]:
            if j < n:
                row[j] = den
        row[i] = int(Fraction(v.values[i]) * den)
        rows.append(row)
    growth = max(sum(abs(x) for x in r) for r in rows)
    a = [int(Fraction(x) * va) for x in phi1.values]
    b = [int(Fraction(x) * vb) for x in phi2.values]
    safe = (max(1, growth) ** N) * sum(map(abs, a)) * sum(map(abs, b)) < 2**62
    dtype = np.int64 if safe else object
    m = np.array(rows, dtype=dtype)
    av, bv = np.array(a, dtype=dtype), np.array(b, dtype=dtype)
    power = np.identity(n, dtype=np.int64).astype(dtype)
    out = []
    for k in range(N + 1):
        if k:
            power = power.dot(m)
        out.append(Fraction(int(av.dot(power.dot(bv))), den**k * va * vb))
    return out
