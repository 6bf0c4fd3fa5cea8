"""Discrete Schrödinger operators on finite boxes of Z^d.

The operator is

    (H u)(n) = sum_{|m - n|_1 = 1} u(m) + V(n) u(n)

restricted to the box ``{x : |x_i| <= L}`` with Dirichlet truncation
(neighbours outside the box contribute nothing).  Potentials and vectors
carry either float64 or exact ``fractions.Fraction`` scalars; the two modes
are never mixed implicitly.
"""

from __future__ import annotations

import itertools
import math
import os
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from propspeed.errors import DomainError, OracleLimitError

DEFAULT_ORACLE_LIMIT = 4096
ORACLE_LIMIT_ENV = "PROPSPEED_ORACLE_LIMIT"

_ZERO = Fraction(0)


def oracle_limit() -> int:
    """Site cap for the dense oracle, honouring ``PROPSPEED_ORACLE_LIMIT``."""
    raw = os.environ.get(ORACLE_LIMIT_ENV)
    if raw is None or raw.strip() == "":
        return DEFAULT_ORACLE_LIMIT
    try:
        value = int(raw)
    except ValueError as exc:
        raise ValueError(f"{ORACLE_LIMIT_ENV} must be an integer, got {raw!r}") from exc
    if value <= 0:
        raise ValueError(f"{ORACLE_LIMIT_ENV} must be positive, got {value}")
    return value


@dataclass(frozen=True)
class LatticeBox:
    """The box ``{x in Z^d : |x_i| <= L}``.

    Sites are numbered row-major over the coordinates shifted to ``[0, 2L]``,
    so site 0 is ``(-L, ..., -L)`` and the last site is ``(L, ..., L)``.
    """

    d: int
    L: int

    def __post_init__(self):
        if int(self.d) != self.d or self.d < 1:
            raise ValueError(f"dimension must be a positive integer, got {self.d}")
        if int(self.L) != self.L or self.L < 1:
            raise ValueError(f"half width must be a positive integer, got {self.L}")

    @property
    def side(self) -> int:
        return 2 * self.L + 1

    @property
    def n_sites(self) -> int:
        return self.side**self.d

    @cached_property
    def _strides(self) -> np.ndarray:
        return self.side ** np.arange(self.d - 1, -1, -1, dtype=np.int64)

    @cached_property
    def coords(self) -> np.ndarray:
        """``(n_sites, d)`` integer array of site coordinates, in ordinal order."""
        axes = [np.arange(-self.L, self.L + 1, dtype=np.int64)] * self.d
        grid = np.meshgrid(*axes, indexing="ij")
        out = np.stack([g.ravel() for g in grid], axis=1)
        out.setflags(write=False)
        return out

    @cached_property
    def neighbors(self) -> np.ndarray:
        """``(n_sites, 2d)`` neighbour ordinals; missing neighbours are ``n_sites``.

        Column order is ``(-e_0, +e_0, -e_1, +e_1, ...)``; it fixes the
        summation order of :func:`apply_h`.
        """
        c = self.coords
        n = self.n_sites
        out = np.full((n, 2 * self.d), n, dtype=np.int64)
        for axis in range(self.d):
            for k, step in enumerate((-1, 1)):
                moved = c[:, axis] + step
                inside = np.abs(moved) <= self.L
                out[inside, 2 * axis + k] = (
                    np.arange(n, dtype=np.int64)[inside] + step * self._strides[axis]
                )
        out.setflags(write=False)
        return out

    def contains(self, x: Sequence[int]) -> bool:
        return len(x) == self.d and all(abs(int(xi)) <= self.L for xi in x)

    def index(self, x: Sequence[int]) -> int:
        """Ordinal of site ``x``."""
        if not self.contains(x):
            raise IndexError(f"site {tuple(x)} is outside the box d={self.d}, L={self.L}")
        return int(np.dot(np.asarray(x, dtype=np.int64) + self.L, self._strides))

    def site(self, i: int) -> tuple[int, ...]:
        """Coordinates of ordinal ``i``."""
        if not 0 <= i < self.n_sites:
            raise IndexError(f"ordinal {i} out of range")
        return tuple(int(v) for v in self.coords[i])

    def l1_from(self, x: Sequence[int]) -> np.ndarray:
        """``|y - x|_1`` for every site ``y`` of the box."""
        return np.abs(self.coords - np.asarray(x, dtype=np.int64)).sum(axis=1)


def _as_fraction(value) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, (int, np.integer)):
        return Fraction(int(value))
    if isinstance(value, str):
        return Fraction(value)
    raise TypeError(
        f"exact mode needs int, Fraction or decimal string scalars, got {type(value).__name__}"
    )


def _exact_array(values: Iterable) -> np.ndarray:
    vals = [_as_fraction(v) for v in values]
    out = np.empty(len(vals), dtype=object)
    out[:] = vals
    return out


def _float_array(values) -> np.ndarray:
    arr = np.asarray(values)
    if arr.dtype == object:
        raise TypeError("float mode got object scalars; convert explicitly with to_float()")
    return np.ascontiguousarray(arr, dtype=np.float64)


@dataclass(frozen=True, eq=False)
class Potential:
    """A bounded potential on a box; ``values[i]`` is ``V`` at ordinal ``i``."""

    box: LatticeBox
    values: np.ndarray
    exact: bool = False

    def __post_init__(self):
        if self.exact:
            vals = _exact_array(self.values)
        else:
            vals = _float_array(self.values)
            if not np.all(np.isfinite(vals)):
                raise ValueError("potential must be finite (bounded V)")
        if vals.shape != (self.box.n_sites,):
            raise ValueError(f"expected {self.box.n_sites} potential values, got {vals.shape}")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @classmethod
    def constant(cls, box: LatticeBox, c=0, exact: bool = False) -> "Potential":
        if exact:
            return cls(box, [_as_fraction(c)] * box.n_sites, exact=True)
        return cls(box, np.full(box.n_sites, float(c)))

    @classmethod
    def from_sites(cls, box, mapping: Mapping, default=0, exact: bool = False) -> "Potential":
        """Potential equal to ``default`` except at the listed sites."""
        vals = [default] * box.n_sites
        for x, value in mapping.items():
            vals[box.index(x)] = value
        if exact:
            return cls(box, vals, exact=True)
        return cls(box, np.array(vals, dtype=np.float64))

    @classmethod
    def uniform(cls, box: LatticeBox, lo: float, hi: float, seed: int) -> "Potential":
        """I.i.d. uniform values in ``[lo, hi]``."""
        rng = np.random.default_rng(seed)
        return cls(box, rng.uniform(lo, hi, size=box.n_sites))

    @classmethod
    def random_rational(
        cls, box: LatticeBox, bound, seed: int, denominator: int = 12
    ) -> "Potential":
        """Exact potential with values ``k / denominator`` uniform in ``[-bound, bound]``."""
        return cls.rational_uniform(box, -Fraction(bound), Fraction(bound), seed, denominator)

    @classmethod
    def rational_uniform(
        cls, box: LatticeBox, lo, hi, seed: int, denominator: int = 12
    ) -> "Potential":
        """Exact values ``k / denominator`` drawn uniformly from ``[lo, hi]``."""
        lo_k = math.ceil(Fraction(lo) * denominator)
        hi_k = math.floor(Fraction(hi) * denominator)
        if hi_k < lo_k:
            raise ValueError(f"no multiple of 1/{denominator} in [{lo}, {hi}]")
        rng = np.random.default_rng(seed)
        nums = rng.integers(lo_k, hi_k + 1, size=box.n_sites)
        return cls(box, [Fraction(int(k), denominator) for k in nums], exact=True)

    @cached_property
    def v_min(self):
        return min(self.values) if self.exact else float(self.values.min())

    @cached_property
    def v_max(self):
        return max(self.values) if self.exact else float(self.values.max())

    def at(self, x: Sequence[int]):
        return self.values[self.box.index(x)]

    def to_float(self) -> "Potential":
        if not self.exact:
            return self
        return Potential(self.box, np.array([float(v) for v in self.values]))

    def added(self, mapping: Mapping) -> "Potential":
        """Copy with ``mapping[x]`` added to the value at each listed site."""
        vals = list(self.values)
        for x, dv in mapping.items():
            i = self.box.index(x)
            vals[i] = vals[i] + (_as_fraction(dv) if self.exact else float(dv))
        if self.exact:
            return Potential(self.box, vals, exact=True)
        return Potential(self.box, np.array(vals, dtype=np.float64))

    def embedded(self, box: LatticeBox, fill=0) -> "Potential":
        """Same potential on a box of equal dimension, ``fill`` on new sites.

        Shrinking is allowed too; it restricts ``V`` to the smaller box.
        """
        if box.d != self.box.d:
            raise ValueError("cannot embed into a box of different dimension")
        fill = _as_fraction(fill) if self.exact else float(fill)
        vals = [fill] * box.n_sites
        inside = np.all(np.abs(box.coords) <= self.box.L, axis=1)
        src = self._ordinals_of(box.coords[inside])
        for dst, s in zip(np.flatnonzero(inside), src):
            vals[dst] = self.values[s]
        if self.exact:
            return Potential(box, vals, exact=True)
        return Potential(box, np.array(vals, dtype=np.float64))

    def _ordinals_of(self, coords: np.ndarray) -> np.ndarray:
        return (coords + self.box.L) @ self.box._strides

    def difference_support(self, other: "Potential") -> np.ndarray:
        """Ordinals where the two potentials differ."""
        _check_same(self, other)
        if self.exact:
            return np.array(
                [i for i, (a, b) in enumerate(zip(self.values, other.values)) if a != b],
                dtype=np.int64,
            )
        return np.flatnonzero(self.values != other.values)


@dataclass(frozen=True, eq=False)
class SiteVector:
    """A vector in l2(box)."""

    box: LatticeBox
    values: np.ndarray
    exact: bool = False

    def __post_init__(self):
        if self.exact:
            vals = _exact_array(self.values)
        else:
            vals = _float_array(self.values)
        if vals.shape != (self.box.n_sites,):
            raise ValueError(f"expected {self.box.n_sites} amplitudes, got {vals.shape}")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @classmethod
    def delta(cls, box: LatticeBox, x: Sequence[int], exact: bool = False) -> "SiteVector":
        """Unit vector located at ``x``."""
        i = box.index(x)
        if exact:
            vals = np.full(box.n_sites, _ZERO, dtype=object)
            vals[i] = Fraction(1)
            return cls(box, vals, exact=True)
        vals = np.zeros(box.n_sites)
        vals[i] = 1.0
        return cls(box, vals)

    @classmethod
    def from_sites(cls, box, mapping: Mapping, exact: bool = False) -> "SiteVector":
        if exact:
            vals = np.full(box.n_sites, _ZERO, dtype=object)
        else:
            vals = np.zeros(box.n_sites)
        for x, a in mapping.items():
            vals[box.index(x)] = _as_fraction(a) if exact else float(a)
        return cls(box, vals, exact=exact)

    def support(self) -> np.ndarray:
        """Ordinals of the nonzero amplitudes, ascending."""
        if self.exact:
            return np.array([i for i, a in enumerate(self.values) if a != 0], dtype=np.int64)
        return np.flatnonzero(self.values)

    def support_coords(self) -> np.ndarray:
        return self.box.coords[self.support()]

    def inner(self, other: "SiteVector"):
        """Real inner product ``<self, other>``."""
        _check_same(self, other)
        if self.exact:
            idx = np.intersect1d(self.support(), other.support())
            return sum((self.values[i] * other.values[i] for i in idx), _ZERO)
        return float(np.dot(self.values, other.values))

    def norm2(self):
        """``sum |phi(x)|^2``."""
        return self.inner(self)

    def to_float(self) -> "SiteVector":
        if not self.exact:
            return self
        return SiteVector(self.box, np.array([float(a) for a in self.values]))

    def embedded(self, box: LatticeBox) -> "SiteVector":
        """Same amplitudes on another box of equal dimension (zero on new sites)."""
        mapping = {
            tuple(int(c) for c in self.box.coords[i]): self.values[i] for i in self.support()
        }
        return SiteVector.from_sites(box, mapping, exact=self.exact)


def _check_same(a, b):
    if a.box != b.box:
        raise ValueError("objects live on different boxes")
    if a.exact != b.exact:
        raise TypeError("mixed scalar modes (float vs exact); convert explicitly")


def apply_h(box: LatticeBox, v: Potential, psi: SiteVector) -> SiteVector:
    """Return ``H psi`` (Dirichlet truncation at the box boundary).

    Summation order per site is fixed: the ``2d`` neighbour terms in
    coordinate order ``(-e_0, +e_0, -e_1, ...)``, then ``V psi``.  In exact
    mode only the 1-neighbourhood of ``supp(psi)`` is visited.
    """
    if v.box != box or psi.box != box:
        raise ValueError("potential, vector and box disagree")
    _check_same(v, psi)
    if psi.exact:
        return SiteVector(box, _apply_exact(box, v.values, psi.values), exact=True)
    return SiteVector(box, _apply_float(box, v.values, psi.values))


def _apply_float(box: LatticeBox, vvals: np.ndarray, x: np.ndarray) -> np.ndarray:
    pad = np.append(x, 0.0)
    nbr = box.neighbors
    out = pad[nbr[:, 0]]
    for j in range(1, nbr.shape[1]):
        out = out + pad[nbr[:, j]]
    return out + vvals * x


def _apply_exact(box: LatticeBox, vvals: np.ndarray, x: np.ndarray) -> np.ndarray:
    n = box.n_sites
    nbr = box.neighbors
    supp = [i for i in range(n) if x[i] != 0]
    rows = set(supp)
    for i in supp:
        rows.update(int(j) for j in nbr[i] if j < n)
    out = np.full(n, _ZERO, dtype=object)
    for i in sorted(rows):
        acc = _ZERO
        for j in nbr[i]:
            if j < n:
                acc = acc + x[j]
        out[i] = acc + vvals[i] * x[i]
    return out


@dataclass(frozen=True)
class SpectralInterval:
    a: float
    b: float

    def __post_init__(self):
        if not self.a < self.b:
            raise ValueError(f"need a < b, got [{self.a}, {self.b}]")

    @property
    def width(self) -> float:
        return self.b - self.a

    def contains(self, values, slack: float = 0.0) -> bool:
        values = np.asarray(values, dtype=float)
        return bool(np.all(values >= self.a - slack) and np.all(values <= self.b + slack))

    def union(self, other: "SpectralInterval") -> "SpectralInterval":
        return SpectralInterval(min(self.a, other.a), max(self.b, other.b))


def spectral_interval(box: LatticeBox, v: Potential) -> SpectralInterval:
    """Gershgorin enclosure ``[min V - 2d, max V + 2d]``."""
    return SpectralInterval(float(v.v_min) - 2 * box.d, float(v.v_max) + 2 * box.d)


def dense_matrix(box: LatticeBox, v: Potential) -> np.ndarray:
    """The box operator as a dense float64 matrix."""
    n = box.n_sites
    h = np.zeros((n, n))
    rows = np.arange(n)
    for col in box.neighbors.T:
        ok = col < n
        h[rows[ok], col[ok]] = 1.0
    h[rows, rows] = v.to_float().values
    return h


@dataclass(frozen=True, eq=False)
class EigenSystem:
    """Dense eigendecomposition of a box operator.

    ``vectors[:, k]`` is the eigenvector of ``eigenvalues[k]``; each column
    is signed so that its largest-magnitude entry (first one on ties) is
    positive.
    """

    box: LatticeBox
    eigenvalues: np.ndarray
    vectors: np.ndarray
    residual: float
    interval: SpectralInterval

    def f_values(self, f: Callable) -> np.ndarray:
        domain = getattr(f, "domain", None)
        if domain is not None:
            lo, hi = domain
            if self.eigenvalues[0] < lo or self.eigenvalues[-1] > hi:
                raise DomainError(
                    f"function defined on [{lo}, {hi}] but spectrum spans "
                    f"[{self.eigenvalues[0]}, {self.eigenvalues[-1]}]"
                )
        vals = np.asarray(f(self.eigenvalues), dtype=float)
        if vals.shape != self.eigenvalues.shape:
            vals = np.broadcast_to(vals, self.eigenvalues.shape)
        if not np.all(np.isfinite(vals)):
            raise DomainError("function is not finite on the spectrum")
        return vals

    def function_matrix(self, f: Callable) -> np.ndarray:
        """Dense ``f(H)``."""
        fv = self.f_values(f)
        return (self.vectors * fv) @ self.vectors.T

    def form(self, f: Callable, phi1: SiteVector, phi2: SiteVector) -> float:
        """``<phi1, f(H) phi2>``."""
        a = self.vectors.T @ phi1.to_float().values
        b = self.vectors.T @ phi2.to_float().values
        return float(np.sum(self.f_values(f) * a * b))

    def spectral_weights(self, phi: SiteVector) -> np.ndarray:
        """Point masses ``|<v_k, phi>|^2`` of the spectral measure of ``phi``."""
        return (self.vectors.T @ phi.to_float().values) ** 2


def dense_eigendecomposition(box: LatticeBox, v: Potential) -> EigenSystem:
    """Exact-diagonalisation oracle (float64, ``numpy.linalg.eigh``)."""
    limit = oracle_limit()
    if box.n_sites > limit:
        raise OracleLimitError(box.n_sites, limit)
    h = dense_matrix(box, v)
    lam, vec = np.linalg.eigh(h)
    pivot = np.argmax(np.abs(vec), axis=0)
    signs = np.sign(vec[pivot, np.arange(vec.shape[1])])
    vec = vec * signs
    residual = float(np.max(np.linalg.norm(h @ vec - vec * lam, axis=0)))
    lam.setflags(write=False)
    vec.setflags(write=False)
    return EigenSystem(box, lam, vec, residual, spectral_interval(box, v))


def exact_kernel_entry(eig: EigenSystem, f: Callable, x: Sequence[int], y: Sequence[int]) -> float:
    """``<delta_x, f(H) delta_y> = sum_k f(lambda_k) v_k(x) v_k(y)``."""
    i, j = eig.box.index(x), eig.box.index(y)
    return float(np.sum(eig.f_values(f) * eig.vectors[i] * eig.vectors[j]))


def all_sites(box: LatticeBox) -> Iterable[tuple[int, ...]]:
    return itertools.product(range(-box.L, box.L + 1), repeat=box.d)
