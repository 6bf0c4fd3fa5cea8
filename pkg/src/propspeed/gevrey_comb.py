"""Exact coefficient tables for the derivatives of ``g(k) = f(k**2)``.

    g^(n)(k) = sum_{i,j} a_ij(n) k^i f^(j)(k^2),
    a_ij(n)  = (i + 1) a_{i+1,j}(n-1) + 2 a_{i-1,j-1}(n-1),   a_00(0) = 1,

with out-of-range indices read as 0.  Nonzero entries satisfy
``i = 2j - n``, so each order is stored by ``d = j - i`` as
``C_d(n) = a_{n-2d, n-d}(n)``, ``0 <= d <= n/2``.  All arithmetic is on
Python integers.
"""

from __future__ import annotations

import csv
import math
import threading
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator

_lock = threading.Lock()
_rows: list[tuple[int, ...]] = [(1,)]  # _rows[n][d] = C_d(n)


def recursion_step(prev: dict, n: int) -> dict:
    """One step of the recursion on ``{(i, j): a_ij(n-1)}``, literal index form."""
    if n < 1:
        raise ValueError("n must be >= 1")
    cand = set()
    for i, j in prev:
        cand.add((i - 1, j))
        cand.add((i + 1, j + 1))
    out = {}
    for i, j in cand:
        if i < 0 or j < 0:
            continue
        v = (i + 1) * prev.get((i + 1, j), 0) + 2 * prev.get((i - 1, j - 1), 0)
        if v:
            out[(i, j)] = v
    return out


def _extend(n: int) -> None:
    with _lock:
        while len(_rows) <= n:
            m = len(_rows)
            prev = _rows[-1]
            # C_d(m) = (m - 2d + 1) C_{d-1}(m-1) + 2 C_d(m-1); the index map of the
            # literal recursion under (i, j) = (m - 2d, m - d)
            row = []
            for d in range(m // 2 + 1):
                a = prev[d - 1] * (m - 2 * d + 1) if d >= 1 else 0
                b = 2 * prev[d] if d < len(prev) else 0
                row.append(a + b)
            _rows.append(tuple(row))


@dataclass(frozen=True)
class CoefficientTable:
    """``a_ij(n)`` stored as ``entries[d] = C_d(n)`` with ``(i, j) = (n - 2d, n - d)``."""

    n: int
    entries: tuple

    def a(self, i: int, j: int) -> int:
        d = j - i
        if i < 0 or j < 0 or i != 2 * j - self.n or not 0 <= d < len(self.entries):
            return 0
        return self.entries[d]

    def items(self) -> Iterator[tuple[int, int, int]]:
        """``(i, j, a_ij)`` for the nonzero entries, ``d`` ascending."""
        for d, v in enumerate(self.entries):
            if v:
                yield self.n - 2 * d, self.n - d, v

    def as_ij(self) -> dict:
        return {(i, j): v for i, j, v in self.items()}

    def evaluate(self, k: float, fderivs) -> float:
        """``sum a_ij k^i f^(j)(k^2)``; ``fderivs[j]`` is ``f^(j)(k^2)``."""
        return math.fsum(v * k**i * fderivs[j] for i, j, v in self.items())


def coefficient_table(n: int) -> CoefficientTable:
    if n < 0:
        raise ValueError("n must be >= 0")
    _extend(n)
    return CoefficientTable(n, _rows[n])


def cd(n: int, d: int) -> int:
    """``C_d(n)``; 0 when ``n < 2d``."""
    if d < 0 or n < 0:
        raise ValueError("n and d must be >= 0")
    if 2 * d > n:
        return 0
    _extend(n)
    return _rows[n][d]


@dataclass(frozen=True)
class IndReport:
    """``d! C_d(n) <= 2^(n-2d) n^(2d)`` over ``n <= n_max``.

    ``max_ratio`` is exact; ``argmax`` is the ``(n, d)`` attaining it.
    """

    n_max: int
    passed: bool
    max_ratio: Fraction
    argmax: tuple
    violations: tuple
    checked: int


def check_ind_bound(n_max: int) -> IndReport:
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    _extend(n_max)
    best, arg, bad, count = Fraction(0), None, [], 0
    for n in range(n_max + 1):
        for d in range(n // 2 + 1):
            lhs = math.factorial(d) * _rows[n][d]
            rhs = 2 ** (n - 2 * d) * n ** (2 * d)  # 0**0 == 1
            r = Fraction(lhs, rhs)
            count += 1
            if r > best:
                best, arg = r, (n, d)
            if lhs > rhs:
                bad.append((n, d))
    return IndReport(n_max, not bad, best, arg, tuple(bad), count)


def check_intermediate_bound(n_max: int = 40) -> IndReport:
    """``(d-1)! C_d(n) <= 2^(n-2d+1) sum_{j=1}^{n-1} j^(2d-1)`` for ``d >= 1``."""
    _extend(n_max)
    best, arg, bad, count = Fraction(0), None, [], 0
    for n in range(2, n_max + 1):
        for d in range(1, n // 2 + 1):
            lhs = math.factorial(d - 1) * _rows[n][d]
            rhs = 2 ** (n - 2 * d + 1) * sum(j ** (2 * d - 1) for j in range(1, n))
            r = Fraction(lhs, rhs)
            count += 1
            if r > best:
                best, arg = r, (n, d)
            if lhs > rhs:
                bad.append((n, d))
    return IndReport(n_max, not bad, best, arg, tuple(bad), count)


@dataclass(frozen=True)
class SymbolicReport:
    n_max: int
    passed: bool
    mismatches: tuple
    tables: dict


def symbolic_table(n: int) -> dict:
    """``{(i, j): a_ij(n)}`` by sympy differentiation of ``f(k**2)``, ``f`` undefined."""
    import sympy as sp

    k = sp.Symbol("k")
    f = sp.Function("f")
    expr = sp.diff(f(k**2), k, n) if n else f(k**2)
    F = sp.symbols(f"F0:{n + 1}")
    repl = {f(k**2): F[0]}
    for s in expr.atoms(sp.Subs):
        der = s.expr
        if not (isinstance(der, sp.Derivative) and s.point == (k**2,)):
            raise AssertionError(f"unexpected term {s}")
        repl[s] = F[der.derivative_count]
    poly = sp.Poly(sp.expand(expr.xreplace(repl)), k, *F)
    out = {}
    for monom, c in poly.terms():
        i, js = monom[0], monom[1:]
        if sum(js) != 1:
            raise AssertionError(f"term not linear in f-derivatives: {monom}")
        out[(i, js.index(1))] = int(c)
    return out


def symbolic_gn_check(n_max: int) -> SymbolicReport:
    """Compare :func:`coefficient_table` with the symbolic oracle for ``n <= n_max``."""
    if n_max > 14:
        raise ValueError("n_max <= 14 (symbolic expressions blow up)")
    bad, tabs = [], {}
    for n in range(n_max + 1):
        sym = symbolic_table(n)
        tabs[n] = sym
        if sym != coefficient_table(n).as_ij():
            bad.append(n)
    return SymbolicReport(n_max, not bad, tuple(bad), tabs)


@dataclass(frozen=True)
class ConstantSearch:
    """Smallest ``C`` on a 1% grid with ``n^(2d) d^(-d) (n-d)^(s(n-d)) <= C^(n+1) n^(s n)``."""

    s: float
    C: float
    argmax: tuple
    n_max: int


def _log_ratio(n: int, d: int, s: float) -> float:
    def xlogx(x, e):
        return 0.0 if x == 0 else e * math.log(x)

    return (xlogx(n, 2 * d) - xlogx(d, d) + xlogx(n - d, s * (n - d)) - xlogx(n, s * n)) / (n + 1)


def gevrey_constant_search(s: float, n_max: int = 200) -> ConstantSearch:
    best, arg = -math.inf, None
    for n in range(n_max + 1):
        for d in range(n // 2 + 1):
            v = _log_ratio(n, d, s)
            if v > best:
                best, arg = v, (n, d)
    step = math.log(1.01)
    k = max(0, math.ceil(best / step - 1e-12))
    return ConstantSearch(float(s), math.exp(k * step), arg, n_max)


def constant_search_holds(cs: ConstantSearch) -> bool:
    """Re-check every grid point against ``cs.C`` in log space."""
    logC = math.log(cs.C)
    return all(_log_ratio(n, d, cs.s) <= logC + 1e-12
               for n in range(cs.n_max + 1) for d in range(n // 2 + 1))


def write_cd_csv(fh, n_max: int) -> None:
    """CSV rows ``n,d,C_d(n)`` for ``0 <= d <= n/2``, ``n <= n_max``."""
    _extend(n_max)
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["n", "d", "C_d(n)"])
    for n in range(n_max + 1):
        for d, v in enumerate(_rows[n]):
            w.writerow([n, d, v])
