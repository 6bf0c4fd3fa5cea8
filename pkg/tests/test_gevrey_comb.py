import io
import math
from fractions import Fraction

import mpmath
import pytest
from hypothesis import given, strategies as st

from propspeed.gevrey_comb import (
    cd,
    check_ind_bound,
    check_intermediate_bound,
    coefficient_table,
    constant_search_holds,
    gevrey_constant_search,
    recursion_step,
    symbolic_gn_check,
    symbolic_table,
    write_cd_csv,
)


def test_small_tables():
    assert coefficient_table(0).as_ij() == {(0, 0): 1}
    assert coefficient_table(1).as_ij() == {(1, 1): 2}
    assert coefficient_table(2).as_ij() == {(0, 1): 2, (2, 2): 4}
    # g''' = 12 k f'' + 8 k^3 f'''
    assert coefficient_table(3).as_ij() == {(1, 2): 12, (3, 3): 8}


def test_literal_recursion_matches_diagonal_form():
    prev = {(0, 0): 1}
    for n in range(1, 31):
        prev = recursion_step(prev, n)
        assert prev == coefficient_table(n).as_ij()


@given(n=st.integers(0, 200))
def test_index_law_and_sign(n):
    for i, j, v in coefficient_table(n).items():
        assert i == 2 * j - n
        assert n <= 2 * j and j <= n
        assert v > 0


@pytest.mark.parametrize("n", list(range(0, 65, 8)) + [64])
def test_c0_is_power_of_two(n):
    assert cd(n, 0) == 2**n


def test_cd_examples():
    assert cd(2, 1) == 2
    assert cd(4, 2) == symbolic_table(4)[(0, 2)] == 12
    for n in range(0, 12):
        for d in range(n // 2 + 1, n + 3):
            assert cd(n, d) == 0


def test_cd_negative():
    with pytest.raises(ValueError):
        cd(3, -1)


def test_large_order_exact():
    # C_{n/2}(n) for even n is the constant term = (n-1)!! 2^{n/2}
    n = 400
    assert cd(n, n // 2) == math.prod(range(1, n, 2)) * 2 ** (n // 2)


def test_table_lookup_accessor():
    t = coefficient_table(5)
    assert t.a(1, 3) == cd(5, 2)
    assert t.a(2, 3) == 0
    assert t.a(-1, 0) == 0


def test_ind_bound():
    rep = check_ind_bound(60)
    assert rep.passed and not rep.violations
    assert rep.max_ratio == 1 and rep.argmax == (0, 0)
    assert isinstance(rep.max_ratio, Fraction)
    assert rep.checked == sum(n // 2 + 1 for n in range(61))


def test_ind_d0_equality():
    for n in range(1, 20):
        assert math.factorial(0) * cd(n, 0) == 2 ** (n - 0) * n**0


def test_intermediate_bound():
    rep = check_intermediate_bound(40)
    assert rep.passed and rep.max_ratio <= 1


def test_symbolic_oracle():
    rep = symbolic_gn_check(10)
    assert rep.passed, rep.mismatches
    assert rep.tables[0] == {(0, 0): 1}


def test_symbolic_limit():
    with pytest.raises(ValueError):
        symbolic_gn_check(15)


@pytest.mark.parametrize("n,k", [(6, 0.7), (9, -0.4), (12, 1.1)])
def test_numeric_spot_check(n, k):
    # f = exp: all f^(j)(k^2) = e^{k^2}
    val = coefficient_table(n).evaluate(k, [math.exp(k * k)] * (n + 1))
    ref = float(mpmath.diff(lambda x: mpmath.exp(x * x), k, n))
    assert val == pytest.approx(ref, rel=1e-12)


@pytest.mark.parametrize("s", [1.0, 1.5, 2.0])
def test_constant_search(s):
    cs = gevrey_constant_search(s, n_max=200)
    assert math.isfinite(cs.C) and cs.C >= 1.0
    assert constant_search_holds(cs)
    # smallest on the grid: one step down fails
    smaller = type(cs)(cs.s, cs.C / 1.01, cs.argmax, cs.n_max)
    assert cs.C == 1.0 or not constant_search_holds(smaller)


def test_cd_csv():
    buf = io.StringIO()
    write_cd_csv(buf, 4)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "n,d,C_d(n)"
    assert "2,1,2" in lines and "4,2,12" in lines
    assert len(lines) == 1 + sum(n // 2 + 1 for n in range(5))
