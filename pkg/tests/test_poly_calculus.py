import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.polynomial import chebyshev as C

from propspeed import smoothfn as sf
from propspeed.errors import DegenerateFitError, EnclosureError
from propspeed.lattice import (
    LatticeBox,
    Potential,
    SiteVector,
    SpectralInterval,
    dense_eigendecomposition,
    exact_kernel_entry,
)
from propspeed.poly_calculus import (
    ScaledOperator,
    chebyshev_moments,
    gevrey_decay_fit,
    jackson_coefficients,
    jackson_weights,
    kernel_entry_kpm,
    t41_best_bound,
    t41_bound,
    t41_norms,
    trivial_bound,
)


@pytest.fixture(scope="module")
def random_2d():
    box = LatticeBox(2, 5)
    v = Potential.uniform(box, -1, 1, 17)
    return box, v, dense_eigendecomposition(box, v)


# --- scaled operator and moments ---------------------------------------------


def test_scaling_maps_eigenvalues(random_2d):
    box, v, eig = random_2d
    so = ScaledOperator.gershgorin(box, v)
    assert np.all(np.abs(so.to_unit(eig.eigenvalues)) <= 1)
    k = 7
    vec = eig.vectors[:, k]
    assert np.allclose(so.apply(vec), so.to_unit(eig.eigenvalues[k]) * vec, atol=1e-12)
    assert np.allclose(so.from_unit(so.to_unit([-3.0, 0.1, 2.0])), [-3.0, 0.1, 2.0])


def test_mu0_is_inner_product(random_2d):
    box, v, _ = random_2d
    so = ScaledOperator.gershgorin(box, v)
    a = SiteVector.from_sites(box, {(0, 0): 1.0, (1, 0): 2.0})
    b = SiteVector.from_sites(box, {(1, 0): 0.5, (2, 2): 1.0})
    mu = chebyshev_moments(so, a, b, 5)
    assert mu.values[0] == 1.0
    assert np.all(np.abs(mu.values) <= mu.norm_product * (1 + 1e-12))


@pytest.mark.parametrize("x", [(3, 0), (2, -2), (1, 4)])
def test_moments_vanish_below_separation(random_2d, x):
    box, v, _ = random_2d
    so = ScaledOperator.gershgorin(box, v)
    mu = chebyshev_moments(so, SiteVector.delta(box, (0, 0)), SiteVector.delta(box, x), 12)
    R = sum(map(abs, x))
    assert np.max(np.abs(mu.values[:R])) <= 1e-12
    assert abs(mu.values[R]) > 1e-6


def test_mu2_free_chain():
    box = LatticeBox(1, 20)
    so = ScaledOperator(box, Potential.constant(box, 0), SpectralInterval(-2.0, 2.0))
    phi = SiteVector.delta(box, (0,))
    mu = chebyshev_moments(so, phi, phi, 4)
    assert abs(mu.values[2]) <= 1e-15
    # mu_4 = <8 H_s^4 - 8 H_s^2 + 1> = 8*6/16 - 8*2/4 + 1
    assert math.isclose(mu.values[4], -0.0 + 8 * 6 / 16 - 4 + 1, abs_tol=1e-14)


def test_enclosure_error():
    box = LatticeBox(1, 10)
    so = ScaledOperator(box, Potential.constant(box, 0), SpectralInterval(-1.0, 1.0))
    phi = SiteVector.delta(box, (0,))
    with pytest.raises(EnclosureError):
        chebyshev_moments(so, phi, phi, 40)


# --- Jackson expansions -------------------------------------------------------


def test_jackson_weights_shape():
    g = jackson_weights(30)
    assert g[0] == pytest.approx(1.0, abs=1e-15)
    assert np.all(np.diff(g) < 0) and np.all(g > -1e-15)


def test_constant_function():
    exp = jackson_coefficients(lambda s: np.ones_like(s), 20)
    assert exp.coefficients[0] == pytest.approx(1.0, abs=1e-15)
    assert np.max(np.abs(exp.coefficients[1:])) <= 1e-14


def test_identity_function():
    N = 12
    exp = jackson_coefficients(lambda s: s, N)
    g1 = exp.weights[1]
    assert exp.sup_error <= (1 - g1) + 1e-14
    assert exp.sup_error > 0
    exact = jackson_coefficients(lambda s: s, N, damping=False)
    assert exact.sup_error <= 1e-14


@given(coeffs=st.lists(st.floats(-3, 3), min_size=1, max_size=9))
def test_undamped_reproduces_polynomials(coeffs):
    N = 10
    exp = jackson_coefficients(lambda s: C.chebval(s, coeffs), N, damping=False)
    assert exp.sup_error <= 1e-12
    assert not exp.tail_warning or max(map(abs, coeffs)) == 0


def test_exponential_under_jackson_bound():
    # ||f^(n+1)||_{L1(-1,1)} = e - 1/e for every n
    N = 10
    exp = jackson_coefficients(np.exp, N, damping=False)
    bound = min((math.e - 1 / math.e) * (5 / (N + 1)) ** n for n in range(N + 1))
    assert exp.sup_error <= bound


def test_damped_error_recorded():
    exp = jackson_coefficients(np.exp, 10)
    assert np.isfinite(exp.sup_error) and exp.sup_error > 0


def test_tail_warning_for_unresolved():
    exp = jackson_coefficients(lambda s: np.abs(s) ** 0.5, 8, damping=False)
    assert exp.tail_warning


# --- kernel entries -----------------------------------------------------------


def test_kpm_linear(random_2d):
    box, v, _ = random_2d
    so = ScaledOperator.gershgorin(box, v)
    ident = lambda lam: lam
    assert math.isclose(kernel_entry_kpm(so, ident, (0, 0), (1, 0), 3, damping=False), 1.0, abs_tol=1e-10)
    assert math.isclose(kernel_entry_kpm(so, ident, (0, 0), (0, 0), 3, damping=False),
                        v.at((0, 0)), abs_tol=1e-10)
    assert abs(kernel_entry_kpm(so, ident, (0, 0), (1, 1), 3, damping=False)) <= 1e-10


def test_kpm_one_is_identity(random_2d):
    box, v, _ = random_2d
    so = ScaledOperator.gershgorin(box, v)
    one = lambda lam: np.ones_like(lam)
    assert math.isclose(kernel_entry_kpm(so, one, (2, 1), (2, 1), 5), 1.0, abs_tol=1e-12)


def test_kpm_gaussian_matches_oracle(random_2d):
    box, v, eig = random_2d
    so = ScaledOperator.gershgorin(box, v)
    f = sf.gaussian()
    x, y = (-2, -1), (1, 2)
    ref = exact_kernel_entry(eig, f, x, y)
    got = kernel_entry_kpm(so, f, x, y, 200, damping=False)
    assert abs(got - ref) <= 1e-8


def test_kpm_needs_degree():
    box = LatticeBox(1, 3)
    so = ScaledOperator.gershgorin(box, Potential.constant(box, 0))
    with pytest.raises(ValueError):
        kernel_entry_kpm(so, np.cos, (0,), (0,), 0)


def test_kpm_damped_convergence_monotone(random_2d):
    box, v, eig = random_2d
    so = ScaledOperator.gershgorin(box, v)
    f = sf.gevrey_bump(2, 0.0, 2.5)
    ref = exact_kernel_entry(eig, f, (0, 0), (1, 1))
    errs = [abs(kernel_entry_kpm(so, f, (0, 0), (1, 1), N) - ref) for N in (8, 16, 32, 64, 128, 256)]
    for e0, e1 in zip(errs, errs[1:]):
        assert e1 <= e0 * (1 + 1e-6) + 1e-13


def test_degree_kill(random_2d):
    box, v, _ = random_2d
    so = ScaledOperator.gershgorin(box, v)
    x, y = (0, 0), (3, 2)
    R = 5
    mu = chebyshev_moments(so, SiteVector.delta(box, x), SiteVector.delta(box, y), R - 1)
    rng = np.random.default_rng(3)
    for _ in range(5):
        coeffs = rng.normal(size=R)
        exp = jackson_coefficients(lambda s: C.chebval(s, coeffs), R - 1, damping=False)
        assert abs(np.dot(exp.damped, mu.values)) <= 1e-11


def test_scaling_invariance(random_2d):
    box, v, eig = random_2d
    so = ScaledOperator.gershgorin(box, v)
    iv = so.interval
    wide = SpectralInterval(iv.a - 1.5, iv.b + 0.5)
    f = sf.gaussian(0.2, 1.3)
    a = kernel_entry_kpm(so, f, (0, 0), (2, 1), 300, damping=False)
    b = kernel_entry_kpm(ScaledOperator(box, v, wide), f, (0, 0), (2, 1), 300, damping=False)
    assert abs(a - b) <= 1e-10
    assert t41_bound(f, wide, 3, 1) > t41_bound(f, iv, 3, 1)


# --- t41 bound ---------------------------------------------------------------


def test_t41_formula():
    iv = SpectralInterval(-2.0, 2.0)
    assert t41_bound(None, iv, 10, 5, norm=1.0) == pytest.approx(1.0, rel=1e-15)


@given(R=st.integers(2, 40), n=st.integers(1, 8))
def test_t41_homogeneity(R, n):
    if n > R - 1:
        return
    iv = SpectralInterval(-3.0, 1.0)
    assert t41_bound(None, iv, 2 * R, n, norm=2.5) == pytest.approx(
        t41_bound(None, iv, R, n, norm=2.5) * 2.0**-n, rel=1e-13)


def test_t41_range():
    iv = SpectralInterval(-2.0, 2.0)
    for n in (0, 10):
        with pytest.raises(ValueError):
            t41_bound(None, iv, 10, n, norm=1.0)


def test_t41_polynomial_zero(random_2d):
    box, v, eig = random_2d
    iv = eig.interval
    p = sf.polynomial([0.5, -1.0, 0.25, 0.1])
    assert t41_bound(p, iv, 6, 3) == 0.0
    assert abs(exact_kernel_entry(eig, p, (0, 0), (3, 3))) <= 1e-12


def test_t41_best():
    iv = SpectralInterval(-2.0, 2.0)
    f = sf.gaussian()
    norms = t41_norms(f, iv, 20)
    n_star, best = t41_best_bound(f, iv, 20, norms)
    vals = [t41_bound(f, iv, 20, n, norms[n]) for n in range(1, 20)]
    assert best == min(vals) <= vals[0]
    assert n_star == vals.index(best) + 1
    assert t41_best_bound(f, iv, 2)[0] == 1


def test_t41_dominates_random(random_2d):
    box, v, eig = random_2d
    iv = eig.interval
    f = sf.gaussian()
    norms = t41_norms(f, iv, 11)
    for y in [(1, 1), (2, 1), (3, 0), (2, 3), (4, 4), (-5, 5)]:
        R = sum(map(abs, y))
        k = abs(exact_kernel_entry(eig, f, (0, 0), y))
        assert k <= t41_best_bound(f, iv, R, norms)[1] * (1 + 1e-8) + 1e-13


def test_trivial_bound():
    assert trivial_bound(sf.gaussian(), SpectralInterval(-2.0, 2.0)) == 1.0


# --- decay fit ---------------------------------------------------------------


@settings(max_examples=20)
@given(C0=st.floats(0.1, 10), g0=st.floats(0.1, 2), s=st.sampled_from([1.0, 1.5, 2.0]))
def test_decay_fit_exact_model(C0, g0, s):
    Rs = range(2, 12)
    fit = gevrey_decay_fit([(R, C0 * math.exp(-g0 * R ** (1 / s))) for R in Rs], s)
    assert fit.C == pytest.approx(C0, rel=1e-10)
    assert fit.gamma == pytest.approx(g0, rel=1e-10)
    assert fit.residual <= 1e-10


def test_decay_fit_gaussian_positive_rate():
    box = LatticeBox(1, 30)
    eig = dense_eigendecomposition(box, Potential.constant(box, 0))
    entries = [(R, exact_kernel_entry(eig, sf.gaussian(), (0,), (R,))) for R in range(2, 15, 2)]
    fit = gevrey_decay_fit(entries, 1.0)
    assert fit.gamma > 0


def test_decay_fit_drops_zeros():
    data = [(R, math.exp(-R)) for R in range(1, 7)] + [(7, 0.0), (8, 1e-14)]
    fit = gevrey_decay_fit(data, 1.0)
    assert fit.dropped == (7.0, 8.0)


def test_decay_fit_degenerate():
    with pytest.raises(DegenerateFitError):
        gevrey_decay_fit([(3, 0.1), (3, 0.2)], 1.0)
    with pytest.raises(DegenerateFitError):
        gevrey_decay_fit([(R, 0.0) for R in range(5)], 1.0)
