import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad
from scipy.linalg import eigh_tridiagonal

from impulsive_iss.functionspace import (
    GridFunction,
    Poly,
    c_norm_poly,
    discrete_friedrichs_constant,
    forward_diff,
    friedrichs_check,
    gauss_integral,
    grid_nodes,
    h01_norm,
    h01_norm_poly,
    l2_norm,
    l2_norm_poly,
    laplacian_norm,
)
from impulsive_iss.harness import observed_order

from . import frozen

PI = math.pi


def test_poly_trims_trailing_zeros():
    assert Poly([1.0, 2.0, 0.0, 0.0]).coeffs == (1.0, 2.0)
    assert Poly([0.0, 0.0]).is_zero
    assert Poly([0.0]).degree == 0


def test_poly_degree_cap():
    Poly([1.0] * 17)
    with pytest.raises(ValueError):
        Poly([1.0] * 18)


def test_poly_rejects_nonfinite():
    with pytest.raises(ValueError):
        Poly([1.0, float("nan")])


def test_poly_arithmetic():
    p, q = Poly([1, 2]), Poly([0, 1, 3])
    z = np.linspace(-1, 2, 7)
    np.testing.assert_allclose((p * q)(z), p(z) * q(z))
    np.testing.assert_allclose((p + q)(z), p(z) + q(z))
    np.testing.assert_allclose((p - q)(z), p(z) - q(z))
    np.testing.assert_allclose((-p)(z), -p(z))
    np.testing.assert_allclose(q.deriv()(z), 1 + 6 * z)
    assert Poly([5]).deriv().is_zero


def test_vanishes_at_ends():
    assert Poly([0, PI, -1]).vanishes_at_ends(PI)
    assert not Poly([1, 0, -1]).vanishes_at_ends(PI)


def test_l2_of_linear_coefficient():
    assert l2_norm_poly(Poly([0, 0.05]), PI) == pytest.approx(0.05 * math.sqrt(PI**3 / 3), rel=1e-14)
    assert l2_norm_poly(Poly([0, 0.05]), PI) == pytest.approx(frozen.D_PART, rel=1e-14)


def test_h01_of_quadratic_bump():
    p = Poly([0, 0.05 * PI, -0.05])
    assert h01_norm_poly(p, PI) == pytest.approx(0.05 * math.sqrt(PI**3 / 3), rel=1e-14)


def test_c_norm_constant():
    for l in (0.3, 1.0, 7.0):
        assert c_norm_poly(Poly([1.0]), l) == 1.0


def test_c_norm_interior_max():
    # z(pi - z) peaks at pi/2 with value pi^2/4
    assert c_norm_poly(Poly([0, PI, -1]), PI) == pytest.approx(PI**2 / 4, rel=1e-14)
    # endpoint maximum
    assert c_norm_poly(Poly([0, 1]), 2.0) == 2.0


@given(st.lists(st.floats(-3, 3), min_size=1, max_size=17), st.floats(0.2, 4.0))
@settings(max_examples=60, deadline=None)
def test_gauss_matches_monomial_integrals(cs, l):
    p = Poly(cs)
    exact = sum(c * l ** (k + 1) / (k + 1) for k, c in enumerate(p.coeffs))
    scale = sum(abs(c) * l ** (k + 1) / (k + 1) for k, c in enumerate(p.coeffs))
    assert abs(gauss_integral(p, l) - exact) <= 1e-13 * max(scale, 1e-300)


@given(st.lists(st.floats(-2, 2), min_size=1, max_size=8), st.floats(0.5, 3.0))
@settings(max_examples=30, deadline=None)
def test_poly_norms_match_adaptive_quadrature(cs, l):
    p = Poly(cs)
    ref = math.sqrt(quad(lambda z: p(z) ** 2, 0, l, epsabs=1e-14, epsrel=1e-13)[0])
    assert l2_norm_poly(p, l) == pytest.approx(ref, rel=1e-10, abs=1e-12)
    zs = np.linspace(0, l, 20001)
    assert c_norm_poly(p, l) >= np.max(np.abs(p(zs))) - 1e-12


def test_grid_function_invariants():
    with pytest.raises(ValueError):
        GridFunction(1.0, 2, np.zeros(4))
    with pytest.raises(ValueError):
        GridFunction(1.0, 5, np.zeros(6))
    with pytest.raises(ValueError):
        GridFunction(1.0, 3, np.array([1.0, 0, 0, 0, 0]))
    f = GridFunction.from_function(np.sin, PI, 10)
    assert f.values[0] == 0.0 and f.values[-1] == 0.0
    with pytest.raises(ValueError):
        f.values[3] = 1.0


def test_grid_function_equality_and_hash():
    a = GridFunction.from_function(np.sin, PI, 10)
    b = GridFunction.from_interior(a.interior.copy(), PI)
    assert a == b and hash(a) == hash(b)


def test_zero_norms():
    f = GridFunction.zeros(PI, 20)
    assert l2_norm(f) == 0.0 and h01_norm(f) == 0.0


def test_sine_norms():
    f = GridFunction.from_function(np.sin, PI, 199)
    h = f.h
    assert abs(l2_norm(f) - math.sqrt(PI / 2)) < 5 * h**2
    assert abs(h01_norm(f) - math.sqrt(PI / 2)) < 5 * h**2


def test_hat_function_h01_exact():
    n = 9  # midpoint node 5 at z = 0.5
    z = grid_nodes(1.0, n)
    f = GridFunction(1.0, n, 1.0 - np.abs(2 * z - 1))
    assert h01_norm(f) == pytest.approx(2.0, rel=1e-14)
    ratio, bound = friedrichs_check(f)
    assert ratio > PI**2


def test_scaling_homogeneity():
    f = GridFunction.from_function(lambda z: z * (PI - z), PI, 50)
    g = f.with_values(2 * f.values)
    assert l2_norm(g) == pytest.approx(2 * l2_norm(f), rel=1e-14)
    assert h01_norm(g) == pytest.approx(2 * h01_norm(f), rel=1e-14)


grid_vals = st.integers(3, 60).flatmap(
    lambda n: st.tuples(st.just(n), st.lists(st.floats(-5, 5), min_size=n, max_size=n)))


@given(grid_vals, grid_vals)
@settings(max_examples=80, deadline=None)
def test_norm_triangle_inequality(a, b):
    n = a[0]
    fa = GridFunction.from_interior(np.array(a[1]), 2.0)
    fb = GridFunction.from_interior(np.resize(np.array(b[1]), n), 2.0)
    s = fa.with_values(fa.values + fb.values)
    assert l2_norm(s) <= l2_norm(fa) + l2_norm(fb) + 1e-12
    assert h01_norm(s) <= h01_norm(fa) + h01_norm(fb) + 1e-12


@given(grid_vals)
@settings(max_examples=100, deadline=None)
def test_discrete_friedrichs_inequality(a):
    n, vals = a
    f = GridFunction.from_interior(np.array(vals), PI)
    if l2_norm(f) < 1e-8:
        return
    ratio, bound = friedrichs_check(f)
    assert ratio >= bound - 1e-10 * max(1.0, bound)


@given(grid_vals)
@settings(max_examples=100, deadline=None)
def test_second_friedrichs_discrete(a):
    n, vals = a
    f = GridFunction.from_interior(np.array(vals), 1.5)
    lam = discrete_friedrichs_constant(1.5, n)
    g2 = f.h * np.dot(forward_diff(f), forward_diff(f))
    # |D2 f|^2 >= lam |grad f|^2, the interior-node sum for D2
    assert laplacian_norm(f) ** 2 >= lam * g2 * (1 - 1e-10) - 1e-12


def test_friedrichs_rejects_zero():
    with pytest.raises(ValueError):
        friedrichs_check(GridFunction.zeros(1.0, 5))


@pytest.mark.parametrize("n", [49, 99, 199])
def test_friedrichs_eigenvector_equality(n):
    f = GridFunction.from_function(lambda z: np.sin(PI * z / PI), PI, n)
    ratio, bound = friedrichs_check(f)
    assert abs(ratio - bound) <= 1e-10 * bound
    # oracle: smallest eigenvalue of the tridiagonal -D2 matrix
    h = PI / (n + 1)
    lam = eigh_tridiagonal(np.full(n, 2 / h**2), np.full(n - 1, -1 / h**2), eigvals_only=True,
                           select="i", select_range=(0, 0))[0]
    assert abs(lam - bound) <= 1e-9 * bound


def test_random_function_above_continuum_corrected_bound():
    rng = np.random.default_rng(3)
    f = GridFunction.from_interior(rng.standard_normal(99), PI)
    ratio, bound = friedrichs_check(f)
    assert ratio >= 0.99975 * bound


def test_friedrichs_constant_converges_second_order():
    ns = (49, 99, 199)
    hs = [PI / (n + 1) for n in ns]
    vals = [discrete_friedrichs_constant(PI, n) for n in ns]
    errs = [abs(v - 1.0) for v in vals]
    assert math.log(errs[0] / errs[1], 2) >= 1.9
    assert math.log(errs[1] / errs[2], 2) >= 1.9
    assert observed_order(hs, vals) >= 1.9
