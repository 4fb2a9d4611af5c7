import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import quad

from gindex.group import AffineMap
from gindex.sampling import random_symbol
from gindex.symbols import (
    Cutoff,
    RadialGrid,
    SymbolError,
    derive,
    evaluate,
    integrate,
    make_profile_symbol,
    make_symbol,
    pullback,
    smoothstep,
    star_product,
)

seeds = st.integers(0, 2**31 - 1)


# -- radial grid ------------------------------------------------------------


def test_grid_derivative_and_integral_match_closed_forms():
    g = RadialGrid(0.5, 1.0, 129)
    np.testing.assert_allclose(g.derivative(np.sin(3 * g.r)), 3 * np.cos(3 * g.r), atol=1e-10)
    assert g.integral(np.exp(g.r)) == pytest.approx(math.e - math.exp(0.5), abs=1e-13)
    assert g.integral(np.ones_like(g.r), power=-2) == pytest.approx(1.0, abs=1e-13)


def test_smoothstep_endpoints_and_flatness():
    p = 6
    t = np.array([0.0, 1.0])
    np.testing.assert_allclose(smoothstep(t, p), [0.0, 1.0])
    c = Cutoff(smoothness=p)
    vals = c.chi_values
    grid = c.grid
    for _ in range(p):
        vals = grid.derivative(vals)
        scale = np.abs(vals).max()
        assert abs(vals[0]) < 1e-8 * scale and abs(vals[-1]) < 1e-8 * scale


def test_cutoff_is_monotone_between_radii():
    c = Cutoff(radius=1.0, inner_ratio=0.25)
    r = np.linspace(0, 1.5, 400)
    v = c(r)
    assert np.all(np.diff(v) >= -1e-14)
    assert v[r < 0.25].max() == 0.0 and v[r >= 1.0].min() == 1.0


# -- construction -------------------------------------------------------------


def test_empty_entries_give_zero():
    assert make_symbol(1, 3, []).is_zero()


def test_single_mode_on_positive_ray():
    a = make_symbol(1, 3, [(0, 0, 1, 1, 1.0)])
    assert evaluate(a, 0.0, 2.0) == pytest.approx(1.0)
    assert evaluate(a, 0.0, -2.0) == 0.0
    assert evaluate(a, 1.0, 3.0) == pytest.approx(np.exp(1j))


def test_grading_violation_is_rejected():
    with pytest.raises(SymbolError, match="grading"):
        make_symbol(1, 3, [(1, 0, 0, 1, 1.0)])
    with pytest.raises(SymbolError, match="window"):
        make_symbol(1, 3, [(3, -4, 0, 1, 1.0)])


def test_homogeneous_term_evaluates_to_power():
    a = make_symbol(1, 2, [(0, -3, 0, 0, 1.0)])
    xi = np.array([-5.0, -1.5, 1.0, 2.0])
    np.testing.assert_allclose(evaluate(a, np.zeros(4), xi), np.abs(xi) ** -3.0)


# -- derivatives ------------------------------------------------------------


def test_x_derivative_of_plane_wave():
    a = make_symbol(1, 2, [(0, 0, 1, 1, 1.0)])
    assert derive(a, alpha=(1,)).outer == {(0, 0, (1,), 1): 1j}


def test_xi_derivative_of_inverse():
    a = make_symbol(1, 2, [(0, -1, 0, 1, 1.0)], order=-1)
    assert derive(a, beta=(1,)).outer == {(0, -2, (0,), 1): -1.0}


def test_polar_derivative_in_two_dimensions():
    a = make_symbol(2, 2, [(0, -2, (0, 0), 0, 1.0)], order=-2)
    d = derive(a, beta=(1, 0))
    assert d.outer == pytest.approx({(0, -3, (0, 0), 1): -1.0, (0, -3, (0, 0), -1): -1.0})
    # finite differences on the outer region
    xi = np.array([[1.7, 0.4], [-1.2, 2.3]])
    step = 1e-5
    fd = (evaluate(a, np.zeros((2, 2)), xi + [step, 0]) - evaluate(a, np.zeros((2, 2)), xi - [step, 0])) / (2 * step)
    np.testing.assert_allclose(evaluate(d, np.zeros((2, 2)), xi), fd, rtol=1e-8)


def test_derivatives_commute():
    rng = np.random.default_rng(4)
    for n in (1, 2):
        a = random_symbol(rng, n, 3)
        al = (1,) + (0,) * (n - 1)
        be = (0,) * (n - 1) + (1,)
        x_then_xi = derive(derive(a, alpha=al), beta=be)
        xi_then_x = derive(derive(a, beta=be), alpha=al)
        assert x_then_xi.distance(xi_then_x) < 1e-12


def test_transition_derivative_matches_finite_differences():
    c = Cutoff()
    a = make_profile_symbol(1, 2, [(0, 0, 1, lambda r: np.exp(-(((r - 0.75) / 0.08) ** 2)))], c)
    d = derive(a, beta=(1,))
    xi = np.array([0.6, 0.7, 0.8, 0.9])
    fd = (evaluate(a, 0 * xi, xi + 1e-6) - evaluate(a, 0 * xi, xi - 1e-6)) / 2e-6
    np.testing.assert_allclose(evaluate(d, 0 * xi, xi), fd, rtol=1e-6, atol=1e-8)


# -- star product -------------------------------------------------------------


def test_star_series_for_inverse_times_plane_wave():
    N = 5
    b = make_symbol(1, N, [(0, -1, 0, 1, 1.0)], order=-1)
    e = make_symbol(1, N, [(0, 0, 1, 1, 1.0)])
    prod = star_product(b, e)
    expected = {(j, -1 - j, (1,), 1): (-1.0) ** j for j in range(N)}
    assert prod.outer == pytest.approx(expected)


def test_star_with_zero_is_zero():
    rng = np.random.default_rng(0)
    a = random_symbol(rng, 2, 3)
    assert star_product(a.zero(), a).is_zero()
    assert star_product(a, a.zero()).is_zero()


def test_star_product_matches_pointwise_expansion():
    # N = 2: a0 b0 + h (a0 b1 + a1 b0 + d_xi a0 . (-i d_x b0)), derivatives by finite differences and FFT
    rng = np.random.default_rng(2)
    a = random_symbol(rng, 1, 2, profiles=0)
    b = random_symbol(rng, 1, 2, profiles=0)
    M = 64
    x = 2 * np.pi * np.arange(M) / M
    k = np.fft.fftfreq(M, 1 / M)

    def ev(s, xi):
        return evaluate(s, x, np.full(M, xi), 1.0)

    for xi in (1.3, -2.4):
        a0, a1, b0, b1 = a.coefficient(0), a.coefficient(1), b.coefficient(0), b.coefficient(1)
        dxi_a0 = (ev(a0, xi + 1e-6) - ev(a0, xi - 1e-6)) / 2e-6
        dx_b0 = np.fft.ifft(1j * k * np.fft.fft(ev(b0, xi)))
        expected = ev(a0, xi) * ev(b0, xi) + (ev(a0, xi) * ev(b1, xi) + ev(a1, xi) * ev(b0, xi) - 1j * dxi_a0 * dx_b0)
        got = evaluate(star_product(a, b), x, np.full(M, xi), 1.0)
        np.testing.assert_allclose(got, expected, atol=1e-7)


@given(seeds, st.sampled_from([1, 2]))
def test_associativity(seed, n):
    rng = np.random.default_rng(seed)
    a, b, c = (random_symbol(rng, n, 3, order=int(rng.integers(-2, 1))) for _ in range(3))
    left, right = (a * b) * c, a * (b * c)
    assert left.distance(right) <= 1e-9 * max(left.max_abs(), 1.0)


@given(seeds, st.sampled_from([1, 2]))
def test_bilinearity(seed, n):
    rng = np.random.default_rng(seed)
    a, b, c = (random_symbol(rng, n, 3) for _ in range(3))
    s = complex(*rng.normal(size=2))
    lhs = a * (b + c.scale(s))
    rhs = a * b + (a * c).scale(s)
    assert lhs.distance(rhs) <= 1e-10 * max(lhs.max_abs(), 1.0)


@given(seeds, st.sampled_from([1, 2]))
def test_filtration(seed, n):
    rng = np.random.default_rng(seed)
    p, q = (int(v) for v in rng.integers(-3, 1, size=2))
    a, b = random_symbol(rng, n, 4, order=p), random_symbol(rng, n, 4, order=q)
    assert (a * b).graded_order() <= a.graded_order() + b.graded_order()


def test_angular_bandwidth_grows_by_at_most_N():
    rng = np.random.default_rng(9)
    a, b = random_symbol(rng, 2, 3), random_symbol(rng, 2, 3)
    assert (a * b).bandwidth()[1] <= a.bandwidth()[1] + b.bandwidth()[1] + 3


# -- pullback ------------------------------------------------------------------


def test_pullback_by_translation_gives_phase():
    a = make_symbol(1, 2, [(0, 0, 1, 1, 1.0)])
    out = pullback(a, np.eye(1, dtype=int), [0.3])
    assert out.outer == pytest.approx({(0, 0, (1,), 1): np.exp(0.3j)})


def test_pullback_by_reflection_flips_modes():
    a = make_symbol(2, 2, [(0, 0, (1, 1), 2, 1.0)])
    out = pullback(a, np.array([[1, 0], [0, -1]]), [0.0, 0.0])
    assert out.outer == pytest.approx({(0, 0, (1, -1), -2): 1.0})


def test_pullback_agrees_with_pointwise_composition():
    rng = np.random.default_rng(5)
    a = random_symbol(rng, 2, 2)
    g = AffineMap.from_config([[0, -1], [1, 0]], ["1/3", "1/5"], "g")
    x = rng.uniform(0, 2 * np.pi, size=(6, 2))
    xi = rng.normal(size=(6, 2)) * 2
    lhs = evaluate(g.pullback(a), x, xi)
    rhs = evaluate(a, np.array([g(p) for p in x]), xi @ g.matrix.T)
    np.testing.assert_allclose(lhs, rhs, atol=1e-12)


def test_unsupported_linear_part_is_rejected():
    a = make_symbol(2, 2, [(0, 0, (1, 0), 0, 1.0)])
    with pytest.raises(SymbolError):
        pullback(a, np.array([[1, 1], [0, 1]]), [0.0, 0.0])


@given(seeds)
def test_pullback_is_functorial(seed):
    rng = np.random.default_rng(seed)
    gens = [
        AffineMap.from_config([[0, -1], [1, 0]], ["1/4", 0], "r"),
        AffineMap.from_config([[1, 0], [0, -1]], [0, "1/3"], "s"),
        AffineMap.from_config([[1, 0], [0, 1]], [0.7, 0.2], "t"),
    ]
    g1, g2 = (gens[int(i)] for i in rng.integers(3, size=2))
    a = random_symbol(rng, 2, 2)
    assert g1.pullback(g2.pullback(a)).distance((g2 @ g1).pullback(a)) < 1e-12


# -- integrals ---------------------------------------------------------------


def test_integral_of_inverse_cube_against_quadrature():
    c = Cutoff()
    a = make_symbol(1, 2, [(0, -3, 0, 0, 1.0)], c, order=-3)
    inner, _ = quad(lambda r: c(r) * r**-3, c.inner, c.radius)
    expected = 2 * np.pi * 2 * (inner + 0.5 / c.radius**2)
    assert integrate(a)[0] == pytest.approx(expected, rel=1e-11)


def test_oscillating_modes_integrate_to_zero():
    a = make_symbol(1, 2, [(0, -3, 1, 0, 1.0)], order=-3)
    assert abs(integrate(a).get(0, 0)) < 1e-15
    b = make_symbol(2, 2, [(0, -4, (0, 0), 1, 1.0)], order=-4)
    assert abs(integrate(b).get(0, 0)) < 1e-15


def test_divergent_integral_raises():
    with pytest.raises(SymbolError):
        integrate(make_symbol(1, 2, [(0, -1, 0, 0, 1.0)], order=-1))
