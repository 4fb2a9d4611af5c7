import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gindex.crossed import (
    CosphereGrid,
    CrossedProductError,
    GSymbol,
    gmul,
    is_elliptic,
    leading_inverse,
    parametrix,
    regular_representation,
)
from gindex.group import AffineMap, build_group, trivial_group
from gindex.sampling import random_gsymbol
from gindex.symbols import Cutoff, make_symbol
from gindex.tasks import build_parametrix

D4 = build_group(
    [AffineMap.from_config([[0, -1], [1, 0]], [0, 0], "r"), AffineMap.from_config([[1, 0], [0, -1]], [0, 0], "s")], 4
)
IRR = build_group([AffineMap.from_config([[1]], [math.sqrt(2)], "t")], 12)


@given(st.integers(0, 2**31 - 1))
def test_regular_representation_is_multiplicative(seed):
    rng = np.random.default_rng(seed)
    A, B = (random_gsymbol(rng, D4, 1, support=3, profiles=0) for _ in range(2))
    grid = CosphereGrid(2, 6, 8)
    MA, MB = regular_representation(A, grid), regular_representation(B, grid)
    MAB = regular_representation(gmul(A, B), grid)
    np.testing.assert_allclose(MAB, MA @ MB, atol=1e-10)


def test_scalar_bookkeeping():
    c = Cutoff()
    a = make_symbol(1, 2, [(0, 0, 1, 1, 1.0)], c)
    G = build_group([AffineMap.from_config([[1]], ["1/2"], "t")], 2)
    A = GSymbol.from_symbol(G, a, at=1, scalar=2.0)
    prod = gmul(A, A.unit_like().scale(3.0))
    assert prod.scalar == 6.0 and prod.distance(A.scale(3.0)) == 0.0


def test_mismatched_algebras_are_rejected():
    c = Cutoff()
    A = GSymbol.unit(D4, 2, 3, c)
    with pytest.raises(CrossedProductError):
        gmul(A, GSymbol.unit(D4, 2, 4, c))
    with pytest.raises(CrossedProductError, match="outside"):
        GSymbol(D4, 2, 3, c, 1, {99: make_symbol(2, 3, [(0, 0, (0, 0), 0, 1.0)], c)})


def test_product_leaving_the_ball_is_an_error():
    rng = np.random.default_rng(3)
    G = build_group([AffineMap.from_config([[1]], [math.sqrt(2)], "t")], 1)
    A = random_gsymbol(rng, G, 2, support=3)
    with pytest.raises(CrossedProductError, match="word ball"):
        gmul(A, A)


def test_zero_scalar_is_never_elliptic():
    c = Cutoff()
    A = GSymbol.from_symbol(D4, make_symbol(2, 2, [(0, 0, (0, 0), 0, 1.0)], c))
    assert not is_elliptic(A).elliptic


def test_non_elliptic_symbol_has_no_leading_inverse():
    # 1 + (e^{ix} - 1)/2 on the positive ray vanishes at x = pi
    c = Cutoff()
    G = trivial_group(1)
    a = make_symbol(1, 3, [(0, 0, 1, 1, 0.5), (0, 0, 0, 1, -0.5)], c)
    A = GSymbol.from_symbol(G, a, scalar=1.0)
    ell = is_elliptic(A)
    assert not ell.elliptic and ell.margin < 1e-6
    with pytest.raises(CrossedProductError, match="not elliptic"):
        leading_inverse(A)


def test_neumann_route_for_infinite_group():
    c = Cutoff()
    a = make_symbol(1, 4, [(0, 0, 0, 1, 0.3)], c)
    b = make_symbol(1, 4, [(0, 0, 1, -1, 0.2)], c)
    A = GSymbol(IRR, 1, 4, c, 1.0, {1: a, 2: b})
    ell = is_elliptic(A)
    assert ell.route == "neumann" and ell.margin == pytest.approx(0.5)
    L = leading_inverse(A, tolerance=1e-3)
    assert L.route == "neumann" and L.residual <= 1e-3 and L.terms == 10
    with pytest.raises(CrossedProductError, match="word ball"):
        leading_inverse(A, tolerance=1e-9)


def test_leading_inverse_inverts_principal_symbol(reflection, reflection_parametrix):
    A = reflection.symbol
    L = reflection_parametrix.leading
    grid = reflection.grid
    prod = regular_representation(gmul(A, L.r0), grid)
    eye = np.broadcast_to(np.eye(len(A.group)), prod.shape)
    assert np.abs(prod - eye).max() < 1e-7
    assert L.residual < 1e-8


@pytest.mark.parametrize("name", ["winding", "reflection", "rotation"])
def test_parametrix_residuals_lie_in_the_ideal(name, request):
    P = request.getfixturevalue(f"{name}_parametrix")
    assert P.outer_residual < 1e-8
    N = P.r.N
    for res in (P.left_residual, P.right_residual):
        assert res.scalar == 0
        for a in res.parts.values():
            for (j, d, _, _), c in a.outer.items():
                assert d <= -N - j or abs(c) < 1e-8


def test_left_and_right_parametrices_agree_modulo_the_ideal(winding, winding_parametrix):
    left = build_parametrix(winding, side="left")
    diff = left.r - winding_parametrix.r
    assert diff.outer_max(winding.N) < 1e-8


def test_bad_side_is_rejected(winding):
    with pytest.raises(ValueError):
        parametrix(winding.symbol, side="middle")
