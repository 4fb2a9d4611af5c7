import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given
from hypothesis import strategies as st

from gindex.group import AffineMap
from gindex.oracle import (
    Box,
    OracleError,
    analytic_index_g,
    composition_residual,
    egorov_residual,
    fit_h_expansion,
    fit_slope,
    op_norm,
    quantize,
)
from gindex.sampling import random_symbol
from gindex.symbols import Cutoff, make_symbol


def test_box_indexing_roundtrip():
    box = Box(2, 3)
    assert box.size == 49
    np.testing.assert_array_equal(box.index(box.modes), np.arange(49))
    assert box.index(np.array([[4, 0]]))[0] == -1
    E = Box(2, 4).embed(box)
    assert E.shape == (81, 49) and E.nnz == 49


def test_quantized_plane_wave_shifts_modes():
    c = Cutoff()
    a = make_symbol(1, 2, [(0, 0, 1, 1, 1.0)], c)
    h, K = 0.1, 30
    M = quantize(a, h, K).toarray()
    rows, cols = Box(1, K + 1), Box(1, K)
    for k in (12, 25):
        out = M[:, cols.index(np.array([[k]]))[0]]
        assert out[rows.index(np.array([[k + 1]]))[0]] == pytest.approx(1.0)
        assert np.abs(out).sum() == pytest.approx(1.0)
    assert np.abs(M[:, cols.index(np.array([[-12]]))[0]]).max() == 0.0


@given(st.integers(0, 2**31 - 1))
def test_quantize_is_linear(seed):
    rng = np.random.default_rng(seed)
    a, b = random_symbol(rng, 1, 2), random_symbol(rng, 1, 2)
    s = complex(*rng.normal(size=2))
    h, K = 0.05, 40
    rows = K + max(a.bandwidth()[0], b.bandwidth()[0])
    lhs = quantize(a + b.scale(s), h, K, rows)
    rhs = quantize(a, h, K, rows) + s * quantize(b, h, K, rows)
    assert abs(lhs - rhs).max() < 1e-12


@pytest.mark.parametrize(
    "g",
    [
        AffineMap.from_config([[0, -1], [1, 0]], ["1/4", "1/3"], "r"),
        AffineMap.from_config([[1, 0], [0, -1]], [0.3, 0.0], "s"),
    ],
)
def test_egorov_is_exact(g):
    rng = np.random.default_rng(8)
    a = random_symbol(rng, 2, 2)
    for h in (0.25, 0.125):
        assert egorov_residual(a, g, h, 8) < 1e-12


def test_composition_slope_for_inverse_times_plane_wave():
    c = Cutoff()
    hs = [2.0**-e for e in range(3, 8)]
    b = make_symbol(1, 2, [(0, -1, 0, 1, 1.0)], c, order=-1)
    e = make_symbol(1, 2, [(0, 0, 1, 1, 1.0)], c)
    fit = composition_residual(b, e, hs)
    assert fit.slope >= 2 - 0.3
    assert all(v2 < v1 for v1, v2 in zip(fit.values, fit.values[1:]))


def test_x_independent_right_factor_composes_exactly():
    rng = np.random.default_rng(1)
    a = random_symbol(rng, 1, 3)
    b = make_symbol(1, 3, [(0, -1, 0, 1, 2.0), (0, -2, 0, -1, 1.0)], Cutoff(), order=-1)
    fit = composition_residual(a, b, [2.0**-e for e in range(3, 7)])
    assert fit.slope == float("inf")


def test_composition_needs_four_samples():
    a = make_symbol(1, 2, [(0, 0, 0, 1, 1.0)])
    with pytest.raises(OracleError):
        composition_residual(a, a, [0.1, 0.05, 0.025])


def test_fit_slope_recovers_power():
    hs = [0.1, 0.05, 0.025, 0.0125]
    slope, err = fit_slope(hs, [5 * h**2 for h in hs])
    assert slope == pytest.approx(2.0) and err < 1e-10


def test_fit_h_expansion_recovers_coefficients():
    hs = 2.0 ** -np.arange(3, 9)
    samples = [(h, (2 - 1j) / h + 3 + 0.5 * h) for h in hs]
    fit = fit_h_expansion(samples, [-1, 0, 1])
    np.testing.assert_allclose(fit.coefficients, [2 - 1j, 3, 0.5], rtol=1e-9)
    assert fit.residual < 1e-9
    with pytest.raises(OracleError):
        fit_h_expansion(samples[:4], [-1, 0, 1])


def test_op_norm_dense_and_sparse_paths():
    d = np.linspace(0.1, 3.0, 1500)
    assert op_norm(sp.diags(d)) == pytest.approx(3.0, rel=1e-8)
    assert op_norm(np.diag(d[:10])) == pytest.approx(d[9])
    assert op_norm(sp.csr_matrix((5, 5))) == 0.0


def test_winding_operator_index(winding, winding_parametrix):
    val = analytic_index_g(winding.symbol, winding_parametrix.r, 0, 2.0**-5, 128)
    assert val == pytest.approx(-1, abs=1e-6)
