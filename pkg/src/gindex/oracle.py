"""Brute-force analytic side: operator matrices on Fourier modes of T^n.

Quantization is Kohn-Nirenberg on the torus, ``Op(a) e_k = a(x, h k) e_k``,
so the matrix element ``(m, k)`` is the x-Fourier coefficient of ``a`` at
``m - k`` evaluated at ``xi = h k``.  Shift operators are
``(Phi_g u)(x) = u(g^{-1} x)``, i.e. ``Phi_g e_k = e^{-i (A k).b} e_{A k}``.

Operators are built on rectangular boxes: columns on ``|k|_inf <= K``,
rows on ``|k|_inf <= K + P`` where ``P`` is the x-bandwidth, so every entry
that is kept is exact and products need no truncation.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import svds

from .crossed import GSymbol
from .group import AffineMap, GroupStructure, act
from .symbols import Symbol, fiber_values, star_product


class OracleError(ValueError):
    pass


@dataclass(frozen=True)
class Box:
    """Fourier modes ``|k|_inf <= K`` in lexicographic order."""

    n: int
    K: int

    @property
    def size(self) -> int:
        return (2 * self.K + 1) ** self.n

    @cached_property
    def modes(self) -> np.ndarray:
        r = np.arange(-self.K, self.K + 1)
        if self.n == 1:
            return r[:, None]
        return np.array(list(itertools.product(r, r)))

    def index(self, k: np.ndarray) -> np.ndarray:
        """Linear positions of modes (rows of ``k``); -1 outside the box."""
        k = np.atleast_2d(k)
        inside = np.all(np.abs(k) <= self.K, axis=1)
        s = 2 * self.K + 1
        shifted = k + self.K
        if self.n == 1:
            idx = shifted[:, 0]
        else:
            idx = shifted[:, 0] * s + shifted[:, 1]
        return np.where(inside, idx, -1)

    def embed(self, other: "Box") -> sp.csr_matrix:
        """Inclusion of ``other`` (smaller) into this box."""
        idx = self.index(other.modes)
        return sp.csr_matrix((np.ones(other.size), (idx, np.arange(other.size))), shape=(self.size, other.size))

    def restrict(self, other: "Box") -> sp.csr_matrix:
        return self.embed(other).T.tocsr()


def x_bandwidth(a: Symbol | GSymbol) -> int:
    if isinstance(a, GSymbol):
        return max((x_bandwidth(p) for p in a.parts.values()), default=0)
    return a.bandwidth()[0]


def _modes_of(a: Symbol) -> list[tuple]:
    return sorted({key[2] for key in a.outer} | {key[1] for key in a.trans})


def quantize(a: Symbol, h: float, K: int, rows: int | None = None) -> sp.csr_matrix:
    """Matrix of ``Op_h(a)`` from the box ``K`` to the box ``rows`` (default ``K + bandwidth``)."""
    n = a.n
    P = x_bandwidth(a)
    rows = K + P if rows is None else rows
    cbox, rbox = Box(n, K), Box(n, rows)
    cols = cbox.modes
    xi = h * cols.astype(float)
    data, ri, ci = [], [], []
    for p, vals in fiber_values(a, xi, h).items():
        target = rbox.index(cols + np.array(p))
        keep = (target >= 0) & (np.abs(vals) > 0)
        data.append(vals[keep])
        ri.append(target[keep])
        ci.append(np.nonzero(keep)[0])
    if not data:
        return sp.csr_matrix((rbox.size, cbox.size), dtype=complex)
    return sp.csr_matrix(
        (np.concatenate(data), (np.concatenate(ri), np.concatenate(ci))), shape=(rbox.size, cbox.size), dtype=complex
    )


def shift_matrix(g: AffineMap, h: float, K: int) -> sp.csr_matrix:
    """``Phi_g`` on the box ``K`` (signed permutations preserve it); ``h`` is unused."""
    box = Box(g.n, K)
    k = box.modes
    Ak = k @ g.matrix.T
    phase = np.exp(-1j * (Ak @ g.b_radians))
    return sp.csr_matrix((phase, (box.index(Ak), np.arange(box.size))), shape=(box.size, box.size), dtype=complex)


# ---------------------------------------------------------------------------
# G-operators: dictionaries l -> X_l standing for sum_l X_l Phi_l


def gop_pieces(A: GSymbol, h: float, K: int, rows: int) -> dict:
    """Pieces ``X_l`` of ``Op(A)`` with columns on box ``K`` and rows on box ``rows``."""
    pieces = {}
    if A.scalar:
        pieces[0] = A.scalar * Box(A.n, rows).embed(Box(A.n, K)).astype(complex)
    for l, a in A.parts.items():
        X = quantize(a, h, K, rows)
        pieces[l] = pieces[l] + X if l in pieces else X
    return pieces


def quantize_gop(A: GSymbol, h: float, K: int) -> sp.csr_matrix:
    """``s I + sum_l Op(a_l) Phi_l`` from box ``K`` to box ``K + bandwidth``."""
    rows = K + x_bandwidth(A)
    out = sp.csr_matrix((Box(A.n, rows).size, Box(A.n, K).size), dtype=complex)
    for l, X in gop_pieces(A, h, K, rows).items():
        out = out + X @ shift_matrix(A.group.elements[l], h, K)
    return out.tocsr()


def gop_product(X: dict, Y: dict, G: GroupStructure, h: float, Ky: int, Kx: int) -> dict:
    """Pieces of ``X Y`` where ``Y`` has columns on box ``Ky`` and rows on box ``Kx`` = columns of ``X``.

    ``(X Y)_g = sum_{lk = g} X_l Phi_l Y_k Phi_l^{-1}``.
    """
    out: dict = {}
    for l, Xl in X.items():
        gl = G.elements[l]
        left = Xl @ shift_matrix(gl, h, Kx)
        right = shift_matrix(gl.inverse(), h, Ky)
        for k, Yk in Y.items():
            g = G.mul(l, k)
            term = left @ Yk @ right
            out[g] = out[g] + term if g in out else term
    return out


def trace_g(pieces: dict, G: GroupStructure, g: int, h: float, K: int, rows: int) -> complex:
    """``Tr_g`` over the box ``K`` of ``sum_l X_l Phi_l`` (rows of ``X_l`` on box ``rows``)."""
    n = G.n
    R = Box(n, rows).restrict(Box(n, K))
    total = 0j
    for l in G.class_of(g):
        if l in pieces:
            M = R @ pieces[l] @ shift_matrix(G.elements[l], h, K)
            total += complex(M.diagonal().sum())
    return total


@dataclass
class TraceMeasurement:
    value: complex
    tail: float


def operator_trace_g(A: GSymbol, g: int, h: float, K: int, tolerance: float | None = None) -> TraceMeasurement:
    """``Tr_g(sum_l Op(a_l) Phi_l)`` on the box ``K``; the scalar part is ignored.

    ``tail`` sums the absolute diagonal contributions on the outer quarter
    shell of the box, a crude bound on the truncation error.
    """
    G = A.group
    n = A.n
    box = Box(n, K)
    shell = np.abs(box.modes).max(axis=1) > 3 * K // 4
    value, tail = 0j, 0.0
    for l in G.class_of(g):
        if l not in A.parts:
            continue
        X = quantize(A.parts[l], h, K, K) @ shift_matrix(G.elements[l], h, K)
        d = X.diagonal()
        value += complex(d.sum())
        tail += float(np.abs(d[shell]).sum())
    if tolerance is not None and tail > tolerance:
        raise OracleError(f"trace tail {tail:.3e} above {tolerance:.1e}; increase K")
    return TraceMeasurement(value, tail)


def analytic_index_g(A: GSymbol, R: GSymbol, g: int, h: float, K: int) -> complex:
    """``Tr_g(1 - R D) - Tr_g(1 - D R)`` with exact products on buffered boxes."""
    G = A.group
    PA, PR = x_bandwidth(A), x_bandwidth(R)

    def side(first: GSymbol, Pf: int, second: GSymbol, Ps: int) -> complex:
        # first * second, columns on box K
        Y = gop_pieces(second, h, K, K + Ps)
        X = gop_pieces(first, h, K + Ps, K + Ps + Pf)
        prod = gop_product(X, Y, G, h, K, K + Ps)
        rows = K + Ps + Pf
        ident = {0: Box(A.n, rows).embed(Box(A.n, K)).astype(complex)}
        diff = dict(ident)
        for l, M in prod.items():
            diff[l] = diff[l] - M if l in diff else -M
        return trace_g(diff, G, g, h, K, rows)

    return side(R, PR, A, PA) - side(A, PA, R, PR)


# ---------------------------------------------------------------------------
# residual measurements


def op_norm(M) -> float:
    """Spectral norm (largest singular value)."""
    M = sp.csr_matrix(M)
    if M.nnz == 0:
        return 0.0
    if min(M.shape) <= 1200:
        return float(np.linalg.norm(M.toarray(), 2))
    return float(svds(M, k=1, return_singular_vectors=False, tol=1e-10, random_state=0)[0])


def egorov_residual(a: Symbol, g: AffineMap, h: float, K: int) -> float:
    """``|| Phi_g Op(a) Phi_g^{-1} - Op(act(g, a)) ||`` from the box ``K`` (exact entries)."""
    rows = K + x_bandwidth(a)
    lhs = shift_matrix(g, h, rows) @ quantize(a, h, K, rows) @ shift_matrix(g.inverse(), h, K)
    rhs = quantize(act(g, a), h, K, rows)
    return op_norm(lhs - rhs)


@dataclass
class HFitResult:
    hs: list
    values: list
    exponents: list | None = None
    coefficients: list | None = None
    slope: float | None = None
    slope_error: float | None = None
    residual: float | None = None

    def record(self) -> dict:
        def cplx(v):
            return [v.real, v.imag] if isinstance(v, complex) else v

        return {
            "hs": self.hs,
            "values": [cplx(v) for v in self.values],
            "exponents": self.exponents,
            "coefficients": None if self.coefficients is None else [cplx(c) for c in self.coefficients],
            "slope": self.slope,
            "slope_error": self.slope_error,
            "residual": self.residual,
        }


def fit_slope(hs, values) -> tuple[float, float]:
    """Least-squares slope of ``log|value|`` against ``log h`` and its standard error."""
    x = np.log(np.asarray(hs, dtype=float))
    y = np.log(np.abs(np.asarray(values)))
    X = np.stack([x, np.ones_like(x)], axis=1)
    coef, res, *_ = np.linalg.lstsq(X, y, rcond=None)
    dof = max(len(x) - 2, 1)
    s2 = float(np.sum((y - X @ coef) ** 2)) / dof
    cov = s2 * np.linalg.inv(X.T @ X)
    return float(coef[0]), float(math.sqrt(cov[0, 0]))


def composition_residual(a: Symbol, b: Symbol, hs, Kh: float = 8.0, floor: float = 1e-14) -> HFitResult:
    """``|| Op(a) Op(b) - Op(a*b) ||`` on boxes with ``K h >= Kh``, with its log-log slope."""
    if len(hs) < 4:
        raise OracleError("at least 4 h samples are needed")
    ab = star_product(a, b)
    Pa, Pb = x_bandwidth(a), x_bandwidth(b)
    vals = []
    for h in hs:
        K = int(math.ceil(Kh / h))
        B = quantize(b, h, K, K + Pb)
        A = quantize(a, h, K + Pb, K + Pb + Pa)
        AB = quantize(ab, h, K, K + Pa + Pb)
        vals.append(op_norm(A @ B - AB))
    if max(vals) < floor:
        return HFitResult(list(hs), vals, slope=math.inf, slope_error=0.0)
    slope, err = fit_slope(hs, vals)
    return HFitResult(list(hs), vals, slope=slope, slope_error=err)


def fit_h_expansion(samples, exponents) -> HFitResult:
    """Least-squares coefficients of ``sum_e c_e h^e`` over the given exponents."""
    hs = np.array([s[0] for s in samples], dtype=float)
    vals = np.array([s[1] for s in samples], dtype=complex)
    exponents = list(exponents)
    if len(hs) < len(exponents) + 2:
        raise OracleError("need at least window size + 2 samples")
    X = np.stack([hs**e for e in exponents], axis=1)
    # scale columns for conditioning
    scale = np.abs(X).max(axis=0)
    coef, _, rank, _ = np.linalg.lstsq(X / scale, vals, rcond=None)
    if rank < len(exponents):
        raise OracleError("rank-deficient h fit")
    coef = coef / scale
    resid = float(np.abs(X @ coef - vals).max())
    return HFitResult(
        hs.tolist(), [complex(v) for v in vals], exponents, [complex(c) for c in coef], residual=resid
    )


__all__ = [
    "Box",
    "HFitResult",
    "OracleError",
    "TraceMeasurement",
    "analytic_index_g",
    "composition_residual",
    "egorov_residual",
    "fit_h_expansion",
    "fit_slope",
    "gop_pieces",
    "gop_product",
    "op_norm",
    "operator_trace_g",
    "quantize",
    "quantize_gop",
    "shift_matrix",
    "trace_g",
    "x_bandwidth",
]
