"""Localized traces, algebraic indices and the Fredholm index assembled from them."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .crossed import GSymbol, Parametrix, parametrix
from .group import AffineMap, GroupStructure, fixed_point_set
from .symbols import Symbol, SymbolError, derive, fiber_integral, multi_indices

LAURENT_PRUNE = 1e-12


class TraceError(ValueError):
    pass


class HLaurent:
    """Laurent polynomial in h on the window ``lo <= exponent < hi``."""

    __slots__ = ("coeffs", "lo", "hi")

    def __init__(self, coeffs: Mapping[int, complex] | None = None, lo: int = -2, hi: int = 0):
        self.lo, self.hi = lo, hi
        self.coeffs = {
            int(e): complex(c) for e, c in sorted((coeffs or {}).items()) if lo <= e < hi and abs(c) > LAURENT_PRUNE
        }

    def __getitem__(self, e: int) -> complex:
        return self.coeffs.get(e, 0j)

    def _window(self, other: "HLaurent") -> tuple[int, int]:
        return min(self.lo, other.lo), min(self.hi, other.hi)

    def __add__(self, other: "HLaurent") -> "HLaurent":
        lo, hi = self._window(other)
        keys = set(self.coeffs) | set(other.coeffs)
        return HLaurent({e: self[e] + other[e] for e in keys}, lo, hi)

    def __neg__(self) -> "HLaurent":
        return HLaurent({e: -c for e, c in self.coeffs.items()}, self.lo, self.hi)

    def __sub__(self, other: "HLaurent") -> "HLaurent":
        return self + (-other)

    def scale(self, s: complex) -> "HLaurent":
        return HLaurent({e: s * c for e, c in self.coeffs.items()}, self.lo, self.hi)

    @property
    def constant(self) -> complex:
        return self[0]

    def max_nonconstant(self) -> float:
        return max((abs(c) for e, c in self.coeffs.items() if e != 0), default=0.0)

    def integrality_gap(self) -> float:
        c = self.constant
        return float(abs(c - round(c.real)))

    def max_abs(self) -> float:
        return max((abs(c) for c in self.coeffs.values()), default=0.0)

    def allclose(self, other: "HLaurent", tol: float = 1e-9) -> bool:
        return (self - other).max_abs() <= tol

    def __call__(self, h: float) -> complex:
        return sum(c * h**e for e, c in self.coeffs.items())

    def records(self) -> list[list[float]]:
        return [[e, c.real, c.imag] for e, c in self.coeffs.items()]

    def __repr__(self) -> str:
        body = " + ".join(f"({c.real:.6g}{c.imag:+.3g}j) h^{e}" for e, c in self.coeffs.items()) or "0"
        return f"HLaurent[{self.lo},{self.hi}]({body})"


# ---------------------------------------------------------------------------
# single-element traces


@dataclass
class TraceReport:
    value: HLaurent
    discarded: float = 0.0
    contributions: dict = field(default_factory=dict)


def _solve_lattice(M: np.ndarray, p: tuple) -> np.ndarray | None:
    """Some integer q with ``M q = p`` (brute force; entries of M are tiny)."""
    n = M.shape[0]
    p = np.array(p)
    bound = int(np.abs(p).max(initial=0)) + 2
    rng = range(-bound, bound + 1)
    best = None
    for q in itertools.product(rng, repeat=n):
        q = np.array(q)
        if np.array_equal(M @ q, p) and (best is None or np.abs(q).sum() < np.abs(best).sum()):
            best = q
    return best


def _restrict_mode(a: Symbol, p: tuple) -> Symbol:
    return a._new(
        {key: c for key, c in a.outer.items() if key[2] == p},
        {key: v for key, v in a.trans.items() if key[1] == p},
    )


def symbol_trace(a: Symbol, g: AffineMap, discard: float = 1e-9) -> TraceReport:
    """Asymptotic expansion of ``tr(Op_h(a) Phi_g)`` in powers of h.

    Poisson summation over the lattice of fixed covectors followed by an
    exact Taylor expansion in the normal direction; affine phases have no
    cubic remainder, so every coefficient is an explicit fiber integral.
    Homogeneous terms smaller than ``discard`` are dropped (and reported);
    larger non-integrable terms raise.
    """
    n, N = a.n, a.N
    window = (-n, N - n)
    zero = TraceReport(HLaurent({}, *window))
    fps = fixed_point_set(g)
    if fps.empty:
        return zero
    dropped = max((abs(c) for c in a.outer.values() if abs(c) < discard), default=0.0)
    a = a._new({key: c for key, c in a.outer.items() if abs(c) >= discard}, a.trans)
    b = g.b_radians
    for ell in fps.lattice.T:
        phase = float(ell @ b) / (2 * math.pi)
        if abs(phase - round(phase)) > 1e-12:
            return TraceReport(HLaurent({}, *window), dropped)
    dimL = fps.covector_dim
    L = fps.covectors
    line = L[:, 0] if (n == 2 and dimL == 1) else None
    covol = fps.lattice_covolume
    M = g.matrix.T - np.eye(n, dtype=int)
    modes = {key[2] for key in a.outer} | {key[1] for key in a.trans}
    coeffs: dict = {}
    for p in sorted(modes):
        q0 = _solve_lattice(M, p)
        if q0 is None:
            continue
        nu = q0 - L @ (L.T @ q0)
        pref = np.exp(-1j * float(q0 @ b)) / covol
        ap = _restrict_mode(a, p)
        for total in range(max(N - n + dimL, 0)):
            for alpha in multi_indices(n, total):
                w = math.prod(nu[i] ** alpha[i] / math.factorial(alpha[i]) for i in range(n))
                if abs(w) < 1e-15:
                    continue
                der = derive(ap, beta=alpha)
                try:
                    vals = fiber_integral(der, modes={p}, line=line).get(p, {})
                except SymbolError as exc:
                    raise TraceError(f"trace operand is not of trace class: {exc}") from exc
                for j, v in vals.items():
                    e = j + total - dimL
                    if e < window[1]:
                        coeffs[e] = coeffs.get(e, 0) + pref * w * v
    return TraceReport(HLaurent(coeffs, *window), dropped)


def localized_trace(A: GSymbol, g: int, discard: float = 1e-9) -> TraceReport:
    """``tau_g(A) = sum over l in the conjugacy class of g of tr(Op(a_l) Phi_l)``; scalar ignored."""
    G = A.group
    total = HLaurent({}, -A.n, A.N - A.n)
    dropped = 0.0
    contributions = {}
    for l in G.class_of(g):
        if l in A.parts:
            rep = symbol_trace(A.parts[l], G.elements[l], discard)
            contributions[G.words[l]] = rep.value
            total = total + rep.value
            dropped = max(dropped, rep.discarded)
    return TraceReport(total, dropped, contributions)


def component_formula(a: Symbol, g: AffineMap) -> HLaurent:
    """Leading term ``(2 pi h)^{codim - n} |det B|^{-1} sum_F int_F a_0`` for x-independent ``a``.

    Independent of the Poisson route; used as a cross-check.
    """
    n = a.n
    fps = fixed_point_set(g)
    if fps.empty:
        return HLaurent({}, -n, a.N - n)
    codim = n - fps.base_dim
    line = fps.covectors[:, 0] if (n == 2 and fps.covector_dim == 1) else None
    zero = (0,) * n
    fib = fiber_integral(_restrict_mode(a.coefficient(0), zero), modes={zero}, line=line).get(zero, {})
    vol = 0.0
    for _, dirs in fps.components:
        if dirs.shape[1] == 0:
            vol += 1.0
        else:
            # closed subtorus: 2 pi times the primitive lattice vector length per direction
            prim = np.round(dirs / np.abs(dirs).max(axis=0))
            vol += float(np.prod([2 * math.pi * np.linalg.norm(c) for c in prim.T]))
    lead = (2 * math.pi) ** (codim - n) / fps.normal_det * vol * fib.get(0, 0)
    return HLaurent({-fps.covector_dim: lead}, -n, a.N - n)


# ---------------------------------------------------------------------------
# trace property and indices


def trace_property_check(A: GSymbol, B: GSymbol, g: int, discard: float = 1e-9) -> float:
    """``max |tau_g(A*B) - tau_g(B*A)|`` over the window."""
    ab = localized_trace(A * B, g, discard).value
    ba = localized_trace(B * A, g, discard).value
    return (ab - ba).max_abs()


@dataclass
class IndexResult:
    element: str
    laurent: HLaurent
    discarded: float = 0.0
    residual: float = 0.0

    @property
    def constant_term(self) -> complex:
        return self.laurent.constant

    @property
    def integrality_gap(self) -> float:
        return self.laurent.integrality_gap()

    @property
    def max_nonconstant(self) -> float:
        return self.laurent.max_nonconstant()

    def record(self, G: GroupStructure | None = None, g: int | None = None) -> dict:
        rec = {
            "g": self.element,
            "laurent": self.laurent.records(),
            "constant_term": [self.constant_term.real, self.constant_term.imag],
            "integrality_gap": self.integrality_gap,
            "max_nonconstant": self.max_nonconstant,
            "discarded": self.discarded,
            "parametrix_residual": self.residual,
        }
        if G is not None and g is not None:
            rec["class"] = [G.words[i] for i in G.class_of(g)]
            rec["dim_fixed_set"] = fixed_point_set(G.elements[g]).dim
        return rec


def _require_window(A: GSymbol) -> None:
    if A.N <= 2 * A.n + 1:
        raise TraceError(f"truncation N = {A.N} too small; indices need N > 2n + 1 = {2 * A.n + 1}")


def algebraic_index(A: GSymbol, g: int, P: Parametrix | None = None, discard: float = 1e-9, **kwargs) -> IndexResult:
    """``tau_g(1 - r*a) - tau_g(1 - a*r)`` for a parametrix ``r``."""
    _require_window(A)
    P = P or parametrix(A, **kwargs)
    right = localized_trace(P.right_residual, g, discard)
    left = localized_trace(P.left_residual, g, discard)
    return IndexResult(
        A.group.words[g], right.value - left.value, max(right.discarded, left.discarded), P.outer_residual
    )


def projector_corners(A: GSymbol, P: Parametrix) -> tuple[GSymbol, GSymbol]:
    """Diagonal corners of ``w p0 w^{-1} - p0`` for the explicit 2x2 matrices

        w = [[(2 - a r) a, a r - 1], [1 - r a, r]],  w^{-1} = [[r, 1 - r a], [a r - 1, (2 - a r) a]]

    and ``p0 = diag(1, 0)``; only these two corners enter the trace.
    """
    a, r = A, P.r
    one = a.unit_like()
    ra = r * a
    w11 = (one.scale(2) - a * r) * a
    return w11 * r - one, (one - ra) * (one - ra)


def algebraic_index_projector(
    A: GSymbol,
    g: int,
    P: Parametrix | None = None,
    discard: float = 1e-9,
    corners: tuple[GSymbol, GSymbol] | None = None,
    **kwargs,
) -> IndexResult:
    """Index as ``tau_g(w p0 w^{-1} - p0)``, see :func:`projector_corners`."""
    _require_window(A)
    P = P or parametrix(A, **kwargs)
    top, bottom = corners or projector_corners(A, P)
    t = localized_trace(top, g, discard)
    b = localized_trace(bottom, g, discard)
    return IndexResult(A.group.words[g], t.value + b.value, max(t.discarded, b.discarded), P.outer_residual)


def vanishing_check(G: GroupStructure, g: int):
    """Whether a homomorphism ``chi: G -> Z`` with ``chi(g) != 0`` is known to exist.

    Returns True, False (g torsion), or ``"unknown"`` when undecidable here.
    """
    if G.torsion[g]:
        return False
    if all(gen.is_identity() or np.array_equal(gen.matrix, np.eye(G.n, dtype=int)) for gen in G.generators):
        # translation groups are abelian and torsion-free modulo torsion translations;
        # an element of infinite order has a nonzero image in the free quotient
        return True
    return "unknown"


@dataclass
class FredholmResult:
    index: complex
    breakdown: list


def fredholm_index(A: GSymbol, P: Parametrix | None = None, discard: float = 1e-9, **kwargs) -> FredholmResult:
    """Sum of the constant terms of the algebraic indices over torsion conjugacy classes."""
    _require_window(A)
    G = A.group
    P = P or parametrix(A, **kwargs)
    total = 0j
    rows = []
    for cls in G.classes:
        g = cls[0]
        if not G.torsion[g]:
            continue
        res = algebraic_index(A, g, P, discard)
        total += res.constant_term
        rows.append(res.record(G, g))
    return FredholmResult(total, rows)


__all__ = [
    "FredholmResult",
    "HLaurent",
    "IndexResult",
    "TraceError",
    "TraceReport",
    "algebraic_index",
    "algebraic_index_projector",
    "component_formula",
    "fredholm_index",
    "localized_trace",
    "projector_corners",
    "symbol_trace",
    "trace_property_check",
    "vanishing_check",
]
