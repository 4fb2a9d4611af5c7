"""The unitalized crossed product ``C + (A' x G)``: twisted product, ellipticity, parametrices."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .group import GroupError, GroupStructure, act
from .symbols import Cutoff, Symbol, make_symbol, pullback


class CrossedProductError(ValueError):
    pass


class GSymbol:
    """``scalar + sum_l a_l delta_l`` with ``a_l`` symbols indexed by ball elements."""

    __slots__ = ("group", "n", "N", "cutoff", "scalar", "parts")

    def __init__(self, group: GroupStructure, n: int, N: int, cutoff: Cutoff, scalar: complex = 0, parts: Mapping | None = None):
        self.group, self.n, self.N, self.cutoff = group, n, N, cutoff
        self.scalar = complex(scalar)
        clean = {}
        for l, a in (parts or {}).items():
            if not 0 <= l < len(group):
                raise CrossedProductError(f"support element {l} outside the word ball")
            if (a.n, a.N, a.cutoff) != (n, N, cutoff):
                raise CrossedProductError("part lives in a different symbol algebra")
            if not a.is_zero():
                clean[int(l)] = a
        self.parts = dict(sorted(clean.items()))

    # -- constructors ------------------------------------------------------
    @classmethod
    def unit(cls, group, n, N, cutoff) -> "GSymbol":
        return cls(group, n, N, cutoff, 1.0)

    @classmethod
    def from_symbol(cls, group, a: Symbol, at: int = 0, scalar: complex = 0) -> "GSymbol":
        return cls(group, a.n, a.N, a.cutoff, scalar, {at: a})

    def _new(self, scalar, parts) -> "GSymbol":
        return GSymbol(self.group, self.n, self.N, self.cutoff, scalar, parts)

    def zero(self) -> "GSymbol":
        return self._new(0, {})

    def unit_like(self) -> "GSymbol":
        return self._new(1, {})

    # -- algebra -----------------------------------------------------------
    def _check(self, other: "GSymbol") -> None:
        if other.group is not self.group or (self.n, self.N, self.cutoff) != (other.n, other.N, other.cutoff):
            raise CrossedProductError("operands live in different crossed products")

    def __add__(self, other: "GSymbol") -> "GSymbol":
        self._check(other)
        parts = dict(self.parts)
        for l, a in other.parts.items():
            parts[l] = parts[l] + a if l in parts else a
        return self._new(self.scalar + other.scalar, parts)

    def __neg__(self) -> "GSymbol":
        return self.scale(-1)

    def __sub__(self, other: "GSymbol") -> "GSymbol":
        return self + (-other)

    def scale(self, s: complex) -> "GSymbol":
        return self._new(s * self.scalar, {l: a.scale(s) for l, a in self.parts.items()})

    def __mul__(self, other):
        if isinstance(other, GSymbol):
            return gmul(self, other)
        return self.scale(other)

    def __rmul__(self, s):
        return self.scale(s)

    def add_scalar(self, s: complex) -> "GSymbol":
        return self._new(self.scalar + s, self.parts)

    def truncate(self, N: int) -> "GSymbol":
        return GSymbol(self.group, self.n, N, self.cutoff, self.scalar, {l: a.truncate(N) for l, a in self.parts.items()})

    def is_zero(self) -> bool:
        return self.scalar == 0 and not self.parts

    def max_abs(self) -> float:
        return max([abs(self.scalar)] + [a.max_abs() for a in self.parts.values()])

    def distance(self, other: "GSymbol") -> float:
        return (self - other).max_abs()

    def allclose(self, other: "GSymbol", tol: float = 1e-9) -> bool:
        return self.distance(other) <= tol

    def support(self) -> list[int]:
        return list(self.parts)

    def outer_max(self, below: int | None = None) -> float:
        """Largest homogeneous coefficient; with ``below = N`` only terms violating ``d <= -N - j``."""
        return max(
            [
                abs(c)
                for a in self.parts.values()
                for (j, d, _, _), c in a.outer.items()
                if below is None or d > -below - j
            ],
            default=0.0,
        )

    def order(self) -> float:
        return max((a.order() for a in self.parts.values()), default=-math.inf)

    def __repr__(self) -> str:
        sup = ", ".join(self.group.words[l] for l in self.parts)
        return f"GSymbol(scalar={self.scalar:.6g}, support=[{sup}], N={self.N})"


def gmul(A: GSymbol, B: GSymbol) -> GSymbol:
    """Twisted product ``(a*b)_g = sum_{lk=g} a_l * act(l, b_k)`` plus scalar bookkeeping."""
    A._check(B)
    G = A.group
    parts: dict = {}

    def put(g, s):
        parts[g] = parts[g] + s if g in parts else s

    if A.scalar:
        for k, b in B.parts.items():
            put(k, b.scale(A.scalar))
    if B.scalar:
        for l, a in A.parts.items():
            put(l, a.scale(B.scalar))
    moved: dict = {}
    for l, a in A.parts.items():
        for k, b in B.parts.items():
            try:
                g = G.mul(l, k)
            except GroupError as exc:
                raise CrossedProductError(str(exc)) from exc
            if (l, k) not in moved:
                moved[(l, k)] = b if l == 0 else act(G.elements[l], b)
            put(g, a * moved[(l, k)])
    return A._new(A.scalar * B.scalar, parts)


# ---------------------------------------------------------------------------
# leading symbols on the cosphere bundle


@dataclass(frozen=True)
class CosphereGrid:
    """Uniform x-grid on T^n times direction samples (two rays or angles)."""

    n: int
    x_points: int = 16
    angles: int = 16

    @property
    def x(self) -> np.ndarray:
        t = 2 * math.pi * np.arange(self.x_points) / self.x_points
        if self.n == 1:
            return t[:, None]
        X, Y = np.meshgrid(t, t, indexing="ij")
        return np.stack([X.ravel(), Y.ravel()], axis=1)

    @property
    def directions(self) -> np.ndarray:
        """Rays (+1, -1) for n = 1, angles theta for n = 2."""
        if self.n == 1:
            return np.array([1.0, -1.0])
        return 2 * math.pi * np.arange(self.angles) / self.angles

    def refine(self, factor: int = 2) -> "CosphereGrid":
        return CosphereGrid(self.n, self.x_points * factor, self.angles * factor)


def leading_coefficients(a: Symbol) -> dict:
    """Degree-0, h^0 homogeneous coefficients ``{(k, m): c}`` (the principal symbol)."""
    out = {}
    for (j, d, k, m), c in a.outer.items():
        if j == 0:
            if d > 0:
                raise CrossedProductError("symbol of positive order; only order-0 elements are admitted")
            if d == 0:
                out[(k, m)] = out.get((k, m), 0) + c
    return out


def evaluate_leading(coeffs: Mapping, grid: CosphereGrid) -> np.ndarray:
    """Principal symbol values on ``grid``; shape (x points, directions)."""
    x = grid.x
    dirs = grid.directions
    out = np.zeros((x.shape[0], dirs.shape[0]), dtype=complex)
    for (k, m), c in coeffs.items():
        ex = np.exp(1j * (x @ np.array(k, dtype=float)))
        ang = (dirs == m).astype(float) if grid.n == 1 else np.exp(1j * m * dirs)
        out += c * np.outer(ex, ang)
    return out


def regular_representation(A: GSymbol, grid: CosphereGrid) -> np.ndarray:
    """Matrices ``M[p, u, v] = s delta_uv + a_{u v^-1}(C_u p)`` for a finite group.

    ``A -> M(A)`` is multiplicative at the principal-symbol level, so the
    principal symbol of the inverse is read off ``M^{-1}[p, e, l^-1]``.
    """
    G = A.group
    if not G.finite:
        raise CrossedProductError("regular representation needs a finite group (closed ball)")
    size = len(G)
    npts = grid.x.shape[0] * grid.directions.shape[0]
    M = np.zeros((npts, size, size), dtype=complex)
    for u in range(size):
        gu = G.elements[u]
        for v in range(size):
            l = G.mul(u, G.inv[v])
            if l in A.parts:
                moved = pullback(A.parts[l], gu.matrix, gu.b_radians)
                M[:, u, v] = evaluate_leading(leading_coefficients(moved), grid).ravel()
        M[:, u, u] += A.scalar
    return M


def _project(values: np.ndarray, grid: CosphereGrid, bandwidth: int) -> tuple[dict, float]:
    """Fourier coefficients ``{(k, m): c}`` with |k|, |m| <= bandwidth and the sup of the dropped tail."""
    n, P = grid.n, grid.x_points
    if 2 * bandwidth + 1 > P or (n == 2 and 2 * bandwidth + 1 > grid.angles):
        raise CrossedProductError("grid too coarse for the requested bandwidth")
    if n == 1:
        F = np.fft.fft(values, axis=0) / P
    else:
        F = np.fft.fftn(values.reshape(P, P, -1), axes=(0, 1)) / P**2
        F = np.fft.fft(F, axis=2) / grid.angles
    coeffs = {}
    freq = np.fft.fftfreq(P, 1 / P).astype(int)
    keep = np.abs(freq) <= bandwidth
    scale = max(np.abs(values).max(), 1.0)
    if n == 1:
        for ik in np.nonzero(keep)[0]:
            for ir, ray in enumerate((1, -1)):
                c = F[ik, ir]
                if abs(c) > 1e-14 * scale:
                    coeffs[((int(freq[ik]),), ray)] = c
    else:
        afreq = np.fft.fftfreq(grid.angles, 1 / grid.angles).astype(int)
        akeep = np.nonzero(np.abs(afreq) <= bandwidth)[0]
        for i0 in np.nonzero(keep)[0]:
            for i1 in np.nonzero(keep)[0]:
                for im in akeep:
                    c = F[i0, i1, im]
                    if abs(c) > 1e-14 * scale:
                        coeffs[((int(freq[i0]), int(freq[i1])), int(afreq[im]))] = c
    recon = evaluate_leading(coeffs, grid)
    return coeffs, float(np.abs(recon - values).max())


@dataclass
class Ellipticity:
    elliptic: bool
    margin: float
    route: str
    indeterminate: bool = False


def is_elliptic(A: GSymbol, grid: CosphereGrid | None = None, threshold: float = 1e-6) -> Ellipticity:
    """Invertibility of the principal symbol in the crossed product.

    Finite groups: ``min |det M(p)|`` over the grid.  Otherwise the Neumann
    criterion ``|s| - sum_l sup|a_l|`` on the non-scalar principal part.
    """
    grid = grid or CosphereGrid(A.n)
    if A.group.finite:
        M = regular_representation(A, grid)
        margin = float(np.abs(np.linalg.det(M)).min())
        route = "regular-representation"
    else:
        sup = sum(float(np.abs(evaluate_leading(leading_coefficients(a), grid)).max()) for a in A.parts.values())
        margin = abs(A.scalar) - sup
        route = "neumann"
    if A.scalar == 0:
        return Ellipticity(False, 0.0, route)
    indeterminate = abs(margin - threshold) < 10 * threshold
    return Ellipticity(margin > threshold, margin, route, indeterminate)


@dataclass
class LeadingInverse:
    r0: GSymbol
    residual: float
    route: str
    terms: int = 0


def _lift(coeffs: Mapping, A: GSymbol, order: int = 0) -> Symbol:
    return make_symbol(A.n, A.N, [(0, 0, k, m, c) for (k, m), c in coeffs.items()], A.cutoff, order=order)


def leading_inverse(
    A: GSymbol,
    grid: CosphereGrid | None = None,
    bandwidth: int = 4,
    tolerance: float = 1e-8,
    neumann_terms: int | None = None,
) -> LeadingInverse:
    """An ``r0`` whose principal symbol inverts that of ``A``.

    Finite groups invert ``M(p)`` pointwise and project back to Fourier modes
    (``residual`` is the sup of the dropped tail).  Infinite groups sum the
    Neumann series of ``q = 1 - A/s`` at principal level (``residual`` is the
    geometric tail bound).
    """
    grid = grid or CosphereGrid(A.n, x_points=max(16, 4 * bandwidth + 4), angles=max(16, 4 * bandwidth + 4))
    ell = is_elliptic(A, grid)
    if not ell.elliptic:
        raise CrossedProductError(f"symbol is not elliptic (margin {ell.margin:.3e})")
    s = A.scalar
    G = A.group
    if G.finite:
        M = regular_representation(A, grid)
        Minv = np.linalg.inv(M)
        shape = (grid.x.shape[0], grid.directions.shape[0])
        parts = {}
        residual = 0.0
        for l in range(len(G)):
            vals = Minv[:, 0, G.inv[l]].reshape(shape)
            if l == 0:
                vals = vals - 1 / s
            if np.abs(vals).max() < 1e-14:
                continue
            coeffs, res = _project(vals, grid, bandwidth)
            residual = max(residual, res)
            if coeffs:
                parts[l] = _lift(coeffs, A)
        if residual > tolerance:
            raise CrossedProductError(
                f"projection residual {residual:.3e} exceeds {tolerance:.1e}; raise the bandwidth or refine the grid"
            )
        return LeadingInverse(A._new(1 / s, parts), residual, "regular-representation")
    # Neumann: A = s (1 - q) at principal level
    lead_parts = {}
    for l, a in A.parts.items():
        coeffs = leading_coefficients(a)
        if coeffs:
            lead_parts[l] = _lift(coeffs, A).truncate(1)
    q = GSymbol(G, A.n, 1, A.cutoff, 0, {l: a.scale(-1 / s) for l, a in lead_parts.items()})
    qnorm = (abs(s) - ell.margin) / abs(s)
    if qnorm == 0 or q.is_zero():
        return LeadingInverse(A._new(1 / s, {}), 0.0, "neumann", 0)
    if neumann_terms is None:
        neumann_terms = max(1, math.ceil(math.log(tolerance * (1 - qnorm)) / math.log(qnorm)) - 1)
    total = q.unit_like()
    power = q.unit_like()
    for _ in range(neumann_terms):
        power = gmul(power, q)
        total = total + power
    tail = qnorm ** (neumann_terms + 1) / (1 - qnorm)
    if tail > tolerance:
        raise CrossedProductError(f"Neumann tail bound {tail:.3e} exceeds {tolerance:.1e}; add terms")
    parts = {l: a.truncate(A.N) for l, a in total.parts.items()}
    return LeadingInverse(A._new(1 / s, {l: a.scale(1 / s) for l, a in parts.items()}), tail, "neumann", neumann_terms)


@dataclass
class Parametrix:
    r: GSymbol
    left_residual: GSymbol
    right_residual: GSymbol
    leading: LeadingInverse
    outer_residual: float = field(init=False)

    def __post_init__(self):
        # membership of both residuals in the order -N ideal, up to projection noise
        N = self.r.N
        self.outer_residual = max(self.left_residual.outer_max(N), self.right_residual.outer_max(N))


def parametrix(
    A: GSymbol, r0: LeadingInverse | None = None, tolerance: float = 1e-8, side: str = "right", **kwargs
) -> Parametrix:
    """``r = r0 * (1 + w + ... + w^N)`` with ``w = 1 - A * r0`` (``side="right"``),
    or ``r = (1 + w' + ... + w'^N) * r0`` with ``w' = 1 - r0 * A`` (``side="left"``).

    Both residuals ``1 - A r`` and ``1 - r A`` then have homogeneous terms
    only of degree ``<= -N - j`` at ``h^j``; any violation (propagated
    projection noise) is reported as ``outer_residual``.
    """
    if side not in ("right", "left"):
        raise ValueError(f"side must be 'right' or 'left', not {side!r}")
    r0 = r0 or leading_inverse(A, tolerance=tolerance, **kwargs)
    one = A.unit_like()
    acc = one
    if side == "right":
        w = one - gmul(A, r0.r0)
        for _ in range(A.N):
            acc = one + gmul(w, acc)
        r = gmul(r0.r0, acc)
    else:
        w = one - gmul(r0.r0, A)
        for _ in range(A.N):
            acc = one + gmul(acc, w)
        r = gmul(acc, r0.r0)
    p = Parametrix(r, one - gmul(A, r), one - gmul(r, A), r0)
    if p.outer_residual > max(tolerance, 10 * r0.residual):
        raise CrossedProductError(f"parametrix residual {p.outer_residual:.3e} exceeds tolerance")
    return p


__all__ = [
    "CosphereGrid",
    "CrossedProductError",
    "Ellipticity",
    "GSymbol",
    "LeadingInverse",
    "Parametrix",
    "evaluate_leading",
    "gmul",
    "is_elliptic",
    "leading_coefficients",
    "leading_inverse",
    "parametrix",
    "regular_representation",
]
