"""Semiclassical symbols on the punctured cotangent bundle of T^n, n in {1, 2}.

A symbol is a truncated h-series ``sum_j h^j a_j``.  Each coefficient is a
finite sum over x-modes ``e^{i k.x}`` and angular modes ``Y_m(xi)`` of radial
profiles ``rho(r)``, ``r = |xi|``.  ``Y_m`` is the ray indicator (m = +1/-1)
for n = 1 and ``e^{i m theta}`` for n = 2.

Radial profiles vanish for ``r < R_0`` (``R_0 = R/2`` by default) and are split
in two pieces:

* outer (``r >= R``): exact finite sums of homogeneous powers ``r^d``;
* transition (``R_0 <= r < R``): values on a Chebyshev grid.  Derivatives
  go through Chebyshev coefficients, integrals use Clenshaw-Curtis weights.

Homogeneous terms built with :func:`make_symbol` are continued into the
transition piece by ``r^d chi(r)`` where ``chi`` is a C^p smoothstep, so
symbols are C^p across both breakpoints.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Mapping

import numpy as np
from numpy.polynomial import chebyshev as C
from scipy.fft import dct

PRUNE = 1e-15
CHOP = 1e-15


class SymbolError(ValueError):
    pass


@dataclass(frozen=True)
class Cutoff:
    """Smooth excision of the zero section and the radial grid it lives on.

    ``chi(r) = 0`` for ``r <= inner_ratio * radius``, ``1`` for ``r >= radius``,
    and the C^smoothness smoothstep in between.
    """

    radius: float = 1.0
    smoothness: int = 8
    nodes: int = 257
    inner_ratio: float = 0.5

    @property
    def inner(self) -> float:
        return self.radius * self.inner_ratio

    @cached_property
    def grid(self) -> "RadialGrid":
        return RadialGrid(self.inner, self.radius, self.nodes)

    @cached_property
    def chi_values(self) -> np.ndarray:
        return smoothstep(self.grid.t01, self.smoothness)

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        t = np.clip((r - self.inner) / (self.radius - self.inner), 0.0, 1.0)
        return smoothstep(t, self.smoothness)


def smoothstep(t, p: int):
    """``t^{p+1} sum_k C(p+k, k) (1-t)^k`` on [0, 1]; C^p at both ends."""
    t = np.asarray(t, dtype=float)
    s = np.zeros_like(t)
    for k in range(p + 1):
        s = s + math.comb(p + k, k) * (1 - t) ** k
    return t ** (p + 1) * s


class RadialGrid:
    """Chebyshev points of the second kind on [lo, hi] and spectral helpers."""

    def __init__(self, lo: float, hi: float, n: int):
        self.lo, self.hi, self.n = lo, hi, n
        self.t = np.cos(np.pi * np.arange(n) / (n - 1))
        self.r = lo + (hi - lo) * (self.t + 1) / 2
        self.t01 = (self.t + 1) / 2
        k = np.arange(n).astype(float)
        moments = np.zeros(n)
        even = np.arange(n) % 2 == 0
        moments[even] = 2.0 / (1.0 - k[even] ** 2)
        # Clenshaw-Curtis weights: integral = moments . coefficients(values)
        self.weights = (self.to_coeffs(np.eye(n)).T @ moments) * (hi - lo) / 2

    def to_coeffs(self, values: np.ndarray) -> np.ndarray:
        c = dct(values, type=1, axis=0) / (self.n - 1)
        c[0] /= 2
        c[-1] /= 2
        return c

    def to_values(self, coeffs: np.ndarray) -> np.ndarray:
        c = np.array(coeffs)
        c[0] *= 2
        c[-1] *= 2
        return dct(c, type=1, axis=0) / 2

    def derivative(self, values: np.ndarray) -> np.ndarray:
        """d/dr of the interpolant; works on stacked columns."""
        c = self.to_coeffs(values)
        scale = np.abs(c).max(axis=0, keepdims=True)
        c[np.abs(c) < CHOP * scale] = 0
        return self.to_values(self._dcoef @ c)

    @cached_property
    def _dcoef(self) -> np.ndarray:
        """Chebyshev coefficient map of d/dr (same sums as ``chebder``, as one matmul)."""
        n = self.n
        D = np.zeros((n, n))
        for j in range(1, n):
            D[j - 1 :: -2, j] = 2 * j
        D[0] /= 2
        return D * (2 / (self.hi - self.lo))

    def integral(self, values: np.ndarray, power: int = 0) -> complex:
        return complex(np.dot(self.weights, values * self.r ** float(power)))

    def interpolate(self, values: np.ndarray, r) -> np.ndarray:
        c = self.to_coeffs(values)
        t = 2 * (np.asarray(r, dtype=float) - self.lo) / (self.hi - self.lo) - 1
        return C.chebval(t, c)


def radial_integral(cutoff: Cutoff, power: int) -> float:
    """Closed form of ``int_R^inf r^power dr``."""
    if power >= -1:
        raise SymbolError(f"divergent radial integral of r^{power} at infinity")
    return -(cutoff.radius ** (power + 1)) / (power + 1)


def _acc(terms: dict, key, c) -> None:
    if key in terms:
        terms[key] = terms[key] + c
    else:
        terms[key] = c


class Symbol:
    """Truncated semiclassical symbol.  Instances are never mutated.

    ``outer`` maps ``(j, d, k, m)`` to the coefficient of
    ``h^j e^{ik.x} r^d Y_m`` on ``r >= R``; ``trans`` maps ``(j, k, m)`` to
    the transition profile sampled on ``cutoff.grid``.
    """

    __slots__ = ("n", "N", "cutoff", "outer", "trans")

    def __init__(self, n: int, N: int, cutoff: Cutoff, outer: Mapping | None = None, trans: Mapping | None = None):
        if n not in (1, 2):
            raise SymbolError("only n = 1 and n = 2 are supported")
        if N < 1:
            raise SymbolError("truncation N must be positive")
        self.n, self.N, self.cutoff = n, N, cutoff
        self.outer = {key: complex(c) for key, c in (outer or {}).items() if key[0] < N and abs(c) > PRUNE}
        self.trans = {}
        for key, v in (trans or {}).items():
            if key[0] < N and np.abs(v).max() > PRUNE:
                self.trans[key] = np.asarray(v, dtype=complex)

    # -- bookkeeping -------------------------------------------------------
    def _new(self, outer, trans, N: int | None = None) -> Symbol:
        return Symbol(self.n, self.N if N is None else N, self.cutoff, outer, trans)

    def zero(self) -> Symbol:
        return self._new({}, {})

    def is_zero(self) -> bool:
        return not self.outer and not self.trans

    def compatible(self, other: Symbol) -> None:
        if (self.n, self.N, self.cutoff) != (other.n, other.N, other.cutoff):
            raise SymbolError("symbols live in different algebras (n, N or cutoff differ)")

    def coefficient(self, j: int) -> Symbol:
        """The h^j part, kept at its h-power."""
        return self._new(
            {k: c for k, c in self.outer.items() if k[0] == j},
            {k: v for k, v in self.trans.items() if k[0] == j},
        )

    def order(self, j: int | None = None) -> float:
        """Largest outer homogeneity degree (``-inf`` for compact support)."""
        degs = [key[1] for key in self.outer if j is None or key[0] == j]
        return max(degs) if degs else -math.inf

    def graded_order(self) -> float:
        """Smallest m with ``order(a_j) <= m - j`` for every j."""
        vals = [key[1] + key[0] for key in self.outer]
        return max(vals) if vals else -math.inf

    def lowest_h_power(self) -> int:
        return min([k[0] for k in self.outer] + [k[0] for k in self.trans], default=self.N)

    def bandwidth(self) -> tuple[int, int]:
        """(max |k|_inf, max |m|) over all terms."""
        keys = [(k[2], k[3]) for k in self.outer] + [(k[1], k[2]) for k in self.trans]
        kmax = max((max(abs(v) for v in k) for k, _ in keys), default=0)
        mmax = max((abs(m) for _, m in keys), default=0) if self.n == 2 else 0
        return kmax, mmax

    def truncate(self, N: int) -> Symbol:
        return self._new(self.outer, self.trans, N=N)

    def max_abs(self) -> float:
        vals = [abs(c) for c in self.outer.values()] + [float(np.abs(v).max()) for v in self.trans.values()]
        return max(vals, default=0.0)

    # -- linear structure --------------------------------------------------
    def __add__(self, other: Symbol) -> Symbol:
        self.compatible(other)
        outer = dict(self.outer)
        for key, c in other.outer.items():
            _acc(outer, key, c)
        trans = dict(self.trans)
        for key, v in other.trans.items():
            _acc(trans, key, v)
        return self._new(outer, trans)

    def __neg__(self) -> Symbol:
        return self.scale(-1)

    def __sub__(self, other: Symbol) -> Symbol:
        return self + (-other)

    def scale(self, s: complex) -> Symbol:
        return self._new({k: s * c for k, c in self.outer.items()}, {k: s * v for k, v in self.trans.items()})

    def __mul__(self, other):
        if isinstance(other, Symbol):
            return star_product(self, other)
        return self.scale(other)

    def __rmul__(self, s):
        return self.scale(s)

    def distance(self, other: Symbol) -> float:
        return (self - other).max_abs()

    def allclose(self, other: Symbol, tol: float = 1e-9) -> bool:
        return self.distance(other) <= tol

    def __repr__(self) -> str:
        return f"Symbol(n={self.n}, N={self.N}, outer={len(self.outer)}, trans={len(self.trans)}, order={self.order()})"


# ---------------------------------------------------------------------------
# construction


def _mode(k, n: int) -> tuple:
    k = (int(k),) if np.isscalar(k) else tuple(int(v) for v in k)
    if len(k) != n:
        raise SymbolError(f"x-mode {k} has wrong length for n={n}")
    return k


def _rays(m, n: int) -> list:
    if n == 2:
        return [int(m)]
    if m == 0:
        return [1, -1]
    if m not in (1, -1):
        raise SymbolError("n = 1 angular index must be +1, -1 or 0 (both rays)")
    return [int(m)]


def make_symbol(n: int, N: int, entries: Iterable, cutoff: Cutoff | None = None, order: int = 0) -> Symbol:
    """Build a symbol from homogeneous entries ``(j, d, k, m, coefficient)``.

    Each entry is ``c h^j e^{ik.x} r^d Y_m`` on ``r >= R`` continued by
    ``r^d chi(r)`` below.  For n = 1, ``m = 0`` means both rays.  Entries must
    respect the grading ``d <= order - j``.
    """
    cutoff = cutoff or Cutoff()
    grid = cutoff.grid
    outer: dict = {}
    trans: dict = {}
    for j, d, k, m, c in entries:
        k = _mode(k, n)
        if not 0 <= j < N:
            raise SymbolError(f"h-order {j} outside truncation window [0, {N})")
        if d > order - j:
            raise SymbolError(f"grading violation: degree {d} at h^{j} exceeds order {order} - {j}")
        prof = cutoff.chi_values * grid.r ** float(d)
        for mm in _rays(m, n):
            _acc(outer, (j, int(d), k, mm), complex(c))
            _acc(trans, (j, k, mm), complex(c) * prof)
    return Symbol(n, N, cutoff, outer, trans)


def make_profile_symbol(n: int, N: int, entries: Iterable, cutoff: Cutoff | None = None) -> Symbol:
    """Compactly supported symbol from ``(j, k, m, profile)`` entries.

    ``profile`` is a callable of r sampled on the transition grid; it should
    vanish to high order at both ends.
    """
    cutoff = cutoff or Cutoff()
    trans: dict = {}
    for j, k, m, prof in entries:
        vals = np.asarray(prof(cutoff.grid.r), dtype=complex)
        for mm in _rays(m, n):
            _acc(trans, (j, _mode(k, n), mm), vals)
    return Symbol(n, N, cutoff, {}, trans)


# ---------------------------------------------------------------------------
# derivatives


def _dx(a: Symbol, axis: int) -> Symbol:
    outer = {key: 1j * key[2][axis] * c for key, c in a.outer.items() if key[2][axis]}
    trans = {key: 1j * key[1][axis] * v for key, v in a.trans.items() if key[1][axis]}
    return a._new(outer, trans)


def _dxi(a: Symbol, axis: int) -> Symbol:
    outer: dict = {}
    trans: dict = {}
    grid = a.cutoff.grid
    if a.n == 1:
        for (j, d, k, m), c in a.outer.items():
            if d:
                _acc(outer, (j, d - 1, k, m), c * d * m)
        if a.trans:
            keys = list(a.trans)
            der = grid.derivative(np.stack([a.trans[key] for key in keys], axis=1))
            for i, key in enumerate(keys):
                _acc(trans, key, key[2] * der[:, i])
        return a._new(outer, trans)
    # polar rules: d_xi1 = cos d_r - sin/r d_theta, d_xi2 = sin d_r + cos/r d_theta
    for (j, d, k, m), c in a.outer.items():
        up, down = (d - m) / 2, (d + m) / 2
        if axis == 1:
            up, down = -1j * up, 1j * down
        if up:
            _acc(outer, (j, d - 1, k, m + 1), c * up)
        if down:
            _acc(outer, (j, d - 1, k, m - 1), c * down)
    if a.trans:
        keys = list(a.trans)
        vals = np.stack([a.trans[key] for key in keys], axis=1)
        der = grid.derivative(vals)
        mr = vals * (np.array([key[2] for key in keys]) / grid.r[:, None])
        up, down = ((der - mr) / 2).T, ((der + mr) / 2).T
        if axis == 1:
            up, down = -1j * up, 1j * down
        for i, (j, k, m) in enumerate(keys):
            _acc(trans, (j, k, m + 1), up[i])
            _acc(trans, (j, k, m - 1), down[i])
    return a._new(outer, trans)


def derive(a: Symbol, alpha: tuple = (), beta: tuple = ()) -> Symbol:
    """``d_x^alpha d_xi^beta a`` (plain derivatives, no factors of -i)."""
    alpha = tuple(alpha) or (0,) * a.n
    beta = tuple(beta) or (0,) * a.n
    for axis, times in enumerate(alpha):
        for _ in range(times):
            a = _dx(a, axis)
    for axis, times in enumerate(beta):
        for _ in range(times):
            a = _dxi(a, axis)
    return a


# ---------------------------------------------------------------------------
# star product


def multi_indices(n: int, total: int):
    if n == 1:
        yield (total,)
    else:
        for i in range(total, -1, -1):
            yield (i, total - i)


def _pointwise(a: Symbol, b: Symbol, shift: int, scale: complex, outer: dict, trans: dict) -> None:
    n, N = a.n, a.N
    if a.outer and b.outer:
        buckets: dict = {}
        for key, c in b.outer.items():
            buckets.setdefault(key[3] if n == 1 else None, []).append((key, c))
        for (j1, d1, k1, m1), c1 in a.outer.items():
            for (j2, d2, k2, m2), c2 in buckets.get(m1 if n == 1 else None, ()):
                j = j1 + j2 + shift
                if j < N:
                    k = tuple(u + v for u, v in zip(k1, k2))
                    _acc(outer, (j, d1 + d2, k, m1 if n == 1 else m1 + m2), scale * c1 * c2)
    if a.trans and b.trans:
        _pointwise_trans(a, b, shift, scale, trans)


_S = 1 << 14  # radix of the additive key code; |k|, |m| stay far below S / 2


def _encode(j, k, m) -> np.ndarray:
    """Additive integer code of (j, k, m): code(x) + code(y) = code(x + y)."""
    code = np.asarray(j, dtype=np.int64)
    for col in np.atleast_2d(np.asarray(k, dtype=np.int64)).T:
        code = code * _S + col
    return code * _S + np.asarray(m, dtype=np.int64)


def _decode(code: int, n: int) -> tuple:
    parts = []
    for _ in range(n + 1):
        r = (code + _S // 2) % _S - _S // 2
        parts.append(int(r))
        code = (code - r) // _S
    m = parts[0]
    k = tuple(reversed(parts[1:]))
    return int(code), k, m


def _pointwise_trans(a: Symbol, b: Symbol, shift: int, scale: complex, trans: dict) -> None:
    """Transition part of ``_pointwise``, vectorized over the terms of ``b``.

    For n = 1 the ray label is not additive, so each ray is handled apart.
    """
    n, N = a.n, a.N
    groups = ((1,), (-1,)) if n == 1 else (None,)
    for g in groups:
        akeys = [key for key in a.trans if g is None or key[2] == g[0]]
        bkeys = [key for key in b.trans if g is None or key[2] == g[0]]
        if not akeys or not bkeys:
            continue
        madd = 0 if n == 1 else 1
        ca = _encode([x[0] for x in akeys], [x[1] for x in akeys], [madd * x[2] for x in akeys])
        cb = _encode([x[0] for x in bkeys], [x[1] for x in bkeys], [madd * x[2] for x in bkeys])
        ja = np.array([x[0] for x in akeys])
        jb = np.array([x[0] for x in bkeys])
        V2 = np.stack([b.trans[x] for x in bkeys])
        shift_code = int(np.ravel(_encode(shift, [[0] * n], 0))[0])
        allcodes = (ca[:, None] + cb[None, :] + shift_code)[(ja[:, None] + jb[None, :] + shift) < N]
        uniq = np.unique(allcodes)
        if uniq.size == 0:
            continue
        out = np.zeros((uniq.size, V2.shape[1]), dtype=complex)
        for i, key in enumerate(akeys):
            sel = jb + ja[i] + shift < N
            if not sel.any():
                continue
            pos = np.searchsorted(uniq, ca[i] + cb[sel] + shift_code)
            out[pos] += (scale * a.trans[key]) * V2[sel]
        for code, row in zip(uniq.tolist(), out):
            j, k, m = _decode(code, n)
            _acc(trans, (j, k, g[0] if n == 1 else m), row)


def star_product(a: Symbol, b: Symbol) -> Symbol:
    """Composition law of the torus Kohn-Nirenberg quantization,

        a * b = sum_alpha h^|alpha| / alpha!  d_xi^alpha a . D_x^alpha b,

    truncated at h^N, with ``D_x = -i d_x``.
    """
    a.compatible(b)
    N = a.N
    outer: dict = {}
    trans: dict = {}
    base = a.lowest_h_power() + b.lowest_h_power()
    da_cache = {(0,) * a.n: a}
    db_cache = {(0,) * a.n: b}

    def step(cache, alpha, fn):
        if alpha not in cache:
            axis = next(i for i, v in enumerate(alpha) if v)
            prev = tuple(v - (i == axis) for i, v in enumerate(alpha))
            cache[alpha] = fn(step(cache, prev, fn), axis)
        return cache[alpha]

    for total in range(max(N - base, 0)):
        for alpha in multi_indices(a.n, total):
            da = step(da_cache, alpha, _dxi)
            db = step(db_cache, alpha, _dx)
            if da.is_zero() or db.is_zero():
                continue
            scale = (-1j) ** total / math.prod(math.factorial(v) for v in alpha)
            _pointwise(da, db, total, scale, outer, trans)
    return a._new(outer, trans)


# ---------------------------------------------------------------------------
# affine pullbacks


def angular_map(A: np.ndarray) -> tuple[int, float]:
    """For orthogonal 2x2 ``A``: ``theta(A xi) = det * theta(xi) + alpha``."""
    det = int(round(np.linalg.det(A)))
    return det, math.atan2(A[1, 0], A[0, 0])


def check_signed_permutation(A) -> None:
    A = np.asarray(A)
    ok = (
        A.ndim == 2
        and A.shape[0] == A.shape[1]
        and bool(np.all(np.isin(A, (-1, 0, 1))))
        and bool(np.all(np.abs(A).sum(axis=0) == 1))
        and bool(np.all(np.abs(A).sum(axis=1) == 1))
    )
    if not ok:
        raise SymbolError(f"unsupported map: linear part {A.tolist()} is not a signed permutation")


def pullback(a: Symbol, A, b_radians) -> Symbol:
    """``a o C`` for ``C(x, xi) = (A x + b, A^{-T} xi)``, ``A`` a signed permutation."""
    A = np.asarray(A, dtype=int)
    check_signed_permutation(A)
    b = np.asarray(b_radians, dtype=float).reshape(a.n)
    det, alpha = angular_map(A) if a.n == 2 else (int(A[0, 0]), 0.0)

    def move(k, m):
        kv = np.array(k)
        phase = np.exp(1j * float(kv @ b))
        if a.n == 2:
            phase *= np.exp(1j * m * alpha)
        return tuple(int(v) for v in A.T @ kv), det * m, phase

    outer: dict = {}
    for (j, d, k, m), c in a.outer.items():
        nk, nm, ph = move(k, m)
        _acc(outer, (j, d, nk, nm), c * ph)
    trans: dict = {}
    for (j, k, m), v in a.trans.items():
        nk, nm, ph = move(k, m)
        _acc(trans, (j, nk, nm), v * ph)
    return a._new(outer, trans)


# ---------------------------------------------------------------------------
# integrals and evaluation


def _angular_weight(n: int, m: int, line) -> complex:
    if n == 1:
        return 1.0
    if line is None:  # full fiber
        return 2 * math.pi if m == 0 else 0.0
    th = math.atan2(line[1], line[0])
    return complex(np.exp(1j * m * th) * (1 + (-1) ** m))


def fiber_integral(a: Symbol, modes=None, line=None) -> dict[tuple, dict[int, complex]]:
    """Fiber integrals per x-mode and h-power, ``{k: {j: value}}``.

    ``line=None`` integrates over all of R^n; otherwise over the line spanned
    by the unit vector ``line`` (n = 2 only; for n = 1 the fiber is a line).
    """
    n = a.n
    dim = n if line is None else 1
    out: dict = {}
    grid = a.cutoff.grid

    def put(k, j, val):
        slot = out.setdefault(k, {})
        slot[j] = slot.get(j, 0) + val

    for (j, d, k, m), c in a.outer.items():
        if modes is not None and k not in modes:
            continue
        w = _angular_weight(n, m, line)
        if w != 0:
            put(k, j, c * w * radial_integral(a.cutoff, d + dim - 1))
    for (j, k, m), v in a.trans.items():
        if modes is not None and k not in modes:
            continue
        w = _angular_weight(n, m, line)
        if w != 0:
            put(k, j, w * grid.integral(v, dim - 1))
    return out


def integrate(a: Symbol) -> dict[int, complex]:
    """``int int a_j dx dxi`` per h-power j, x over [0, 2 pi)^n."""
    zero = (0,) * a.n
    vals = fiber_integral(a, modes={zero}).get(zero, {})
    return {j: (2 * math.pi) ** a.n * v for j, v in vals.items()}


def evaluate(a: Symbol, x, xi, h: float = 0.0) -> np.ndarray:
    """Numeric value of ``sum_j h^j a_j(x, xi)``; broadcasts over leading axes.

    For n = 1, ``x`` and ``xi`` are arrays of scalars.
    """
    x = np.asarray(x, dtype=float)
    xi = np.asarray(xi, dtype=float)
    if a.n == 1:
        x = x[..., None]
        xi = xi[..., None]
    shape = np.broadcast_shapes(x.shape[:-1], xi.shape[:-1])
    x = np.broadcast_to(x, shape + (a.n,))
    xi = np.broadcast_to(xi, shape + (a.n,))
    r = np.linalg.norm(xi, axis=-1)
    outer_mask = r >= a.cutoff.radius
    trans_mask = (r >= a.cutoff.inner) & ~outer_mask
    ro = np.where(outer_mask, r, 1.0)
    if a.n == 1:
        sign = np.sign(xi[..., 0])
    else:
        theta = np.arctan2(xi[..., 1], xi[..., 0])

    def ang(m):
        return (sign == m).astype(float) if a.n == 1 else np.exp(1j * m * theta)

    out = np.zeros(shape, dtype=complex)
    for (j, d, k, m), c in a.outer.items():
        hj = h**j if j else 1.0
        val = c * hj * np.exp(1j * (x @ np.array(k, float))) * ro ** float(d) * ang(m)
        out += np.where(outer_mask, val, 0)
    if a.trans and trans_mask.any():
        rt = np.where(trans_mask, r, a.cutoff.inner)
        for (j, k, m), v in a.trans.items():
            hj = h**j if j else 1.0
            val = hj * np.exp(1j * (x @ np.array(k, float))) * a.cutoff.grid.interpolate(v, rt) * ang(m)
            out += np.where(trans_mask, val, 0)
    return out


def fiber_values(a: Symbol, xi, h: float = 0.0) -> dict[tuple, np.ndarray]:
    """Values of the x-Fourier coefficients ``sum_j h^j a_j^(p)(xi)`` per x-mode p.

    ``xi`` has shape (M, n) (or (M,) for n = 1).  Transition profiles are
    interpolated once per distinct radius with a single matrix product.
    """
    xi = np.asarray(xi, dtype=float)
    if a.n == 1 and xi.ndim == 1:
        xi = xi[:, None]
    r = np.linalg.norm(xi, axis=1)
    outer_mask = r >= a.cutoff.radius
    trans_mask = (r >= a.cutoff.inner) & ~outer_mask
    if a.n == 1:
        sign = np.sign(xi[:, 0])
    else:
        theta = np.arctan2(xi[:, 1], xi[:, 0])
    ang_cache: dict = {}

    def ang(m, mask):
        if m not in ang_cache:
            ang_cache[m] = (sign == m).astype(float) if a.n == 1 else np.exp(1j * m * theta)
        return ang_cache[m][mask]

    out: dict = {}

    def put(p, mask, vals):
        if p not in out:
            out[p] = np.zeros(len(r), dtype=complex)
        out[p][mask] += vals

    if a.outer and outer_mask.any():
        ro = r[outer_mask]
        for (j, d, k, m), c in a.outer.items():
            put(k, outer_mask, c * (h**j if j else 1.0) * ro ** float(d) * ang(m, outer_mask))
    if a.trans and trans_mask.any():
        grid = a.cutoff.grid
        radii, inverse = np.unique(r[trans_mask], return_inverse=True)
        t = 2 * (radii - grid.lo) / (grid.hi - grid.lo) - 1
        W = C.chebvander(t, grid.n - 1) @ grid.to_coeffs(np.eye(grid.n))
        keys = list(a.trans)
        vals = W @ np.stack([a.trans[key] for key in keys], axis=1)
        for col, (j, k, m) in enumerate(keys):
            put(k, trans_mask, (h**j if j else 1.0) * vals[inverse, col] * ang(m, trans_mask))
    return out


__all__ = [
    "Cutoff",
    "RadialGrid",
    "Symbol",
    "SymbolError",
    "make_symbol",
    "make_profile_symbol",
    "derive",
    "star_product",
    "pullback",
    "integrate",
    "fiber_integral",
    "evaluate",
    "fiber_values",
    "radial_integral",
    "multi_indices",
    "check_signed_permutation",
    "smoothstep",
]
