"""Affine canonical transformations of T*T^n and word balls of the groups they generate.

Translations are stored in *turns* (fractions of a full period 2 pi): a
``Fraction`` when given as ``"p/q"``, a float otherwise.  Group elements act on
the torus by ``x -> A x + b``; the lifted canonical map is
``C(x, xi) = (A x + b, A^{-T} xi) = (A x + b, A xi)`` because signed
permutations are orthogonal.
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np
from scipy.linalg import null_space

from .symbols import Symbol, check_signed_permutation, pullback

KEY_DIGITS = 10


class GroupError(ValueError):
    pass


def parse_turns(value) -> Fraction | float:
    """``"p/q"`` -> Fraction of a full turn; a number means radians."""
    if isinstance(value, Fraction):
        return value % 1
    if isinstance(value, str):
        v = value.strip()
        if v.endswith("pi"):
            raise GroupError("write multiples of 2 pi as 'p/q' strings")
        try:
            return Fraction(v) % 1
        except ValueError as exc:
            raise GroupError(f"cannot parse translation {value!r}") from exc
    value = float(value)
    if value == 0:
        return Fraction(0)
    return (value / (2 * math.pi)) % 1.0


def _mod1(v):
    v = v % 1
    if isinstance(v, float) and v >= 1.0:
        return 0.0
    return v


def _key_part(v) -> float:
    r = round(float(v) % 1.0, KEY_DIGITS)
    return 0.0 if r >= 1.0 else r


@dataclass(frozen=True)
class AffineMap:
    """``x -> A x + b`` on T^n with ``A`` a signed permutation, ``b`` in turns."""

    A: tuple
    b: tuple
    name: str = field(default="", compare=False)

    def __post_init__(self):
        A = tuple(tuple(int(v) for v in row) for row in self.A)
        check_signed_permutation(np.array(A))
        if len(self.b) != len(A):
            raise GroupError("translation length does not match matrix size")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", tuple(_mod1(v) for v in self.b))

    @classmethod
    def from_config(cls, A, b, name: str = "") -> "AffineMap":
        return cls(tuple(map(tuple, A)), tuple(parse_turns(v) for v in b), name)

    @classmethod
    def identity(cls, n: int) -> "AffineMap":
        return cls(tuple(tuple(int(i == j) for j in range(n)) for i in range(n)), (Fraction(0),) * n, "e")

    @property
    def n(self) -> int:
        return len(self.A)

    @property
    def matrix(self) -> np.ndarray:
        return np.array(self.A, dtype=int)

    @property
    def b_turns(self) -> np.ndarray:
        return np.array([float(v) for v in self.b])

    @property
    def b_radians(self) -> np.ndarray:
        return 2 * math.pi * self.b_turns

    @property
    def key(self) -> tuple:
        return self.A, tuple(_key_part(v) for v in self.b)

    def is_identity(self) -> bool:
        return self.key == AffineMap.identity(self.n).key

    def __matmul__(self, other: "AffineMap") -> "AffineMap":
        """Composition ``self o other``."""
        A1, A2 = self.A, other.A
        n = self.n
        A = tuple(tuple(sum(A1[i][k] * A2[k][j] for k in range(n)) for j in range(n)) for i in range(n))
        b = tuple(sum(A1[i][k] * other.b[k] for k in range(n)) + self.b[i] for i in range(n))
        return AffineMap(A, b)

    def inverse(self) -> "AffineMap":
        n = self.n
        At = tuple(tuple(self.A[j][i] for j in range(n)) for i in range(n))
        b = tuple(-sum(At[i][k] * self.b[k] for k in range(n)) for i in range(n))
        return AffineMap(At, b)

    def __call__(self, x):
        """Apply to points given in radians."""
        x = np.asarray(x, dtype=float)
        return (x @ self.matrix.T + self.b_radians) % (2 * math.pi)

    def pullback(self, a: Symbol) -> Symbol:
        """``a o C`` for the lifted canonical map ``C``."""
        return pullback(a, self.matrix, self.b_radians)

    def __repr__(self) -> str:
        label = f"{self.name}: " if self.name else ""
        return f"AffineMap({label}A={list(map(list, self.A))}, b={[str(v) for v in self.b]} turns)"


def act(g: AffineMap, a: Symbol) -> Symbol:
    """Action of ``g`` on symbols: pullback by ``C_g^{-1}``.

    For affine maps the quantized conjugation ``Phi_g Op(a) Phi_g^{-1}`` has
    exactly this symbol; the correction terms vanish identically.
    """
    if g.is_identity():
        return a
    return g.inverse().pullback(a)


# ---------------------------------------------------------------------------
# fixed point sets


@dataclass(frozen=True)
class FixedPointSet:
    """Fixed points of the lifted map in the punctured cotangent bundle.

    ``components`` lists ``(point, directions)`` pairs: an affine subtorus of
    the base through ``point`` (turns) spanned by ``directions``.  Covectors
    are ``ker(I - A^T)`` with an integer lattice basis.  ``normal_det`` is
    ``|det B|`` for the normal block ``B = (I - A)`` restricted off its kernel.
    """

    n: int
    components: tuple
    base_dim: int
    covectors: np.ndarray
    lattice: np.ndarray
    normal_det: float

    @property
    def covector_dim(self) -> int:
        return self.covectors.shape[1]

    @property
    def empty(self) -> bool:
        return not self.components or self.covector_dim == 0

    @property
    def dim(self) -> int:
        return 0 if self.empty else self.base_dim + self.covector_dim

    @property
    def lattice_covolume(self) -> float:
        if self.lattice.shape[1] == 0:
            return 1.0
        G = self.lattice.T @ self.lattice
        return float(math.sqrt(np.linalg.det(G)))

    def contains(self, x_turns, tol: float = 1e-9) -> bool:
        """Whether a base point (in turns) lies on one of the components."""
        x = np.asarray(x_turns, dtype=float)
        for p, dirs in self.components:
            d = x - np.asarray(p, dtype=float)
            normals = _integer_basis(null_space(dirs.T)) if dirs.shape[1] else np.eye(self.n)
            w = normals.T @ d
            if np.all(np.abs(w - np.round(w)) < tol):
                return True
        return False


def _integer_basis(V: np.ndarray) -> np.ndarray:
    """Primitive integer basis of ``span(V) cap Z^n`` for signed-permutation kernels."""
    n, k = V.shape
    if k == 0:
        return np.zeros((n, 0))
    if k == n:
        return np.eye(n)
    cols = []
    for c in range(k):
        v = V[:, c] / np.abs(V[:, c]).max()
        cols.append(np.round(v))
    B = np.array(cols, dtype=float).T
    if np.abs(B @ np.linalg.lstsq(B, V, rcond=None)[0] - V).max() > 1e-9:
        raise GroupError("fixed covector space is not rational")
    return B


def fixed_point_set(g: AffineMap) -> FixedPointSet:
    """Solve ``(I - A) x = b`` mod 1 through the cycle structure of ``A`` (n <= 2)."""
    n = g.n
    A = g.matrix
    b = list(g.b)
    comps: list = []
    if n == 1:
        s = A[0, 0]
        if s == 1:
            if _key_part(b[0]) == 0.0:
                comps.append((np.zeros(1), np.eye(1)))
        else:
            for z in (0, 1):
                comps.append((np.array([float(b[0] + z) / 2 % 1]), np.zeros((1, 0))))
    elif n == 2:
        if A[0, 1] == 0:
            per_axis = []
            for i in range(2):
                s = A[i, i]
                if s == 1:
                    per_axis.append([(0.0, True)] if _key_part(b[i]) == 0.0 else [])
                else:
                    per_axis.append([(float(b[i] + z) / 2 % 1, False) for z in (0, 1)])
            for p0, free0 in per_axis[0]:
                for p1, free1 in per_axis[1]:
                    dirs = [np.eye(2)[:, i] for i, f in enumerate((free0, free1)) if f]
                    comps.append((np.array([p0, p1]), np.array(dirs).T.reshape(2, len(dirs))))
        else:
            s1, s2 = A[0, 1], A[1, 0]
            # x0 - s1 x1 = b0, x1 - s2 x0 = b1 (mod 1)
            rhs = b[1] + s2 * b[0]
            if s1 * s2 == 1:
                if _key_part(rhs) == 0.0:
                    p = np.array([float(b[0]) % 1, 0.0])
                    comps.append((p, np.array([[s1], [1.0]]) / math.sqrt(2)))
            else:
                for z in (0, 1):
                    x1 = float(rhs + z) / 2
                    comps.append((np.array([(float(b[0]) + s1 * x1) % 1, x1 % 1]), np.zeros((2, 0))))
    else:
        raise GroupError("fixed point sets are implemented for n <= 2")

    M = np.eye(n) - A
    cov = null_space(M.T.astype(float))
    lattice = _integer_basis(cov)
    ev = np.linalg.eigvals(M)
    nz = ev[np.abs(ev) > 1e-12]
    normal_det = float(np.prod(np.abs(nz))) if len(nz) else 1.0
    base_dim = n - int(np.linalg.matrix_rank(M))
    fps = FixedPointSet(n, tuple(comps), base_dim, cov, lattice, normal_det)
    if comps:
        for _, dirs in comps:
            if dirs.shape[1] != base_dim:
                raise GroupError("fixed component dimension disagrees with ker(I - A)")
    if not fps.empty:
        # clean intersection: ker(1 - dC) = ker(I - A) + ker(I - A^T) must equal the fixed set's tangent space
        kernel = null_space(np.eye(2 * n) - np.kron(np.eye(2), A)).shape[1]
        if kernel != fps.dim:
            raise GroupError("fixed point set is not clean")
    return fps


# ---------------------------------------------------------------------------
# word balls


class GroupStructure:
    """Ball of words of length ``<= radius`` in the generators and their inverses.

    Elements are indexed ``0 .. len-1`` with the identity at 0.  ``table[i, j]``
    is the index of ``g_i g_j`` or ``-1`` when the product leaves the ball.
    Conjugacy classes only see conjugators inside the ball.
    """

    def __init__(self, generators: Sequence[AffineMap], radius: int, cap: int = 512, torsion_cap: int = 256):
        if not generators:
            raise GroupError("at least one generator is required")
        n = generators[0].n
        if any(g.n != n for g in generators):
            raise GroupError("generators act on tori of different dimensions")
        self.n, self.radius, self.generators = n, radius, list(generators)
        letters = []
        for i, g in enumerate(generators):
            name = g.name or f"g{i}"
            letters.append((name, g))
            if g.inverse().key != g.key:
                letters.append((name + "^-1", g.inverse()))
        e = AffineMap.identity(n)
        self.elements: list[AffineMap] = [e]
        self.words: list[str] = ["e"]
        self.length: list[int] = [0]
        self.index: dict = {e.key: 0}
        queue = deque([0])
        while queue:
            i = queue.popleft()
            if self.length[i] == radius:
                continue
            for name, g in letters:
                h = self.elements[i] @ g
                if h.key in self.index:
                    continue
                if len(self.elements) >= cap:
                    raise GroupError(
                        f"word ball exceeds the element cap {cap}; raise the cap or lower the radius {radius}"
                    )
                self.index[h.key] = len(self.elements)
                self.elements.append(h)
                self.words.append(name if i == 0 else f"{self.words[i]}*{name}")
                self.length.append(self.length[i] + 1)
                queue.append(len(self.elements) - 1)
        size = len(self.elements)
        self.table = np.full((size, size), -1, dtype=int)
        for i, gi in enumerate(self.elements):
            for j, gj in enumerate(self.elements):
                self.table[i, j] = self.index.get((gi @ gj).key, -1)
        self.inv = np.array([self.index.get(g.inverse().key, -1) for g in self.elements])
        if np.any(self.inv < 0):
            raise GroupError("ball is not closed under inverses")
        self.torsion = [self._order(g, torsion_cap) is not None for g in self.elements]
        self.orders = [self._order(g, torsion_cap) for g in self.elements]
        self.classes = self._conjugacy()

    @staticmethod
    def _order(g: AffineMap, cap: int) -> int | None:
        p = g
        for k in range(1, cap + 1):
            if p.is_identity():
                return k
            p = p @ g
        return None

    def _conjugacy(self) -> list[list[int]]:
        size = len(self.elements)
        parent = list(range(size))

        def find(i):
            while parent[i] != i:
                parent[i] = parent[parent[i]]
                i = parent[i]
            return i

        for h in range(size):
            hi = self.inv[h]
            for g in range(size):
                hg = self.table[h, g]
                c = self.table[hg, hi] if hg >= 0 else -1
                if c >= 0:
                    parent[find(c)] = find(g)
        groups: dict = {}
        for i in range(size):
            groups.setdefault(find(i), []).append(i)
        return sorted((sorted(v) for v in groups.values()), key=lambda c: c[0])

    def __len__(self) -> int:
        return len(self.elements)

    @property
    def finite(self) -> bool:
        """True when the ball is closed under multiplication (so it is the whole group)."""
        return bool(np.all(self.table >= 0))

    def mul(self, i: int, j: int) -> int:
        k = int(self.table[i, j])
        if k < 0:
            raise GroupError(f"product {self.words[i]} * {self.words[j]} leaves the word ball; enlarge the radius")
        return k

    def class_of(self, i: int) -> list[int]:
        for c in self.classes:
            if i in c:
                return c
        raise GroupError("element not in ball")

    def lookup(self, g: AffineMap) -> int:
        try:
            return self.index[g.key]
        except KeyError:
            raise GroupError(f"{g!r} is not in the word ball") from None

    def resolve(self, word: str) -> int:
        """Index of a word such as ``"e"``, ``"r"``, ``"r^-1*s"`` or ``"r^3"``."""
        word = word.replace(" ", "")
        if word in ("e", ""):
            return 0
        names = {(g.name or f"g{i}"): g for i, g in enumerate(self.generators)}
        h = AffineMap.identity(self.n)
        for token in word.split("*"):
            base, _, power = token.partition("^")
            if base == "e":
                continue
            if base not in names:
                raise GroupError(f"unknown generator {base!r} in word {word!r}")
            k = int(power) if power else 1
            g = names[base] if k >= 0 else names[base].inverse()
            for _ in range(abs(k)):
                h = h @ g
        return self.lookup(h)


def build_group(generators: Iterable[AffineMap], word_radius: int, cap: int = 512) -> GroupStructure:
    return GroupStructure(list(generators), word_radius, cap=cap)


def trivial_group(n: int) -> GroupStructure:
    return GroupStructure([AffineMap.identity(n)], 0)


__all__ = [
    "AffineMap",
    "FixedPointSet",
    "GroupError",
    "GroupStructure",
    "act",
    "build_group",
    "fixed_point_set",
    "parse_turns",
    "trivial_group",
]
