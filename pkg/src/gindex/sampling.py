"""Random admissible symbols for property suites."""
from __future__ import annotations

import itertools

import numpy as np

from .crossed import GSymbol
from .group import GroupStructure
from .symbols import Cutoff, Symbol, make_profile_symbol, make_symbol


def _modes(n: int, width: int) -> list[tuple]:
    return list(itertools.product(range(-width, width + 1), repeat=n))


def _angular(n: int, rng: np.random.Generator) -> int:
    return int(rng.choice([-1, 0, 1]))


def _mode_pair(rng, n: int, modes: list, zero_bias: float) -> tuple:
    if zero_bias and rng.uniform() < zero_bias:
        return (0,) * n, 0
    return modes[int(rng.integers(len(modes)))], _angular(n, rng)


def random_symbol(
    rng: np.random.Generator,
    n: int,
    N: int,
    cutoff: Cutoff | None = None,
    order: int = 0,
    terms: int = 3,
    profiles: int = 1,
    width: int = 1,
    scale: float = 1.0,
    zero_bias: float = 0.0,
) -> Symbol:
    """Sum of a few homogeneous terms of order at most ``order`` plus compact bumps.

    With probability ``zero_bias`` a term is x-independent and angularly
    constant, which keeps traces over fixed-point sets from vanishing
    identically.
    """
    cutoff = cutoff or Cutoff()
    modes = _modes(n, width)
    entries = []
    for _ in range(terms):
        j = int(rng.integers(0, N))
        d = order - j - int(rng.integers(0, 2))
        k, m = _mode_pair(rng, n, modes, zero_bias)
        c = scale * complex(*rng.normal(size=2)) / 2
        entries.append((j, d, k, m, c))
    a = make_symbol(n, N, entries, cutoff, order=order)
    if profiles:
        lo, hi = cutoff.inner, cutoff.radius
        bumps = []
        for _ in range(profiles):
            j = int(rng.integers(0, N))
            k, m = _mode_pair(rng, n, modes, zero_bias)
            c = scale * complex(*rng.normal(size=2)) / 2
            centre = lo + (hi - lo) * float(rng.uniform(0.35, 0.65))
            w = (hi - lo) / 6

            def prof(r, c=c, centre=centre, w=w):
                chi = cutoff(r)
                return 4 * c * chi * (1 - chi) * np.exp(-(((r - centre) / w) ** 2))

            bumps.append((j, k, m, prof))
        a = a + make_profile_symbol(n, N, bumps, cutoff)
    return a


def random_gsymbol(
    rng: np.random.Generator,
    group: GroupStructure,
    N: int,
    cutoff: Cutoff | None = None,
    order: int = 0,
    support: int = 2,
    scalar: bool = True,
    **kwargs,
) -> GSymbol:
    """Random element supported on ``support`` group elements of word length <= 1."""
    cutoff = cutoff or Cutoff()
    n = group.n
    pool = [i for i in range(len(group)) if group.length[i] <= 1]
    chosen = rng.choice(pool, size=min(support, len(pool)), replace=False)
    parts = {int(g): random_symbol(rng, n, N, cutoff, order, **kwargs) for g in chosen}
    s = complex(*rng.normal(size=2)) if scalar and order >= 0 else 0j
    return GSymbol(group, n, N, cutoff, s, parts)


__all__ = ["random_gsymbol", "random_symbol"]
