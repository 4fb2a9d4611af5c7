"""Randomized property suites shared by the CLI ``verify`` task and the tests."""
from __future__ import annotations

from dataclasses import dataclass, field

from .crossed import GSymbol
from .group import GroupStructure, act, trivial_group
from .index import trace_property_check
from .oracle import egorov_residual
from .sampling import random_gsymbol, random_symbol
from .symbols import Cutoff


@dataclass
class SuiteResult:
    name: str
    instances: int
    worst: float
    tolerance: float
    failures: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.worst <= self.tolerance and not self.failures

    def record(self) -> dict:
        return {
            "name": self.name,
            "instances": self.instances,
            "worst": self.worst,
            "tolerance": self.tolerance,
            "pass": self.passed,
            "failures": self.failures[:10],
        }


def _rel(x, y) -> float:
    return x.distance(y) / max(x.max_abs(), y.max_abs(), 1.0)


def star_suite(rng, n: int, N: int, cutoff: Cutoff, instances: int, tol: float) -> list[SuiteResult]:
    """Associativity, unit and filtration of the star product on random triples."""
    assoc = SuiteResult("star-associativity", instances, 0.0, tol)
    unit = SuiteResult("star-unit", instances, 0.0, tol)
    filt = SuiteResult("star-filtration", instances, 0.0, 0.0)
    trivial = trivial_group(n)
    for i in range(instances):
        orders = [int(o) for o in rng.integers(-2, 1, size=3)]
        a, b, c = (random_symbol(rng, n, N, cutoff, o) for o in orders)
        assoc.worst = max(assoc.worst, _rel((a * b) * c, a * (b * c)))
        A = GSymbol.from_symbol(trivial, a)
        one = A.unit_like()
        unit.worst = max(unit.worst, _rel(one * A, A), _rel(A * one, A))
        excess = (a * b).graded_order() - (a.graded_order() + b.graded_order())
        if excess > 0:
            filt.failures.append({"instance": i, "excess": excess})
    return [assoc, unit, filt]


def crossed_suite(rng, group: GroupStructure, N: int, cutoff: Cutoff, instances: int, tol: float) -> list[SuiteResult]:
    """Crossed-product associativity and the action being an automorphism group."""
    assoc = SuiteResult("crossed-associativity", instances, 0.0, tol)
    auto = SuiteResult("action-automorphism", instances, 0.0, tol)
    hom = SuiteResult("action-homomorphism", instances, 0.0, tol)
    elems = group.elements
    for _ in range(instances):
        A, B, C = (random_gsymbol(rng, group, N, cutoff, support=1, terms=2) for _ in range(3))
        assoc.worst = max(assoc.worst, _rel((A * B) * C, A * (B * C)))
        g1, g2 = (elems[int(i)] for i in rng.integers(len(elems), size=2))
        a, b = random_symbol(rng, group.n, N, cutoff), random_symbol(rng, group.n, N, cutoff)
        auto.worst = max(auto.worst, _rel(act(g1, a * b), act(g1, a) * act(g1, b)))
        hom.worst = max(hom.worst, _rel(act(g1 @ g2, a), act(g1, act(g2, a))))
    return [assoc, auto, hom]


def egorov_suite(rng, group: GroupStructure, N: int, cutoff: Cutoff, hs, K: int, tol: float, samples: int = 2) -> SuiteResult:
    """Conjugation identity for every ball element, a few random symbols each."""
    res = SuiteResult("egorov", 0, 0.0, tol)
    symbols = [random_symbol(rng, group.n, N, cutoff, order=0) for _ in range(samples)]
    for g in group.elements:
        for a in symbols:
            for h in hs:
                res.worst = max(res.worst, egorov_residual(a, g, h, K))
                res.instances += 1
    return res


def trace_pairs(rng, group: GroupStructure, N: int, cutoff: Cutoff, pairs: int):
    """Random pairs with ``ord A + ord B <= -n - 1`` so every product is trace class."""
    n = group.n
    for _ in range(pairs):
        oa = -int(rng.integers(0, n + 2))
        ob = -n - 1 - oa
        A = random_gsymbol(rng, group, N, cutoff, order=oa, support=2, terms=2, zero_bias=0.5)
        B = random_gsymbol(rng, group, N, cutoff, order=ob, support=2, terms=2, zero_bias=0.5)
        yield A, B


def trace_suite(rng, group: GroupStructure, N: int, cutoff: Cutoff, pairs: int, tol: float, discard: float = 1e-9) -> SuiteResult:
    """``tau_g(A*B) = tau_g(B*A)`` on every conjugacy class."""
    res = SuiteResult("trace-property", pairs, 0.0, tol)
    for A, B in trace_pairs(rng, group, N, cutoff, pairs):
        for cls in group.classes:
            try:
                res.worst = max(res.worst, trace_property_check(A, B, cls[0], discard))
            except Exception as exc:  # noqa: BLE001 - recorded, not swallowed
                res.failures.append({"class": group.words[cls[0]], "error": str(exc)})
    return res


__all__ = ["SuiteResult", "crossed_suite", "egorov_suite", "star_suite", "trace_pairs", "trace_suite"]
