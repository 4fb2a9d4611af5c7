"""The ten acceptance criteria.

Each test appends ``(name, ok, detail)`` to ``conftest.ACCEPTANCE`` and prints
a PASS/FAIL line; the terminal summary repeats all of them at the end of the
run.  Run this file alone with ``pytest tests/test_acceptance.py -s``.
"""
from __future__ import annotations

import time

import numpy as np
import pytest
from conftest import ACCEPTANCE, scenario_from

from gindex.group import AffineMap, build_group
from gindex.oracle import analytic_index_g
from gindex.properties import crossed_suite, star_suite, trace_suite
from gindex.symbols import Cutoff
from gindex.tasks import Context, convention_checks, fredholm_total, homotopy_path, oracle_indices, run_task

SEED = 20240601


def report(name: str, ok: bool, detail: str) -> None:
    ACCEPTANCE.append((name, bool(ok), detail))
    print(f"\n{'PASS' if ok else 'FAIL'}  {name}  {detail}")
    assert ok, detail


class Clock:
    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.seconds = time.perf_counter() - self.t0


def _worst(result, prefix: str) -> float:
    return max((a.value for a in result.assertions if a.name.startswith(prefix)), default=0.0)


@pytest.fixture(scope="module")
def contexts():
    """Lazily built run contexts with their alg-index results, shared across criteria."""
    cache: dict = {}

    def get(name: str):
        if name not in cache:
            ctx = Context(scenario_from(name), SEED)
            cache[name] = (ctx, run_task(ctx, "alg-index"))
        return cache[name]

    return get


# 1 ---------------------------------------------------------------------------


def test_c1_algebra_properties():
    dihedral_1d = build_group(
        [AffineMap.from_config([[-1]], [0], "f"), AffineMap.from_config([[1]], ["1/3"], "c")], 3
    )
    glide_2d = build_group(
        [AffineMap.from_config([[0, -1], [1, 0]], [0, 0], "r"), AffineMap.from_config([[1, 0], [0, -1]], ["1/2", 0], "s")],
        4,
    )
    rng = np.random.default_rng(SEED)
    cutoff = Cutoff()
    suites = []
    with Clock() as clk:
        for n, G in ((1, dihedral_1d), (2, glide_2d)):
            for s in star_suite(rng, n, 3, cutoff, 200, 1e-9) + crossed_suite(rng, G, 3, cutoff, 200, 1e-9):
                s.name = f"{s.name}[n={n}]"
                suites.append(s)
    worst = max(suites, key=lambda s: s.worst)
    ok = all(s.passed for s in suites) and min(s.instances for s in suites) >= 200 and clk.seconds < 60
    report(
        "C1 star/crossed algebra",
        ok,
        f"{len(suites)} suites x 200, worst {worst.worst:.1e} ({worst.name}), {clk.seconds:.1f}s",
    )


# 2 ---------------------------------------------------------------------------


def test_c2_egorov_exactness():
    worst, details = 0.0, []
    with Clock() as clk:
        ok = True
        for name in ("d4_egorov", "rotation"):
            ctx = Context(scenario_from(name), SEED)
            hs = ctx.cfg["oracle"]["egorov_h"]
            ok &= sorted(hs) == [2.0**-e for e in range(7, 2, -1)]
            r = run_task(ctx, "egorov-check")
            ok &= r.passed and r.data["elements"] == len(ctx.scenario.group)
            worst = max(worst, r.data.get("worst", np.inf))
            details.append(f"{name}: {r.data.get('elements')} elements")
    ok = ok and worst < 1e-12 and clk.seconds < 10
    report("C2 Egorov exactness", ok, f"worst {worst:.1e}; {', '.join(details)}; {clk.seconds:.1f}s")


# 3 ---------------------------------------------------------------------------


def test_c3_composition_decay():
    ctx = Context(scenario_from("winding"), SEED)
    with Clock() as clk:
        r = run_task(ctx, "star-check")
    slopes = {N: ctx.tables["composition_fit"][i][1] for i, N in enumerate(ctx.cfg["composition"]["truncations"])}
    ok = r.passed and sorted(slopes) == [1, 2, 3] and all(s >= N - 0.3 for N, s in slopes.items()) and clk.seconds < 60
    report("C3 composition decay", ok, "slopes " + ", ".join(f"N={N}: {s:.3f}" for N, s in slopes.items()) + f"; {clk.seconds:.1f}s")


# 4 ---------------------------------------------------------------------------


def test_c4_trace_asymptotics():
    ctx = Context(scenario_from("reflection"), SEED)
    tr = ctx.cfg["trace"]
    with Clock() as clk:
        r = run_task(ctx, "trace")
    lead = [a for a in r.assertions if a.name.startswith("trace-leading")]
    empty = [a for a in r.assertions if a.name.startswith("empty-trace")]
    ok = (
        r.passed
        and tr["K"] == 48
        and min(tr["h"]) == 2.0**-6
        and tr["empty_h"] == 2.0**-6
        and lead
        and empty
        and all(a.value < 0.01 for a in lead)
        and all(a.value < 1e-6 for a in empty)
        and clk.seconds < 120
    )
    detail = ", ".join(f"{a.name} {a.value:.1e}" for a in lead + empty)
    report("C4 trace asymptotics", ok, f"{detail}; {clk.seconds:.1f}s")


# 5 ---------------------------------------------------------------------------


def test_c5_trace_property():
    sc = scenario_from("reflection")
    rng = np.random.default_rng(SEED)
    with Clock() as clk:
        s = trace_suite(rng, sc.group, sc.n + 3, sc.cutoff, 50, 1e-8, sc.tol["discard"])
    ok = s.passed and s.instances == 50 and clk.seconds < 60
    report("C5 trace property", ok, f"50 pairs, worst {s.worst:.1e}, failures {len(s.failures)}; {clk.seconds:.1f}s")


# 6 ---------------------------------------------------------------------------


def test_c6_index_against_oracle_winding(contexts):
    with Clock() as clk:
        ctx, alg = contexts("winding")
        comm = ctx.cache["alg-index"][0][0]
        oracle = analytic_index_g(ctx.symbol(), ctx.parametrix().r, 0, 2.0**-6, 256)
    ok = (
        alg.passed
        and abs(comm.constant_term + 1) < 1e-6
        and comm.integrality_gap < 1e-6
        and comm.max_nonconstant < 1e-6
        and abs(oracle + 1) < 0.05
        and clk.seconds < 60
    )
    report(
        "C6 index vs oracle (winding)",
        ok,
        f"algebraic {comm.constant_term.real:+.9f}, gap {comm.integrality_gap:.1e}, "
        f"nonconstant {comm.max_nonconstant:.1e}, oracle {oracle.real:+.6f}; {clk.seconds:.1f}s",
    )


def test_c6_index_against_oracle_reflection(contexts):
    with Clock() as clk:
        ctx, alg = contexts("reflection")
        total = fredholm_total(ctx.scenario, ctx.cache["alg-index"])
        orc = oracle_indices(ctx)
        G = ctx.scenario.group
        hmin = min(h for series in orc.values() for h, _ in series)
        oracle_total = sum(dict(s)[hmin] for g, s in orc.items() if G.torsion[g])
    diff = abs(total - oracle_total)
    ok = diff < 0.1 and clk.seconds < 300
    report(
        "C6 index vs oracle (reflection group)",
        ok,
        f"sum over torsion classes {total.real:+.6f}, oracle {oracle_total.real:+.6f} at h={hmin:g}, "
        f"|diff| {diff:.1e}; {clk.seconds:.1f}s",
    )


# 7 ---------------------------------------------------------------------------


def test_c7_projector_formula(contexts):
    worst, names = 0.0, []
    for name in ("winding", "reflection", "rotation", "unit"):
        _, alg = contexts(name)
        if alg.error:
            report("C7 projector formula", False, f"{name}: {alg.error['message']}")
        worst = max(worst, _worst(alg, "projector-agreement"))
        names.append(name)
    report("C7 projector formula", worst < 1e-6, f"worst |commutator - projector| {worst:.1e} over {', '.join(names)}")


# 8 ---------------------------------------------------------------------------


def test_c8_vanishing(contexts):
    ctx, alg = contexts("rotation")
    G = ctx.scenario.group
    indices = ctx.cache["alg-index"]
    others = [abs(comm.constant_term) for g, (comm, _) in indices.items() if g != 0]
    total = fredholm_total(ctx.scenario, indices)
    covered = sorted(indices) == list(range(len(G)))
    ok = alg.passed and covered and max(others) < 1e-6 and abs(total) < 1e-6
    report(
        "C8 vanishing",
        ok,
        f"{len(others)} elements g != e, max |ind_g| {max(others):.1e}; total index {total.real:+.1e}",
    )


# 9 ---------------------------------------------------------------------------


def test_c9_convention_independence():
    spreads = {}
    with Clock() as clk:
        for name in ("winding", "rotation", "reflection"):
            for check, d in convention_checks(scenario_from(name)).items():
                spreads[f"{name}/{check}"] = d
    worst = max(spreads, key=spreads.get)
    ok = spreads[worst] < 1e-6
    report("C9 convention independence", ok, f"{len(spreads)} checks, worst {spreads[worst]:.1e} ({worst}); {clk.seconds:.1f}s")


# 10 --------------------------------------------------------------------------


def test_c10_homotopy_invariance():
    sc = scenario_from("winding")
    rng = np.random.default_rng(SEED)
    path = homotopy_path(sc, rng, 5, sc.cfg["verify"]["homotopy_step"])
    values = [v for _, v in path]
    spread = max(abs(v - values[0]) for v in values)
    ok = len(path) == 5 and spread < 1e-6
    report("C10 homotopy invariance", ok, f"indices {[round(v.real, 9) for v in values]}, spread {spread:.1e}")


if __name__ == "__main__":
    import sys

    sys.exit(pytest.main([__file__, "-q", "-s"]))
