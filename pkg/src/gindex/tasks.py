"""Task implementations behind ``gindex run``.

Every task returns a :class:`TaskResult` made of pass/fail assertions, a
JSON-friendly ``data`` dict and rows appended to the shared CSV tables.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .config import Scenario, build_gsymbol, build_symbol
from .crossed import (
    CrossedProductError,
    GSymbol,
    Parametrix,
    evaluate_leading,
    is_elliptic,
    leading_coefficients,
    leading_inverse,
    parametrix,
)
from .group import GroupError, build_group, fixed_point_set
from .index import TraceError, algebraic_index, localized_trace, projector_corners, vanishing_check
from .oracle import OracleError, analytic_index_g, composition_residual, egorov_residual, fit_h_expansion, operator_trace_g
from .sampling import random_symbol
from .symbols import Cutoff, SymbolError

TABLES = {
    "ellipticity": ["route", "margin", "elliptic"],
    "parametrix": ["side", "route", "leading_residual", "neumann_terms", "outer_residual"],
    "egorov": ["g", "symbol", "h", "K", "residual"],
    "composition": ["N", "h", "K", "residual"],
    "composition_fit": ["N", "slope", "slope_error", "required"],
    "trace_samples": ["g", "h", "K", "re", "im", "tail"],
    "trace_laurent": ["g", "exponent", "re", "im"],
    "trace_fit": ["g", "exponent", "re", "im", "predicted_re", "predicted_im"],
    "alg_index": [
        "g", "class", "torsion", "dim_fixed_set", "commutator_re", "commutator_im",
        "projector_re", "projector_im", "integrality_gap", "max_nonconstant", "vanishing",
    ],
    "alg_index_laurent": ["g", "exponent", "re", "im"],
    "oracle_index": ["g", "h", "K", "re", "im"],
    "compare": ["g", "algebraic", "analytic", "difference"],
    "verify": ["check", "instances", "worst", "tolerance", "pass"],
}

EXPECTED_ERRORS = (CrossedProductError, GroupError, OracleError, SymbolError, TraceError)


class TaskError(RuntimeError):
    def __init__(self, kind: str, message: str):
        super().__init__(message)
        self.kind = kind


@dataclass
class Assertion:
    name: str
    value: float
    tolerance: float
    passed: bool
    detail: str = ""

    def record(self) -> dict:
        return {
            "name": self.name,
            "value": self.value,
            "tolerance": self.tolerance,
            "pass": bool(self.passed),
            "detail": self.detail,
        }


@dataclass
class TaskResult:
    task: str
    assertions: list = field(default_factory=list)
    data: dict = field(default_factory=dict)
    error: dict | None = None

    @property
    def passed(self) -> bool:
        return self.error is None and all(a.passed for a in self.assertions)

    def check(self, name: str, value: float, tolerance: float, detail: str = "", upper: bool = True) -> None:
        """Record ``value <= tolerance`` (or ``>=`` when ``upper`` is False)."""
        value = float(value)
        ok = value <= tolerance if upper else value >= tolerance
        self.assertions.append(Assertion(name, value, float(tolerance), bool(ok and not math.isnan(value)), detail))

    def record(self) -> dict:
        return {
            "task": self.task,
            "status": "pass" if self.passed else ("error" if self.error else "fail"),
            "assertions": [a.record() for a in self.assertions],
            "data": self.data,
            "error": self.error,
        }


class Context:
    """Per-run state: the scenario, a seeded RNG, table rows and shared results."""

    def __init__(self, scenario: Scenario, seed: int):
        self.scenario = scenario
        self.seed = seed
        self.rng = np.random.default_rng(seed)
        self.tables: dict = {name: [] for name in TABLES}
        self.cache: dict = {}

    @property
    def cfg(self) -> dict:
        return self.scenario.cfg

    @property
    def tol(self) -> dict:
        return self.scenario.tol

    def symbol(self) -> GSymbol:
        if self.scenario.symbol is None:
            raise TaskError("config", "this task needs a 'symbol' section")
        return self.scenario.symbol

    def parametrix(self, side: str = "right") -> Parametrix:
        key = ("parametrix", side)
        if key not in self.cache:
            self.cache[key] = build_parametrix(self.scenario, side)
        return self.cache[key]


def build_parametrix(
    scenario: Scenario, side: str = "right", grid=None, symbol: GSymbol | None = None, bandwidth: int | None = None
) -> Parametrix:
    g = scenario.cfg["grid"]
    A = symbol if symbol is not None else scenario.symbol
    r0 = leading_inverse(
        A,
        grid=grid or scenario.grid,
        bandwidth=bandwidth or g["bandwidth"],
        tolerance=scenario.tol["projection_residual"],
        neumann_terms=g["neumann_terms"],
    )
    return parametrix(A, r0, tolerance=scenario.tol["projection_residual"], side=side)


def _c(z: complex) -> list:
    return [float(z.real), float(z.imag)]


# ---------------------------------------------------------------------------
# check-elliptic, parametrix


def task_check_elliptic(ctx: Context) -> TaskResult:
    res = TaskResult("check-elliptic")
    ell = is_elliptic(ctx.symbol(), ctx.scenario.grid, threshold=ctx.tol["ellipticity_margin"])
    expected = ctx.cfg["expect"].get("elliptic", True)
    res.data = {"elliptic": ell.elliptic, "margin": ell.margin, "route": ell.route, "expected": expected}
    res.assertions.append(
        Assertion("ellipticity-matches-expectation", float(ell.margin), ctx.tol["ellipticity_margin"], ell.elliptic == expected)
    )
    ctx.tables["ellipticity"].append([ell.route, ell.margin, ell.elliptic])
    return res


def task_parametrix(ctx: Context) -> TaskResult:
    res = TaskResult("parametrix")
    P = ctx.parametrix()
    lead = P.leading
    res.data = {
        "route": lead.route,
        "leading_residual": lead.residual,
        "neumann_terms": lead.terms,
        "outer_residual": P.outer_residual,
        "support": [ctx.scenario.group.words[l] for l in sorted(P.r.parts)],
    }
    res.check("parametrix-residual", P.outer_residual, max(ctx.tol["projection_residual"], 10 * lead.residual))
    ctx.tables["parametrix"].append(["right", lead.route, lead.residual, lead.terms, P.outer_residual])
    return res


# ---------------------------------------------------------------------------
# egorov-check, star-check


def task_egorov(ctx: Context) -> TaskResult:
    """Conjugation identity on every ball element for the scenario parts plus two random symbols."""
    res = TaskResult("egorov-check")
    sc = ctx.scenario
    o = ctx.cfg["oracle"]
    symbols = []
    if sc.symbol is not None:
        symbols += [(f"part[{sc.group.words[l]}]", a) for l, a in sorted(sc.symbol.parts.items())]
    symbols += [(f"random[{i}]", random_symbol(ctx.rng, sc.n, sc.N, sc.cutoff)) for i in range(2)]
    worst = 0.0
    for gi, g in enumerate(sc.group.elements):
        for label, a in symbols:
            for h in o["egorov_h"]:
                r = egorov_residual(a, g, h, o["egorov_K"])
                worst = max(worst, r)
                ctx.tables["egorov"].append([sc.group.words[gi], label, h, o["egorov_K"], r])
    res.data = {"elements": len(sc.group), "symbols": len(symbols), "worst": worst}
    res.check("egorov-residual", worst, ctx.tol["egorov"])
    return res


def task_star_check(ctx: Context) -> TaskResult:
    """Operator composition against the truncated star product: decay slope per truncation."""
    res = TaskResult("star-check")
    comp = ctx.cfg["composition"]
    if "first" not in comp or "second" not in comp:
        raise TaskError("config", "star-check needs composition.first and composition.second")
    sc = ctx.scenario
    fits = {}
    for N in comp["truncations"]:
        a = build_symbol(comp["first"], sc.n, N, sc.cutoff)
        b = build_symbol(comp["second"], sc.n, N, sc.cutoff)
        fit = composition_residual(a, b, comp["h"], comp["Kh"])
        for h, v in zip(fit.hs, fit.values):
            ctx.tables["composition"].append([N, h, int(math.ceil(comp["Kh"] / h)), v])
        need = N - ctx.tol["slope_margin"]
        ctx.tables["composition_fit"].append([N, fit.slope, fit.slope_error, need])
        fits[str(N)] = fit.record()
        res.check(f"composition-slope-N{N}", fit.slope, need, upper=False)
    res.data = {"fits": fits}
    return res


# ---------------------------------------------------------------------------
# trace


def task_trace(ctx: Context) -> TaskResult:
    """Oracle operator traces per conjugacy class, fitted and compared with the localized trace."""
    res = TaskResult("trace")
    sc = ctx.scenario
    tr = ctx.cfg["trace"]
    if "operand" not in tr:
        raise TaskError("config", "trace needs trace.operand")
    op = build_gsymbol(tr["operand"], ctx.cfg, sc.group, sc.cutoff)
    exponents = list(tr["window"])
    K = tr["K"]
    out = {}
    for cls in sc.group.classes:
        g = cls[0]
        if not any(l in op.parts for l in cls):
            continue
        word = sc.group.words[g]
        pred = localized_trace(op, g, ctx.tol["discard"]).value
        for e, c in sorted(pred.coeffs.items()):
            ctx.tables["trace_laurent"].append([word, e, c.real, c.imag])
        entry = {"prediction": pred.records()}
        if pred.max_abs() == 0.0:
            m = operator_trace_g(op, g, tr["empty_h"], K)
            ctx.tables["trace_samples"].append([word, tr["empty_h"], K, m.value.real, m.value.imag, m.tail])
            entry["empty_trace"] = _c(m.value)
            res.check(f"empty-trace[{word}]", abs(m.value), ctx.tol["empty_trace"])
        else:
            samples = []
            for h in tr["h"]:
                m = operator_trace_g(op, g, h, K)
                samples.append((h, m.value))
                ctx.tables["trace_samples"].append([word, h, K, m.value.real, m.value.imag, m.tail])
            fit = fit_h_expansion(samples, exponents)
            for e, c in zip(exponents, fit.coefficients):
                ctx.tables["trace_fit"].append([word, e, c.real, c.imag, pred[e].real, pred[e].imag])
            lead = min(e for e in pred.coeffs)
            if lead not in exponents:
                raise TaskError("config", f"trace window {exponents} misses the leading exponent {lead}")
            fitted = fit.coefficients[exponents.index(lead)]
            rel = abs(fitted - pred[lead]) / abs(pred[lead])
            entry["fit"] = fit.record()
            entry["relative_error"] = rel
            res.check(f"trace-leading[{word}]", rel, ctx.tol["trace_fit"], detail=f"h^{lead}")
        out[word] = entry
    res.data = {"classes": out}
    return res


# ---------------------------------------------------------------------------
# indices


def algebraic_indices(scenario: Scenario, P: Parametrix, discard: float, classes=None, projector: bool = True) -> dict:
    """Commutator and (unless ``projector`` is False) projector forms of the index per class representative."""
    A = scenario.symbol
    G = scenario.group
    corners = projector_corners(A, P) if projector else None
    out = {}
    for cls in classes if classes is not None else G.classes:
        g = cls[0]
        comm = algebraic_index(A, g, P, discard)
        if corners is None:
            out[g] = (comm, None)
            continue
        proj_top = localized_trace(corners[0], g, discard).value
        proj_bottom = localized_trace(corners[1], g, discard).value
        out[g] = (comm, (proj_top + proj_bottom).constant)
    return out


def fredholm_total(scenario: Scenario, indices: dict) -> complex:
    G = scenario.group
    return sum((comm.constant_term for g, (comm, _) in indices.items() if G.torsion[g]), 0j)


def task_alg_index(ctx: Context) -> TaskResult:
    res = TaskResult("alg-index")
    sc = ctx.scenario
    G = sc.group
    tol = ctx.tol
    P = ctx.parametrix()
    indices = algebraic_indices(sc, P, tol["discard"])
    ctx.cache["alg-index"] = indices
    rows = []
    for g, (comm, proj) in sorted(indices.items()):
        word = G.words[g]
        van = vanishing_check(G, g)
        const = comm.constant_term
        for e, c in sorted(comm.laurent.coeffs.items()):
            ctx.tables["alg_index_laurent"].append([word, e, c.real, c.imag])
        ctx.tables["alg_index"].append([
            word, " ".join(G.words[i] for i in G.class_of(g)), G.torsion[g], fixed_point_set(G.elements[g]).dim,
            const.real, const.imag, proj.real, proj.imag, comm.integrality_gap, comm.max_nonconstant, van,
        ])
        rec = comm.record(G, g)
        rec["projector_constant"] = _c(proj)
        rec["vanishing"] = van
        rows.append(rec)
        res.check(f"projector-agreement[{word}]", abs(const - proj), tol["projector"])
        if G.torsion[g]:
            res.check(f"integrality[{word}]", comm.integrality_gap, tol["integrality"])
            res.check(f"laurent-nonconstant[{word}]", comm.max_nonconstant, tol["laurent"])
        elif van is True:
            res.check(f"vanishing[{word}]", abs(const), tol["integrality"])
    total = fredholm_total(sc, indices)
    res.data = {"classes": rows, "fredholm": _c(total), "discarded": max((c.discarded for c, _ in indices.values()), default=0.0)}
    if "index" in ctx.cfg["expect"]:
        res.check("fredholm-index", abs(total - ctx.cfg["expect"]["index"]), tol["integrality"])
    return res


def _oracle_classes(G) -> list:
    """Torsion classes, plus classes of word length <= 1 for infinite groups."""
    return [c for c in G.classes if G.torsion[c[0]] or min(G.length[i] for i in c) <= 1]


def oracle_indices(ctx: Context) -> dict:
    if "oracle-index" in ctx.cache:
        return ctx.cache["oracle-index"]
    sc = ctx.scenario
    o = ctx.cfg["oracle"]
    A, R = ctx.symbol(), ctx.parametrix().r
    out = {}
    for cls in _oracle_classes(sc.group):
        g = cls[0]
        out[g] = [(h, analytic_index_g(A, R, g, h, o["K"])) for h in o["h"]]
    ctx.cache["oracle-index"] = out
    return out


def task_oracle_index(ctx: Context) -> TaskResult:
    res = TaskResult("oracle-index")
    sc = ctx.scenario
    G = sc.group
    K = ctx.cfg["oracle"]["K"]
    values = oracle_indices(ctx)
    totals: dict = {}
    for g, series in sorted(values.items()):
        for h, v in series:
            ctx.tables["oracle_index"].append([G.words[g], h, K, v.real, v.imag])
            if G.torsion[g]:
                totals[h] = totals.get(h, 0j) + v
    res.data = {
        "classes": {G.words[g]: [[h, *_c(v)] for h, v in s] for g, s in sorted(values.items())},
        "fredholm": [[h, *_c(v)] for h, v in sorted(totals.items(), reverse=True)],
    }
    if "index" in ctx.cfg["expect"]:
        for h, v in sorted(totals.items(), reverse=True):
            res.check(f"oracle-fredholm[h={h:g}]", abs(v - ctx.cfg["expect"]["index"]), ctx.tol["oracle_index"])
    return res


def task_compare(ctx: Context) -> TaskResult:
    """Algebraic constant terms against the oracle at the smallest sampled h."""
    res = TaskResult("compare")
    sc = ctx.scenario
    G = sc.group
    if "alg-index" not in ctx.cache:
        ctx.cache["alg-index"] = algebraic_indices(sc, ctx.parametrix(), ctx.tol["discard"])
    alg = ctx.cache["alg-index"]
    orc = oracle_indices(ctx)
    tot_a, tot_o = 0j, 0j
    for g, series in sorted(orc.items()):
        h, v = min(series)
        a = alg[g][0].constant_term
        d = abs(a - v)
        ctx.tables["compare"].append([G.words[g], a.real, v.real, d])
        res.check(f"compare[{G.words[g]}]", d, ctx.tol["compare"], detail=f"h={h:g}")
        if G.torsion[g]:
            tot_a, tot_o = tot_a + a, tot_o + v
    ctx.tables["compare"].append(["fredholm", tot_a.real, tot_o.real, abs(tot_a - tot_o)])
    res.check("compare-fredholm", abs(tot_a - tot_o), ctx.tol["compare"])
    res.data = {"algebraic": _c(tot_a), "analytic": _c(tot_o)}
    return res


# ---------------------------------------------------------------------------
# convention independence and homotopy


def index_constants(scenario: Scenario, P: Parametrix) -> dict:
    """Constant terms of the commutator-form index for every torsion class."""
    G = scenario.group
    classes = [c for c in G.classes if G.torsion[c[0]]]
    return {G.words[g]: comm.constant_term for g, (comm, _) in algebraic_indices(scenario, P, scenario.tol["discard"], classes, projector=False).items()}


def _spread(base: dict, other: dict) -> float:
    return max((abs(base[k] - other.get(k, 0j)) for k in base), default=0.0)


def convention_checks(scenario: Scenario, base: dict | None = None) -> dict:
    """Index change under the left-sided parametrix, a doubled grid, and a halved cutoff radius."""
    base = base if base is not None else index_constants(scenario, build_parametrix(scenario))
    out = {}
    out["parametrix-swap"] = _spread(base, index_constants(scenario, build_parametrix(scenario, "left")))
    fine = scenario.grid.refine(2)
    out["grid-doubling"] = _spread(base, index_constants(scenario, build_parametrix(scenario, grid=fine)))
    c = scenario.cutoff
    half = scenario.with_cutoff(Cutoff(c.radius / 2, c.smoothness, c.nodes, c.inner_ratio))
    out["cutoff-halving"] = _spread(base, index_constants(half, build_parametrix(half)))
    return out


def adaptive_parametrix(scenario: Scenario, symbol: GSymbol, max_bandwidth: int = 64) -> Parametrix:
    """Parametrix of ``symbol``, doubling the projection bandwidth (and refining the grid) until it resolves."""
    bw = scenario.cfg["grid"]["bandwidth"]
    grid = scenario.grid
    while True:
        coarse = grid.x_points if scenario.n == 1 else min(grid.x_points, grid.angles)
        if 2 * bw + 1 > coarse:
            grid = grid.refine(math.ceil((2 * bw + 1) / coarse))
        try:
            return build_parametrix(scenario, symbol=symbol, grid=grid, bandwidth=bw)
        except CrossedProductError as exc:
            if "projection residual" not in str(exc) or 2 * bw > max_bandwidth:
                raise
            bw *= 2


def homotopy_path(scenario: Scenario, rng, points: int, step: float) -> list:
    """Fredholm index along ``A + t B`` for a random order-0 perturbation ``B`` at the identity.

    ``B`` is scaled to principal sup norm 1.  Its x-dependence makes the
    inverse principal symbol an infinite Fourier series, hence the adaptive
    bandwidth.
    """
    A = scenario.symbol
    b = random_symbol(rng, scenario.n, scenario.N, scenario.cutoff, order=0, terms=2)
    sup = float(np.abs(evaluate_leading(leading_coefficients(b), scenario.grid)).max())
    B = GSymbol.from_symbol(scenario.group, b.scale(1 / sup) if sup > 0 else b)
    classes = [c for c in scenario.group.classes if scenario.group.torsion[c[0]]]
    totals = []
    for i in range(points):
        At = A + B.scale(i * step)
        P = adaptive_parametrix(scenario, At)
        idx = {cls[0]: (algebraic_index(At, cls[0], P, scenario.tol["discard"]), None) for cls in classes}
        totals.append((i * step, fredholm_total(scenario, idx)))
    return totals


def _property_group(G):
    return G if G.finite else build_group(G.generators, 3, cap=4096)


def task_verify(ctx: Context) -> TaskResult:
    """Randomized property suites plus, for elliptic scenarios, convention and homotopy checks."""
    from .properties import crossed_suite, star_suite, trace_suite

    res = TaskResult("verify")
    sc = ctx.scenario
    v = ctx.cfg["verify"]
    tol = ctx.tol
    rng = ctx.rng
    PG = _property_group(sc.group)
    suites = star_suite(rng, sc.n, 3, sc.cutoff, v["instances"], tol["algebra"])
    suites += crossed_suite(rng, PG, 3, sc.cutoff, v["instances"], tol["algebra"])
    suites.append(trace_suite(rng, PG, sc.n + 3, sc.cutoff, max(v["instances"] // 4, 1), tol["trace_property"], tol["discard"]))
    records = []
    for s in suites:
        ctx.tables["verify"].append([s.name, s.instances, s.worst, s.tolerance, s.passed])
        records.append(s.record())
        res.assertions.append(Assertion(s.name, s.worst, s.tolerance, s.passed, f"{s.instances} instances"))
    if sc.symbol is not None and ctx.cfg["expect"].get("elliptic", True):
        base = index_constants(sc, ctx.parametrix())
        for name, d in convention_checks(sc, base).items():
            ctx.tables["verify"].append([name, 1, d, tol["integrality"], d <= tol["integrality"]])
            res.check(name, d, tol["integrality"])
        path = homotopy_path(sc, rng, v["homotopy_points"], v["homotopy_step"])
        spread = max(abs(x - path[0][1]) for _, x in path)
        ctx.tables["verify"].append(["homotopy", len(path), spread, tol["integrality"], spread <= tol["integrality"]])
        res.check("homotopy", spread, tol["integrality"], detail=f"{len(path)} points")
        res.data["homotopy"] = [[t, *_c(x)] for t, x in path]
    res.data["suites"] = records
    return res


TASK_FUNCS = {
    "check-elliptic": task_check_elliptic,
    "parametrix": task_parametrix,
    "egorov-check": task_egorov,
    "star-check": task_star_check,
    "trace": task_trace,
    "alg-index": task_alg_index,
    "oracle-index": task_oracle_index,
    "compare": task_compare,
    "verify": task_verify,
}


def run_task(ctx: Context, name: str) -> TaskResult:
    """Run one task, turning expected failures into structured error records."""
    try:
        return TASK_FUNCS[name](ctx)
    except TaskError as exc:
        err = {"kind": exc.kind, "type": type(exc).__name__, "message": str(exc)}
    except EXPECTED_ERRORS as exc:
        err = {"kind": "computation", "type": type(exc).__name__, "message": str(exc)}
    res = TaskResult(name)
    res.error = err
    return res


__all__ = [
    "Assertion",
    "Context",
    "TABLES",
    "TASK_FUNCS",
    "TaskError",
    "TaskResult",
    "build_parametrix",
    "convention_checks",
    "homotopy_path",
    "index_constants",
    "run_task",
]
