"""Fit oracle operator traces in h and compare with the localized trace.

Samples Tr(Op_h(a_l) Phi_l) summed over each conjugacy class on a box of
K modes per axis, fits a Laurent polynomial over the chosen exponents, and
prints the fitted coefficients next to the symbolic prediction.
"""
from __future__ import annotations

import argparse
from dataclasses import dataclass, field

from gindex.config import build_gsymbol, build_scenario, load
from gindex.index import localized_trace
from gindex.oracle import fit_h_expansion, operator_trace_g


@dataclass
class TraceFitConfig:
    config: str = "configs/reflection.json"
    K: int = 48
    h_exponents: list[float] = field(default_factory=lambda: [5.0, 5.25, 5.5, 5.75, 6.0])
    window: list[int] = field(default_factory=lambda: [-1, 0])


def run(cfg: TraceFitConfig) -> dict:
    _, raw = load(cfg.config)
    sc = build_scenario(raw)
    op = build_gsymbol(raw["trace"]["operand"], raw, sc.group, sc.cutoff)
    hs = [2.0**-e for e in cfg.h_exponents]
    out = {}
    for cls in sc.group.classes:
        g = cls[0]
        if not any(l in op.parts for l in cls):
            continue
        word = sc.group.words[g]
        pred = localized_trace(op, g).value
        samples = [(h, operator_trace_g(op, g, h, cfg.K).value) for h in hs]
        if pred.max_abs() == 0:
            print(f"[{word}] empty fixed set, |trace| by h: " + " ".join(f"{h:.4g}:{abs(v):.1e}" for h, v in samples))
            out[word] = {"empty": [abs(v) for _, v in samples]}
            continue
        fit = fit_h_expansion(samples, cfg.window)
        print(f"[{word}]")
        for e, c in zip(cfg.window, fit.coefficients):
            p = pred[e]
            rel = f"{abs(c - p) / abs(p):.1e}" if p else "-"
            print(f"  h^{e:+d}: fitted {c.real:+.8f}{c.imag:+.1e}j  predicted {p.real:+.8f}  rel {rel}")
        out[word] = {"fit": fit.coefficients, "prediction": pred.coeffs}
    return out


def main() -> None:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--config", default=TraceFitConfig.config)
    p.add_argument("--K", type=int, default=48)
    p.add_argument("--h-exponents", type=float, nargs="+", default=[5.0, 5.25, 5.5, 5.75, 6.0])
    p.add_argument("--window", type=int, nargs="+", default=[-1, 0])
    args = p.parse_args()
    run(TraceFitConfig(args.config, args.K, args.h_exponents, args.window))


if __name__ == "__main__":
    main()
