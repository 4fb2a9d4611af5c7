"""Operator composition against the truncated star product.

For each truncation N the residual ||Op(a)Op(b) - Op(a*b)|| is sampled on
a range of h and its log-log slope is fitted.  The slope should be at
least N.

    python3 scripts/composition_slopes.py --config configs/winding.json --out slopes.csv
"""
from __future__ import annotations

import argparse
import csv
from dataclasses import dataclass, field

from gindex.config import build_cutoff, build_symbol, load
from gindex.oracle import composition_residual


@dataclass
class SlopeConfig:
    config: str = "configs/winding.json"
    truncations: list[int] = field(default_factory=lambda: [1, 2, 3, 4])
    h_exponents: list[int] = field(default_factory=lambda: [3, 4, 5, 6, 7, 8])
    Kh: float = 8.0
    out: str | None = None


def run(cfg: SlopeConfig) -> list[dict]:
    _, scenario_cfg = load(cfg.config)
    comp = scenario_cfg["composition"]
    n = scenario_cfg["n"]
    cutoff = build_cutoff(scenario_cfg)
    hs = [2.0**-e for e in cfg.h_exponents]
    rows = []
    for N in cfg.truncations:
        a = build_symbol(comp["first"], n, N, cutoff)
        b = build_symbol(comp["second"], n, N, cutoff)
        fit = composition_residual(a, b, hs, cfg.Kh)
        rows.append({"N": N, "slope": fit.slope, "slope_error": fit.slope_error, "residuals": fit.values})
        print(f"N={N}: slope {fit.slope:.3f} +- {fit.slope_error:.3f}   " + " ".join(f"{v:.2e}" for v in fit.values))
    if cfg.out:
        with open(cfg.out, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["N", "h", "residual"])
            for r in rows:
                for h, v in zip(hs, r["residuals"]):
                    w.writerow([r["N"], h, v])
    return rows


def main() -> None:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--config", default=SlopeConfig.config)
    p.add_argument("--truncations", type=int, nargs="+", default=[1, 2, 3, 4])
    p.add_argument("--h-exponents", type=int, nargs="+", default=[3, 4, 5, 6, 7, 8])
    p.add_argument("--Kh", type=float, default=8.0)
    p.add_argument("--out")
    args = p.parse_args()
    run(SlopeConfig(args.config, args.truncations, args.h_exponents, args.Kh, args.out))


if __name__ == "__main__":
    main()
