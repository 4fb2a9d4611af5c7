"""Algebraic indices per conjugacy class against the operator oracle.

    python3 scripts/index_comparison.py configs/winding.json configs/rotation.json
"""
from __future__ import annotations

import argparse
import time
from dataclasses import dataclass

from gindex.config import build_scenario, load
from gindex.tasks import Context, algebraic_indices, fredholm_total, oracle_indices


@dataclass
class ComparisonConfig:
    configs: tuple[str, ...] = ("configs/winding.json", "configs/rotation.json")
    seed: int = 0
    projector: bool = False


def compare(path: str, cfg: ComparisonConfig) -> dict:
    t0 = time.perf_counter()
    _, raw = load(path)
    ctx = Context(build_scenario(raw), cfg.seed)
    sc = ctx.scenario
    G = sc.group
    alg = algebraic_indices(sc, ctx.parametrix(), sc.tol["discard"], projector=cfg.projector)
    orc = oracle_indices(ctx)
    print(f"== {raw['name']} (|ball| = {len(G)}, N = {sc.N})")
    print(f"  {'g':<10}{'torsion':>8}{'algebraic':>14}{'oracle':>14}{'h':>10}")
    for g, series in sorted(orc.items()):
        h, v = min(series)
        a = alg[g][0].constant_term
        print(f"  {G.words[g]:<10}{str(G.torsion[g]):>8}{a.real:>+14.8f}{v.real:>+14.8f}{h:>10.4g}")
    total = fredholm_total(sc, alg)
    print(f"  Fredholm (torsion classes): {total.real:+.8f}   [{time.perf_counter() - t0:.1f}s]")
    return {"algebraic": alg, "oracle": orc, "total": total}


def main() -> None:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("configs", nargs="*", default=list(ComparisonConfig.configs))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--projector", action="store_true", help="also compute the projector form")
    args = p.parse_args()
    cfg = ComparisonConfig(tuple(args.configs), args.seed, args.projector)
    for path in cfg.configs:
        compare(path, cfg)


if __name__ == "__main__":
    main()
