"""Command line front end: ``gindex run | verify | schema``."""
from __future__ import annotations

import argparse
import csv
import datetime as _dt
import json
import logging
import math
import sys
from pathlib import Path

from . import __version__
from .config import SCHEMA, ConfigError, build_scenario, config_hash, load
from .group import GroupError
from .tasks import TABLES, Context, run_task

log = logging.getLogger("gindex")


def _clean(obj):
    """JSON-safe copy: non-finite floats become strings, tuples become lists."""
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else str(obj)
    if isinstance(obj, complex):
        return [_clean(obj.real), _clean(obj.imag)]
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if hasattr(obj, "item"):  # numpy scalars
        return _clean(obj.item())
    return obj


def emit_report(out: Path, header: dict, results: list, tables: dict | None = None, errors: list | None = None) -> dict:
    """Write ``report.json`` and one CSV per known table (header-only when empty)."""
    out.mkdir(parents=True, exist_ok=True)
    tables = tables or {}
    errors = list(errors or [])
    for r in results:
        if r.error:
            errors.append({"task": r.task, **r.error})
    report = {
        **header,
        "tasks": [r.record() for r in results],
        "errors": errors,
        "passed": not errors and all(r.passed for r in results),
    }
    (out / "report.json").write_text(json.dumps(_clean(report), indent=2, sort_keys=True) + "\n")
    tdir = out / "tables"
    tdir.mkdir(exist_ok=True)
    for name, cols in TABLES.items():
        with open(tdir / f"{name}.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(cols)
            for row in tables.get(name, []):
                w.writerow([_clean(v) for v in row])
    return report


def _header(raw, cfg, seed) -> dict:
    return {
        "tool": "gindex",
        "version": __version__,
        "config_hash": config_hash(raw) if raw is not None else None,
        "seed": seed,
        "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
        "config": cfg,
    }


def execute(config: str, out: str | None, seed: int | None, tasks: list[str] | None = None) -> int:
    out_dir = Path(out or "gindex-out")
    try:
        raw, cfg = load(config)
    except (OSError, ConfigError) as exc:
        err = {"kind": "config", "type": type(exc).__name__, "message": str(exc), "path": getattr(exc, "path", "")}
        emit_report(out_dir, _header(None, None, seed), [], errors=[err])
        log.error("config error: %s", exc)
        return 2
    seed = cfg["seed"] if seed is None else seed
    cfg["seed"] = seed
    try:
        scenario = build_scenario(cfg)
    except (GroupError, ConfigError, ValueError) as exc:
        err = {"kind": "config", "type": type(exc).__name__, "message": str(exc)}
        emit_report(out_dir, _header(raw, cfg, seed), [], errors=[err])
        log.error("scenario error: %s", exc)
        return 2
    ctx = Context(scenario, seed)
    results = []
    for name in tasks or cfg["tasks"]:
        log.info("task %s", name)
        r = run_task(ctx, name)
        results.append(r)
        status = "pass" if r.passed else ("error" if r.error else "FAIL")
        log.info("  %s: %s", name, status)
        for a in r.assertions:
            log.debug("    %s %s value=%.3e tol=%.1e", "ok " if a.passed else "BAD", a.name, a.value, a.tolerance)
        if r.error:
            log.warning("  %s", r.error["message"])
    report = emit_report(out_dir, _header(raw, cfg, seed), results, ctx.tables)
    print(f"{cfg['name']}: {'PASS' if report['passed'] else 'FAIL'} ({out_dir / 'report.json'})")
    return 0 if report["passed"] else 1


def main(argv: list[str] | None = None) -> int:
    p = argparse.ArgumentParser(prog="gindex", description="Localized algebraic indices on tori with affine group actions.")
    p.add_argument("--version", action="version", version=f"gindex {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for cmd, text in (("run", "run the config's task list"), ("verify", "run the property suite only")):
        s = sub.add_parser(cmd, help=text)
        s.add_argument("config")
        s.add_argument("--out", default=None, help="output directory (default ./gindex-out)")
        s.add_argument("--seed", type=int, default=None, help="override the config seed")
        s.add_argument("--verbose", "-v", action="count", default=0)
    sub.add_parser("schema", help="print the config JSON schema")
    args = p.parse_args(argv)
    if args.command == "schema":
        print(json.dumps(SCHEMA, indent=2))
        return 0
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(message)s", stream=sys.stderr)
    return execute(args.config, args.out, args.seed, ["verify"] if args.command == "verify" else None)


if __name__ == "__main__":
    sys.exit(main())
