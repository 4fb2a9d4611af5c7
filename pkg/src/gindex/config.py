"""Scenario configs: JSON schema, defaults and builders for groups and symbols."""
from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import jsonschema
import numpy as np

from .crossed import CosphereGrid, GSymbol
from .group import AffineMap, GroupStructure, build_group
from .symbols import Cutoff, Symbol, make_profile_symbol, make_symbol

TASKS = (
    "check-elliptic",
    "parametrix",
    "egorov-check",
    "star-check",
    "trace",
    "alg-index",
    "oracle-index",
    "compare",
    "verify",
)

_number = {"type": "number"}
_int_list = {"type": "array", "items": {"type": "integer"}}
_profile = {
    "type": "object",
    "properties": {
        "kind": {"enum": ["gauss", "bump"]},
        "center": _number,
        "width": {"type": "number", "exclusiveMinimum": 0},
    },
    "required": ["kind"],
    "additionalProperties": False,
}
_term = {
    "type": "object",
    "properties": {
        "g": {"type": "string"},
        "j": {"type": "integer", "minimum": 0},
        "d": {"type": "integer"},
        "k": _int_list,
        "m": {"type": "integer"},
        "re": _number,
        "im": _number,
        "profile": _profile,
    },
    "required": ["j", "k", "m"],
    "additionalProperties": False,
}
_complex = {
    "type": "object",
    "properties": {"re": _number, "im": _number},
    "additionalProperties": False,
}
_symbol = {
    "type": "object",
    "properties": {
        "scalar": _complex,
        "order": {"type": "integer"},
        "terms": {"type": "array", "items": _term},
    },
    "required": ["terms"],
    "additionalProperties": False,
}
_h_list = {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}, "minItems": 1}

SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "gindex scenario",
    "type": "object",
    "properties": {
        "name": {"type": "string"},
        "n": {"enum": [1, 2]},
        "N": {"type": "integer", "minimum": 1},
        "seed": {"type": "integer"},
        "cutoff": {
            "type": "object",
            "properties": {
                "radius": {"type": "number", "exclusiveMinimum": 0},
                "smoothness": {"type": "integer", "minimum": 1},
                "nodes": {"type": "integer", "minimum": 17},
                "inner_ratio": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
            },
            "additionalProperties": False,
        },
        "group": {
            "type": "object",
            "properties": {
                "generators": {
                    "type": "array",
                    "items": {
                        "type": "object",
                        "properties": {
                            "name": {"type": "string", "pattern": "^[A-Za-df-z][A-Za-z0-9_]*$"},
                            "A": {"type": "array", "items": _int_list},
                            "b": {"type": "array", "items": {"type": ["string", "number"]}},
                        },
                        "required": ["name", "A", "b"],
                        "additionalProperties": False,
                    },
                },
                "word_radius": {"type": "integer", "minimum": 0},
                "element_cap": {"type": "integer", "minimum": 1},
            },
            "additionalProperties": False,
        },
        "symbol": _symbol,
        "grid": {
            "type": "object",
            "properties": {
                "x_points": {"type": "integer", "minimum": 4},
                "angles": {"type": "integer", "minimum": 4},
                "bandwidth": {"type": "integer", "minimum": 0},
                "neumann_terms": {"type": ["integer", "null"], "minimum": 1},
            },
            "additionalProperties": False,
        },
        "oracle": {
            "type": "object",
            "properties": {
                "K": {"type": "integer", "minimum": 1},
                "h": _h_list,
                "egorov_K": {"type": "integer", "minimum": 1},
                "egorov_h": _h_list,
            },
            "additionalProperties": False,
        },
        "trace": {
            "type": "object",
            "properties": {
                "operand": _symbol,
                "K": {"type": "integer", "minimum": 1},
                "h": _h_list,
                "window": _int_list,
                "empty_h": {"type": "number", "exclusiveMinimum": 0},
            },
            "additionalProperties": False,
        },
        "composition": {
            "type": "object",
            "properties": {
                "first": {"type": "array", "items": _term},
                "second": {"type": "array", "items": _term},
                "truncations": _int_list,
                "h": _h_list,
                "Kh": {"type": "number", "exclusiveMinimum": 0},
            },
            "additionalProperties": False,
        },
        "verify": {
            "type": "object",
            "properties": {
                "instances": {"type": "integer", "minimum": 1},
                "homotopy_points": {"type": "integer", "minimum": 2},
                "homotopy_step": _number,
            },
            "additionalProperties": False,
        },
        "expect": {
            "type": "object",
            "properties": {"index": _number, "elliptic": {"type": "boolean"}},
            "additionalProperties": False,
        },
        "tasks": {"type": "array", "items": {"enum": list(TASKS)}},
        "tolerances": {
            "type": "object",
            "properties": {
                name: {"type": "number", "minimum": 0}
                for name in (
                    "ellipticity_margin",
                    "projection_residual",
                    "algebra",
                    "egorov",
                    "integrality",
                    "laurent",
                    "trace_property",
                    "trace_fit",
                    "empty_trace",
                    "oracle_index",
                    "compare",
                    "projector",
                    "slope_margin",
                    "discard",
                )
            },
            "additionalProperties": False,
        },
    },
    "required": ["n", "N", "group", "tasks"],
    "additionalProperties": False,
}

DEFAULTS = {
    "name": "scenario",
    "seed": 0,
    "cutoff": {"radius": 1.0, "smoothness": 8, "nodes": 257, "inner_ratio": 0.5},
    "group": {"word_radius": 1, "element_cap": 512},
    "grid": {"x_points": 16, "angles": 16, "bandwidth": 4, "neumann_terms": None},
    "oracle": {"K": 256, "h": [2**-6], "egorov_K": 24, "egorov_h": [2.0**-k for k in range(3, 8)]},
    "trace": {"K": 48, "h": [2 ** -(5 + 0.25 * i) for i in range(5)], "window": [-1, 0], "empty_h": 2**-6},
    "composition": {"truncations": [1, 2, 3], "h": [2.0**-k for k in range(3, 9)], "Kh": 8.0},
    "verify": {"instances": 20, "homotopy_points": 5, "homotopy_step": 0.05},
    "expect": {},
    "tolerances": {
        "ellipticity_margin": 1e-6,
        "projection_residual": 1e-8,
        "algebra": 1e-9,
        "egorov": 1e-12,
        "integrality": 1e-6,
        "laurent": 1e-6,
        "trace_property": 1e-8,
        "trace_fit": 0.01,
        "empty_trace": 1e-6,
        "oracle_index": 0.05,
        "compare": 0.1,
        "projector": 1e-6,
        "slope_margin": 0.3,
        "discard": 1e-9,
    },
}


class ConfigError(ValueError):
    def __init__(self, message: str, path: str = ""):
        super().__init__(message)
        self.path = path


def _merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def validate(raw: dict) -> dict:
    """Schema-check ``raw`` and return it with every default filled in."""
    try:
        jsonschema.validate(raw, SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path)
        raise ConfigError(exc.message, where) from None
    cfg = _merge(DEFAULTS, raw)
    n = cfg["n"]
    for gen in cfg["group"].get("generators", []):
        if len(gen["A"]) != n or any(len(row) != n for row in gen["A"]) or len(gen["b"]) != n:
            raise ConfigError(f"generator {gen['name']} does not act on T^{n}", "group/generators")
    return cfg


def config_hash(raw: dict) -> str:
    return hashlib.sha256(json.dumps(raw, sort_keys=True, separators=(",", ":")).encode()).hexdigest()


def load(path: str | Path) -> tuple[dict, dict]:
    """(raw, validated-with-defaults) pair for a JSON config file."""
    try:
        raw = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc}") from None
    return raw, validate(raw)


# ---------------------------------------------------------------------------
# builders


def build_cutoff(cfg: dict) -> Cutoff:
    c = cfg["cutoff"]
    return Cutoff(float(c["radius"]), int(c["smoothness"]), int(c["nodes"]), float(c["inner_ratio"]))


def build_group_structure(cfg: dict) -> GroupStructure:
    g = cfg["group"]
    gens = [AffineMap.from_config(x["A"], x["b"], x["name"]) for x in g.get("generators", [])]
    if not gens:
        gens = [AffineMap.identity(cfg["n"])]
    return build_group(gens, g["word_radius"], cap=g["element_cap"])


def _profile_fn(spec: dict, cutoff: Cutoff):
    if spec["kind"] == "bump":
        return lambda r: cutoff(r) * (1 - cutoff(r)) * 4
    center = spec.get("center", (cutoff.inner + cutoff.radius) / 2)
    width = spec.get("width", (cutoff.radius - cutoff.inner) / 12)
    return lambda r: np.exp(-(((r - center) / width) ** 2))


def build_symbol(terms: list, n: int, N: int, cutoff: Cutoff, order: int = 0) -> Symbol:
    """Plain symbol from term records (the ``g`` field is ignored)."""
    homog, profiles = [], []
    for t in terms:
        c = complex(t.get("re", 0.0), t.get("im", 0.0))
        k = tuple(t["k"])
        if len(k) != n:
            raise ConfigError(f"x-mode {list(k)} has wrong length for n={n}", "terms")
        if "profile" in t:
            f = _profile_fn(t["profile"], cutoff)
            profiles.append((t["j"], k, t["m"], lambda r, f=f, c=c: c * f(r)))
        else:
            if "d" not in t:
                raise ConfigError("homogeneous term needs a degree d", "terms")
            homog.append((t["j"], t["d"], k, t["m"], c))
    a = make_symbol(n, N, homog, cutoff, order=order)
    if profiles:
        a = a + make_profile_symbol(n, N, profiles, cutoff)
    return a


def build_gsymbol(spec: dict, cfg: dict, group: GroupStructure, cutoff: Cutoff) -> GSymbol:
    n, N = cfg["n"], cfg["N"]
    by_element: dict = {}
    for t in spec["terms"]:
        g = group.resolve(t.get("g", "e"))
        by_element.setdefault(g, []).append(t)
    parts = {g: build_symbol(ts, n, N, cutoff, spec.get("order", 0)) for g, ts in by_element.items()}
    sc = spec.get("scalar", {})
    return GSymbol(group, n, N, cutoff, complex(sc.get("re", 0.0), sc.get("im", 0.0)), parts)


@dataclass
class Scenario:
    cfg: dict
    cutoff: Cutoff
    group: GroupStructure
    symbol: GSymbol | None
    grid: CosphereGrid

    @property
    def n(self) -> int:
        return self.cfg["n"]

    @property
    def N(self) -> int:
        return self.cfg["N"]

    @property
    def tol(self) -> dict:
        return self.cfg["tolerances"]

    def with_cutoff(self, cutoff: Cutoff) -> "Scenario":
        sym = build_gsymbol(self.cfg["symbol"], self.cfg, self.group, cutoff) if self.cfg.get("symbol") else None
        return Scenario(self.cfg, cutoff, self.group, sym, self.grid)


def build_scenario(cfg: dict) -> Scenario:
    cutoff = build_cutoff(cfg)
    group = build_group_structure(cfg)
    symbol = build_gsymbol(cfg["symbol"], cfg, group, cutoff) if cfg.get("symbol") else None
    grid = CosphereGrid(cfg["n"], cfg["grid"]["x_points"], cfg["grid"]["angles"])
    return Scenario(cfg, cutoff, group, symbol, grid)


__all__ = [
    "ConfigError",
    "DEFAULTS",
    "SCHEMA",
    "Scenario",
    "TASKS",
    "build_cutoff",
    "build_group_structure",
    "build_gsymbol",
    "build_scenario",
    "build_symbol",
    "config_hash",
    "load",
    "validate",
]
