"""Experiment configuration: JSON schema, parsing, and hashing.

A configuration is a JSON object with up to three sections:

    {
      "group":   [ {"kind": "integer", "name": "a"},
                   {"kind": "cyclic", "name": "x", "order": 3},
                   {"kind": "table", "name": "q", "table": [[...], ...],
                    "generators": {"s": 1, "t": 2}},
                   {"kind": "lattice", "dim": 2} ],
      "measure": [ {"word": "a", "prob": 0.25}, ... ],
      "params":  { command-specific keys }
    }

Words use the text syntax of the core module ("a^2 b^-1", "e" for the
identity).  A lattice entry stands alone and is accepted only by the
automaton command.  Unknown keys are rejected everywhere.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from typing import Optional

from .automata import LatticeGeometry
from .errors import MalformedInputError
from .walks import DrivingMeasure
from .words import (
    FiniteCyclicFactor,
    FiniteTableFactor,
    GroupContext,
    IntegerFactor,
)


# every parameter any command reads; one configuration may serve several
# commands, so validation happens against the union
KNOWN_PARAMS = {
    "n", "mode", "N", "prune_threshold",
    "n_schedule", "eps", "x_grid",
    "n_max", "z_grid", "z_min", "z_max", "z_points", "refinement",
    "D", "set", "probe", "max_products",
    "set_t", "set_f", "random_ball", "k_max", "samples",
    "probe_radius", "build_radius", "spheres_n",
    "tau", "M",
}


@dataclass(frozen=True)
class ExperimentConfig:
    ctx: Optional[GroupContext]
    lattice: Optional[LatticeGeometry]
    measure: Optional[DrivingMeasure]
    params: dict
    raw: dict

    def config_hash(self) -> str:
        canonical = json.dumps(self.raw, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode()).hexdigest()[:16]


def _check_keys(obj: dict, allowed: set[str], where: str) -> None:
    unknown = set(obj) - allowed
    if unknown:
        raise MalformedInputError(f"unknown field(s) {sorted(unknown)} in {where}")


def _parse_factor(spec: dict, pos: int):
    if "kind" not in spec:
        raise MalformedInputError(f"group entry {pos}: missing 'kind'")
    kind = spec["kind"]
    if kind == "integer":
        _check_keys(spec, {"kind", "name"}, f"group entry {pos}")
        return IntegerFactor(spec["name"])
    if kind == "cyclic":
        _check_keys(spec, {"kind", "name", "order"}, f"group entry {pos}")
        return FiniteCyclicFactor(spec["name"], int(spec["order"]))
    if kind == "table":
        _check_keys(spec, {"kind", "name", "table", "generators"}, f"group entry {pos}")
        table = tuple(tuple(int(v) for v in row) for row in spec["table"])
        gens = tuple((str(k), int(v)) for k, v in spec["generators"].items())
        return FiniteTableFactor(spec["name"], table, gens)
    if kind == "lattice":
        _check_keys(spec, {"kind", "dim"}, f"group entry {pos}")
        return LatticeGeometry(int(spec["dim"]))
    raise MalformedInputError(f"group entry {pos}: unknown kind {kind!r}")


def parse_config(raw: dict) -> ExperimentConfig:
    if not isinstance(raw, dict):
        raise MalformedInputError("configuration must be a JSON object")
    _check_keys(raw, {"group", "measure", "params", "name"}, "configuration")
    ctx = None
    lattice = None
    if "group" in raw:
        specs = raw["group"]
        if not isinstance(specs, list) or not specs:
            raise MalformedInputError("'group' must be a non-empty list of factor specs")
        parsed = [_parse_factor(s, i) for i, s in enumerate(specs)]
        lattices = [p for p in parsed if isinstance(p, LatticeGeometry)]
        if lattices:
            if len(parsed) != 1:
                raise MalformedInputError("a lattice group stands alone")
            lattice = lattices[0]
        else:
            ctx = GroupContext(tuple(parsed))
    measure = None
    if "measure" in raw:
        if ctx is None:
            raise MalformedInputError("a measure needs a free-product group")
        entries = []
        for i, item in enumerate(raw["measure"]):
            _check_keys(item, {"word", "prob"}, f"measure entry {i}")
            entries.append((ctx.parse_word(item["word"]), float(item["prob"])))
        measure = DrivingMeasure(tuple(entries), name=raw.get("name", ""))
    params = raw.get("params", {})
    if not isinstance(params, dict):
        raise MalformedInputError("'params' must be an object")
    _check_keys(params, KNOWN_PARAMS, "'params'")
    return ExperimentConfig(ctx, lattice, measure, params, raw)


def load_config(path: str) -> ExperimentConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except json.JSONDecodeError as err:
        raise MalformedInputError(
            f"config {path}: JSON parse error at line {err.lineno}, column {err.colno}: {err.msg}"
        ) from err
    return parse_config(raw)
