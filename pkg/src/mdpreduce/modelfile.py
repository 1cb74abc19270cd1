"""JSON model files.

A file holds either explicit lists::

    {"states": ["s0", "s1"],
     "actions": {"s0": ["a0"], "s1": ["a0"]},
     "kernel": [["s0", "a0", "s1", 0.5], ["s1", "a0", "s1", 0.4]],
     "cost": [["s0", "a0", 1.0], ["s1", "a0", 2.0]],
     "V": {"s0": 1.0, "s1": 1.0},
     "ell": "s1"}

or one generator block, ``"inventory"`` or ``"remark1"``, in place of
``states/actions/kernel/cost``.  ``V`` and ``ell`` are optional in both
forms.  Bare names such as ``fix_inv`` resolve to the bundled fixtures.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .bounding import WeightFunction
from .core import FiniteMdp, ModelError, validate_model
from .models import (ELL_LABEL, LOST_SALE, InventorySpec, Remark1Spec, build_inventory_mdp,
                     build_lost_sale_total_cost_mdp, build_remark1_mdp)

GENERATORS = ("inventory", "remark1")
EXPLICIT = ("states", "actions", "kernel", "cost")
OPTIONAL = ("V", "ell", "name", "description")


class ModelFileError(ModelError):
    """Malformed or inconsistent model file; the message names the place."""


@dataclass(frozen=True)
class ParsedModel:
    mdp: FiniteMdp
    V: WeightFunction | None
    ell: str | None
    source: str
    document: dict


def fixture_names():
    root = resources.files("mdpreduce") / "fixtures"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def _locate(path):
    p = Path(path)
    if p.exists():
        return p.read_text(), str(p)
    name = str(path)
    ref = resources.files("mdpreduce") / "fixtures" / f"{name}.json"
    if "/" not in name and ref.is_file():
        return ref.read_text(), f"fixture:{name}"
    raise ModelFileError(f"{path}: no such file or bundled fixture "
                         f"(fixtures: {', '.join(fixture_names())})")


def _fail(where, msg):
    raise ModelFileError(f"{where}: {msg}")


def _number(x, where):
    if isinstance(x, bool) or not isinstance(x, (int, float)):
        _fail(where, f"expected a number, got {x!r}")
    x = float(x)
    if not math.isfinite(x):
        _fail(where, "number must be finite")
    return x


def _label(x, where, known):
    if not isinstance(x, str):
        _fail(where, f"expected a label string, got {x!r}")
    if x not in known:
        _fail(where, f"unknown state {x!r}")
    return x


def _explicit(doc, src):
    states = doc["states"]
    if not isinstance(states, list) or not all(isinstance(s, str) for s in states):
        _fail(f"{src}: key 'states'", "must be a list of strings")
    if len(set(states)) != len(states):
        _fail(f"{src}: key 'states'", "labels must be unique")
    index = {s: i for i, s in enumerate(states)}
    acts = doc["actions"]
    if not isinstance(acts, dict):
        _fail(f"{src}: key 'actions'", "must map state labels to action lists")
    for s in acts:
        _label(s, f"{src}: key 'actions'", index)
    actions = []
    for s in states:
        a = acts.get(s)
        if not isinstance(a, list) or not a or not all(isinstance(x, str) for x in a):
            _fail(f"{src}: key 'actions.{s}'", "needs a nonempty list of action labels")
        if len(set(a)) != len(a):
            _fail(f"{src}: key 'actions.{s}'", "duplicate action label")
        actions.append(a)
    act_index = [{a: j for j, a in enumerate(al)} for al in actions]

    def row_of(x, a, where):
        i = index[_label(x, where, index)]
        if a not in act_index[i]:
            _fail(where, f"unknown action {a!r} at state {x!r}")
        return i, act_index[i][a]

    kernel = [[[] for _ in al] for al in actions]
    if not isinstance(doc["kernel"], list):
        _fail(f"{src}: key 'kernel'", "must be a list of [state, action, target, mass]")
    for k, item in enumerate(doc["kernel"]):
        where = f"{src}: kernel[{k}]"
        if not isinstance(item, list) or len(item) != 4:
            _fail(where, "expected [state, action, target, mass]")
        i, j = row_of(item[0], item[1], where)
        y = _label(item[2], where, index)
        kernel[i][j].append((y, _number(item[3], where)))

    cost = [[None] * len(al) for al in actions]
    if not isinstance(doc["cost"], list):
        _fail(f"{src}: key 'cost'", "must be a list of [state, action, value]")
    for k, item in enumerate(doc["cost"]):
        where = f"{src}: cost[{k}]"
        if not isinstance(item, list) or len(item) != 3:
            _fail(where, "expected [state, action, value]")
        i, j = row_of(item[0], item[1], where)
        if cost[i][j] is not None:
            _fail(where, f"duplicate cost for ({item[0]!r}, {item[1]!r})")
        cost[i][j] = _number(item[2], where)
    for i, s in enumerate(states):
        for j, a in enumerate(actions[i]):
            if cost[i][j] is None:
                _fail(f"{src}: key 'cost'", f"missing cost for ({s!r}, {a!r})")
    return FiniteMdp.from_rows(states, actions, kernel, cost)


def _inventory(block, src):
    where = f"{src}: key 'inventory'"
    if not isinstance(block, dict):
        _fail(where, "must be an object")
    allowed = {"capacity", "max_order", "grid_step", "demand_pmf", "fixed_cost",
               "unit_cost", "holding", "lost_sale_terminate"}
    extra = set(block) - allowed
    if extra:
        _fail(where, f"unexpected keys {sorted(extra)}")
    try:
        pmf = block["demand_pmf"]
        if isinstance(pmf, dict):
            pmf = {float(d): _number(g, f"{where}.demand_pmf") for d, g in pmf.items()}
        else:
            pmf = {_number(d, f"{where}.demand_pmf"): _number(g, f"{where}.demand_pmf")
                   for d, g in pmf}
        hold = block.get("holding", 0.0)
        spec = InventorySpec(
            capacity=_number(block["capacity"], f"{where}.capacity"),
            max_order=_number(block["max_order"], f"{where}.max_order"),
            demand_pmf=pmf,
            fixed_cost=_number(block.get("fixed_cost", 0.0), f"{where}.fixed_cost"),
            unit_cost=_number(block.get("unit_cost", 0.0), f"{where}.unit_cost"),
            holding=hold if isinstance(hold, list) else _number(hold, f"{where}.holding"),
            grid_step=_number(block.get("grid_step", 1.0), f"{where}.grid_step"))
    except KeyError as exc:
        _fail(where, f"missing key {exc.args[0]!r}")
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ModelFileError):
            raise
        _fail(where, str(exc))
    if block.get("lost_sale_terminate", False):
        return build_lost_sale_total_cost_mdp(spec), None
    return build_inventory_mdp(spec), LOST_SALE


def _remark1(block, src):
    where = f"{src}: key 'remark1'"
    if not isinstance(block, dict) or "grid" not in block:
        _fail(where, "needs an object with a 'grid' list")
    grid = [_number(x, f"{where}.grid") for x in block["grid"]]
    cost = _number(block.get("cost", 1.0), f"{where}.cost")
    try:
        spec = Remark1Spec(tuple(grid), cost)
    except ModelError as exc:
        _fail(where, str(exc))
    return build_remark1_mdp(spec), ELL_LABEL


def parse_text(text, source="<string>") -> ParsedModel:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelFileError(f"{source}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    if not isinstance(doc, dict):
        _fail(source, "top level must be an object")
    gens = [g for g in GENERATORS if g in doc]
    explicit = [k for k in EXPLICIT if k in doc]
    unknown = set(doc) - set(GENERATORS) - set(EXPLICIT) - set(OPTIONAL)
    if unknown:
        _fail(source, f"unknown keys {sorted(unknown)}")
    if len(gens) > 1:
        _fail(source, "at most one generator block")
    if gens and explicit:
        _fail(source, f"generator block {gens[0]!r} excludes explicit keys {explicit}")
    default_ell = None
    if gens:
        build = _inventory if gens[0] == "inventory" else _remark1
        m, default_ell = build(doc[gens[0]], source)
    else:
        missing = [k for k in EXPLICIT if k not in doc]
        if missing:
            _fail(source, f"missing keys {missing}")
        m = _explicit(doc, source)

    diag = validate_model(m)
    if not diag.valid:
        _fail(source, "invalid model: " + "; ".join(diag.violations))

    V = None
    if "V" in doc:
        if not isinstance(doc["V"], dict):
            _fail(f"{source}: key 'V'", "must map state labels to weights")
        vals = np.ones(m.n_states)
        for s, w in doc["V"].items():
            vals[m.state_index(_label(s, f"{source}: key 'V'", m._index))] = \
                _number(w, f"{source}: key 'V.{s}'")
        if np.any(vals < 1.0):
            _fail(f"{source}: key 'V'", "weights must be >= 1")
        V = WeightFunction(vals)
    ell = doc.get("ell", default_ell)
    if ell is not None:
        _label(ell, f"{source}: key 'ell'", m._index)
    return ParsedModel(m, V, ell, source, doc)


def parse_model(path) -> ParsedModel:
    """Read, expand and validate a model file (or bundled fixture name)."""
    text, source = _locate(path)
    return parse_text(text, source)


def model_document(m: FiniteMdp, V=None, ell=None) -> dict:
    """Explicit-list document for ``m``; floats survive a round trip exactly."""
    rows = m.state_of_row
    entry = m.entry_row
    local = np.arange(m.n_rows) - m.row_start[rows]
    kernel = [[m.states[rows[r]], m.actions[rows[r]][local[r]], m.states[y], float(q)]
              for r, y, q in zip(entry, m.indices, m.data)]
    cost = [[m.states[rows[r]], m.actions[rows[r]][local[r]], float(m.cost[r])]
            for r in range(m.n_rows)]
    doc = {"states": list(m.states),
           "actions": {s: list(a) for s, a in zip(m.states, m.actions)},
           "kernel": kernel, "cost": cost}
    if V is not None:
        vals = V.values if isinstance(V, WeightFunction) else np.asarray(V, float)
        doc["V"] = {s: float(v) for s, v in zip(m.states, vals)}
    if ell is not None:
        doc["ell"] = m.states[m.state_index(ell)]
    return doc


def write_model(m: FiniteMdp, path, V=None, ell=None):
    Path(path).write_text(json.dumps(model_document(m, V, ell), indent=1) + "\n")
