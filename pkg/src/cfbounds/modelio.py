"""JSON file formats for models, queries, binarization maps, manifests.

Model files come in two shapes. A skeleton declares `variables` (name to
ordered state list) and `edges` only, all nodes endogenous. A full model
adds `equations` (one per endogenous variable) and optionally `priors`;
its edge list must then spell out every structural arc, exogenous ones
included. Equation tables are flat lists in exo-major order: the row for
the first exogenous state across all parent configurations (first parent
cycling fastest), then the next row. Entries are child state labels or
indices.

Unknown keys are rejected everywhere; a typo should fail loudly, not
silently change meaning.
"""

from __future__ import annotations

import json
from collections.abc import Mapping
from pathlib import Path

import numpy as np

from .counterfactual import CausalQuery, QueryKind
from .data import BinarizationMap, BinarySpec
from .errors import SchemaError
from .pgm import Dag, Variable
from .scm import Scm, StructuralEquation

_KINDS = {k.value: k for k in QueryKind}


def _require_keys(obj: Mapping, allowed: set[str], required: set[str], what: str) -> None:
    if not isinstance(obj, dict):
        raise SchemaError(f"{what} must be a JSON object")
    unknown = set(obj) - allowed
    if unknown:
        raise SchemaError(f"{what} has unknown keys {sorted(unknown)}; allowed: {sorted(allowed)}")
    missing = required - set(obj)
    if missing:
        raise SchemaError(f"{what} is missing required keys {sorted(missing)}")


def _load_json(path):
    text = Path(path).read_text(encoding="utf-8")
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: invalid JSON: {exc}") from None


def _parse_variables(doc, path) -> dict[str, Variable]:
    variables = {}
    if not isinstance(doc, dict) or not doc:
        raise SchemaError(f"{path}: 'variables' must be a non-empty object")
    for name, states in doc.items():
        if (
            not isinstance(states, list)
            or not states
            or not all(isinstance(s, str) for s in states)
        ):
            raise SchemaError(f"{path}: states of {name!r} must be a non-empty list of strings")
        variables[name] = Variable(name, tuple(states))
    return variables


def _parse_edges(doc, path) -> list[tuple[str, str]]:
    if not isinstance(doc, list):
        raise SchemaError(f"{path}: 'edges' must be a list")
    edges = []
    for item in doc:
        if not (isinstance(item, list) and len(item) == 2 and all(isinstance(x, str) for x in item)):
            raise SchemaError(f"{path}: each edge must be a [parent, child] pair, got {item!r}")
        edges.append((item[0], item[1]))
    return edges


def load_model(path) -> Dag | Scm:
    """A skeleton file loads as a Dag, a full model as an Scm."""
    doc = _load_json(path)
    _require_keys(
        doc, {"variables", "edges", "equations", "priors"}, {"variables", "edges"}, f"{path}"
    )
    variables = _parse_variables(doc["variables"], path)
    edges = _parse_edges(doc["edges"], path)
    for parent, child in edges:
        for endpoint in (parent, child):
            if endpoint not in variables:
                raise SchemaError(f"{path}: edge endpoint {endpoint!r} is not declared")

    if "equations" not in doc:
        if "priors" in doc:
            raise SchemaError(f"{path}: 'priors' requires 'equations'")
        return Dag(variables.values(), edges)

    eq_doc = doc["equations"]
    if not isinstance(eq_doc, dict) or not eq_doc:
        raise SchemaError(f"{path}: 'equations' must be a non-empty object")
    for child in eq_doc:
        if child not in variables:
            raise SchemaError(f"{path}: equation child {child!r} is not declared")
    exo_names: set[str] = set()
    parsed: dict[str, tuple[list[str], str, list]] = {}
    for child, spec in eq_doc.items():
        _require_keys(
            spec, {"exo", "parents", "table"}, {"exo", "parents", "table"},
            f"{path}: equation for {child!r}",
        )
        if not isinstance(spec["exo"], str):
            raise SchemaError(f"{path}: equation for {child!r}: 'exo' must be a name")
        if not isinstance(spec["parents"], list) or not all(
            isinstance(p, str) for p in spec["parents"]
        ):
            raise SchemaError(f"{path}: equation for {child!r}: 'parents' must be a name list")
        if not isinstance(spec["table"], list):
            raise SchemaError(f"{path}: equation for {child!r}: 'table' must be a list")
        exo_names.add(spec["exo"])
        parsed[child] = (spec["parents"], spec["exo"], spec["table"])

    endo_names = [n for n in variables if n in parsed]
    stray = [n for n in variables if n not in parsed and n not in exo_names]
    if stray:
        raise SchemaError(
            f"{path}: variables {stray} are neither equation children nor exogenous parents"
        )
    both = exo_names & set(parsed)
    if both:
        raise SchemaError(f"{path}: {sorted(both)} appear both as children and as exogenous")

    equations = []
    structural_edges = set()
    for child in endo_names:
        parent_names, exo_name, table = parsed[child]
        if exo_name not in variables:
            raise SchemaError(f"{path}: exogenous {exo_name!r} of {child!r} is not declared")
        for p in parent_names:
            if p not in variables:
                raise SchemaError(f"{path}: parent {p!r} of {child!r} is not declared")
        child_var = variables[child]
        parents = tuple(variables[p] for p in parent_names)
        exo = variables[exo_name]
        n_configs = 1
        for p in parents:
            n_configs *= p.cardinality
        expected = exo.cardinality * n_configs
        if len(table) != expected:
            raise SchemaError(
                f"{path}: table for {child!r} has {len(table)} entries, expected {expected} "
                f"(exogenous {exo.cardinality} x configurations {n_configs})"
            )
        flat = []
        for entry in table:
            if isinstance(entry, str):
                flat.append(child_var.index_of(entry))
            elif isinstance(entry, int) and not isinstance(entry, bool):
                if not 0 <= entry < child_var.cardinality:
                    raise SchemaError(
                        f"{path}: table for {child!r} holds index {entry}, "
                        f"domain has {child_var.cardinality} states"
                    )
                flat.append(entry)
            else:
                raise SchemaError(
                    f"{path}: table entries for {child!r} must be labels or indices, "
                    f"got {entry!r}"
                )
        mapping = np.asarray(flat, dtype=np.int64).reshape(exo.cardinality, n_configs)
        equations.append(StructuralEquation(child_var, parents, exo, mapping))
        for p in parent_names:
            structural_edges.add((p, child))
        structural_edges.add((exo_name, child))

    declared = set(edges)
    if declared != structural_edges:
        extra = sorted(declared - structural_edges)
        missing = sorted(structural_edges - declared)
        raise SchemaError(
            f"{path}: edge list disagrees with equations"
            + (f"; undeclared arcs {missing}" if missing else "")
            + (f"; stray arcs {extra}" if extra else "")
        )

    priors_doc = doc.get("priors", {})
    if not isinstance(priors_doc, dict):
        raise SchemaError(f"{path}: 'priors' must be an object")
    for name, values in priors_doc.items():
        if not isinstance(values, list) or not all(
            isinstance(x, (int, float)) and not isinstance(x, bool) for x in values
        ):
            raise SchemaError(f"{path}: prior for {name!r} must be a number list")
    return Scm(equations, {k: np.asarray(v, dtype=np.float64) for k, v in priors_doc.items()})


def save_model(path, model: Dag | Scm) -> None:
    if isinstance(model, Dag):
        doc = {
            "variables": {n: list(v.states) for n, v in model.variables.items()},
            "edges": [[p, c] for p, c in model.edges],
        }
    else:
        variables: dict[str, list[str]] = {}
        for v in model.endogenous:
            variables[v.name] = list(v.states)
        for u in model.exogenous:
            variables[u.name] = list(u.states)
        edges = []
        equations = {}
        for v in model.endogenous:
            eq = model.equations[v.name]
            for p in eq.endo_parents:
                edges.append([p.name, v.name])
            if eq.exo_parent is None:
                raise SchemaError(
                    f"cannot save {v.name!r}: constant equations have no file form"
                )
            edges.append([eq.exo_parent.name, v.name])
            equations[v.name] = {
                "exo": eq.exo_parent.name,
                "parents": [p.name for p in eq.endo_parents],
                "table": [
                    v.states[int(s)] for s in np.asarray(eq.mapping).reshape(-1)
                ],
            }
        doc = {"variables": variables, "edges": edges, "equations": equations}
        if model.priors:
            doc["priors"] = {
                name: [float(x) for x in model.priors[name]]
                for name in (u.name for u in model.exogenous)
                if name in model.priors
            }
    Path(path).write_text(
        json.dumps(doc, indent=2, ensure_ascii=False) + "\n", encoding="utf-8"
    )


def load_binarization(path) -> BinarizationMap:
    doc = _load_json(path)
    if not isinstance(doc, dict) or not doc:
        raise SchemaError(f"{path}: binarization map must be a non-empty object")
    specs = {}
    for name, spec in doc.items():
        _require_keys(
            spec,
            {"positive", "negative", "positive_label", "negative_label"},
            {"positive", "negative"},
            f"{path}: entry for {name!r}",
        )
        for side in ("positive", "negative"):
            if not isinstance(spec[side], list) or not all(
                isinstance(s, str) for s in spec[side]
            ):
                raise SchemaError(f"{path}: {side!r} side of {name!r} must be a string list")
        specs[name] = BinarySpec(
            positive=tuple(spec["positive"]),
            negative=tuple(spec["negative"]),
            positive_label=spec.get("positive_label", "positive"),
            negative_label=spec.get("negative_label", "negative"),
        )
    return BinarizationMap(specs)


def _resolve_states(
    name: str,
    variables: Mapping[str, Variable],
    bmap: BinarizationMap | None,
    positive: str | None,
    negative: str | None,
    what: str,
) -> tuple[str, str]:
    var = variables[name]
    if positive is None:
        if bmap is not None and name in bmap:
            positive = bmap.positive_state(name)
        elif var.cardinality == 2:
            positive = var.states[0]
        else:
            raise SchemaError(
                f"{what}: {name!r} has {var.cardinality} states; give explicit query states "
                f"or a binarization entry"
            )
    var.index_of(positive)
    if negative is None:
        if bmap is not None and name in bmap and bmap.negative_state(name) != positive:
            negative = bmap.negative_state(name)
        else:
            others = [s for s in var.states if s != positive]
            if len(others) != 1:
                raise SchemaError(
                    f"{what}: negative state of {name!r} is ambiguous; specify it explicitly"
                )
            negative = others[0]
    var.index_of(negative)
    return positive, negative


def load_queries(
    path,
    variables: Mapping[str, Variable],
    bmap: BinarizationMap | None = None,
) -> list[CausalQuery]:
    """Parse a query list against the model's endogenous variables.

    Omitted state fields fall back to the binarization map's labels, or
    for two-state variables to positive = first declared state.
    """
    doc = _load_json(path)
    if not isinstance(doc, list) or not doc:
        raise SchemaError(f"{path}: queries file must be a non-empty list")
    queries = []
    for k, item in enumerate(doc):
        what = f"{path}: query {k}"
        _require_keys(
            item,
            {
                "kind",
                "cause",
                "effect",
                "cause_positive_state",
                "cause_negative_state",
                "effect_positive_state",
                "effect_negative_state",
            },
            {"kind", "cause", "effect"},
            what,
        )
        if item["kind"] not in _KINDS:
            raise SchemaError(
                f"{what}: unknown kind {item['kind']!r}; expected one of {sorted(_KINDS)}"
            )
        for role in ("cause", "effect"):
            if item[role] not in variables:
                raise SchemaError(f"{what}: {role} {item[role]!r} is not an endogenous variable")
        cause_pos, cause_neg = _resolve_states(
            item["cause"],
            variables,
            bmap,
            item.get("cause_positive_state"),
            item.get("cause_negative_state"),
            what,
        )
        effect_pos, effect_neg = _resolve_states(
            item["effect"],
            variables,
            bmap,
            item.get("effect_positive_state"),
            item.get("effect_negative_state"),
            what,
        )
        queries.append(
            CausalQuery(
                kind=_KINDS[item["kind"]],
                cause=item["cause"],
                effect=item["effect"],
                cause_positive=cause_pos,
                cause_negative=cause_neg,
                effect_positive=effect_pos,
                effect_negative=effect_neg,
            )
        )
    return queries


_MANIFEST_KEYS = {"runs", "max_iter", "tol", "seed", "workers", "guard"}


def load_manifest(path) -> dict:
    """Settings file for the CLI; same names and meanings as the flags."""
    doc = _load_json(path)
    _require_keys(doc, _MANIFEST_KEYS, set(), f"{path}")
    for key in ("runs", "max_iter", "seed", "workers", "guard"):
        if key in doc and (isinstance(doc[key], bool) or not isinstance(doc[key], int)):
            raise SchemaError(f"{path}: {key!r} must be an integer")
    if "tol" in doc and (
        isinstance(doc["tol"], bool) or not isinstance(doc["tol"], (int, float))
    ):
        raise SchemaError(f"{path}: 'tol' must be a number")
    return dict(doc)
