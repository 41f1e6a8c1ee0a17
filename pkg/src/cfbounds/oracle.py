"""Independent ground-truth utilities: exhaustive enumeration, backdoor
adjustment from raw frequencies, forward sampling, random test models.

This module is the second opinion for everything the twin-network
evaluator computes, so it deliberately shares no inference code with the
rest of the package: queries are answered by looping over every joint
exogenous assignment in pure Python, and sums are compensated rather
than table-based. Keep it that way; the verify command and the
equivalence tests lose their point otherwise.

Enumeration refuses models whose joint exogenous domain exceeds
ENUM_CAP assignments.
"""

from __future__ import annotations

import math
from collections.abc import Sequence
from dataclasses import dataclass
from itertools import product

import numpy as np

from .counterfactual import CausalQuery, Intervention, QueryKind
from .data import Dataset
from .errors import MissingPriorError, SchemaError, TooLargeError, UndefinedQuery
from .pgm import Dag, Variable
from .scm import Scm, build_canonical_scm

ENUM_CAP = 10**7


class _CompensatedSum:
    """Kahan accumulator: deterministic, order-stable, float64."""

    __slots__ = ("total", "carry")

    def __init__(self):
        self.total = 0.0
        self.carry = 0.0

    def add(self, x: float) -> None:
        y = x - self.carry
        t = self.total + y
        self.carry = (t - self.total) - y
        self.total = t

    @property
    def value(self) -> float:
        return self.total


def _check_cap(scm: Scm) -> int:
    joint = 1
    for u in scm.exogenous:
        joint *= u.cardinality
    if joint > ENUM_CAP:
        raise TooLargeError(
            f"joint exogenous domain has {joint} assignments, enumeration cap is {ENUM_CAP}"
        )
    return joint


def _require_priors(scm: Scm) -> None:
    missing = scm.missing_priors()
    if missing:
        raise MissingPriorError(f"no priors for {missing}")


def _iter_exo(scm: Scm):
    """(probability, {exo name: state index}) for every joint assignment
    with positive probability, in lexicographic assignment order."""
    names = [u.name for u in scm.exogenous]
    priors = [scm.priors[n] for n in names]
    cards = [u.cardinality for u in scm.exogenous]
    for combo in product(*(range(c) for c in cards)):
        p = 1.0
        for prior, idx in zip(priors, combo):
            p *= float(prior[idx])
            if p == 0.0:
                break
        if p == 0.0:
            continue
        yield p, dict(zip(names, combo))


def _propagate(scm: Scm, exo: dict[str, int], forced: dict[str, int]) -> dict[str, int]:
    values: dict[str, int] = {}
    for name in scm.topo_order:
        if name in forced:
            values[name] = forced[name]
            continue
        eq = scm.equations[name]
        parent_states = tuple(values[p.name] for p in eq.endo_parents)
        u = exo[eq.exo_parent.name] if eq.exo_parent is not None else 0
        values[name] = eq.evaluate(u, parent_states)
    return values


def _ratio(kind: str, num: _CompensatedSum, den: _CompensatedSum, event: str) -> float:
    if den.value == 0.0:
        raise UndefinedQuery(f"{kind}: conditioning event {event} has probability zero")
    return num.value / den.value


def exact_queries(scm: Scm, queries: Sequence[CausalQuery]) -> list[float]:
    """All queries in one enumeration pass over the joint exogenous
    domain. Raises TooLargeError over the cap, MissingPriorError without
    priors, UndefinedQuery on zero-probability conditioning."""
    _require_priors(scm)
    _check_cap(scm)
    endo = {v.name: v for v in scm.endogenous}
    plans = []
    needed: dict[tuple[str, int], dict[str, int]] = {}
    for q in queries:
        for role, name in (("cause", q.cause), ("effect", q.effect)):
            if name not in endo:
                raise SchemaError(f"{role} {name!r} is not an endogenous variable")
        idx = {
            "x": endo[q.cause].index_of(q.cause_positive),
            "x_neg": endo[q.cause].index_of(q.cause_negative),
            "y": endo[q.effect].index_of(q.effect_positive),
            "y_neg": endo[q.effect].index_of(q.effect_negative),
        }
        if q.kind is not QueryKind.COND_DIFF:
            for key in ("x", "x_neg"):
                needed.setdefault((q.cause, idx[key]), {q.cause: idx[key]})
        plans.append((q, idx, [_CompensatedSum() for _ in range(4)]))

    for p, exo in _iter_exo(scm):
        real = _propagate(scm, exo, {})
        done: dict[tuple[str, int], dict[str, int]] = {}

        def world(cause: str, state: int) -> dict[str, int]:
            key = (cause, state)
            if key not in done:
                done[key] = _propagate(scm, exo, needed[key])
            return done[key]

        for q, idx, sums in plans:
            cause, effect = q.cause, q.effect
            if q.kind is QueryKind.COND_DIFF:
                if real[cause] == idx["x"]:
                    sums[1].add(p)
                    if real[effect] == idx["y"]:
                        sums[0].add(p)
                elif real[cause] == idx["x_neg"]:
                    sums[3].add(p)
                    if real[effect] == idx["y"]:
                        sums[2].add(p)
            elif q.kind is QueryKind.ACE:
                if world(cause, idx["x"])[effect] == idx["y"]:
                    sums[0].add(p)
                if world(cause, idx["x_neg"])[effect] == idx["y"]:
                    sums[1].add(p)
            elif q.kind is QueryKind.PNS:
                if (
                    world(cause, idx["x"])[effect] == idx["y"]
                    and world(cause, idx["x_neg"])[effect] == idx["y_neg"]
                ):
                    sums[0].add(p)
            elif q.kind is QueryKind.PN:
                if real[cause] == idx["x"] and real[effect] == idx["y"]:
                    sums[1].add(p)
                    if world(cause, idx["x_neg"])[effect] == idx["y_neg"]:
                        sums[0].add(p)
            elif q.kind is QueryKind.PNRC:
                if real[cause] == idx["x_neg"] and real[effect] == idx["y"]:
                    sums[1].add(p)
                    if world(cause, idx["x"])[effect] == idx["y_neg"]:
                        sums[0].add(p)
            else:  # PS
                if real[cause] == idx["x_neg"] and real[effect] == idx["y_neg"]:
                    sums[1].add(p)
                    if world(cause, idx["x"])[effect] == idx["y"]:
                        sums[0].add(p)

    results = []
    for q, idx, sums in plans:
        kind = q.kind.value
        if q.kind is QueryKind.COND_DIFF:
            upper = _ratio(kind, sums[0], sums[1], f"{{{q.cause}={q.cause_positive}}}")
            lower = _ratio(kind, sums[2], sums[3], f"{{{q.cause}={q.cause_negative}}}")
            results.append(upper - lower)
        elif q.kind is QueryKind.ACE:
            results.append(sums[0].value - sums[1].value)
        elif q.kind is QueryKind.PNS:
            results.append(sums[0].value)
        else:
            observed = {
                QueryKind.PN: (q.cause_positive, q.effect_positive),
                QueryKind.PNRC: (q.cause_negative, q.effect_positive),
                QueryKind.PS: (q.cause_negative, q.effect_negative),
            }[q.kind]
            event = f"{{{q.cause}={observed[0]}, {q.effect}={observed[1]}}}"
            results.append(_ratio(kind, sums[0], sums[1], event))
    return results


def exact_query(scm: Scm, query: CausalQuery) -> float:
    return exact_queries(scm, [query])[0]


@dataclass(frozen=True)
class WorldRow:
    exogenous: dict[str, str]
    probability: float
    outcomes: tuple[dict[str, str], ...]


@dataclass(frozen=True)
class WorldTable:
    """Fully materialized enumeration for small models: one row per joint
    exogenous assignment (zero-probability rows included), outcomes for
    the real world followed by one entry per requested intervention
    world. Row probabilities sum to one."""

    worlds: tuple[tuple[Intervention, ...], ...]
    rows: tuple[WorldRow, ...]


def world_table(
    scm: Scm, interventions_per_world: Sequence[Sequence[Intervention]] = ()
) -> WorldTable:
    _require_priors(scm)
    _check_cap(scm)
    endo = {v.name: v for v in scm.endogenous}
    forced_per_world: list[dict[str, int]] = [{}]
    for world in interventions_per_world:
        forced = {}
        for iv in world:
            if iv.variable not in endo:
                raise SchemaError(f"cannot intervene on {iv.variable!r}")
            forced[iv.variable] = endo[iv.variable].index_of(iv.value)
        forced_per_world.append(forced)

    names = [u.name for u in scm.exogenous]
    cards = [u.cardinality for u in scm.exogenous]
    by_name = {u.name: u for u in scm.exogenous}
    rows = []
    for combo in product(*(range(c) for c in cards)):
        exo = dict(zip(names, combo))
        p = 1.0
        for n, i in exo.items():
            p *= float(scm.priors[n][i])
        outcomes = []
        for forced in forced_per_world:
            values = _propagate(scm, exo, forced)
            outcomes.append({n: endo[n].states[i] for n, i in values.items()})
        rows.append(
            WorldRow(
                exogenous={n: by_name[n].states[i] for n, i in exo.items()},
                probability=p,
                outcomes=tuple(outcomes),
            )
        )
    return WorldTable(
        worlds=tuple(tuple(w) for w in interventions_per_world), rows=tuple(rows)
    )


def forward_sample(scm: Scm, n: int, seed: int) -> Dataset:
    """n independent records of the endogenous variables, unit weights.

    Exogenous draws use inverse-CDF lookups on one uniform per variable,
    in declared exogenous order, from numpy's default generator seeded
    with `seed`; identical inputs give identical datasets. n may be 0,
    yielding an empty dataset that mass-requiring consumers reject.
    """
    if n < 0:
        raise SchemaError("sample size must be non-negative")
    _require_priors(scm)
    rng = np.random.default_rng(seed)
    exo_draws: dict[str, np.ndarray] = {}
    for u in scm.exogenous:
        cum = np.cumsum(scm.priors[u.name])
        draws = np.searchsorted(cum, rng.random(n), side="right")
        exo_draws[u.name] = np.minimum(draws, u.cardinality - 1).astype(np.int64)
    values: dict[str, np.ndarray] = {}
    for name in scm.topo_order:
        eq = scm.equations[name]
        config = np.zeros(n, dtype=np.int64)
        stride = 1
        for p in eq.endo_parents:
            config += values[p.name] * stride
            stride *= p.cardinality
        rows = exo_draws[eq.exo_parent.name] if eq.exo_parent is not None else np.zeros(n, dtype=np.int64)
        values[name] = np.asarray(eq.mapping[rows, config], dtype=np.int64)
    schema = scm.endogenous
    stacked = (
        np.stack([values[v.name] for v in schema], axis=1)
        if schema
        else np.zeros((n, 0), dtype=np.int64)
    )
    return Dataset(schema, stacked, np.ones(n, dtype=np.int64))


def backdoor_ace(
    data: Dataset,
    cause: str,
    effect: str,
    adjustment: Sequence[str],
    cause_positive: str,
    cause_negative: str,
    effect_positive: str,
) -> float:
    """Adjustment-formula contrast from observed frequencies:
    sum_z P(z) * [P(y | x, z) - P(y | x', z)]. Raises UndefinedQuery
    when some adjustment cell with mass never shows a cause state."""
    pos = {v.name: j for j, v in enumerate(data.schema)}
    for name in (cause, effect, *adjustment):
        if name not in pos:
            raise SchemaError(f"dataset has no column {name!r}")
    if len({cause, effect, *adjustment}) != 2 + len(adjustment):
        raise SchemaError("cause, effect, and adjustment set must be disjoint")
    schema = {v.name: v for v in data.schema}
    x_pos = schema[cause].index_of(cause_positive)
    x_neg = schema[cause].index_of(cause_negative)
    y_pos = schema[effect].index_of(effect_positive)
    if data.total_weight == 0:
        raise SchemaError("backdoor adjustment needs positive total weight")

    agg = data.aggregated()
    cells: dict[tuple, dict[str, float]] = {}
    for i in range(agg.n_rows):
        row = agg.assignments[i]
        w = agg.weights[i].item()
        if w == 0:
            continue
        z = tuple(int(row[pos[a]]) for a in adjustment)
        cell = cells.setdefault(z, {"mass": 0, "x+": 0, "x-": 0, "yx+": 0, "yx-": 0})
        cell["mass"] += w
        xv = int(row[pos[cause]])
        yv = int(row[pos[effect]])
        if xv == x_pos:
            cell["x+"] += w
            if yv == y_pos:
                cell["yx+"] += w
        elif xv == x_neg:
            cell["x-"] += w
            if yv == y_pos:
                cell["yx-"] += w

    total = float(data.total_weight)
    terms_pos = []
    terms_neg = []
    for z in sorted(cells):
        cell = cells[z]
        if cell["x+"] == 0 or cell["x-"] == 0:
            missing = cause_positive if cell["x+"] == 0 else cause_negative
            raise UndefinedQuery(
                f"adjustment cell {dict(zip(adjustment, z))} never shows "
                f"{cause}={missing}; backdoor conditional is undefined"
            )
        weight = cell["mass"] / total
        terms_pos.append(weight * (cell["yx+"] / cell["x+"]))
        terms_neg.append(weight * (cell["yx-"] / cell["x-"]))
    return math.fsum(terms_pos) - math.fsum(terms_neg)


def random_scm(seed: int, max_nodes: int = 4) -> Scm:
    """A small random canonical model for equivalence testing: 2 to
    max_nodes binary endogenous variables, random DAG with at most three
    parents per node, flat-Dirichlet priors. Deterministic in seed."""
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, max_nodes + 1))
    variables = [Variable(f"X{i + 1}", ("yes", "no")) for i in range(n)]
    edges = []
    parent_count = [0] * n
    for j in range(n):
        for i in range(j):
            if parent_count[j] < 3 and rng.random() < 0.5:
                edges.append((variables[i].name, variables[j].name))
                parent_count[j] += 1
    scm = build_canonical_scm(Dag(variables, edges))
    priors = {
        u.name: rng.dirichlet(np.ones(u.cardinality)) for u in scm.exogenous
    }
    return scm.with_priors(priors)


def random_query(seed: int, scm: Scm, kind: QueryKind | None = None) -> CausalQuery:
    """A query over a random cause/effect pair of a binary-variable model,
    preferring pairs where the cause is an ancestor of the effect."""
    rng = np.random.default_rng(seed)
    names = [v.name for v in scm.endogenous]
    pairs = [
        (c, e)
        for e in names
        for c in sorted(scm.endo_dag.ancestors_of(e))
    ]
    if not pairs:
        pairs = [(c, e) for c in names for e in names if c != e]
    cause, effect = pairs[int(rng.integers(len(pairs)))]
    if kind is None:
        kind = list(QueryKind)[int(rng.integers(len(QueryKind)))]
    endo = {v.name: v for v in scm.endogenous}
    cs, es = endo[cause].states, endo[effect].states
    return CausalQuery(
        kind=kind,
        cause=cause,
        effect=effect,
        cause_positive=cs[0],
        cause_negative=cs[1],
        effect_positive=es[0],
        effect_negative=es[1],
    )
