"""Discrete Bayesian networks: variables, DAGs, factors, CPTs, inference.

Inference is exact variable elimination with a deterministic min-fill
ordering (ties broken by variable name), so repeated calls produce
bit-identical results. Probabilities live in ordinary float64 tables;
normalization totals are accumulated with math.fsum.
"""

from __future__ import annotations

import math
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from heapq import heappop, heappush
from itertools import combinations
from typing import TYPE_CHECKING

import numpy as np

from .errors import CycleError, SchemaError, ZeroEvidenceError

if TYPE_CHECKING:  # pragma: no cover
    from .data import Dataset

ROW_SUM_TOL = 1e-9

# Evidence is a plain mapping from variable name to an observed state label.
# At most one state per variable comes for free; states are validated where
# the evidence is applied.
Evidence = Mapping[str, str]


@dataclass(frozen=True)
class Variable:
    """A named discrete variable with an ordered state domain."""

    name: str
    states: tuple[str, ...]

    def __post_init__(self):
        if not self.name:
            raise SchemaError("variable name must be non-empty")
        object.__setattr__(self, "states", tuple(self.states))
        if len(self.states) < 1:
            raise SchemaError(f"variable {self.name!r} needs at least one state")
        if len(set(self.states)) != len(self.states):
            raise SchemaError(f"variable {self.name!r} has duplicate states")

    @property
    def cardinality(self) -> int:
        return len(self.states)

    def index_of(self, state: str) -> int:
        try:
            return self.states.index(state)
        except ValueError:
            raise SchemaError(
                f"state {state!r} not in domain of {self.name!r} (states: {list(self.states)})"
            ) from None


class Dag:
    """A directed graph over named variables.

    Construction checks names and edge endpoints only; acyclicity is
    checked by topological_sort and by every consumer that requires a DAG
    (a cyclic edge list must remain constructible so the sort can reject it).
    Parent and child lists preserve edge declaration order.
    """

    def __init__(self, variables: Iterable[Variable], edges: Iterable[tuple[str, str]] = ()):
        self.variables: dict[str, Variable] = {}
        for v in variables:
            if v.name in self.variables:
                raise SchemaError(f"duplicate variable {v.name!r}")
            self.variables[v.name] = v
        self.edges: list[tuple[str, str]] = []
        self._parents: dict[str, list[str]] = {n: [] for n in self.variables}
        self._children: dict[str, list[str]] = {n: [] for n in self.variables}
        seen = set()
        for parent, child in edges:
            for endpoint in (parent, child):
                if endpoint not in self.variables:
                    raise SchemaError(f"edge endpoint {endpoint!r} is not a declared variable")
            if parent == child:
                raise CycleError(f"self-loop on {parent!r}")
            if (parent, child) in seen:
                raise SchemaError(f"duplicate edge {parent!r} -> {child!r}")
            seen.add((parent, child))
            self.edges.append((parent, child))
            self._parents[child].append(parent)
            self._children[parent].append(child)

    def parents(self, name: str) -> tuple[Variable, ...]:
        return tuple(self.variables[p] for p in self._parents[name])

    def children(self, name: str) -> tuple[Variable, ...]:
        return tuple(self.variables[c] for c in self._children[name])

    def parent_names(self, name: str) -> tuple[str, ...]:
        return tuple(self._parents[name])

    def ancestors_of(self, name: str) -> set[str]:
        out: set[str] = set()
        stack = list(self._parents[name])
        while stack:
            cur = stack.pop()
            if cur not in out:
                out.add(cur)
                stack.extend(self._parents[cur])
        return out


def topological_sort(dag: Dag) -> list[str]:
    """Kahn's algorithm; among ready nodes the lexicographically smallest
    name goes first, so the order is a pure function of the graph.
    Raises CycleError when a directed cycle exists."""
    indegree = {n: len(dag._parents[n]) for n in dag.variables}
    ready: list[str] = []
    for n, d in indegree.items():
        if d == 0:
            heappush(ready, n)
    order: list[str] = []
    while ready:
        n = heappop(ready)
        order.append(n)
        for c in dag._children[n]:
            indegree[c] -= 1
            if indegree[c] == 0:
                heappush(ready, c)
    if len(order) != len(dag.variables):
        stuck = sorted(n for n, d in indegree.items() if d > 0)
        raise CycleError(f"directed cycle among {stuck}")
    return order


class Factor:
    """A non-negative table over an ordered scope of variables.

    values has one axis per scope variable, in scope order (C layout).
    Factors are immutable; every operation returns a new Factor.
    """

    __slots__ = ("scope", "values")

    def __init__(self, scope: Sequence[Variable], values):
        scope = tuple(scope)
        names = [v.name for v in scope]
        if len(set(names)) != len(names):
            raise SchemaError(f"factor scope repeats a variable: {names}")
        arr = np.asarray(values, dtype=np.float64)
        expected = tuple(v.cardinality for v in scope)
        if arr.shape != expected:
            raise SchemaError(f"factor shape {arr.shape} does not match scope cards {expected}")
        if not np.all(np.isfinite(arr)):
            raise SchemaError("factor entries must be finite")
        if np.any(arr < 0):
            raise SchemaError("factor entries must be non-negative")
        # ascontiguousarray promotes 0-d to 1-d; force the declared shape back
        arr = np.ascontiguousarray(arr).reshape(expected)
        arr.setflags(write=False)
        self.scope = scope
        self.values = arr

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(v.name for v in self.scope)

    def _aligned(self, union: Sequence[Variable]) -> np.ndarray:
        # Broadcastable view of self.values with axes in `union` order.
        pos = {v.name: i for i, v in enumerate(self.scope)}
        perm = [pos[v.name] for v in union if v.name in pos]
        arr = np.transpose(self.values, perm)
        shape = tuple(v.cardinality if v.name in pos else 1 for v in union)
        return arr.reshape(shape)

    def multiply(self, other: "Factor") -> "Factor":
        mine = set(self.names)
        union = list(self.scope) + [v for v in other.scope if v.name not in mine]
        return Factor(union, self._aligned(union) * other._aligned(union))

    def sum_out(self, name: str) -> "Factor":
        axis = self.names.index(name)
        return Factor(
            self.scope[:axis] + self.scope[axis + 1 :], self.values.sum(axis=axis)
        )

    def reduce(self, evidence: Evidence) -> "Factor":
        """Slice the table at the evidenced states, dropping those axes."""
        keep: list[Variable] = []
        index: list = []
        touched = False
        for v in self.scope:
            if v.name in evidence:
                index.append(v.index_of(evidence[v.name]))
                touched = True
            else:
                index.append(slice(None))
                keep.append(v)
        if not touched:
            return self
        return Factor(keep, self.values[tuple(index)])

    def permuted(self, names: Sequence[str]) -> "Factor":
        if tuple(names) == self.names:
            return self
        if set(names) != set(self.names):
            raise SchemaError(f"cannot permute scope {self.names} to {tuple(names)}")
        pos = {v.name: i for i, v in enumerate(self.scope)}
        perm = [pos[n] for n in names]
        return Factor([self.scope[i] for i in perm], np.transpose(self.values, perm))

    def normalized(self) -> "Factor":
        total = math.fsum(self.values.flat)
        if total == 0.0:
            raise ZeroEvidenceError("factor has zero total mass")
        return Factor(self.scope, self.values / total)

    def get(self, assignment: Mapping[str, str]) -> float:
        idx = tuple(v.index_of(assignment[v.name]) for v in self.scope)
        return float(self.values[idx])

    def total(self) -> float:
        return math.fsum(self.values.flat)


@dataclass(frozen=True)
class Cpt:
    """P(child | parents) as a factor with scope parents + (child,).

    Every parent-configuration row sums to one within ROW_SUM_TOL.
    """

    child: Variable
    parents: tuple[Variable, ...]
    factor: Factor

    def __post_init__(self):
        object.__setattr__(self, "parents", tuple(self.parents))
        expected = self.parents + (self.child,)
        if self.factor.scope != expected:
            raise SchemaError(
                f"CPT factor scope {self.factor.names} must be parents then child "
                f"({[v.name for v in expected]})"
            )
        rows = self.factor.values.sum(axis=-1)
        if not np.allclose(rows, 1.0, rtol=0.0, atol=ROW_SUM_TOL):
            worst = float(np.max(np.abs(rows - 1.0)))
            raise SchemaError(
                f"CPT rows for {self.child.name!r} must sum to 1 (worst deviation {worst:.3g})"
            )

    @classmethod
    def from_array(cls, child: Variable, parents: Sequence[Variable], values) -> "Cpt":
        parents = tuple(parents)
        return cls(child, parents, Factor(parents + (child,), values))


class BayesNet:
    """An immutable pairing of a Dag with one CPT per variable."""

    def __init__(self, dag: Dag, cpts: Iterable[Cpt]):
        self.dag = dag
        self.cpts: dict[str, Cpt] = {}
        for cpt in cpts:
            name = cpt.child.name
            if name in self.cpts:
                raise SchemaError(f"two CPTs for {name!r}")
            if name not in dag.variables or dag.variables[name] != cpt.child:
                raise SchemaError(f"CPT child {name!r} does not match a declared variable")
            if cpt.parents != dag.parents(name):
                raise SchemaError(
                    f"CPT parents for {name!r} must match DAG parents in declaration order"
                )
            self.cpts[name] = cpt
        missing = sorted(set(dag.variables) - set(self.cpts))
        if missing:
            raise SchemaError(f"missing CPTs for {missing}")
        self.topo_order = topological_sort(dag)

    @property
    def variables(self) -> dict[str, Variable]:
        return self.dag.variables

    def replace_cpts(self, replacements: Mapping[str, Cpt]) -> "BayesNet":
        merged = [replacements.get(name, cpt) for name, cpt in self.cpts.items()]
        return BayesNet(self.dag, merged)


def _check_evidence(net: BayesNet, evidence: Evidence) -> None:
    for name, state in evidence.items():
        if name not in net.variables:
            raise SchemaError(f"evidence variable {name!r} is not in the network")
        net.variables[name].index_of(state)


def _min_fill_order(scopes: list[tuple[str, ...]], to_eliminate: set[str]) -> list[str]:
    adj: dict[str, set[str]] = {}
    for sc in scopes:
        for a in sc:
            adj.setdefault(a, set())
            for b in sc:
                if a != b:
                    adj[a].add(b)
    for v in to_eliminate:
        adj.setdefault(v, set())
    order: list[str] = []
    remaining = set(to_eliminate)
    while remaining:
        best_fill = None
        best_name = None
        for v in sorted(remaining):
            nb = sorted(adj[v])
            fill = sum(1 for a, b in combinations(nb, 2) if b not in adj[a])
            if best_fill is None or fill < best_fill:
                best_fill, best_name = fill, v
        v = best_name
        nb = adj.pop(v)
        for a in nb:
            adj[a] |= nb - {a}
            adj[a].discard(v)
        order.append(v)
        remaining.remove(v)
    return order


def _eliminate(factors: list[Factor], order: Sequence[str]) -> list[Factor]:
    factors = list(factors)
    for name in order:
        bucket = [f for f in factors if name in f.names]
        factors = [f for f in factors if name not in f.names]
        if not bucket:
            continue
        prod = bucket[0]
        for f in bucket[1:]:
            prod = prod.multiply(f)
        factors.append(prod.sum_out(name))
    return factors


def _product(factors: list[Factor]) -> Factor:
    if not factors:
        return Factor((), np.float64(1.0))
    prod = factors[0]
    for f in factors[1:]:
        prod = prod.multiply(f)
    return prod


def variable_elimination(
    net: BayesNet,
    targets: Sequence[str],
    evidence: Evidence | None = None,
    _order: Sequence[str] | None = None,
) -> Factor:
    """Normalized posterior P(targets | evidence) as a Factor whose scope
    follows the order of `targets`.

    Raises ZeroEvidenceError when the evidence has probability exactly
    zero, SchemaError on unknown names or states, ValueError when targets
    and evidence overlap. `_order` forces an elimination order (testing).
    """
    evidence = dict(evidence or {})
    targets = list(targets)
    if not targets:
        raise ValueError("at least one target variable is required")
    if len(set(targets)) != len(targets):
        raise ValueError(f"duplicate targets: {targets}")
    for t in targets:
        if t not in net.variables:
            raise SchemaError(f"target variable {t!r} is not in the network")
    overlap = set(targets) & set(evidence)
    if overlap:
        raise ValueError(f"targets and evidence overlap on {sorted(overlap)}")
    _check_evidence(net, evidence)

    factors = [cpt.factor.reduce(evidence) for cpt in net.cpts.values()]
    to_eliminate = set(net.variables) - set(targets) - set(evidence)
    if _order is not None:
        if set(_order) != to_eliminate:
            raise ValueError("forced order must cover exactly the eliminated variables")
        order = list(_order)
    else:
        order = _min_fill_order([f.names for f in factors], to_eliminate)
    remaining = _eliminate(factors, order)
    joint = _product(remaining).permuted(targets)
    try:
        return joint.normalized()
    except ZeroEvidenceError:
        raise ZeroEvidenceError(
            f"conditioning event has probability zero: {evidence}"
        ) from None


def event_has_support(net: BayesNet, evidence: Evidence) -> bool:
    """Exact structural test: does any joint assignment consistent with
    the evidence carry positive probability? Runs the elimination on 0/1
    indicator tables, so no rounding is involved."""
    _check_evidence(net, evidence)
    factors = [
        Factor(f.scope, (f.values > 0.0).astype(np.float64))
        for f in (cpt.factor.reduce(evidence) for cpt in net.cpts.values())
    ]
    order = _min_fill_order([f.names for f in factors], set(net.variables) - set(evidence))
    remaining = _eliminate(factors, order)
    return _product(remaining).total() > 0.0


def mle_cpts(dag: Dag, data: "Dataset") -> BayesNet:
    """Maximum-likelihood CPTs from fully observed weighted records.

    Each row of a CPT is the observed conditional frequency; a parent
    configuration that never occurs gets a uniform row. No smoothing.
    Raises SchemaError when a DAG variable is missing from the data, a
    data label falls outside its declared domain, or the data carries no
    weight at all.
    """
    if data.total_weight == 0:
        raise SchemaError("CPT estimation needs positive total weight")
    aligned = data.align_to(list(dag.variables.values()))
    pos = {v.name: i for i, v in enumerate(aligned.schema)}
    weights = np.asarray(aligned.weights, dtype=np.float64)
    cpts = []
    for name, var in dag.variables.items():
        parents = dag.parents(name)
        shape = tuple(p.cardinality for p in parents) + (var.cardinality,)
        counts = np.zeros(shape, dtype=np.float64)
        idx = tuple(aligned.assignments[:, pos[p.name]] for p in parents) + (
            aligned.assignments[:, pos[name]],
        )
        np.add.at(counts, idx, weights)
        totals = counts.sum(axis=-1, keepdims=True)
        probs = np.empty_like(counts)
        unseen = totals == 0.0
        with np.errstate(invalid="ignore", divide="ignore"):
            np.divide(counts, totals, out=probs)
        if np.any(unseen):
            probs = np.where(unseen, 1.0 / var.cardinality, probs)
        cpts.append(Cpt.from_array(var, parents, probs))
    return BayesNet(dag, cpts)


def log_likelihood(net: BayesNet, data: "Dataset") -> float:
    """Sum of weighted record log-probabilities under the network.

    Returns -inf when any positive-weight record has probability zero.
    Pure function of its arguments; the fsum accumulation makes repeated
    calls bit-identical.
    """
    aligned = data.align_to(list(net.variables.values()))
    pos = {v.name: i for i, v in enumerate(aligned.schema)}
    weights = np.asarray(aligned.weights, dtype=np.float64)
    n = len(weights)
    if n == 0:
        return 0.0
    row_prob = np.ones(n, dtype=np.float64)
    log_terms = np.zeros(n, dtype=np.float64)
    for name, cpt in net.cpts.items():
        idx = tuple(aligned.assignments[:, pos[p.name]] for p in cpt.parents) + (
            aligned.assignments[:, pos[name]],
        )
        probs = cpt.factor.values[idx]
        row_prob *= (probs > 0.0).astype(np.float64)
        log_terms += np.log(np.where(probs > 0.0, probs, 1.0))
    active = weights > 0.0
    if np.any(active & (row_prob == 0.0)):
        return float("-inf")
    return math.fsum(float(w) * float(lp) for w, lp in zip(weights[active], log_terms[active]))
