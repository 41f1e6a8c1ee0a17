"""Structural causal models over discrete variables.

An Scm pairs one structural equation per endogenous variable with
optional priors over the exogenous variables. Equations are total
deterministic tables.

Canonical construction gives every endogenous variable X a single fresh
exogenous parent whose states enumerate all functions from X's parent
configurations to X's states. The enumeration convention, used for
equation tables everywhere in this package:

  * parent configurations are ordered with the FIRST declared parent
    cycling fastest (config index c = sum_i idx_i * prod(cards[:i]));
  * exogenous state k (0-based) encodes the function whose output digits
    spell k in base |X|, most significant digit at config 0.

So for a binary child the first exogenous state is the constant function
to state 0, the last is the constant function to state 1, and the output
row for config c flips with period |X|^(n_configs - c) down the
exogenous states.
"""

from __future__ import annotations

import enum
from collections.abc import Collection, Mapping, Sequence
from dataclasses import dataclass

import numpy as np

from .errors import (
    CardinalityOverflow,
    CycleError,
    MissingPriorError,
    SchemaError,
)
from .pgm import ROW_SUM_TOL, BayesNet, Cpt, Dag, Factor, Variable, topological_sort

DEFAULT_GUARD = 2**20


class MarkovClass(enum.Enum):
    MARKOVIAN = "Markovian"
    SEMI_MARKOVIAN = "SemiMarkovian"
    NON_MARKOVIAN = "NonMarkovian"


@dataclass(frozen=True)
class StructuralEquation:
    """child = f(endo_parents, exo_parent) as a total lookup table.

    mapping has shape (exo cardinality, n parent configs) of child state
    indices; configs follow the canonical enumeration above. exo_parent
    is None only for the parentless constant equations that interventions
    install, in which case mapping has a single row.
    """

    child: Variable
    endo_parents: tuple[Variable, ...]
    exo_parent: Variable | None
    mapping: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "endo_parents", tuple(self.endo_parents))
        arr = np.asarray(self.mapping)
        if arr.dtype.kind not in "iu":
            raise SchemaError(f"equation table for {self.child.name!r} must hold state indices")
        rows = self.exo_parent.cardinality if self.exo_parent is not None else 1
        expected = (rows, self.n_configs)
        if arr.shape != expected:
            raise SchemaError(
                f"equation table for {self.child.name!r} has shape {arr.shape}, expected {expected}"
            )
        if arr.size and (arr.min() < 0 or arr.max() >= self.child.cardinality):
            raise SchemaError(
                f"equation table for {self.child.name!r} maps outside the child domain"
            )
        arr = np.ascontiguousarray(arr)
        arr.setflags(write=False)
        object.__setattr__(self, "mapping", arr)
        names = [v.name for v in self.endo_parents]
        if self.exo_parent is not None:
            names.append(self.exo_parent.name)
        names.append(self.child.name)
        if len(set(names)) != len(names):
            raise SchemaError(f"equation for {self.child.name!r} repeats a variable")

    @property
    def n_configs(self) -> int:
        n = 1
        for p in self.endo_parents:
            n *= p.cardinality
        return n

    def config_index(self, parent_states: Sequence[int]) -> int:
        if len(parent_states) != len(self.endo_parents):
            raise SchemaError(
                f"equation for {self.child.name!r} takes {len(self.endo_parents)} parents"
            )
        idx = 0
        stride = 1
        for value, parent in zip(parent_states, self.endo_parents):
            if not 0 <= value < parent.cardinality:
                raise SchemaError(f"parent state index {value} out of range for {parent.name!r}")
            idx += value * stride
            stride *= parent.cardinality
        return idx

    def parent_configs(self):
        """All parent index tuples in canonical (first parent fastest) order."""
        for c in range(self.n_configs):
            out = []
            rem = c
            for p in self.endo_parents:
                out.append(rem % p.cardinality)
                rem //= p.cardinality
            yield tuple(out)

    def evaluate(self, exo_state: int, parent_states: Sequence[int]) -> int:
        row = exo_state if self.exo_parent is not None else 0
        return int(self.mapping[row, self.config_index(parent_states)])


class Scm:
    """Equations plus optional exogenous priors.

    Endogenous order is the equation declaration order; exogenous order is
    first appearance across equations. The induced endogenous graph must
    be acyclic. Priors may cover any subset of the exogenous variables;
    operations that need them all raise MissingPriorError.
    """

    def __init__(
        self,
        equations: Sequence[StructuralEquation],
        priors: Mapping[str, Sequence[float]] | None = None,
    ):
        self.equations: dict[str, StructuralEquation] = {}
        endo: dict[str, Variable] = {}
        exo: dict[str, Variable] = {}
        for eq in equations:
            if eq.child.name in self.equations:
                raise SchemaError(f"two equations for {eq.child.name!r}")
            self.equations[eq.child.name] = eq
            endo[eq.child.name] = eq.child
        for eq in equations:
            for p in eq.endo_parents:
                if p.name not in endo:
                    raise SchemaError(
                        f"parent {p.name!r} of {eq.child.name!r} has no equation of its own"
                    )
                if endo[p.name] != p:
                    raise SchemaError(f"conflicting declarations of variable {p.name!r}")
            u = eq.exo_parent
            if u is not None:
                if u.name in endo:
                    raise SchemaError(f"{u.name!r} is both endogenous and exogenous")
                if u.name in exo and exo[u.name] != u:
                    raise SchemaError(f"conflicting declarations of exogenous {u.name!r}")
                exo[u.name] = u
        self.endogenous: tuple[Variable, ...] = tuple(endo.values())
        self.exogenous: tuple[Variable, ...] = tuple(exo.values())

        self.endo_dag = Dag(
            self.endogenous,
            [
                (p.name, eq.child.name)
                for eq in self.equations.values()
                for p in eq.endo_parents
            ],
        )
        self.topo_order: list[str] = topological_sort(self.endo_dag)

        self.priors: dict[str, np.ndarray] = {}
        for name, prior in dict(priors or {}).items():
            if name not in exo:
                raise SchemaError(f"prior given for unknown exogenous variable {name!r}")
            arr = np.asarray(prior, dtype=np.float64)
            if arr.shape != (exo[name].cardinality,):
                raise SchemaError(
                    f"prior for {name!r} has length {arr.size}, variable has "
                    f"{exo[name].cardinality} states"
                )
            if not np.all(np.isfinite(arr)) or np.any(arr < 0):
                raise SchemaError(f"prior for {name!r} must be non-negative and finite")
            if abs(float(arr.sum()) - 1.0) > ROW_SUM_TOL:
                raise SchemaError(f"prior for {name!r} sums to {float(arr.sum())}, not 1")
            arr = np.ascontiguousarray(arr)
            arr.setflags(write=False)
            self.priors[name] = arr

    @property
    def has_priors(self) -> bool:
        return all(u.name in self.priors for u in self.exogenous)

    def missing_priors(self) -> list[str]:
        return [u.name for u in self.exogenous if u.name not in self.priors]

    def exo_children(self, name: str) -> list[str]:
        return [
            eq.child.name
            for eq in self.equations.values()
            if eq.exo_parent is not None and eq.exo_parent.name == name
        ]

    def with_priors(self, priors: Mapping[str, Sequence[float]]) -> "Scm":
        return Scm(list(self.equations.values()), priors)


def canonical_cardinality(
    child_card: int, parent_cards: Sequence[int], guard: int = DEFAULT_GUARD, child: str = "?"
) -> int:
    """|child domain| ** (number of parent configurations), guarded.

    Raises CardinalityOverflow when the result would exceed `guard`. The
    ordering of parent_cards never matters.
    """
    if child_card < 1:
        raise SchemaError("child cardinality must be at least 1")
    if guard < 1:
        raise SchemaError("guard must be at least 1")
    n_configs = 1
    for c in parent_cards:
        if c < 1:
            raise SchemaError("parent cardinalities must be at least 1")
        n_configs *= c
    if child_card == 1:
        return 1
    expr = f"{child_card}^{n_configs}"
    # Cheap lower bound on log2(size) avoids materializing absurd integers.
    log2_lower = (child_card.bit_length() - 1) * n_configs
    if log2_lower > 2_000_000 and guard.bit_length() <= log2_lower:
        raise CardinalityOverflow(child, None, guard, size_expr=expr)
    size = child_card**n_configs
    if size > guard:
        raise CardinalityOverflow(child, size, guard, size_expr=expr)
    return size


def _fresh_exo_name(child: str, taken: Collection[str]) -> str:
    name = f"U_{child}"
    while name in taken:
        name = "_" + name
    return name


def build_canonical_scm(dag: Dag, guard: int = DEFAULT_GUARD) -> Scm:
    """Canonical Scm for an endogenous DAG: one fresh exogenous parent per
    node, enumerating every function from parent configurations to the
    node's states. Priors are left unset. Raises CycleError on a cyclic
    graph and CardinalityOverflow via the guard."""
    topological_sort(dag)
    taken = set(dag.variables)
    equations = []
    for name, var in dag.variables.items():
        parents = dag.parents(name)
        exo_card = canonical_cardinality(
            var.cardinality, [p.cardinality for p in parents], guard, child=name
        )
        exo_name = _fresh_exo_name(name, taken)
        taken.add(exo_name)
        exo = Variable(exo_name, tuple(f"u{i + 1}" for i in range(exo_card)))
        n_configs = 1
        for p in parents:
            n_configs *= p.cardinality
        # mapping[u, c] = digit c of u, base |child|, most significant first
        powers = np.array(
            [var.cardinality ** (n_configs - 1 - c) for c in range(n_configs)], dtype=np.int64
        )
        digits = (np.arange(exo_card, dtype=np.int64)[:, None] // powers[None, :]) % var.cardinality
        dtype = np.min_scalar_type(max(var.cardinality - 1, 1))
        equations.append(StructuralEquation(var, parents, exo, digits.astype(dtype)))
    return Scm(equations)


def se_to_cpt(eq: StructuralEquation) -> Cpt:
    """Degenerate CPT for one equation: parents are the endogenous parents
    then the exogenous parent; each row is a point mass on the equation's
    output."""
    parents = eq.endo_parents + ((eq.exo_parent,) if eq.exo_parent is not None else ())
    shape = tuple(p.cardinality for p in parents) + (eq.child.cardinality,)
    values = np.zeros(shape, dtype=np.float64)
    exo_card = eq.mapping.shape[0]
    c_idx = np.repeat(np.arange(eq.n_configs), exo_card)
    u_idx = np.tile(np.arange(exo_card), eq.n_configs)
    index: list[np.ndarray] = []
    rem = c_idx
    for p in eq.endo_parents:
        index.append(rem % p.cardinality)
        rem = rem // p.cardinality
    if eq.exo_parent is not None:
        index.append(u_idx)
    index.append(np.asarray(eq.mapping[u_idx, c_idx], dtype=np.int64))
    values[tuple(index)] = 1.0
    return Cpt.from_array(eq.child, parents, values)


def classify(scm: Scm) -> MarkovClass:
    """Markovian when every exogenous variable drives exactly one
    endogenous variable, SemiMarkovian when one drives several. The
    NonMarkovian case (dependence among exogenous variables) cannot be
    expressed by an Scm and only arises in raw graphs, see
    classify_graph."""
    for u in scm.exogenous:
        if len(scm.exo_children(u.name)) > 1:
            return MarkovClass.SEMI_MARKOVIAN
    return MarkovClass.MARKOVIAN


def classify_graph(dag: Dag, exogenous: Collection[str]) -> MarkovClass:
    """Classify a raw causal graph whose nodes are split into endogenous
    and exogenous sets. Any edge into an exogenous node, or two exogenous
    parents on one endogenous node, breaks the independence the
    Markovian and SemiMarkovian classes require."""
    exo = set(exogenous)
    for name in exo:
        if name not in dag.variables:
            raise SchemaError(f"exogenous name {name!r} is not a graph node")
    for parent, child in dag.edges:
        if child in exo:
            return MarkovClass.NON_MARKOVIAN
    children_of_exo: dict[str, int] = {name: 0 for name in exo}
    for name in dag.variables:
        if name in exo:
            continue
        exo_parents = [p for p in dag.parent_names(name) if p in exo]
        if len(exo_parents) > 1:
            return MarkovClass.NON_MARKOVIAN
        for p in exo_parents:
            children_of_exo[p] += 1
    if any(n > 1 for n in children_of_exo.values()):
        return MarkovClass.SEMI_MARKOVIAN
    return MarkovClass.MARKOVIAN


def scm_to_bn(scm: Scm) -> BayesNet:
    """Compile to a Bayesian network: priors become parentless CPTs,
    equations become 0/1 CPTs. Raises MissingPriorError when any
    exogenous prior is absent."""
    missing = scm.missing_priors()
    if missing:
        raise MissingPriorError(f"no priors for {missing}")
    variables = list(scm.exogenous) + list(scm.endogenous)
    edges = []
    for var in scm.endogenous:
        eq = scm.equations[var.name]
        for p in eq.endo_parents:
            edges.append((p.name, var.name))
        if eq.exo_parent is not None:
            edges.append((eq.exo_parent.name, var.name))
    dag = Dag(variables, edges)
    cpts = [
        Cpt.from_array(u, (), scm.priors[u.name]) for u in scm.exogenous
    ]
    cpts.extend(se_to_cpt(scm.equations[v.name]) for v in scm.endogenous)
    return BayesNet(dag, cpts)
