"""Interventions, twin networks, and counterfactual query evaluation.

A twin network shares every exogenous variable across a real world and
any number of hypothetical worlds. Hypothetical copies carry prime-mark
suffixes on their names. Within an intervened world the intervened
variable loses all parents (exogenous included) and follows a constant
equation, so evidence in the real world and targets in hypothetical
worlds combine in one Bayesian network.

Query kinds and their twin formulations, for cause X with positive state
x and negative x', effect Y with positive y and negative y':

  CondDiff  P(y | x) - P(y | x'), purely observational
  ACE       P(y | do(x)) - P(y | do(x'))
  PN        P(Y_{x'} = y' | X = x, Y = y)
  PNrc      P(Y_{x} = y' | X = x', Y = y)
  PS        P(Y_{x} = y  | X = x', Y = y')
  PNS       P(Y_{x} = y, Y_{x'} = y')

Conditioning on an event of probability zero raises UndefinedQuery; the
check is an exact structural-support test, not a float comparison.
"""

from __future__ import annotations

import enum
import warnings
from collections.abc import Mapping, Sequence
from dataclasses import dataclass

import numpy as np

from .errors import MissingPriorError, SchemaError, UndefinedQuery
from .pgm import BayesNet, Cpt, Variable, event_has_support, variable_elimination
from .scm import Scm, StructuralEquation, scm_to_bn


class QueryKind(enum.Enum):
    COND_DIFF = "CondDiff"
    ACE = "ACE"
    PN = "PN"
    PNRC = "PNrc"
    PS = "PS"
    PNS = "PNS"


@dataclass(frozen=True)
class Intervention:
    """Force `variable` to the state labelled `value`."""

    variable: str
    value: str


@dataclass(frozen=True)
class CausalQuery:
    kind: QueryKind
    cause: str
    effect: str
    cause_positive: str
    cause_negative: str
    effect_positive: str
    effect_negative: str

    def __post_init__(self):
        if self.cause == self.effect:
            raise SchemaError("cause and effect must be distinct variables")
        if self.cause_positive == self.cause_negative:
            raise SchemaError(f"cause states for {self.cause!r} must be distinct")
        if self.effect_positive == self.effect_negative:
            raise SchemaError(f"effect states for {self.effect!r} must be distinct")


def _constant_equation(var: Variable, state: str) -> StructuralEquation:
    idx = var.index_of(state)
    return StructuralEquation(var, (), None, np.array([[idx]], dtype=np.int64))


def mutilate(scm: Scm, iv: Intervention) -> Scm:
    """The post-intervention model: the intervened variable becomes a
    parentless constant, everything else is untouched. An exogenous
    variable left without children is dropped along with its prior."""
    if iv.variable not in scm.equations:
        raise SchemaError(f"cannot intervene on {iv.variable!r}: not an endogenous variable")
    var = scm.equations[iv.variable].child
    equations = [
        _constant_equation(var, iv.value) if name == iv.variable else eq
        for name, eq in scm.equations.items()
    ]
    surviving = {
        eq.exo_parent.name for eq in equations if eq.exo_parent is not None
    }
    priors = {name: p for name, p in scm.priors.items() if name in surviving}
    return Scm(equations, priors)


def _renamed(var: Variable, label: str) -> Variable:
    return Variable(var.name + label, var.states)


@dataclass(frozen=True)
class TwinNetwork:
    """A base model joined with hypothetical copies of itself.

    worlds[0] is always the real world: empty intervention list, empty
    label, original names. scm is the combined model over all worlds,
    sharing the base exogenous variables.
    """

    base: Scm
    worlds: tuple[tuple[Intervention, ...], ...]
    labels: tuple[str, ...]
    scm: Scm

    def world_name(self, name: str, world: int) -> str:
        if name not in {v.name for v in self.base.endogenous}:
            raise SchemaError(f"{name!r} is not an endogenous variable of the base model")
        return name + self.labels[world]

    @property
    def net(self) -> BayesNet:
        return scm_to_bn(self.scm)


def build_twin(
    scm: Scm,
    interventions_per_world: Sequence[Sequence[Intervention]],
    labels: Sequence[str] | None = None,
) -> TwinNetwork:
    """Join the real world with one endogenous copy per entry of
    interventions_per_world, each copy intervened as listed. Copy k gets
    label "'" * k unless labels are given."""
    hypo = [tuple(world) for world in interventions_per_world]
    if labels is None:
        labels = ["'" * (k + 1) for k in range(len(hypo))]
    labels = list(labels)
    if len(labels) != len(hypo):
        raise SchemaError("one label per hypothetical world is required")
    if len(set(labels)) != len(labels) or "" in labels:
        raise SchemaError(f"world labels must be unique and non-empty: {labels}")
    for world in hypo:
        names = [iv.variable for iv in world]
        if len(set(names)) != len(names):
            raise SchemaError("a world intervenes twice on one variable")
        for iv in world:
            if iv.variable not in scm.equations:
                raise SchemaError(f"cannot intervene on {iv.variable!r}")
            scm.equations[iv.variable].child.index_of(iv.value)

    equations = list(scm.equations.values())
    for world, label in zip(hypo, labels):
        forced = {iv.variable: iv.value for iv in world}
        originals = {v.name: _renamed(v, label) for v in scm.endogenous}
        for name in scm.topo_order:
            eq = scm.equations[name]
            child = originals[name]
            if name in forced:
                equations.append(_constant_equation(child, forced[name]))
            else:
                equations.append(
                    StructuralEquation(
                        child,
                        tuple(originals[p.name] for p in eq.endo_parents),
                        eq.exo_parent,
                        eq.mapping,
                    )
                )
    twin = Scm(equations, dict(scm.priors))
    return TwinNetwork(
        base=scm,
        worlds=((),) + tuple(hypo),
        labels=("",) + tuple(labels),
        scm=twin,
    )


def _uniform_priors(scm: Scm) -> dict[str, np.ndarray]:
    return {
        u.name: np.full(u.cardinality, 1.0 / u.cardinality) for u in scm.exogenous
    }


class PreparedQuery:
    """A query compiled against a model's structure, reusable across
    different priors. emcc evaluates each query under a hundred learned
    priors; preparing once keeps that loop cheap."""

    def __init__(self, scm: Scm, query: CausalQuery):
        self.query = query
        endo = {v.name: v for v in scm.endogenous}
        for role, name in (("cause", query.cause), ("effect", query.effect)):
            if name not in endo:
                raise SchemaError(f"{role} {name!r} is not an endogenous variable")
        endo[query.cause].index_of(query.cause_positive)
        endo[query.cause].index_of(query.cause_negative)
        endo[query.effect].index_of(query.effect_positive)
        endo[query.effect].index_of(query.effect_negative)
        if query.cause not in scm.endo_dag.ancestors_of(query.effect):
            warnings.warn(
                f"{query.cause!r} is not an ancestor of {query.effect!r}; "
                f"{query.kind.value} will reflect that",
                stacklevel=3,
            )

        q = query
        base = scm if scm.has_priors else scm.with_priors(_uniform_priors(scm))
        self._nets: list[tuple[BayesNet, tuple[str, ...]]] = []

        def compile_scm(model: Scm) -> int:
            net = scm_to_bn(model)
            self._nets.append((net, tuple(u.name for u in model.exogenous)))
            return len(self._nets) - 1

        if q.kind is QueryKind.COND_DIFF:
            self._base_idx = compile_scm(base)
        elif q.kind is QueryKind.ACE:
            self._pos_idx = compile_scm(mutilate(base, Intervention(q.cause, q.cause_positive)))
            self._neg_idx = compile_scm(mutilate(base, Intervention(q.cause, q.cause_negative)))
        elif q.kind is QueryKind.PNS:
            twin = build_twin(
                base,
                [
                    [Intervention(q.cause, q.cause_positive)],
                    [Intervention(q.cause, q.cause_negative)],
                ],
            )
            self._twin_idx = compile_scm(twin.scm)
            self._targets = (twin.world_name(q.effect, 1), twin.world_name(q.effect, 2))
        else:
            do_state = q.cause_negative if q.kind is QueryKind.PN else q.cause_positive
            twin = build_twin(base, [[Intervention(q.cause, do_state)]])
            self._twin_idx = compile_scm(twin.scm)
            self._targets = (twin.world_name(q.effect, 1),)
            if q.kind is QueryKind.PN:
                self._evidence = {q.cause: q.cause_positive, q.effect: q.effect_positive}
                self._wanted = q.effect_negative
            elif q.kind is QueryKind.PNRC:
                self._evidence = {q.cause: q.cause_negative, q.effect: q.effect_positive}
                self._wanted = q.effect_negative
            else:  # PS
                self._evidence = {q.cause: q.cause_negative, q.effect: q.effect_negative}
                self._wanted = q.effect_positive

    def _resolved(self, idx: int, priors: Mapping[str, Sequence[float]]) -> BayesNet:
        net, exo_names = self._nets[idx]
        replacements = {}
        for name in exo_names:
            if name not in priors:
                raise MissingPriorError(f"no prior for {name!r}")
            replacements[name] = Cpt.from_array(net.variables[name], (), priors[name])
        return net.replace_cpts(replacements)

    def _conditional(
        self, net: BayesNet, target: str, state: str, evidence: Mapping[str, str]
    ) -> float:
        if evidence and not event_has_support(net, evidence):
            raise UndefinedQuery(
                f"{self.query.kind.value}: conditioning event {dict(evidence)} "
                f"has probability zero"
            )
        marginal = variable_elimination(net, [target], evidence)
        return marginal.get({target: state})

    def evaluate_with_priors(self, priors: Mapping[str, Sequence[float]]) -> float:
        q = self.query
        if q.kind is QueryKind.COND_DIFF:
            net = self._resolved(self._base_idx, priors)
            upper = self._conditional(
                net, q.effect, q.effect_positive, {q.cause: q.cause_positive}
            )
            lower = self._conditional(
                net, q.effect, q.effect_positive, {q.cause: q.cause_negative}
            )
            return upper - lower
        if q.kind is QueryKind.ACE:
            pos = self._conditional(
                self._resolved(self._pos_idx, priors), q.effect, q.effect_positive, {}
            )
            neg = self._conditional(
                self._resolved(self._neg_idx, priors), q.effect, q.effect_positive, {}
            )
            return pos - neg
        if q.kind is QueryKind.PNS:
            net = self._resolved(self._twin_idx, priors)
            joint = variable_elimination(net, list(self._targets))
            return joint.get(
                {
                    self._targets[0]: q.effect_positive,
                    self._targets[1]: q.effect_negative,
                }
            )
        net = self._resolved(self._twin_idx, priors)
        return self._conditional(net, self._targets[0], self._wanted, self._evidence)


def evaluate(scm: Scm, query: CausalQuery) -> float:
    """Evaluate one query exactly on a fully specified model via twin
    network variable elimination. Raises MissingPriorError without
    priors and UndefinedQuery on zero-probability conditioning."""
    if not scm.has_priors:
        raise MissingPriorError(f"no priors for {scm.missing_priors()}")
    return PreparedQuery(scm, query).evaluate_with_priors(scm.priors)
