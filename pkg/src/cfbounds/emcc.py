"""Expectation-maximization over exogenous priors, with restarts.

The endogenous records are fully observed, so the incomplete-data
log-likelihood splits into one additive term per exogenous variable U:
each record r constrains U to the states whose equation outputs match r
on U's children (a 0/1 consistency mask), and the term is
log(mask_r . theta_U). The E-step posterior is the masked, renormalized
prior; the M-step is the weight-averaged posterior. Each restart draws
its starting point from a flat Dirichlet, floored and renormalized so
every log is finite.

A restart stops when the absolute log-likelihood change drops below the
tolerance or the iteration cap is reached. Every run ends with a finite
log-likelihood either way, and all finite runs feed the intervals: the
cap, not the tolerance, is the hard stop. Runs are deterministic given
(model, data, seed, config), whether executed serially or in a process
pool, and are reported in seed order.
"""

from __future__ import annotations

import math
from collections.abc import Sequence
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import partial

import numpy as np

from .counterfactual import CausalQuery, PreparedQuery
from .data import Dataset
from .errors import EmDegenerateError, NoConvergedRunsError, SchemaError, UndefinedQuery
from .scm import Scm


@dataclass(frozen=True)
class EmConfig:
    runs: int = 100
    max_iterations: int = 300
    tolerance: float = 1e-6
    base_seed: int = 0
    min_probability_floor: float = 1e-9
    workers: int = 1

    def __post_init__(self):
        if self.runs < 1:
            raise SchemaError("runs must be at least 1")
        if self.max_iterations < 1:
            raise SchemaError("max_iterations must be at least 1")
        if not self.tolerance > 0.0:
            raise SchemaError("tolerance must be positive")
        if self.base_seed < 0:
            raise SchemaError("base_seed must be non-negative")
        if not 0.0 < self.min_probability_floor < 1.0:
            raise SchemaError("min_probability_floor must be in (0, 1)")
        if self.workers < 1:
            raise SchemaError("workers must be at least 1")


@dataclass(frozen=True)
class EmRunResult:
    seed: int
    converged: bool
    iterations: int
    log_likelihood: float
    trajectory: tuple[float, ...]
    priors: dict[str, np.ndarray]


@dataclass(frozen=True)
class IntervalEstimate:
    """Per-query min/max over the values the restarts reached. Runs where
    the query was undefined under the fitted priors are counted in
    n_undefined and excluded from the interval."""

    query: CausalQuery
    lower: float
    upper: float
    values: tuple[float, ...]
    n_runs: int
    n_converged: int
    n_undefined: int

    @property
    def width(self) -> float:
        return self.upper - self.lower

    @property
    def mean(self) -> float:
        return math.fsum(self.values) / len(self.values)


@dataclass(frozen=True)
class EmccResult:
    """intervals are query-aligned; per_run_values is runs x queries with
    None where a run left a query undefined."""

    intervals: tuple[IntervalEstimate, ...]
    runs: tuple[EmRunResult, ...]
    per_run_values: tuple[tuple[float | None, ...], ...]
    config: EmConfig


class _EmProblem:
    """Masks and weights precomputed once per (model, data) pair."""

    def __init__(self, exo_names, cards, masks, weights):
        self.exo_names: list[str] = exo_names
        self.cards: list[int] = cards
        self.masks: list[np.ndarray] = masks
        self.weights: np.ndarray = weights
        self.total_weight: float = float(weights.sum())

    @classmethod
    def build(cls, scm: Scm, data: Dataset) -> "_EmProblem":
        agg = data.align_to(list(scm.endogenous)).aggregated()
        if agg.total_weight == 0:
            raise SchemaError("learning needs positive total weight")
        pos = {v.name: j for j, v in enumerate(scm.endogenous)}
        rows = agg.assignments
        weights = np.asarray(agg.weights, dtype=np.float64)

        # Parentless-in-the-exogenous-sense equations (post-intervention
        # constants) admit no latitude: a mismatching record has zero
        # probability under every prior.
        for name, eq in scm.equations.items():
            if eq.exo_parent is not None:
                continue
            config = np.zeros(rows.shape[0], dtype=np.int64)
            stride = 1
            for p in eq.endo_parents:
                config += rows[:, pos[p.name]] * stride
                stride *= p.cardinality
            produced = np.asarray(eq.mapping[0, config], dtype=np.int64)
            bad = np.nonzero((produced != rows[:, pos[name]]) & (weights > 0))[0]
            if bad.size:
                r = int(bad[0])
                raise EmDegenerateError(
                    f"record {dict(zip([v.name for v in scm.endogenous], rows[r].tolist()))} "
                    f"contradicts the fixed equation for {name!r}"
                )

        exo_names = []
        cards = []
        masks = []
        for u in scm.exogenous:
            mask = np.ones((rows.shape[0], u.cardinality), dtype=np.float64)
            for child in scm.exo_children(u.name):
                eq = scm.equations[child]
                config = np.zeros(rows.shape[0], dtype=np.int64)
                stride = 1
                for p in eq.endo_parents:
                    config += rows[:, pos[p.name]] * stride
                    stride *= p.cardinality
                outputs = np.asarray(eq.mapping[:, config], dtype=np.int64)  # (card, R)
                mask *= (outputs.T == rows[:, pos[child]][:, None]).astype(np.float64)
            dead = np.nonzero((mask.sum(axis=1) == 0.0) & (weights > 0))[0]
            if dead.size:
                r = int(dead[0])
                raise EmDegenerateError(
                    f"record {dict(zip([v.name for v in scm.endogenous], rows[r].tolist()))} "
                    f"is impossible for every state of {u.name!r}"
                )
            exo_names.append(u.name)
            cards.append(u.cardinality)
            masks.append(mask)
        return cls(exo_names, cards, masks, weights)

    def initial_thetas(self, rng: np.random.Generator, floor: float) -> list[np.ndarray]:
        thetas = []
        for card in self.cards:
            theta = rng.dirichlet(np.ones(card))
            theta = np.maximum(theta, floor)
            thetas.append(theta / theta.sum())
        return thetas

    def support_sums(self, thetas: Sequence[np.ndarray]) -> list[np.ndarray]:
        return [(m * t[None, :]).sum(axis=1) for m, t in zip(self.masks, thetas)]

    def log_likelihood(self, sums: Sequence[np.ndarray]) -> float:
        return math.fsum(float((self.weights * np.log(s)).sum()) for s in sums)


def _fit(problem: _EmProblem, seed: int, config: EmConfig) -> EmRunResult:
    rng = np.random.default_rng(seed)
    thetas = problem.initial_thetas(rng, config.min_probability_floor)
    sums = problem.support_sums(thetas)
    trajectory = [problem.log_likelihood(sums)]
    converged = False
    iterations = 0
    w = problem.weights
    total = problem.total_weight
    for it in range(1, config.max_iterations + 1):
        for i, mask in enumerate(problem.masks):
            column = ((w / sums[i])[:, None] * mask).sum(axis=0)
            theta = thetas[i] * column / total
            thetas[i] = theta / theta.sum()
        sums = problem.support_sums(thetas)
        trajectory.append(problem.log_likelihood(sums))
        iterations = it
        if abs(trajectory[-1] - trajectory[-2]) < config.tolerance:
            converged = True
            break
    priors = {}
    for name, theta in zip(problem.exo_names, thetas):
        arr = np.ascontiguousarray(theta)
        arr.setflags(write=False)
        priors[name] = arr
    return EmRunResult(
        seed=seed,
        converged=converged,
        iterations=iterations,
        log_likelihood=trajectory[-1],
        trajectory=tuple(trajectory),
        priors=priors,
    )


def em_fit(scm: Scm, data: Dataset, seed: int, config: EmConfig | None = None) -> EmRunResult:
    """One EM run from the Dirichlet start drawn with `seed`. The model's
    own priors, if any, are ignored: learning always starts fresh."""
    config = config or EmConfig()
    return _fit(_EmProblem.build(scm, data), seed, config)


def _bounds_worker(problem, prepared, config, seed):
    run = _fit(problem, seed, config)
    values = []
    for pq in prepared:
        try:
            values.append(pq.evaluate_with_priors(run.priors))
        except UndefinedQuery:
            values.append(None)
    return run, values


def emcc_bounds(
    scm: Scm,
    data: Dataset,
    queries: Sequence[CausalQuery],
    config: EmConfig | None = None,
) -> EmccResult:
    """config.runs independent EM fits with seeds base_seed + run index,
    each query evaluated under each fitted set of priors, intervals the
    per-query min and max over runs with a finite log-likelihood.

    Deterministic for fixed inputs regardless of `workers`. Raises
    UndefinedQuery if some query is undefined under every run's priors,
    EmDegenerateError when the data cannot arise from the model at all,
    and NoConvergedRunsError when no run reaches a finite likelihood.
    """
    config = config or EmConfig()
    problem = _EmProblem.build(scm, data)
    prepared = [PreparedQuery(scm, q) for q in queries]
    seeds = [config.base_seed + i for i in range(config.runs)]
    worker = partial(_bounds_worker, problem, prepared, config)
    if config.workers > 1 and config.runs > 1:
        chunk = max(1, math.ceil(config.runs / (config.workers * 4)))
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            outcomes = list(pool.map(worker, seeds, chunksize=chunk))
    else:
        outcomes = [worker(s) for s in seeds]

    runs = tuple(run for run, _ in outcomes)
    usable = [i for i, run in enumerate(runs) if math.isfinite(run.log_likelihood)]
    if not usable:
        raise NoConvergedRunsError(
            f"none of {config.runs} runs reached a finite log-likelihood"
        )
    n_converged = sum(1 for run in runs if run.converged)
    intervals = []
    for j, query in enumerate(queries):
        values = tuple(
            outcomes[i][1][j] for i in usable if outcomes[i][1][j] is not None
        )
        undefined = len(usable) - len(values)
        if not values:
            raise UndefinedQuery(
                f"{query.kind.value} on ({query.cause}, {query.effect}) was undefined "
                f"in every run"
            )
        intervals.append(
            IntervalEstimate(
                query=query,
                lower=min(values),
                upper=max(values),
                values=values,
                n_runs=config.runs,
                n_converged=n_converged,
                n_undefined=undefined,
            )
        )
    return EmccResult(
        intervals=tuple(intervals),
        runs=runs,
        per_run_values=tuple(tuple(values) for _, values in outcomes),
        config=config,
    )
