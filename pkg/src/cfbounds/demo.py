"""The built-in land-use example: three binary variables in a chain of
confounding. M is mountainous terrain, I is immigration pressure, A is
agricultural use, with arcs M -> I, M -> A, I -> A.

Observed jointly, higher immigration goes with more agricultural use,
yet the association reverses inside both terrain strata; this is the
running demonstration for the replicate command and the reference model
for a good part of the test suite.

demo_scm carries a hand-rolled ten-state disturbance on A that fits the
count table exactly. demo_canonical_scm is the same distribution pushed
onto the sixteen-state canonical disturbance; both answer every query
identically.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .data import Dataset, write_counts
from .modelio import save_model
from .pgm import Dag, Variable
from .scm import Scm, StructuralEquation, build_canonical_scm

M = Variable("M", ("yes", "no"))
I = Variable("I", ("yes", "no"))
A = Variable("A", ("yes", "no"))

# (M, I, A) -> number of municipalities, 830 in all.
DEMO_COUNTS: dict[tuple[str, str, str], int] = {
    ("yes", "yes", "yes"): 95,
    ("yes", "yes", "no"): 244,
    ("yes", "no", "yes"): 80,
    ("yes", "no", "no"): 183,
    ("no", "yes", "yes"): 121,
    ("no", "yes", "no"): 52,
    ("no", "no", "yes"): 47,
    ("no", "no", "no"): 8,
}


def demo_dag() -> Dag:
    return Dag([M, I, A], [("M", "I"), ("M", "A"), ("I", "A")])


def demo_counts() -> Dataset:
    return Dataset.from_rows(
        (M, I, A),
        [({"M": m, "I": i, "A": a}, w) for (m, i, a), w in DEMO_COUNTS.items()],
    )


# yes = 0, no = 1 throughout the tables below.
_F_I = {
    # parent config (M,): outputs over v1..v4
    "yes": (0, 0, 1, 1),
    "no": (0, 1, 0, 1),
}
_F_A = {
    # parent configs (M, I): outputs over u1..u10
    ("yes", "yes"): (0, 0, 0, 0, 0, 1, 1, 1, 1, 1),
    ("yes", "no"): (0, 1, 0, 0, 1, 0, 1, 1, 0, 1),
    ("no", "yes"): (0, 0, 1, 1, 1, 0, 0, 0, 1, 1),
    ("no", "no"): (0, 0, 0, 1, 0, 0, 0, 1, 0, 0),
}

PRIOR_W = (0.7253, 0.2747)
PRIOR_V = (0.56312, 0.0, 0.19565, 0.24123)
PRIOR_U = (0.0, 0.24979, 0.0, 0.0, 0.03045, 0.30418, 0.0, 0.14545, 0.0, 0.27013)

# The same ten-state disturbance on A expressed over the canonical
# sixteen-state domain (exogenous index = output digit string over the
# parent configurations, first parent fastest, most significant first).
PRIOR_U_CANONICAL = (
    0.0, 0.0, 0.24979, 0.0, 0.0, 0.0, 0.03045, 0.0,
    0.30418, 0.0, 0.0, 0.14545, 0.0, 0.0, 0.27013, 0.0,
)
PRIOR_V_CANONICAL = PRIOR_V


def demo_scm() -> Scm:
    """The fitted three-variable model with the ten-state disturbance."""
    w = Variable("W", ("w1", "w2"))
    v = Variable("V", ("v1", "v2", "v3", "v4"))
    u = Variable("U", tuple(f"u{i}" for i in range(1, 11)))
    f_m = StructuralEquation(M, (), w, np.array([[0], [1]], dtype=np.int64))
    # configs for I: (M=yes), (M=no)
    f_i = StructuralEquation(
        I,
        (M,),
        v,
        np.array([[_F_I["yes"][k], _F_I["no"][k]] for k in range(4)], dtype=np.int64),
    )
    # configs for A, first parent M fastest: (yes,yes), (no,yes), (yes,no), (no,no)
    config_order = [("yes", "yes"), ("no", "yes"), ("yes", "no"), ("no", "no")]
    f_a = StructuralEquation(
        A,
        (M, I),
        u,
        np.array([[_F_A[c][k] for c in config_order] for k in range(10)], dtype=np.int64),
    )
    return Scm(
        [f_m, f_i, f_a],
        {"W": PRIOR_W, "V": PRIOR_V, "U": PRIOR_U},
    )


def demo_skeleton() -> Scm:
    """Canonical (priorless) model over the demo graph: disturbance
    cardinalities 2, 4, 16."""
    return build_canonical_scm(demo_dag())


def demo_canonical_scm() -> Scm:
    """The demo distribution on the canonical skeleton; query-for-query
    identical to demo_scm."""
    return demo_skeleton().with_priors(
        {"U_M": PRIOR_W, "U_I": PRIOR_V_CANONICAL, "U_A": PRIOR_U_CANONICAL}
    )


DEMO_QUERIES_JSON = (
    '[\n'
    + ",\n".join(
        f'  {{"kind": "{kind}", "cause": "I", "effect": "A"}}'
        for kind in ("CondDiff", "ACE", "PN", "PNrc", "PS", "PNS")
    )
    + "\n]\n"
)


def write_demo_files(directory) -> dict[str, Path]:
    """Materialize the example as files: canonical skeleton, fully
    specified model, counts table, and a six-query file for (I, A)."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = {
        "skeleton": directory / "skeleton.json",
        "model": directory / "model.json",
        "counts": directory / "counts.csv",
        "queries": directory / "queries.json",
    }
    save_model(paths["skeleton"], demo_dag())
    save_model(paths["model"], demo_scm())
    write_counts(paths["counts"], demo_counts())
    paths["queries"].write_text(DEMO_QUERIES_JSON, encoding="utf-8")
    return paths
