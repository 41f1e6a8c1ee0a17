import pytest

from cfbounds.counterfactual import CausalQuery, QueryKind
from cfbounds.demo import (
    demo_canonical_scm,
    demo_counts,
    demo_dag,
    demo_scm,
    demo_skeleton,
)
from cfbounds.pgm import mle_cpts


@pytest.fixture(scope="session")
def counts():
    return demo_counts()


@pytest.fixture(scope="session")
def dag():
    return demo_dag()


@pytest.fixture(scope="session")
def demo_net(counts, dag):
    return mle_cpts(dag, counts)


@pytest.fixture(scope="session")
def scm_full():
    return demo_scm()


@pytest.fixture(scope="session")
def scm_canonical():
    return demo_canonical_scm()


@pytest.fixture(scope="session")
def skeleton():
    return demo_skeleton()


def make_query(kind, cause="I", effect="A"):
    return CausalQuery(
        kind=QueryKind(kind) if isinstance(kind, str) else kind,
        cause=cause,
        effect=effect,
        cause_positive="yes",
        cause_negative="no",
        effect_positive="yes",
        effect_negative="no",
    )


@pytest.fixture(scope="session")
def six_queries():
    return [make_query(kind) for kind in QueryKind]
