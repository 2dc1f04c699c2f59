from __future__ import annotations

import itertools

import pytest
from hypothesis import HealthCheck, settings, strategies as st

from dyntd.dynamic import build_catalog
from dyntd.graph import DynamicGraph
from dyntd.mso import build_gamma

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@st.composite
def small_graphs(draw, max_n: int = 7, min_n: int = 0):
    n = draw(st.integers(min_n, max_n))
    pairs = list(itertools.combinations(range(n), 2))
    chosen = draw(st.lists(st.sampled_from(pairs), unique=True)) if pairs else []
    return DynamicGraph.from_edges(chosen, range(n))


def graph_from_mask(n: int, mask: int) -> DynamicGraph:
    pairs = list(itertools.combinations(range(n), 2))
    return DynamicGraph.from_edges((p for i, p in enumerate(pairs) if mask >> i & 1), range(n))


DOMINATING = "exists x . forall y . (x = y or edge(x,y))"


@pytest.fixture(scope="session")
def gamma_catalog3():
    return build_catalog(3, build_gamma())


@pytest.fixture(scope="session")
def catalog2():
    return build_catalog(2, build_gamma())
