import numpy as np
import pytest

from wasserstat.expfam import family_from_angle, k3_graph
from wasserstat.ground_metric import Graph
from wasserstat.manifold import simplex_chart_model


@pytest.fixture
def k3_unit():
    return k3_graph((1.0, 1.0, 1.0))


@pytest.fixture
def path3():
    return Graph(3, [(0, 1), (1, 2)], [1.0, 1.0])


@pytest.fixture
def q_uniform3():
    return np.full(3, 1.0 / 3.0)


@pytest.fixture
def expfam_model():
    """phi=0.7 family on [-1, 1] with analytic differentials."""
    return family_from_angle(0.7).to_model()


@pytest.fixture
def chart3():
    return simplex_chart_model(3)


def strip_fast_path(model):
    """Copy of a model with the compiled dispatch disabled, forcing the
    generic numpy implementation."""
    import copy

    clone = copy.copy(model)
    clone.softmax_stat = None
    return clone


def random_connected_graph(rng, n):
    """Random spanning tree plus extra edges, weights in [0.1, 2]."""
    edges = []
    for i in range(1, n):
        edges.append((i, int(rng.integers(0, i))))
    extra = int(rng.integers(0, n))
    for _ in range(extra):
        i, j = rng.integers(0, n, size=2)
        if i != j and (max(i, j), min(i, j)) not in [
            (max(a, b), min(a, b)) for a, b in edges
        ]:
            edges.append((int(i), int(j)))
    weights = rng.uniform(0.1, 2.0, size=len(edges))
    return Graph(n, edges, weights)


def random_interior_distribution(rng, n):
    p = rng.dirichlet(np.ones(n)) + 0.01
    return p / p.sum()
