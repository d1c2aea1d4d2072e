import pytest

from streetnav.episode import ObservationBuilder
from streetnav.graph import build_graph
from streetnav.synthetic import build_score_table, generate_synthetic


def make_line_graph(n=5, heading=90.0):
    """A-B-C-... straight street, bidirectional."""
    names = [chr(ord("A") + i) for i in range(n)]
    edges = []
    for a, b in zip(names, names[1:]):
        edges.append((a, b, heading))
        edges.append((b, a, (heading + 180.0) % 360.0))
    return build_graph(names, edges, lint=False)


@pytest.fixture(scope="session")
def line_graph():
    return make_line_graph()


@pytest.fixture(scope="session")
def synthetic_world():
    g, instances = generate_synthetic(seed=11, n_nodes=60, intersection_ratio=0.45,
                                      n_instances=20)
    table = build_score_table(g, instances, seed=11)
    return g, instances, table


@pytest.fixture(scope="session")
def synthetic_observer(synthetic_world):
    _, _, table = synthetic_world
    return ObservationBuilder(table)
