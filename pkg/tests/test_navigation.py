import numpy as np
import pytest

from smra.errors import FormatError, GraphError, ModelError
from smra.model import ChannelSpec as C, CorrelationModel
from smra.navigation import (
    NavigationGraph, NodeOutOfRange, RootHasIncoming, SelfLoop, Unreachable, example_graph,
    is_rooted_path, one_hop, ordering, previous_request_subsets, root_equality_condition, validate,
)


def fs(*sets):
    return {frozenset(s) for s in sets}


def test_example_graph_valid():
    assert validate(example_graph()) == []


def test_violations():
    g = NavigationGraph(4, [(0, 1), (1, 2), (2, 2), (3, 0), (0, 3), (1, 9)])
    v = validate(g)
    assert SelfLoop(2) in v
    assert RootHasIncoming(3) in v
    assert NodeOutOfRange((1, 9)) in v
    assert Unreachable(4) in v


def test_one_hop():
    g = example_graph()
    assert one_hop(g, 3) == {1, 2}
    assert one_hop(g, 1) == {0, 2}
    assert one_hop(NavigationGraph(1, [(0, 1)]), 1) == {0}
    with pytest.raises(GraphError):
        one_hop(g, 4)
    with pytest.raises(GraphError):
        one_hop(g, 0)


def test_family_golden():
    g = example_graph()
    assert previous_request_subsets(g, 2) == fs({0}, {0, 1})
    assert previous_request_subsets(g, 3) == fs({0, 1}, {0, 2}, {0, 1, 2})
    assert previous_request_subsets(NavigationGraph(2, [(0, 1), (1, 2)]), 2) == fs({0, 1})


def test_family_errors():
    g = NavigationGraph(3, [(0, 1), (1, 2)])
    with pytest.raises(GraphError):
        previous_request_subsets(g, 3)
    # complete graph on 9 nodes explodes past a small cap
    K = NavigationGraph(9, [(u, v) for u in range(10) for v in range(1, 10) if u != v])
    with pytest.raises(GraphError):
        previous_request_subsets(K, 9, cap=50)


def random_graph(rng, L):
    edges = {(int(rng.integers(0, v)), v) for v in range(1, L + 1)}
    for _ in range(int(rng.integers(0, 3 * L))):
        u, v = (int(t) for t in rng.integers(0, L + 1, 2))
        if u != v and v != 0:
            edges.add((u, v))
    return NavigationGraph(L, edges)


def reachable_avoiding(g, k):
    seen, todo = {0}, [0]
    while todo:
        u = todo.pop()
        for v in g.successors(u):
            if v != k and v not in seen:
                seen.add(v)
                todo.append(v)
    return seen


def test_family_properties_random():
    rng = np.random.default_rng(3)
    for _ in range(150):
        g = random_graph(rng, int(rng.integers(1, 7)))
        for k in range(1, g.num_sources + 1):
            fam = previous_request_subsets(g, k)
            J = one_hop(g, k)
            assert all(0 in E and k not in E for E in fam)
            # a neighbour only reachable through k itself closes no simple path
            assert set().union(*(E & J for E in fam)) == J & reachable_avoiding(g, k)


def test_neighbour_behind_k_is_not_covered():
    g = NavigationGraph(2, [(0, 1), (1, 2), (2, 1)])
    assert one_hop(g, 1) == {0, 2}
    assert previous_request_subsets(g, 1) == fs({0})


def test_ordering_and_ties():
    g = NavigationGraph(5, [(0, 2), (0, 4), (2, 5), (4, 5), (0, 1), (1, 5)])
    m = CorrelationModel({(5, 4): C.erasure(0.1), (5, 2): C.erasure(0.1), (5, 1): C.erasure(0.01)})
    assert ordering(g, 5, m) == [1, 2, 4]
    m2 = CorrelationModel({(5, 4): C.erasure(0.25)})
    with pytest.raises(ModelError):
        ordering(g, 5, m2)


def test_root_equality():
    g = example_graph()
    assert root_equality_condition(g, 3)
    chain = NavigationGraph(3, [(0, 1), (1, 2), (2, 3)])
    assert not root_equality_condition(chain, 3)
    assert root_equality_condition(chain, 1)


def test_rooted_path():
    g = example_graph()
    assert is_rooted_path(g, [1, 2, 3])
    assert not is_rooted_path(g, [3])


def test_text_round_trip():
    g = example_graph()
    text = g.dumps()
    assert text == "L=3\n0 1\n0 2\n1 2\n1 3\n2 1\n2 3\n"
    assert NavigationGraph.parse("# c\nL=3\n0 1 # edge\n\n0 2\n1 2\n2 1\n1 3\n2 3\n") == g
    assert NavigationGraph.parse(text) == g


@pytest.mark.parametrize("bad", ["", "0 1\n", "L=x\n", "L=2\n0\n", "L=2\n0 a\n"])
def test_parse_errors(bad):
    with pytest.raises(FormatError):
        NavigationGraph.parse(bad)
