import io

import numpy as np
import pytest

from powerpart.graph import (
    CliquePairSpec,
    NetworkParseError,
    PowerGraph,
    ReferentialError,
    SchemaError,
    Uniform,
    generate_clique_pair,
    generate_grid_network,
    generate_random_graph,
    is_connected,
    load_network,
    save_network,
)
from powerpart.models import violation_fraction

VERTICES = "id,lon,lat,surplus\na,7.0,50.0,0.2\nb,8.0,51.0,0.8\n"
LINKS = "id,v1,v2\nl1,a,b\n"


def _load(vertices=VERTICES, links=LINKS, policy="surplus"):
    return load_network(io.StringIO(vertices), io.StringIO(links), policy)


def test_load_two_vertex_network():
    g = _load()
    assert g.num_vertices == 2 and g.num_edges == 1
    assert list(g.surplus) == [0.2, 0.8]
    assert list(g.transfer) == [1.0]
    assert g.ids == ("a", "b")


def test_uniform_weights_are_seeded():
    g1 = _load(policy=Uniform(7))
    g2 = _load(policy=Uniform(7))
    g3 = _load(policy=Uniform(8))
    assert np.array_equal(g1.surplus, g2.surplus)
    assert not np.array_equal(g1.surplus, g3.surplus)
    assert np.all((g1.surplus >= 0) & (g1.surplus < 1))


def test_dangling_endpoint():
    with pytest.raises(ReferentialError):
        _load(links="id,v1,v2\nl1,a,zz\n")


def test_duplicate_vertex_id():
    with pytest.raises(SchemaError):
        _load(vertices="id,lon,lat,surplus\na,0,0,0.1\na,1,1,0.2\n")


def test_malformed_row_reports_row_number():
    with pytest.raises(NetworkParseError) as err:
        _load(vertices="id,lon,lat,surplus\na,0,0,0.1\nb,1,x,0.2\n")
    assert err.value.row == 3


def test_missing_column():
    with pytest.raises(SchemaError):
        _load(vertices="id,lon,surplus\na,0,0.1\n")


def test_duplicate_links_collapse_and_extra_columns_ignored():
    links = "id,v1,v2,voltage,capacity\nl1,a,b,380,2.5\nl2,b,a,220,9\n"
    g = _load(links=links)
    assert g.num_edges == 1 and list(g.transfer) == [2.5]


def test_disconnected_network_warns():
    vertices = VERTICES + "c,9,52,0.1\n"
    with pytest.warns(UserWarning):
        g = _load(vertices=vertices)
    assert not is_connected(g)


def test_graph_invariants():
    with pytest.raises(ValueError):
        PowerGraph(["a", "a"], [0, 0], [(0, 1)])
    with pytest.raises(ValueError):
        PowerGraph(["a", "b"], [0, 0], [(0, 0)])
    with pytest.raises(ValueError):
        PowerGraph(["a", "b"], [0, 0], [(0, 1), (1, 0)])
    with pytest.raises(ValueError):
        PowerGraph(["a", "b"], [0, 0], [(0, 1)], transfer=[-1.0])
    with pytest.raises(ValueError):
        PowerGraph(["a", "b"], [0, np.inf], [(0, 1)])


def test_round_trip(tmp_path):
    g = generate_grid_network(30, seed=4)
    save_network(g, tmp_path / "v.csv", tmp_path / "l.csv")
    back = load_network(tmp_path / "v.csv", tmp_path / "l.csv")
    assert back == g
    save_network(back, tmp_path / "v2.csv", tmp_path / "l2.csv")
    assert (tmp_path / "v.csv").read_bytes() == (tmp_path / "v2.csv").read_bytes()


@pytest.mark.parametrize("n,vertices,edges", [(3, 6, 7), (4, 8, 13)])
def test_clique_pair_sizes(n, vertices, edges):
    g = generate_clique_pair(CliquePairSpec(n))
    assert (g.num_vertices, g.num_edges) == (vertices, edges)


def test_clique_pair_edge_count_formula():
    for n in range(2, 20):
        g = generate_clique_pair(CliquePairSpec(n, seed=n))
        assert g.num_edges == n * (n - 1) + 1
        assert is_connected(g)


def test_clique_means():
    for n in range(2, 13):
        g = generate_clique_pair(CliquePairSpec(n, seed=3))
        assert g.surplus[:n].mean() == pytest.approx(0.45, abs=1e-9)
        assert g.surplus[n:].mean() == pytest.approx(0.45, abs=1e-9)
        assert np.all((g.surplus >= 0) & (g.surplus < 1))


def test_clique_pair_violation_fraction():
    for n in range(2, 7):
        assert violation_fraction(generate_clique_pair(CliquePairSpec(n)), 0.5) > 1 / 3
    for n in range(7, 13):
        assert violation_fraction(generate_clique_pair(CliquePairSpec(n)), 0.5, samples=100_000, seed=n) > 1 / 3


def test_clique_spec_validation():
    with pytest.raises(ValueError):
        CliquePairSpec(1)
    with pytest.raises(ValueError):
        CliquePairSpec(3, target_mean=1.0)


def test_random_graph_examples():
    g = generate_random_graph(2, 1.0, seed=0)
    assert g.num_edges == 1
    assert generate_random_graph(5, 0.5, seed=1) == generate_random_graph(5, 0.5, seed=1)
    for seed in range(100):
        g = generate_random_graph(8, 0.5, seed=seed)
        assert g.num_vertices == 8 and is_connected(g)
        assert np.all((g.surplus >= 0) & (g.surplus < 1))


def test_random_graph_preconditions():
    with pytest.raises(ValueError):
        generate_random_graph(9, 0.5)
    with pytest.raises(ValueError):
        generate_random_graph(4, 0.0)


def test_generators_are_pure():
    assert generate_clique_pair(CliquePairSpec(5, seed=2)) == generate_clique_pair(CliquePairSpec(5, seed=2))
    a, b = generate_grid_network(50, seed=1), generate_grid_network(50, seed=1)
    assert a == b and np.array_equal(a.positions, b.positions)


def test_grid_network_shape():
    g = generate_grid_network(120, seed=0)
    assert g.num_vertices == 120 and is_connected(g)
    assert 2.0 <= 2 * g.num_edges / g.num_vertices <= 3.2
