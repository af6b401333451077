import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ldpgraph.graph import (
    EdgeListParseError,
    Graph,
    NeighborList,
    clustering_coefficient,
    count_kstars,
    count_subgraph_classes,
    count_triangles,
    generate_er,
    induced_subgraph,
    kstar_count,
    load_edge_list,
    max_degree,
    project,
    project_by_order,
    project_graph,
    read_edge_list,
    sample_induced,
    write_edge_list,
)
from ldpgraph.mech import RandomSource


def dense(g):
    return g.to_sparse().toarray().astype(bool)


def brute_classes(g):
    """Triple classes by looking at every node triple."""
    adj = dense(g)
    counts = [0, 0, 0, 0]
    for i, j, k in itertools.combinations(range(g.n), 3):
        counts[int(adj[i, j]) + int(adj[i, k]) + int(adj[j, k])] += 1
    return counts[3], counts[2], counts[1], counts[0]


def brute_kstars(g, k):
    return sum(math.comb(int(row.sum()), k) for row in dense(g))


graphs = st.integers(0, 14).flatmap(
    lambda n: st.builds(
        lambda edges: Graph.from_edges(n, edges),
        st.lists(st.tuples(st.integers(0, max(n - 1, 0)), st.integers(0, max(n - 1, 0))),
                 max_size=60) if n else st.just([]),
    )
)


def test_k3_and_k4_counts():
    k3, k4 = Graph.complete(3), Graph.complete(4)
    assert (count_triangles(k3), count_kstars(k3, 2)) == (1, 3)
    assert (count_triangles(k4), count_kstars(k4, 2)) == (4, 12)
    assert clustering_coefficient(1, 3) == 1.0
    assert clustering_coefficient(4, 12) == 1.0


def test_clustering_of_five_triangles_and_twenty_two_stars():
    assert clustering_coefficient(5, 20) == 0.75


def test_clustering_clamps_noisy_inputs():
    assert clustering_coefficient(-3.0, 10.0) == 0.0
    assert clustering_coefficient(50.0, 10.0) == 1.0
    assert clustering_coefficient(5.0, 0.0) == 0.0
    assert clustering_coefficient(5.0, -4.0) == 0.0


@settings(max_examples=150, deadline=None)
@given(graphs)
def test_counts_match_brute_force(g):
    assert count_subgraph_classes(g).as_tuple() == brute_classes(g)
    assert count_triangles(g) == brute_classes(g)[0]
    for k in (1, 2, 3):
        assert count_kstars(g, k) == brute_kstars(g, k)


@settings(max_examples=100, deadline=None)
@given(graphs)
def test_graph_is_symmetric_loop_free(g):
    a = dense(g)
    assert (a == a.T).all()
    assert not a.diagonal().any()
    assert a.sum() == 2 * g.edge_count
    assert g.degrees.sum() == 2 * g.edge_count


def test_from_edges_dedupes_and_drops_loops():
    g = Graph.from_edges(4, [(0, 1), (1, 0), (0, 1), (2, 2), (2, 3)])
    assert g.edge_count == 2
    assert g.edges().tolist() == [[0, 1], [2, 3]]
    with pytest.raises(ValueError):
        Graph.from_edges(3, [(0, 3)])


def test_kstar_count_guards_overflow():
    assert kstar_count([5, 5, 3], 2) == 23
    with pytest.raises(OverflowError):
        kstar_count([10**9] * 4, 5)
    with pytest.raises(ValueError):
        kstar_count([3], 0)


def test_neighbor_list_invariants():
    a = NeighborList(owner=0, n=6, bits=np.array([1, 3, 4, 5]))
    assert a.degree == 4
    assert a.to_dense().tolist() == [0, 1, 0, 1, 1, 1]
    assert NeighborList.from_dense(0, [0, 1, 0, 1, 1, 1]) == a
    with pytest.raises(ValueError):
        NeighborList(owner=2, n=4, bits=np.array([2]))
    with pytest.raises(ValueError):
        NeighborList(owner=0, n=4, bits=np.array([4]))


def test_projection_follows_permutation_order():
    # n=6, owner 0 with neighbors {1,3,4,5}, cap 3, node order 1,2,3,0,5,4
    a = NeighborList.from_dense(0, [0, 1, 0, 1, 1, 1])
    kept = project_by_order(a, 3, [1, 2, 3, 0, 5, 4])
    assert kept.to_dense().tolist() == [0, 1, 0, 1, 0, 1]


def test_projection_is_noop_within_cap():
    a = NeighborList.from_dense(2, [1, 1, 0, 1])
    assert project(a, 3, 123) is a
    assert project(a, 5, 123) is a


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 30), st.data())
def test_projection_keeps_subset_of_size_cap(n, data):
    owner = data.draw(st.integers(0, n - 1))
    others = [j for j in range(n) if j != owner]
    bits = sorted(data.draw(st.sets(st.sampled_from(others), max_size=len(others))) if others else [])
    a = NeighborList(owner, n, np.array(bits, dtype=np.int64))
    d = data.draw(st.integers(0, n))
    p = project(a, d, data.draw(st.integers(0, 2**32)))
    assert set(p.bits.tolist()) <= set(bits)
    assert p.degree == min(d, len(bits))


def test_projection_is_deterministic_per_seed():
    a = NeighborList(0, 50, np.arange(1, 50))
    assert project(a, 10, 5) == project(a, 10, 5)
    draws = {tuple(project(a, 10, s).bits) for s in range(20)}
    assert len(draws) > 1


def test_project_graph_caps_degree_symmetrically():
    g = generate_er(200, 0.2, 3)
    p = project_graph(g, 10, 7)
    assert max_degree(p) <= 10
    assert (dense(p) <= dense(g)).all()
    assert project_graph(g, max_degree(g), 7) is g


def test_er_extremes():
    assert generate_er(5, 1.0, 0).edge_count == 10
    assert generate_er(5, 0.0, 0).edge_count == 0
    assert generate_er(0, 0.5, 0).n == 0
    with pytest.raises(ValueError):
        generate_er(5, 1.5, 0)


def test_er_density_and_seeding():
    g = generate_er(400, 0.05, 11)
    assert g == generate_er(400, 0.05, 11)
    assert g != generate_er(400, 0.05, 12)
    expected = 0.05 * 400 * 399 / 2
    assert abs(g.edge_count - expected) < 5 * math.sqrt(expected)


def test_snap_style_file(tmp_path):
    path = tmp_path / "orkut.txt"
    path.write_text(
        "# Undirected graph: com-orkut\n"
        "# Nodes: 7 Edges: 10\n"
        "# FromNodeId\tToNodeId\n"
        "11\t12\n11\t13\n11\t14\n12\t13\n12\t14\n13\t14\n"
        "14\t15\n15\t16\n16\t17\n17\t11\n"
        "12\t11\n"      # duplicate in the other direction
        "16\t16\n"      # self-loop
        "14 15\n"       # duplicate, space separated
    )
    g, summary = read_edge_list(path)
    assert g.edge_count == 10
    assert g.n == 7
    assert summary.self_loops == 1
    assert summary.duplicates == 2
    assert count_triangles(g) == 4
    assert summary.avg_degree == pytest.approx(20 / 7)
    assert summary.edges_per_node == pytest.approx(10 / 7)


def test_ids_remapped_by_first_appearance(tmp_path):
    path = tmp_path / "g.txt"
    path.write_text("900 5\n5 77\n")
    g = load_edge_list(path)
    assert g.n == 3
    assert g.edges().tolist() == [[0, 1], [1, 2]]


def test_parse_error_reports_line(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("# c\n1 2\n3 x\n")
    with pytest.raises(EdgeListParseError) as info:
        load_edge_list(path)
    assert info.value.lineno == 3
    path.write_text("1 2 3\n")
    with pytest.raises(EdgeListParseError):
        load_edge_list(path)


def test_roundtrip_keeps_isolated_nodes(tmp_path):
    for n, alpha in ((30, 0.1), (5, 0.0), (5, 1.0)):
        g = generate_er(n, alpha, 4)
        path = tmp_path / f"g{n}{alpha}.txt"
        write_edge_list(g, path)
        assert load_edge_list(path) == g


def test_sample_induced():
    g = generate_er(100, 0.1, 1)
    s = sample_induced(g, 40, 9)
    assert s.n == 40
    assert s == sample_induced(g, 40, 9)
    with pytest.raises(ValueError):
        sample_induced(g, 101, 0)
    sub = induced_subgraph(Graph.complete(6), [5, 0, 2])
    assert sub == Graph.complete(3)


def test_has_edges_matches_adjacency():
    g = generate_er(60, 0.2, 2)
    u, v = np.meshgrid(np.arange(60), np.arange(60))
    assert (g.has_edges(u.ravel(), v.ravel()).reshape(60, 60) == dense(g).T).all()


def test_projection_seed_can_be_stream():
    a = NeighborList(3, 40, np.array([j for j in range(40) if j != 3]))
    s = RandomSource(1).stream(0, "project", 3)
    assert project(a, 5, s) == project(a, 5, RandomSource(1).stream(0, "project", 3))
