import io

import numpy as np
import pytest

from netseed.graphs import (
    BinPartition,
    Graph,
    ParseError,
    degree,
    detect_communities,
    edge_betweenness,
    gen_sbm,
    load_edge_list,
    load_partition,
    modularity,
    save_edge_list,
    save_partition,
)
from netseed.verification import check_betweenness_brute_force


def test_graph_rejects_self_loops_and_bad_endpoints():
    with pytest.raises(ValueError):
        Graph(3, [(0, 0)])
    with pytest.raises(ValueError):
        Graph(3, [(0, 3)])


def test_graph_dedupes_reversed_edges():
    g = Graph(3, [(0, 1), (1, 0), (2, 1)])
    assert g.edges == ((0, 1), (1, 2))
    assert g.edge_count == 2


def test_partition_requires_nonempty_bins():
    with pytest.raises(ValueError):
        BinPartition(3, np.array([0, 0, 2]))  # bin 1 empty
    p = BinPartition(4, np.array([1, 0, 1, 0]))
    assert p.K == 2
    assert p.members(1).tolist() == [0, 2]


# --- gen_sbm ---------------------------------------------------------------

def test_sbm_complete_block_is_triangle():
    g, part = gen_sbm([3], 1.0, 0.0, seed=0)
    assert g.n == 3 and g.edge_count == 3
    assert part.K == 1


def test_sbm_zero_probabilities_give_empty_graph():
    g, part = gen_sbm([2, 2], 0.0, 0.0, seed=0)
    assert g.n == 4 and g.edge_count == 0
    assert part.K == 2


def test_sbm_paper_scale_shape():
    g, part = gen_sbm([187, 187, 63, 63], 0.1, 0.01, seed=7)
    assert g.n == 500
    assert part.K == 4
    assert part.sizes().tolist() == [187, 187, 63, 63]
    # within-block density should be near p_in, cross near p_out
    a = g.adjacency()
    within = a[:187, :187].sum() / (187 * 186)
    cross = a[:187, 187:374].sum() / (187 * 187)
    assert abs(within - 0.1) < 0.01
    assert abs(cross - 0.01) < 0.005


def test_sbm_bit_identical_given_seed():
    g1, _ = gen_sbm([20, 10], 0.3, 0.05, seed=42)
    g2, _ = gen_sbm([20, 10], 0.3, 0.05, seed=42)
    assert g1.edges == g2.edges
    g3, _ = gen_sbm([20, 10], 0.3, 0.05, seed=43)
    assert g1.edges != g3.edges


def test_sbm_validates_inputs():
    with pytest.raises(ValueError):
        gen_sbm([], 0.1, 0.01, seed=0)
    with pytest.raises(ValueError):
        gen_sbm([3, 0], 0.1, 0.01, seed=0)
    with pytest.raises(ValueError):
        gen_sbm([3], 1.2, 0.1, seed=0)


# --- edge list ingestion ----------------------------------------------------

def test_load_edge_list_dedupes_reversed():
    g = load_edge_list(io.StringIO("0,1\n1,0\n1,2"))
    assert g.n == 3
    assert g.edges == ((0, 1), (1, 2))


def test_load_edge_list_renumbers_sparse_ids():
    g = load_edge_list(io.StringIO("5,7"))
    assert g.n == 2
    assert g.edges == ((0, 1),)


def test_load_edge_list_drops_self_loops_with_warning(caplog):
    with caplog.at_level("WARNING"):
        g = load_edge_list(io.StringIO("0,0\n0,1"))
    assert g.n == 2 and g.edge_count == 1
    assert "1 self-loop" in caplog.text


def test_load_edge_list_ignores_comments():
    g = load_edge_list(io.StringIO("# header\n0,1\n\n1,2"))
    assert g.edge_count == 2


def test_load_edge_list_reports_bad_line_number():
    with pytest.raises(ParseError) as err:
        load_edge_list(io.StringIO("0,1\nnot-a-pair"))
    assert "line 2" in str(err.value)


def test_edge_list_file_round_trip(tmp_path):
    g = Graph(4, [(0, 2), (1, 3), (0, 1)])
    path = tmp_path / "edges.csv"
    save_edge_list(g, path)
    again = load_edge_list(path)
    assert again.edges == g.edges


def test_partition_file_round_trip(tmp_path):
    p = BinPartition(5, np.array([1, 0, 1, 2, 0]))
    path = tmp_path / "partition.csv"
    save_partition(p, path)
    again = load_partition(path)
    assert again.bin_of.tolist() == p.bin_of.tolist()


# --- structural statistics --------------------------------------------------

def test_degree_examples(toy_graph):
    assert degree(toy_graph, 0) == 4  # star center
    g = Graph(3, [(0, 1)])
    assert degree(g, 2) == 0  # isolated
    tri = Graph(3, [(0, 1), (1, 2), (0, 2)])
    assert degree(tri, 1) == 2
    with pytest.raises(ValueError):
        degree(tri, 5)


def test_edge_betweenness_path(line_graph):
    bet = edge_betweenness(line_graph)
    assert bet[(0, 1)] == pytest.approx(2.0)
    assert bet[(1, 2)] == pytest.approx(2.0)


def test_edge_betweenness_single_edge():
    bet = edge_betweenness(Graph(2, [(0, 1)]))
    assert bet[(0, 1)] == pytest.approx(1.0)


def test_edge_betweenness_triangle():
    tri = Graph(3, [(0, 1), (1, 2), (0, 2)])
    for val in edge_betweenness(tri).values():
        assert val == pytest.approx(1.0)


def test_edge_betweenness_matches_brute_force():
    ok, detail = check_betweenness_brute_force()
    assert ok, detail


def test_modularity_two_triangles():
    g = Graph(6, [(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)])
    p = BinPartition(6, np.array([0, 0, 0, 1, 1, 1]))
    assert modularity(g, p) == pytest.approx(0.5)


def test_modularity_trivial_partition_is_zero():
    g = Graph(4, [(0, 1), (2, 3)])
    p = BinPartition(4, np.zeros(4, dtype=np.int64))
    assert modularity(g, p) == pytest.approx(0.0)


def test_modularity_k4_pairs():
    k4 = Graph(4, [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)])
    p = BinPartition(4, np.array([0, 0, 1, 1]))
    assert modularity(k4, p) == pytest.approx(-1.0 / 6.0)


def test_modularity_requires_edges():
    with pytest.raises(ValueError):
        modularity(Graph(3, []), BinPartition(3, np.zeros(3, dtype=np.int64)))


def _two_cliques_with_bridge():
    edges = [(i, j) for i in range(5) for j in range(i + 1, 5)]
    edges += [(i + 5, j + 5) for i in range(5) for j in range(i + 1, 5)]
    edges.append((0, 5))
    return Graph(10, edges)


def test_detect_communities_splits_cliques():
    part = detect_communities(_two_cliques_with_bridge(), min_size=1)
    assert part.K == 2
    assert len(set(part.bin_of[:5])) == 1
    assert len(set(part.bin_of[5:])) == 1
    # brute-force optimum over GN levels is exactly the two cliques
    assert part.bin_of[0] != part.bin_of[5]


def test_detect_communities_complete_graph_is_one():
    k5 = Graph(5, [(i, j) for i in range(5) for j in range(i + 1, 5)])
    assert detect_communities(k5, min_size=1).K == 1


def test_detect_communities_min_size_merges():
    part = detect_communities(_two_cliques_with_bridge(), min_size=6)
    assert part.K == 1


def test_detect_communities_covers_all_nodes():
    g, _ = gen_sbm([8, 8, 4], 0.6, 0.05, seed=3)
    part = detect_communities(g, min_size=2)
    assert part.n == g.n
    sizes = part.sizes()
    assert part.K == 1 or (sizes >= 2).all()
    # bins labeled by descending size
    assert all(sizes[i] >= sizes[i + 1] for i in range(part.K - 1))
