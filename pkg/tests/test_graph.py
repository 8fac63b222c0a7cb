import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gsr.graph import (Graph, GraphError, RefinementPlan, apply_refinement,
                       ego_subgraph, homophily_ratio, normalize_adjacency)
from helpers import dense_normalized_adjacency, random_graph_edges


def path_graph(n):
    return Graph.from_edges(n, [(i, i + 1) for i in range(n - 1)])


class TestGraphConstruction:
    def test_symmetrize_dedup_selfloops(self):
        g = Graph.from_edges(4, [(1, 0), (0, 1), (2, 2), (3, 1), (1, 3)])
        assert g.num_edges == 2
        assert g.edge_key_set() == {(0, 1), (1, 3)}
        assert list(g.neighbors(1)) == [0, 3]

    def test_neighbor_symmetry(self):
        rng = np.random.default_rng(0)
        g = Graph.from_edges(15, random_graph_edges(rng, 15, 0.3))
        for u in range(15):
            for v in g.neighbors(u):
                assert u in g.neighbors(v)

    def test_out_of_range_rejected(self):
        with pytest.raises(GraphError):
            Graph.from_edges(3, [(0, 5)])

    def test_immutable(self):
        g = path_graph(3)
        with pytest.raises(ValueError):
            g.edges[0, 0] = 9


class TestNormalizeAdjacency:
    def test_single_node(self):
        a = normalize_adjacency(Graph.from_edges(1, [])).matrix.toarray()
        assert np.allclose(a, [[1.0]])

    def test_two_node_edge(self):
        a = normalize_adjacency(path_graph(2)).matrix.toarray()
        assert np.allclose(a, [[0.5, 0.5], [0.5, 0.5]])

    def test_three_node_path_matches_dense_oracle(self):
        g = path_graph(3)
        a = normalize_adjacency(g).matrix.toarray()
        oracle = dense_normalized_adjacency(3, g.edges)
        np.testing.assert_allclose(a, oracle, atol=1e-12)
        assert abs(a[0][1] - 1 / np.sqrt(6)) < 1e-12

    @pytest.mark.parametrize("n,p,seed", [(10, 0.3, 1), (50, 0.1, 2), (100, 0.05, 3)])
    def test_matches_dense_oracle_and_symmetric(self, n, p, seed):
        rng = np.random.default_rng(seed)
        g = Graph.from_edges(n, random_graph_edges(rng, n, p))
        a = normalize_adjacency(g).matrix.toarray()
        np.testing.assert_allclose(a, dense_normalized_adjacency(n, g.edges), atol=1e-12)
        np.testing.assert_allclose(a, a.T, atol=1e-12)

    def test_isolated_node_gets_unit_selfloop(self):
        g = Graph.from_edges(3, [(0, 1)])
        a = normalize_adjacency(g).matrix.toarray()
        assert a[2, 2] == 1.0


class TestHomophily:
    def test_all_same_label(self):
        g = path_graph(4)
        assert homophily_ratio(g, np.zeros(4, dtype=int)) == 1.0

    def test_only_cross_block(self):
        g = Graph.from_edges(4, [(0, 2), (0, 3), (1, 2)])
        labels = np.array([0, 0, 1, 1])
        assert homophily_ratio(g, labels) == 0.0

    def test_matches_enumeration_oracle(self):
        rng = np.random.default_rng(7)
        g = Graph.from_edges(20, random_graph_edges(rng, 20, 0.25))
        labels = rng.integers(0, 4, size=20)
        same = sum(1 for u, v in g.edges if labels[u] == labels[v])
        assert homophily_ratio(g, labels) == pytest.approx(same / g.num_edges)

    def test_empty_edges_warns_and_returns_zero(self):
        g = Graph.from_edges(3, [])
        with pytest.warns(UserWarning):
            assert homophily_ratio(g, np.zeros(3, dtype=int)) == 0.0

    @given(perm_seed=st.integers(0, 999), graph_seed=st.integers(0, 99))
    @settings(max_examples=25, deadline=None)
    def test_invariant_under_label_permutation(self, perm_seed, graph_seed):
        rng = np.random.default_rng(graph_seed)
        g = Graph.from_edges(12, random_graph_edges(rng, 12, 0.3))
        if g.num_edges == 0:
            return
        labels = rng.integers(0, 5, size=12)
        perm = np.random.default_rng(perm_seed).permutation(5)
        assert homophily_ratio(g, labels) == pytest.approx(homophily_ratio(g, perm[labels]))


def make_plan(add, remove, add_scores=None, remove_scores=None):
    add = np.array(add, dtype=np.int64).reshape(-1, 2)
    remove = np.array(remove, dtype=np.int64).reshape(-1, 2)
    if add_scores is None:
        add_scores = np.zeros(len(add))
    if remove_scores is None:
        remove_scores = np.zeros(len(remove))
    return RefinementPlan(add, np.asarray(add_scores, dtype=np.float64),
                          remove, np.asarray(remove_scores, dtype=np.float64))


class TestApplyRefinement:
    def test_empty_plan_is_identity(self):
        g = path_graph(5)
        g2 = apply_refinement(g, RefinementPlan.empty())
        assert g2.edge_key_set() == g.edge_key_set()

    def test_add_closes_triangle(self):
        g = path_graph(3)
        g2 = apply_refinement(g, make_plan([(0, 2)], []))
        assert g2.num_edges == 3
        assert g2.edge_key_set() == {(0, 1), (1, 2), (0, 2)}

    def test_matches_set_algebra_oracle(self):
        rng = np.random.default_rng(11)
        g = Graph.from_edges(30, random_graph_edges(rng, 30, 0.15))
        edges = sorted(g.edge_key_set())
        non_edges = [(u, v) for u in range(30) for v in range(u + 1, 30)
                     if (u, v) not in g.edge_key_set()]
        add_idx = rng.choice(len(non_edges), size=8, replace=False)
        rem_idx = rng.choice(len(edges), size=5, replace=False)
        add = sorted(non_edges[i] for i in add_idx)
        rem = sorted(edges[i] for i in rem_idx)
        g2 = apply_refinement(g, make_plan(add, rem))
        oracle = (g.edge_key_set() - set(rem)) | set(add)
        assert g2.edge_key_set() == oracle
        assert g2.num_edges == g.num_edges + 8 - 5

    def test_reversal_restores_original(self):
        rng = np.random.default_rng(13)
        g = Graph.from_edges(20, random_graph_edges(rng, 20, 0.2))
        non_edges = sorted({(u, v) for u in range(20) for v in range(u + 1, 20)}
                           - g.edge_key_set())
        add = [non_edges[0], non_edges[3]]
        rem = [tuple(g.edges[0]), tuple(g.edges[2])]
        fwd = apply_refinement(g, make_plan(add, sorted(rem)))
        back = apply_refinement(fwd, make_plan(sorted(rem), add))
        assert back.edge_key_set() == g.edge_key_set()

    def test_rejects_adding_existing_edge(self):
        g = path_graph(3)
        with pytest.raises(GraphError, match="adds existing"):
            apply_refinement(g, make_plan([(0, 1)], []))

    def test_rejects_removing_missing_edge(self):
        g = path_graph(3)
        with pytest.raises(GraphError, match="removes non-existent"):
            apply_refinement(g, make_plan([], [(0, 2)]))

    def test_plan_ordering_enforced(self):
        with pytest.raises(GraphError, match="ordering"):
            make_plan([(0, 1), (0, 2)], [], add_scores=[0.1, 0.9])


class TestEgoSubgraph:
    def test_isolated_center_singleton(self):
        g = Graph.from_edges(4, [(0, 1)])
        sub = ego_subgraph(g, 3, radius=2, fanout=5, rng=np.random.default_rng(0))
        assert sub.graph.num_nodes == 1
        assert sub.nodes.tolist() == [3]
        assert sub.center_index == 0

    def test_star_full_at_high_fanout(self):
        g = Graph.from_edges(6, [(0, i) for i in range(1, 6)])
        sub = ego_subgraph(g, 0, radius=1, fanout=10, rng=np.random.default_rng(0))
        assert sub.nodes.tolist() == list(range(6))
        assert sub.graph.num_edges == 5

    def test_matches_seeded_reference_traversal(self):
        rng = np.random.default_rng(5)
        g = Graph.from_edges(10, random_graph_edges(rng, 10, 0.4))
        seed = 123
        sub = ego_subgraph(g, 0, radius=2, fanout=2, rng=np.random.default_rng(seed))

        ref_rng = np.random.default_rng(seed)
        selected = {0}
        frontier = [0]
        for _ in range(2):
            nxt = []
            for u in frontier:
                cands = [int(v) for v in g.neighbors(u) if int(v) not in selected]
                if len(cands) > 2:
                    pick = ref_rng.choice(len(cands), size=2, replace=False)
                    cands = [cands[i] for i in np.sort(pick)]
                for v in cands:
                    selected.add(v)
                    nxt.append(v)
            frontier = nxt
        assert sub.nodes.tolist() == sorted(selected)

    def test_deterministic_given_seed(self):
        rng = np.random.default_rng(9)
        g = Graph.from_edges(25, random_graph_edges(rng, 25, 0.25))
        a = ego_subgraph(g, 4, 2, 3, np.random.default_rng(77))
        b = ego_subgraph(g, 4, 2, 3, np.random.default_rng(77))
        assert a.nodes.tolist() == b.nodes.tolist()
        assert np.array_equal(a.graph.edges, b.graph.edges)

    def test_node_count_bound(self):
        rng = np.random.default_rng(21)
        g = Graph.from_edges(40, random_graph_edges(rng, 40, 0.4))
        fanout, radius = 3, 2
        sub = ego_subgraph(g, 0, radius, fanout, np.random.default_rng(0))
        assert sub.graph.num_nodes <= 1 + fanout + fanout ** 2

    def test_induced_edges_complete(self):
        rng = np.random.default_rng(31)
        g = Graph.from_edges(15, random_graph_edges(rng, 15, 0.35))
        sub = ego_subgraph(g, 2, 2, 4, np.random.default_rng(3))
        nodes = sub.nodes
        expected = {(i, j) for i in range(len(nodes)) for j in range(i + 1, len(nodes))
                    if g.has_edge(int(nodes[i]), int(nodes[j]))}
        assert sub.graph.edge_key_set() == expected

    def test_radius_zero_rejected(self):
        g = path_graph(3)
        with pytest.raises(GraphError):
            ego_subgraph(g, 0, 0, 2, np.random.default_rng(0))
