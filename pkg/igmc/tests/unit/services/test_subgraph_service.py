import numpy as np
import pytest

from igmc.core.exceptions import DimensionError, GraphIndexError, InternalError, UsageError
from igmc.models.graph import NodeKind
from igmc.models.subgraph import EnclosingSubgraph, FeaturizedSubgraph
from igmc.services.subgraph_service import ExtractionPool
from igmc.tests.fixtures.graphs import brute_force_subgraph, make_graph, random_graph


def node_hops(subgraph):
    hops = {}
    for k in range(subgraph.node_count):
        kind, gid = subgraph.node_origin(k)
        hops[(kind.value, gid)] = int(subgraph.hops[k])
    return hops


def global_edges(subgraph):
    return {(int(subgraph.global_ids[s]), int(subgraph.global_ids[d]), t) for s, d, t in subgraph.edges()}


def assert_matches_oracle(service, graph, h):
    for u in range(graph.num_users):
        for v in range(graph.num_items):
            subgraph = service.extract(graph, u, v, h)
            distance, edges = brute_force_subgraph(graph, u, v, h)
            assert node_hops(subgraph) == distance, (u, v, h)
            assert global_edges(subgraph) == edges, (u, v, h)
            assert subgraph.labels[0] == 0 and subgraph.labels[1] == 1
            assert np.array_equal(subgraph.labels % 2, subgraph.kinds)


def star_graph(num_raters: int = 10):
    """Item 0 rated by users 1..num_raters; user 0 and item 1 are left unrated."""
    return make_graph([(k, 0, k % 5) for k in range(1, num_raters + 1)], num_raters + 1, 2)


class TestExtract:
    """Tests for enclosing subgraph extraction."""

    def test_path_example(self, subgraph_service, path_graph):
        subgraph = subgraph_service.extract(path_graph, 0, 0, h=1)
        np.testing.assert_array_equal(subgraph.labels, [0, 1, 2, 3])
        np.testing.assert_array_equal(subgraph.global_ids, [0, 0, 1, 1])
        assert subgraph.edges() == [(0, 3, 4), (2, 1, 2), (2, 3, 3)]
        assert subgraph.user_id == 0 and subgraph.item_id == 0

    def test_target_edge_is_removed(self, subgraph_service, path_graph):
        subgraph = subgraph_service.extract(path_graph, 1, 1, h=1, true_rating=4.0)
        assert (0, 1) not in {(s, d) for s, d, _ in subgraph.edges()}
        assert subgraph.true_rating == 4.0

    def test_isolated_pair(self, subgraph_service):
        graph = make_graph([(0, 0, 1)], num_users=2, num_items=2)
        subgraph = subgraph_service.extract(graph, 1, 1, h=2)
        assert subgraph.node_count == 2
        assert subgraph.edge_count == 0

    def test_view_keeps_hidden_pair_hidden(self, subgraph_service, graph_service, path_graph):
        view = graph_service.remove_edge(path_graph, 1, 1)
        subgraph = subgraph_service.extract(view, 0, 0, h=1)
        assert subgraph.edges() == [(0, 3, 4), (2, 1, 2)]

    def test_out_of_range_target(self, subgraph_service, path_graph):
        with pytest.raises(GraphIndexError):
            subgraph_service.extract(path_graph, 5, 0)

    def test_zero_hops(self, subgraph_service, path_graph):
        with pytest.raises(UsageError):
            subgraph_service.extract(path_graph, 0, 0, h=0)

    @pytest.mark.parametrize("h", [1, 2])
    def test_matches_brute_force_on_random_graphs(self, subgraph_service, h):
        rng = np.random.default_rng(11 + h)
        for _ in range(40):
            assert_matches_oracle(subgraph_service, random_graph(rng, max_nodes=20), h)

    @pytest.mark.slow
    @pytest.mark.parametrize("h", [1, 2, 3])
    def test_matches_brute_force_exhaustively(self, subgraph_service, h):
        rng = np.random.default_rng(1000 + h)
        for _ in range(1000):
            assert_matches_oracle(subgraph_service, random_graph(rng, max_nodes=50), h)

    def test_cap_subsamples_each_fringe(self, subgraph_service):
        graph = star_graph()
        a = subgraph_service.extract(graph, 0, 0, h=1, max_nodes_per_hop=3, seed=9)
        b = subgraph_service.extract(graph, 0, 0, h=1, max_nodes_per_hop=3, seed=9)
        assert a.node_count == 5
        np.testing.assert_array_equal(a.global_ids, b.global_ids)
        assert set(a.global_ids[2:].tolist()) <= set(range(1, 11))

    def test_capped_nodes_can_join_a_later_hop(self, subgraph_service):
        # users 1..5 rate items 0 and 1, user 0 rates item 1
        edges = [(k, 0, 2) for k in range(1, 6)] + [(k, 1, 3) for k in range(0, 6)]
        graph = make_graph(edges, 6, 2)
        subgraph = subgraph_service.extract(graph, 0, 0, h=2, max_nodes_per_hop=2, seed=3)
        users = subgraph.global_ids[subgraph.kinds == 0]
        user_hops = subgraph.hops[subgraph.kinds == 0]
        assert users.size == 1 + 2 + 2
        assert len(set(users.tolist())) == users.size
        assert np.count_nonzero(user_hops == 1) == 2
        assert np.count_nonzero(user_hops == 2) == 2

    def test_cap_above_fringe_size_changes_nothing(self, subgraph_service):
        graph = star_graph()
        full = subgraph_service.extract(graph, 0, 0, h=1)
        capped = subgraph_service.extract(graph, 0, 0, h=1, max_nodes_per_hop=50)
        np.testing.assert_array_equal(full.global_ids, capped.global_ids)
        assert full.node_count == 12

    def test_extract_many_keeps_order_and_ratings(self, subgraph_service, path_graph):
        pairs = np.array([[1, 0], [0, 0]])
        subgraphs = subgraph_service.extract_many(path_graph, pairs, h=1, ratings=np.array([3.0, 2.0]))
        assert [(s.user_id, s.item_id) for s in subgraphs] == [(1, 0), (0, 0)]
        assert [s.true_rating for s in subgraphs] == [3.0, 2.0]

    def test_pool_matches_serial(self, subgraph_service, rng):
        graph = random_graph(rng, max_nodes=30, density=0.3)
        pairs = np.array([[u, v] for u in range(graph.num_users) for v in range(graph.num_items)])
        serial = subgraph_service.extract_many(graph, pairs, h=2)
        with ExtractionPool(graph, workers=2) as pool:
            parallel = subgraph_service.extract_many(graph, pairs, h=2, pool=pool)
        for a, b in zip(serial, parallel):
            np.testing.assert_array_equal(a.global_ids, b.global_ids)
            assert a.edges() == b.edges()


class TestLabeling:
    """Tests for node labels and featurization."""

    def test_label_nodes(self, subgraph_service):
        np.testing.assert_array_equal(subgraph_service.label_nodes([0, 0, 1, 2], [0, 1, 1, 0]), [0, 1, 3, 4])

    def test_missing_hop(self, subgraph_service):
        with pytest.raises(InternalError):
            subgraph_service.label_nodes([0, -1], [0, 1])

    def test_featurize_path_example(self, subgraph_service, path_graph):
        fsub = subgraph_service.featurize(subgraph_service.extract(path_graph, 0, 0, h=1), h=1, num_rating_types=5)
        np.testing.assert_array_equal(fsub.x0, np.eye(4))
        np.testing.assert_array_equal(fsub.forward_edges[4], [[0], [3]])
        np.testing.assert_array_equal(fsub.backward_edges[4], [[3], [0]])
        assert fsub.forward_edges[0].shape == (2, 0)
        assert fsub.edge_count == 3

    def test_label_wider_than_encoding(self, subgraph_service):
        subgraph = EnclosingSubgraph(labels=np.array([0, 1, 4]), kinds=np.array([0, 1, 0]),
                                     global_ids=np.array([0, 0, 1]), edge_src=np.zeros(0, dtype=np.int64),
                                     edge_dst=np.zeros(0, dtype=np.int64), edge_type=np.zeros(0, dtype=np.int64))
        with pytest.raises(DimensionError):
            subgraph_service.featurize(subgraph, h=1, num_rating_types=5)


class TestDropoutEdges:
    """Tests for training-time edge dropout."""

    @staticmethod
    def wide_subgraph(count: int = 2000) -> FeaturizedSubgraph:
        edges = np.stack([np.zeros(count, dtype=np.int64), np.arange(1, count + 1)])
        return FeaturizedSubgraph(x0=np.zeros((count + 1, 4)), forward_edges={0: edges},
                                  backward_edges={0: edges[::-1].copy()}, num_rating_types=1,
                                  user_id=0, item_id=0)

    def test_keeps_about_one_minus_p(self, subgraph_service):
        dropped = subgraph_service.dropout_edges(self.wide_subgraph(), 0.3, seed=5)
        assert 0.65 < dropped.edge_count / 2000 < 0.75
        np.testing.assert_array_equal(dropped.backward_edges[0], dropped.forward_edges[0][::-1])

    def test_seeded(self, subgraph_service):
        a = subgraph_service.dropout_edges(self.wide_subgraph(), 0.3, seed=5)
        b = subgraph_service.dropout_edges(self.wide_subgraph(), 0.3, seed=5)
        np.testing.assert_array_equal(a.forward_edges[0], b.forward_edges[0])

    def test_zero_probability_is_identity(self, subgraph_service):
        fsub = self.wide_subgraph()
        assert subgraph_service.dropout_edges(fsub, 0.0, seed=5) is fsub

    def test_probability_one_is_rejected(self, subgraph_service):
        with pytest.raises(UsageError):
            subgraph_service.dropout_edges(self.wide_subgraph(), 1.0, seed=5)


class TestExport:
    """Tests for JSON and DOT rendering."""

    def test_json_round_trip(self, subgraph_service, path_graph):
        subgraph = subgraph_service.extract(path_graph, 0, 0, h=1, true_rating=2.0)
        restored = subgraph_service.from_json(subgraph_service.to_json(subgraph, predicted=2.5))
        np.testing.assert_array_equal(restored.labels, subgraph.labels)
        np.testing.assert_array_equal(restored.kinds, subgraph.kinds)
        np.testing.assert_array_equal(restored.global_ids, subgraph.global_ids)
        assert restored.edges() == subgraph.edges()
        assert restored.true_rating == 2.0

    def test_dot(self, subgraph_service, path_graph):
        subgraph = subgraph_service.extract(path_graph, 0, 0, h=1)
        dot = subgraph_service.to_dot(subgraph, path_graph.scale, predicted=3.2)
        assert dot.startswith("graph subgraph {")
        assert dot.count("doublecircle") == 2
        assert dot.count(" -- ") == 3
        assert 'label="3.20"' in dot
        assert subgraph.node_origin(3) == (NodeKind.ITEM, 1)
