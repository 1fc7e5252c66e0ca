import numpy as np
import pytest

from igmc.core.exceptions import DuplicateEdgeError, EmptyDatasetError, GraphIndexError, ScaleError, UsageError
from igmc.models.graph import NodeKind, RatingScale, RatingTable
from igmc.schemas.dataset import DATASET_PRESETS
from igmc.tests.fixtures.graphs import FIVE_STARS, like_path_graph, make_graph, random_table, toy_rating_rows, \
    write_ratings


class TestLoadRatings:
    """Tests for loading a single rating file."""

    def test_three_line_file(self, graph_service, tmp_path):
        path = write_ratings(tmp_path / "r.tsv", [(10, 7, 5, 0), (20, 7, 0.5, 0), (10, 9, 2, 0)])
        loaded = graph_service.load_ratings(path, "tsv4")
        assert loaded.scale.values == [0.5, 2.0, 5.0]
        assert len(loaded.user_map) == 2
        assert len(loaded.item_map) == 2
        assert list(loaded.table) == [(0, 0, 5.0, 2), (1, 0, 0.5, 0), (0, 1, 2.0, 1)]

    def test_empty_file(self, graph_service, tmp_path):
        path = tmp_path / "empty.tsv"
        path.write_text("", encoding="utf-8")
        with pytest.raises(EmptyDatasetError):
            graph_service.load_ratings(path)

    def test_duplicate_pair(self, graph_service, tmp_path):
        path = write_ratings(tmp_path / "r.tsv", [(1, 1, 3, 0), (1, 1, 4, 0)])
        with pytest.raises(DuplicateEdgeError):
            graph_service.load_ratings(path)


class TestLoadSplit:
    """Tests for train/test pairs."""

    def test_shared_id_space(self, toy_dataset, toy_files):
        rows = toy_rating_rows(seed=3, num_users=12, num_items=10, count=70)
        assert len(toy_dataset.train) == 60
        assert len(toy_dataset.test) == 10
        assert len(toy_dataset.user_map) == len({r[0] for r in rows})
        assert toy_dataset.graph.num_edges == 60
        first = rows[60]
        user = toy_dataset.user_map.to_internal([first[0]])[0]
        item = toy_dataset.item_map.to_internal([first[1]])[0]
        assert toy_dataset.test[0][:3] == (user, item, float(first[2]))

    def test_test_value_outside_train_scale(self, graph_service, tmp_path):
        train = write_ratings(tmp_path / "a.base", [(1, 1, 3, 0), (2, 1, 4, 0)])
        test = write_ratings(tmp_path / "a.test", [(1, 2, 5, 0)])
        with pytest.raises(ScaleError) as exc_info:
            graph_service.load_split(train, test)
        assert exc_info.value.offenders == [5.0]

    def test_random_split_is_seeded(self, graph_service, tmp_path):
        path = write_ratings(tmp_path / "ratings.dat", toy_rating_rows(count=50), sep="::")
        loaded = graph_service.load_ratings(path, "dat")
        a = graph_service.random_split(loaded, 0.1, seed=4)
        b = graph_service.random_split(loaded, 0.1, seed=4)
        assert len(a.test) == 5
        assert len(a.train) == 45
        np.testing.assert_array_equal(a.test.pairs(), b.test.pairs())

    def test_load_dataset_random_preset(self, graph_service, tmp_path):
        preset = DATASET_PRESETS["ml1m"]
        write_ratings(tmp_path / preset.train_file, toy_rating_rows(count=40), sep="::")
        dataset = graph_service.load_dataset(preset, tmp_path, seed=1)
        assert dataset.name == "ml1m"
        assert len(dataset.train) + len(dataset.test) == 40


class TestBuildGraph:
    """Tests for adjacency construction."""

    def test_single_edge(self, graph_service):
        table = RatingTable.from_triples([(0, 0, 4.0, 3)])
        graph = graph_service.build_graph(table, 1, 1, FIVE_STARS)
        assert graph.num_edges == 1
        np.testing.assert_array_equal(graph.neighbors(NodeKind.USER, 0, rating_type=3), [0])
        assert graph.degree(NodeKind.USER, 0, rating_type=2) == 0

    def test_isolated_nodes(self, graph_service):
        graph = graph_service.build_graph(RatingTable.from_triples([(1, 2, 1.0, 0)]), 3, 4, FIVE_STARS)
        assert graph.degree(NodeKind.USER, 0) == 0
        assert graph.degree(NodeKind.ITEM, 3) == 0

    def test_id_out_of_range(self, graph_service):
        with pytest.raises(GraphIndexError):
            graph_service.build_graph(RatingTable.from_triples([(2, 0, 1.0, 0)]), 2, 1, FIVE_STARS)

    def test_duplicate(self, graph_service):
        table = RatingTable.from_triples([(0, 0, 1.0, 0), (0, 0, 2.0, 1)])
        with pytest.raises(DuplicateEdgeError):
            graph_service.build_graph(table, 1, 1, FIVE_STARS)

    def test_degrees_match_random_table(self, graph_service, rng):
        table = random_table(rng, 20, 15, 80)
        graph = graph_service.build_graph(table, 20, 15, FIVE_STARS)
        for r in range(5):
            for u in range(20):
                expected = int(np.sum((table.users == u) & (table.types == r)))
                assert graph.degree(NodeKind.USER, u, rating_type=r) == expected


class TestSparsify:
    """Tests for edge subsampling."""

    def test_keeps_ceil_fraction(self, graph_service, rng):
        graph = graph_service.build_graph(random_table(rng, 20, 15, 81), 20, 15, FIVE_STARS)
        sparse = graph_service.sparsify(graph, 0.1, seed=3)
        assert sparse.num_edges == 9
        assert sparse.num_users == 20
        for u, i, t in zip(sparse.edge_users, sparse.edge_items, sparse.edge_types):
            assert graph.rating_type(int(u), int(i)) == t

    def test_same_seed_same_edges(self, graph_service, rng):
        graph = graph_service.build_graph(random_table(rng, 20, 15, 50), 20, 15, FIVE_STARS)
        a = graph_service.sparsify(graph, 0.5, seed=3)
        b = graph_service.sparsify(graph, 0.5, seed=3)
        np.testing.assert_array_equal(a.edge_users, b.edge_users)
        np.testing.assert_array_equal(a.edge_items, b.edge_items)

    def test_full_fraction_keeps_everything(self, graph_service):
        graph = like_path_graph()
        assert graph_service.sparsify(graph, 1.0, seed=0).num_edges == graph.num_edges

    @pytest.mark.parametrize("fraction", [0.0, 1.5])
    def test_bad_fraction(self, graph_service, fraction):
        with pytest.raises(UsageError):
            graph_service.sparsify(like_path_graph(), fraction, seed=0)

    def test_empty_graph(self, graph_service):
        with pytest.raises(EmptyDatasetError):
            graph_service.sparsify(make_graph([], 2, 2), 0.5, seed=0)


class TestRemoveEdgeAndRetype:
    """Tests for the derived graph operations."""

    def test_remove_edge(self, graph_service):
        graph = like_path_graph()
        view = graph_service.remove_edge(graph, 0, 1)
        assert not view.has_edge(0, 1)
        assert view.num_edges == 3
        assert graph.has_edge(0, 1)

    def test_remove_absent_edge_is_noop(self, graph_service):
        assert graph_service.remove_edge(like_path_graph(), 0, 0).num_edges == 4

    def test_retype(self, graph_service):
        graph = like_path_graph()
        binary = RatingScale(values=[0.0, 1.0])
        retyped = graph_service.retype(graph, np.array([0, 0, 0, 1, 1]), binary)
        assert retyped.scale == binary
        assert retyped.rating_type(0, 1) == 1
        assert retyped.rating_type(1, 0) == 0


class TestPersistence:
    """Tests for edge lists, id maps and scales on disk."""

    def test_edge_list_round_trip(self, graph_service, tmp_path):
        graph = like_path_graph()
        path = tmp_path / "edges.tsv"
        graph_service.export_edge_list(graph, path)
        restored = graph_service.read_edge_list(path, graph.num_users, graph.num_items, graph.scale)
        np.testing.assert_array_equal(restored.edge_users, graph.edge_users)
        np.testing.assert_array_equal(restored.edge_items, graph.edge_items)
        np.testing.assert_array_equal(restored.edge_types, graph.edge_types)

    def test_id_maps_and_scale(self, graph_service, toy_dataset, tmp_path):
        graph_service.write_id_maps(toy_dataset.user_map, toy_dataset.item_map, tmp_path)
        users, items = graph_service.read_id_maps(tmp_path)
        np.testing.assert_array_equal(users.external, toy_dataset.user_map.external)
        np.testing.assert_array_equal(items.external, toy_dataset.item_map.external)
        graph_service.write_scale(toy_dataset.scale, tmp_path / "scale.json")
        assert graph_service.read_scale(tmp_path / "scale.json") == toy_dataset.scale

    def test_content_features(self, graph_service, toy_dataset, tmp_path):
        first_user = int(toy_dataset.user_map.external[0])
        first_item = int(toy_dataset.item_map.external[0])
        (tmp_path / "u.tsv").write_text(f"{first_user}\t1\t0\n99999\t5\t5\n", encoding="utf-8")
        (tmp_path / "i.tsv").write_text(f"{first_item}\t0.5\n", encoding="utf-8")
        content = graph_service.load_content_features(tmp_path / "u.tsv", tmp_path / "i.tsv",
                                                      toy_dataset.user_map, toy_dataset.item_map)
        assert content.dim == 3
        np.testing.assert_array_equal(content.user_features[0], [1.0, 0.0])
        assert content.user_present[0] and not content.user_present[1:].any()
        assert content.item_features[0, 0] == 0.5
