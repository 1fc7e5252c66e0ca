"""Graph service: rating files in, immutable bipartite graphs out."""

import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Tuple, Union

import numpy as np
import pandas as pd

from igmc.core.exceptions import DuplicateEdgeError, EmptyDatasetError, GraphIndexError, InputError, \
    raise_argument_error
from igmc.models.graph import BipartiteGraph, ContentFeatures, GraphView, IdMap, RatingScale, RatingTable, \
    TypedAdjacency
from igmc.schemas.dataset import DatasetPreset, SplitKind
from igmc.utils.common import derive_rng
from igmc.utils.ratings_import import RatingFormat, analyse_ratings, read_feature_file

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


@dataclass(frozen=True, eq=False)
class LoadedRatings:
    """Ratings of one file with the scale and id maps built from it."""
    table: RatingTable
    scale: RatingScale
    user_map: IdMap
    item_map: IdMap


@dataclass(frozen=True, eq=False)
class Dataset:
    """Train/test split sharing one id space; the graph is built from the train ratings only."""
    name: str
    train: RatingTable
    test: RatingTable
    graph: BipartiteGraph
    user_map: IdMap
    item_map: IdMap

    @property
    def scale(self) -> RatingScale:
        return self.graph.scale


def _csr(rows: np.ndarray, cols: np.ndarray, types: np.ndarray, num_rows: int) -> Tuple[np.ndarray, ...]:
    order = np.lexsort((cols, rows))
    counts = np.bincount(rows, minlength=num_rows)
    indptr = np.zeros(num_rows + 1, dtype=np.int64)
    np.cumsum(counts, out=indptr[1:])
    return indptr, cols[order], types[order]


class GraphService:
    """Service class for rating graph operations."""

    def load_ratings(self, path: PathLike, fmt: Union[RatingFormat, str] = RatingFormat.TSV4) -> LoadedRatings:
        """
        Load a rating file, compact its ids and build its rating scale.

        Args:
            path: Rating file, one user/item/rating[/timestamp] record per line.
            fmt: Column layout (tsv4, tsv3 or dat).

        Returns:
            LoadedRatings: Triples in file order, scale of the distinct values, id maps.

        Raises:
            EmptyDatasetError, ParseError, DuplicateEdgeError: On bad input.
        """
        df = analyse_ratings(path, RatingFormat(fmt))
        user_map = IdMap(np.unique(df["user"].to_numpy()))
        item_map = IdMap(np.unique(df["item"].to_numpy()))
        scale = RatingScale(values=np.unique(df["rating"].to_numpy()).tolist())
        table = RatingTable(
            user_map.to_internal(df["user"].to_numpy()),
            item_map.to_internal(df["item"].to_numpy()),
            df["rating"].to_numpy(),
            scale.indices_of(df["rating"].to_numpy()),
        )
        logger.info(f"Loaded {len(table)} ratings from {path}: {len(user_map)} users, "
                    f"{len(item_map)} items, scale {scale.values}")
        return LoadedRatings(table, scale, user_map, item_map)

    def load_split(self, train_path: PathLike, test_path: PathLike,
                   fmt: Union[RatingFormat, str] = RatingFormat.TSV4, name: str = "custom") -> Dataset:
        """
        Load a train/test pair of files into one id space.

        Ids are compacted over the union of both files, so users/items seen only at test time
        still get an id (and an isolated node in the training graph). The scale comes from the
        training file only.

        Raises:
            ScaleError: If a test rating value is absent from the training scale.
        """
        train_df = analyse_ratings(train_path, RatingFormat(fmt))
        test_df = analyse_ratings(test_path, RatingFormat(fmt))
        user_map = IdMap(np.unique(np.concatenate([train_df["user"].to_numpy(), test_df["user"].to_numpy()])))
        item_map = IdMap(np.unique(np.concatenate([train_df["item"].to_numpy(), test_df["item"].to_numpy()])))
        scale = RatingScale(values=np.unique(train_df["rating"].to_numpy()).tolist())

        def to_table(df: pd.DataFrame) -> RatingTable:
            return RatingTable(user_map.to_internal(df["user"].to_numpy()),
                               item_map.to_internal(df["item"].to_numpy()),
                               df["rating"].to_numpy(),
                               scale.indices_of(df["rating"].to_numpy()))

        train, test = to_table(train_df), to_table(test_df)
        graph = self.build_graph(train, len(user_map), len(item_map), scale)
        logger.info(f"Dataset {name}: {len(train)} train / {len(test)} test ratings, "
                    f"{len(user_map)} users, {len(item_map)} items")
        return Dataset(name, train, test, graph, user_map, item_map)

    def random_split(self, loaded: LoadedRatings, test_fraction: float = 0.1, seed: int = 0,
                     name: str = "custom") -> Dataset:
        """Seeded random train/test split of one rating file (the ML-1M protocol)."""
        if not 0.0 < test_fraction < 1.0:
            raise_argument_error("test_fraction", test_fraction, "a value in (0, 1)")
        n = len(loaded.table)
        order = derive_rng(seed, 0).permutation(n)
        n_test = int(round(test_fraction * n))
        test, train = loaded.table.subset(np.sort(order[:n_test])), loaded.table.subset(np.sort(order[n_test:]))
        scale = RatingScale(values=np.unique(train.values).tolist())
        train = RatingTable(train.users, train.items, train.values, scale.indices_of(train.values))
        test = RatingTable(test.users, test.items, test.values, scale.indices_of(test.values))
        graph = self.build_graph(train, len(loaded.user_map), len(loaded.item_map), scale)
        return Dataset(name, train, test, graph, loaded.user_map, loaded.item_map)

    def build_graph(self, triples: RatingTable, num_users: int, num_items: int,
                    scale: RatingScale) -> BipartiteGraph:
        """
        Build per-type and all-type compressed neighbor lists from a rating table.

        Raises:
            GraphIndexError: If an id or type index is out of bounds.
            DuplicateEdgeError: If a (user, item) pair occurs twice.
        """
        users, items, types = triples.users, triples.items, triples.types
        for label, ids, bound in (("user", users, num_users), ("item", items, num_items),
                                  ("rating type", types, len(scale))):
            if ids.size and (ids.min() < 0 or ids.max() >= bound):
                bad = ids[(ids < 0) | (ids >= bound)][0]
                raise GraphIndexError(f"{label} id {bad} out of range [0, {bound})")

        order = np.lexsort((items, users))
        users, items, types = users[order], items[order], types[order]
        if users.size > 1:
            dup = (users[1:] == users[:-1]) & (items[1:] == items[:-1])
            if dup.any():
                k = int(np.flatnonzero(dup)[0])
                raise DuplicateEdgeError(f"Duplicate edge ({users[k]}, {items[k]})")

        user_indptr, user_items, user_types = _csr(users, items, types, num_users)
        item_indptr, item_users, item_types = _csr(items, users, types, num_items)
        typed = []
        for r in range(len(scale)):
            mask = types == r
            u_ptr, u_nbrs, _ = _csr(users[mask], items[mask], types[mask], num_users)
            i_ptr, i_nbrs, _ = _csr(items[mask], users[mask], types[mask], num_items)
            typed.append(TypedAdjacency(u_ptr, u_nbrs, i_ptr, i_nbrs))

        return BipartiteGraph(
            num_users=num_users, num_items=num_items, scale=scale,
            edge_users=users, edge_items=items, edge_types=types,
            user_indptr=user_indptr, user_items=user_items, user_types=user_types,
            item_indptr=item_indptr, item_users=item_users, item_types=item_types,
            typed=typed,
        )

    def sparsify(self, graph: BipartiteGraph, keep_fraction: float, seed: int) -> BipartiteGraph:
        """
        Keep ceil(keep_fraction * |E|) edges chosen by a seeded shuffle.

        Raises:
            UsageError: If keep_fraction is outside (0, 1].
            EmptyDatasetError: If the graph has no edges.
        """
        if not 0.0 < keep_fraction <= 1.0:
            raise_argument_error("keep_fraction", keep_fraction, "a value in (0, 1]")
        if graph.num_edges == 0:
            raise EmptyDatasetError("cannot sparsify an empty graph")
        keep = math.ceil(keep_fraction * graph.num_edges)
        chosen = np.sort(derive_rng(seed, 1).permutation(graph.num_edges)[:keep])
        logger.info(f"Sparsified graph to {keep}/{graph.num_edges} edges (fraction {keep_fraction}, seed {seed})")
        return self.build_graph(graph.edges().subset(chosen), graph.num_users, graph.num_items, graph.scale)

    def remove_edge(self, graph: BipartiteGraph, user_id: int, item_id: int) -> GraphView:
        """View of the graph with (user_id, item_id) hidden; a no-op when the edge is absent."""
        return GraphView(graph, int(user_id), int(item_id))

    def retype(self, graph: BipartiteGraph, type_map: np.ndarray, scale: RatingScale) -> BipartiteGraph:
        """Rebuild a graph with every edge type t replaced by type_map[t] in a new scale."""
        edges = graph.edges()
        new_types = np.asarray(type_map, dtype=np.int64)[edges.types]
        values = np.asarray(scale.values, dtype=np.float64)[new_types]
        return self.build_graph(RatingTable(edges.users, edges.items, values, new_types),
                                graph.num_users, graph.num_items, scale)

    # --- persistence -------------------------------------------------------

    def export_edge_list(self, graph: BipartiteGraph, path: PathLike) -> None:
        """Write `user<TAB>item<TAB>rating` with internal ids, sorted by (user, item)."""
        self.export_table(graph.edges(), path)

    def export_table(self, table: RatingTable, path: PathLike) -> None:
        """Write a rating table as `user<TAB>item<TAB>rating`, internal ids, in stored order."""
        pd.DataFrame({"user": table.users, "item": table.items, "rating": table.values}) \
            .to_csv(path, sep="\t", header=False, index=False)

    def read_edge_list(self, path: PathLike, num_users: int, num_items: int, scale: RatingScale) -> BipartiteGraph:
        """Rebuild a graph from an exported edge list (internal ids kept as-is)."""
        df = analyse_ratings(path, RatingFormat.TSV3)
        table = RatingTable(df["user"].to_numpy(), df["item"].to_numpy(), df["rating"].to_numpy(),
                            scale.indices_of(df["rating"].to_numpy()))
        return self.build_graph(table, num_users, num_items, scale)

    def write_id_maps(self, user_map: IdMap, item_map: IdMap, directory: PathLike) -> None:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        for name, id_map in (("users", user_map), ("items", item_map)):
            pd.DataFrame({"external_id": id_map.external, "internal_id": np.arange(len(id_map))}) \
                .to_csv(directory / f"{name}.idmap.tsv", sep="\t", header=False, index=False)

    def read_id_maps(self, directory: PathLike) -> Tuple[IdMap, IdMap]:
        directory = Path(directory)
        maps = []
        for name in ("users", "items"):
            path = directory / f"{name}.idmap.tsv"
            if not path.is_file():
                raise InputError(f"Id map {path} not found")
            df = pd.read_csv(path, sep="\t", header=None, names=["external_id", "internal_id"])
            df = df.sort_values("internal_id")
            maps.append(IdMap(df["external_id"].to_numpy()))
        return maps[0], maps[1]

    def write_scale(self, scale: RatingScale, path: PathLike) -> None:
        Path(path).write_text(scale.model_dump_json(), encoding="utf-8")

    def read_scale(self, path: PathLike) -> RatingScale:
        return RatingScale.model_validate(json.loads(Path(path).read_text(encoding="utf-8")))

    def load_content_features(self, user_path: PathLike, item_path: PathLike,
                              user_map: IdMap, item_map: IdMap) -> ContentFeatures:
        """
        Load user and item feature files into rows indexed by internal id.

        Rows of external ids absent from the id maps are ignored; internal ids without a row are
        flagged as missing and rejected when a target needs them.
        """
        matrices = []
        for path, id_map in ((user_path, user_map), (item_path, item_map)):
            df = read_feature_file(path)
            external = df.iloc[:, 0].to_numpy(dtype=np.int64)
            features = df.iloc[:, 1:].to_numpy(dtype=np.float64)
            known = np.isin(external, id_map.external)
            rows = np.zeros((len(id_map), features.shape[1]), dtype=np.float64)
            present = np.zeros(len(id_map), dtype=bool)
            internal = id_map.to_internal(external[known])
            rows[internal] = features[known]
            present[internal] = True
            matrices.append((rows, present))
        (users, users_present), (items, items_present) = matrices
        return ContentFeatures(users, items, users_present, items_present)

    def load_dataset(self, preset: DatasetPreset, directory: PathLike, seed: int = 0) -> Dataset:
        """
        Load a dataset laid out as its preset describes.

        Raises:
            InputError: If an expected file is missing from the directory.
        """
        directory = Path(directory)
        if preset.split == SplitKind.RANDOM:
            loaded = self.load_ratings(directory / preset.train_file, preset.fmt)
            return self.random_split(loaded, preset.test_fraction, seed, preset.name)
        return self.load_split(directory / preset.train_file, directory / preset.test_file, preset.fmt, preset.name)
