from dataclasses import dataclass, field
from enum import Enum
from typing import FrozenSet, Iterator, List, NamedTuple, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator

from igmc.core.exceptions import GraphIndexError, ScaleError


class NodeKind(str, Enum):
    USER = "user"
    ITEM = "item"


class RatingScale(BaseModel):
    """
    Ordered set of distinct rating values; the position of a value is its rating-type index.

    Attributes:
        values (List[float]): Strictly ascending rating values r_1 < r_2 < ... .
    """
    values: List[float] = Field(default_factory=list)

    model_config = ConfigDict(frozen=True)

    @field_validator("values")
    @classmethod
    def check_strictly_ascending(cls, v: List[float]) -> List[float]:
        if any(b <= a for a, b in zip(v, v[1:])):
            raise ValueError(f"rating values must be strictly ascending, got {v}")
        return v

    def __len__(self) -> int:
        return len(self.values)

    @property
    def min_value(self) -> float:
        return self.values[0]

    @property
    def max_value(self) -> float:
        return self.values[-1]

    def index_of(self, value: float) -> int:
        return int(self.indices_of(np.array([value]))[0])

    def indices_of(self, values: np.ndarray) -> np.ndarray:
        """Rating-type index of every value; ScaleError listing the values absent from the scale."""
        values = np.asarray(values, dtype=np.float64)
        scale = np.asarray(self.values, dtype=np.float64)
        if scale.size == 0:
            if values.size:
                raise ScaleError("rating scale is empty", offenders=sorted(set(values.tolist())))
            return np.zeros(0, dtype=np.int64)
        pos = np.clip(np.searchsorted(scale, values), 0, scale.size - 1)
        missing = scale[pos] != values
        if missing.any():
            offenders = sorted(set(values[missing].tolist()))
            raise ScaleError(f"rating values {offenders} are not in the scale {self.values}", offenders=offenders)
        return pos.astype(np.int64)


class RatingTriple(NamedTuple):
    user_id: int
    item_id: int
    rating_value: float
    rating_type_index: int


@dataclass(frozen=True, eq=False)
class RatingTable:
    """
    Column-oriented list of RatingTriple records (internal ids).

    Iterating yields RatingTriple tuples in stored order.
    """
    users: np.ndarray
    items: np.ndarray
    values: np.ndarray
    types: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "users", np.asarray(self.users, dtype=np.int64))
        object.__setattr__(self, "items", np.asarray(self.items, dtype=np.int64))
        object.__setattr__(self, "values", np.asarray(self.values, dtype=np.float64))
        object.__setattr__(self, "types", np.asarray(self.types, dtype=np.int64))

    @classmethod
    def from_triples(cls, triples) -> "RatingTable":
        triples = list(triples)
        if not triples:
            return cls.empty()
        users, items, values, types = zip(*triples)
        return cls(np.array(users), np.array(items), np.array(values), np.array(types))

    @classmethod
    def empty(cls) -> "RatingTable":
        return cls(np.zeros(0), np.zeros(0), np.zeros(0), np.zeros(0))

    def __len__(self) -> int:
        return int(self.users.size)

    def __iter__(self) -> Iterator[RatingTriple]:
        for u, i, r, t in zip(self.users.tolist(), self.items.tolist(), self.values.tolist(), self.types.tolist()):
            yield RatingTriple(u, i, r, t)

    def __getitem__(self, index: int) -> RatingTriple:
        return RatingTriple(int(self.users[index]), int(self.items[index]),
                            float(self.values[index]), int(self.types[index]))

    def subset(self, index) -> "RatingTable":
        return RatingTable(self.users[index], self.items[index], self.values[index], self.types[index])

    def pairs(self) -> np.ndarray:
        return np.stack([self.users, self.items], axis=1)


@dataclass(frozen=True, eq=False)
class IdMap:
    """Two-way map between external ids and dense 0-based internal ids (index into `external`)."""
    external: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "external", np.asarray(self.external, dtype=np.int64))

    def __len__(self) -> int:
        return int(self.external.size)

    def to_internal(self, ids) -> np.ndarray:
        ids = np.asarray(ids, dtype=np.int64)
        if self.external.size == 0:
            if ids.size:
                raise GraphIndexError(f"unknown external ids {ids[:10].tolist()}")
            return ids
        pos = np.clip(np.searchsorted(self.external, ids), 0, self.external.size - 1)
        unknown = self.external[pos] != ids
        if unknown.any():
            raise GraphIndexError(f"unknown external ids {ids[unknown][:10].tolist()}")
        return pos

    def to_external(self, ids) -> np.ndarray:
        return self.external[np.asarray(ids, dtype=np.int64)]


@dataclass(frozen=True, eq=False)
class TypedAdjacency:
    """Neighbor lists of one rating type: offsets plus flat sorted arrays, both directions."""
    user_indptr: np.ndarray
    user_items: np.ndarray
    item_indptr: np.ndarray
    item_users: np.ndarray


@dataclass(frozen=True, eq=False)
class BipartiteGraph:
    """
    Immutable user/item rating graph.

    Attributes:
        num_users (int): Number of user nodes.
        num_items (int): Number of item nodes.
        scale (RatingScale): Rating-type vocabulary.
        edge_users, edge_items, edge_types (np.ndarray): Edge list sorted by (user, item).
        user_indptr, user_items, user_types (np.ndarray): All-type neighbor lists of users.
        item_indptr, item_users, item_types (np.ndarray): All-type neighbor lists of items.
        typed (List[TypedAdjacency]): Per rating-type neighbor lists.
    """
    num_users: int
    num_items: int
    scale: RatingScale
    edge_users: np.ndarray
    edge_items: np.ndarray
    edge_types: np.ndarray
    user_indptr: np.ndarray
    user_items: np.ndarray
    user_types: np.ndarray
    item_indptr: np.ndarray
    item_users: np.ndarray
    item_types: np.ndarray
    typed: List[TypedAdjacency] = field(default_factory=list)

    @property
    def graph(self) -> "BipartiteGraph":
        return self

    @property
    def excluded_pairs(self) -> FrozenSet[Tuple[int, int]]:
        return frozenset()

    @property
    def num_edges(self) -> int:
        return int(self.edge_users.size)

    @property
    def num_rating_types(self) -> int:
        return len(self.scale)

    def check_node(self, kind: NodeKind, node: int) -> None:
        bound = self.num_users if kind == NodeKind.USER else self.num_items
        if not 0 <= node < bound:
            raise GraphIndexError(f"{kind.value} id {node} out of range [0, {bound})")

    def neighbors(self, kind: NodeKind, node: int, rating_type: Optional[int] = None) -> np.ndarray:
        """Sorted neighbor ids of a node, all types or one rating type."""
        self.check_node(kind, node)
        if rating_type is None:
            indptr, nbrs = ((self.user_indptr, self.user_items) if kind == NodeKind.USER
                            else (self.item_indptr, self.item_users))
        else:
            adj = self.typed[rating_type]
            indptr, nbrs = ((adj.user_indptr, adj.user_items) if kind == NodeKind.USER
                            else (adj.item_indptr, adj.item_users))
        return nbrs[indptr[node]:indptr[node + 1]]

    def degree(self, kind: NodeKind, node: int, rating_type: Optional[int] = None) -> int:
        return int(self.neighbors(kind, node, rating_type).size)

    def gather(self, kind: NodeKind, nodes: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """All-type adjacency of several nodes at once, as flat (owner, neighbor, type) arrays."""
        indptr, nbrs, types = ((self.user_indptr, self.user_items, self.user_types) if kind == NodeKind.USER
                               else (self.item_indptr, self.item_users, self.item_types))
        nodes = np.asarray(nodes, dtype=np.int64)
        starts = indptr[nodes]
        lengths = indptr[nodes + 1] - starts
        total = int(lengths.sum())
        if total == 0:
            empty = np.zeros(0, dtype=np.int64)
            return empty, empty, empty
        owners = np.repeat(nodes, lengths)
        offsets = np.arange(total, dtype=np.int64) - np.repeat(np.cumsum(lengths) - lengths, lengths)
        positions = offsets + np.repeat(starts, lengths)
        return owners, nbrs[positions], types[positions]

    def degree_sum(self, kind: NodeKind, nodes: np.ndarray) -> int:
        indptr = self.user_indptr if kind == NodeKind.USER else self.item_indptr
        nodes = np.asarray(nodes, dtype=np.int64)
        return int((indptr[nodes + 1] - indptr[nodes]).sum())

    def rating_type(self, user: int, item: int) -> Optional[int]:
        """Type of the (user, item) edge, None when absent."""
        self.check_node(NodeKind.USER, user)
        self.check_node(NodeKind.ITEM, item)
        start, end = self.user_indptr[user], self.user_indptr[user + 1]
        pos = start + np.searchsorted(self.user_items[start:end], item)
        if pos < end and self.user_items[pos] == item:
            return int(self.user_types[pos])
        return None

    def has_edge(self, user: int, item: int) -> bool:
        return self.rating_type(user, item) is not None

    def edges(self) -> RatingTable:
        values = np.asarray(self.scale.values, dtype=np.float64)[self.edge_types] if self.num_edges else np.zeros(0)
        return RatingTable(self.edge_users, self.edge_items, values, self.edge_types)


@dataclass(frozen=True, eq=False)
class GraphView:
    """Logical view of a graph with one (user, item) pair hidden; the graph itself is untouched."""
    graph: BipartiteGraph
    user: int
    item: int

    @property
    def excluded_pairs(self) -> FrozenSet[Tuple[int, int]]:
        return frozenset({(self.user, self.item)})

    @property
    def scale(self) -> RatingScale:
        return self.graph.scale

    @property
    def num_users(self) -> int:
        return self.graph.num_users

    @property
    def num_items(self) -> int:
        return self.graph.num_items

    @property
    def num_edges(self) -> int:
        return self.graph.num_edges - int(self.graph.has_edge(self.user, self.item))

    def neighbors(self, kind: NodeKind, node: int, rating_type: Optional[int] = None) -> np.ndarray:
        nbrs = self.graph.neighbors(kind, node, rating_type)
        if kind == NodeKind.USER and node == self.user:
            return nbrs[nbrs != self.item]
        if kind == NodeKind.ITEM and node == self.item:
            return nbrs[nbrs != self.user]
        return nbrs

    def degree(self, kind: NodeKind, node: int, rating_type: Optional[int] = None) -> int:
        return int(self.neighbors(kind, node, rating_type).size)

    def rating_type(self, user: int, item: int) -> Optional[int]:
        if (user, item) == (self.user, self.item):
            return None
        return self.graph.rating_type(user, item)

    def has_edge(self, user: int, item: int) -> bool:
        return self.rating_type(user, item) is not None

    def edges(self) -> RatingTable:
        table = self.graph.edges()
        keep = ~((table.users == self.user) & (table.items == self.item))
        return table.subset(keep)


GraphLike = Union[BipartiteGraph, GraphView]


@dataclass(frozen=True, eq=False)
class ContentFeatures:
    """Per-node side features used by the content ablation; rows indexed by internal id."""
    user_features: np.ndarray
    item_features: np.ndarray
    user_present: np.ndarray
    item_present: np.ndarray

    @property
    def dim(self) -> int:
        return int(self.user_features.shape[1] + self.item_features.shape[1])
