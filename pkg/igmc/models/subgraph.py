from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np

from igmc.models.graph import NodeKind

TARGET_USER = 0
TARGET_ITEM = 1


@dataclass(frozen=True, eq=False)
class EnclosingSubgraph:
    """
    h-hop enclosing subgraph around a (user, item) pair, target edge removed.

    Node 0 is the target user and node 1 the target item; the remaining nodes are ordered
    by (hop, kind, global id).

    Attributes:
        labels (np.ndarray): Integer label per node (2*hop for users, 2*hop+1 for items).
        kinds (np.ndarray): 0 for user nodes, 1 for item nodes.
        global_ids (np.ndarray): Id of each node in the graph it was extracted from.
        edge_src (np.ndarray): Local index of the user end of each edge.
        edge_dst (np.ndarray): Local index of the item end of each edge.
        edge_type (np.ndarray): Rating-type index of each edge.
        true_rating (float): Observed rating of the pair, when known.
    """
    labels: np.ndarray
    kinds: np.ndarray
    global_ids: np.ndarray
    edge_src: np.ndarray
    edge_dst: np.ndarray
    edge_type: np.ndarray
    true_rating: Optional[float] = None

    @property
    def node_count(self) -> int:
        return int(self.labels.size)

    @property
    def edge_count(self) -> int:
        return int(self.edge_src.size)

    @property
    def hops(self) -> np.ndarray:
        return self.labels // 2

    @property
    def target_user_local(self) -> int:
        return TARGET_USER

    @property
    def target_item_local(self) -> int:
        return TARGET_ITEM

    @property
    def user_id(self) -> int:
        return int(self.global_ids[TARGET_USER])

    @property
    def item_id(self) -> int:
        return int(self.global_ids[TARGET_ITEM])

    def node_origin(self, index: int) -> Tuple[NodeKind, int]:
        kind = NodeKind.USER if self.kinds[index] == 0 else NodeKind.ITEM
        return kind, int(self.global_ids[index])

    def edges(self) -> List[Tuple[int, int, int]]:
        return list(zip(self.edge_src.tolist(), self.edge_dst.tolist(), self.edge_type.tolist()))


@dataclass(frozen=True, eq=False)
class FeaturizedSubgraph:
    """
    Model-ready form of an enclosing subgraph.

    Attributes:
        x0 (np.ndarray): node_count x (2h+2) one-hot encoding of the node labels.
        forward_edges (Dict[int, np.ndarray]): Per rating type, a 2 x E_r array of (user, item) local indices.
        backward_edges (Dict[int, np.ndarray]): Per rating type, the same edges as (item, user).
        num_rating_types (int): Size of the rating scale the edge types index into.
        user_id (int): Global id of the target user.
        item_id (int): Global id of the target item.
        true_rating (float): Observed rating, when known.
    """
    x0: np.ndarray
    forward_edges: Dict[int, np.ndarray]
    backward_edges: Dict[int, np.ndarray]
    num_rating_types: int
    user_id: int
    item_id: int
    true_rating: Optional[float] = None

    @property
    def node_count(self) -> int:
        return int(self.x0.shape[0])

    @property
    def edge_count(self) -> int:
        return int(sum(e.shape[1] for e in self.forward_edges.values()))

    @property
    def target_user_local(self) -> int:
        return TARGET_USER

    @property
    def target_item_local(self) -> int:
        return TARGET_ITEM
