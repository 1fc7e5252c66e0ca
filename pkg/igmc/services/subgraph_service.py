"""Enclosing subgraph extraction, node labeling, featurization and export."""

import json
import logging
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from igmc.core.exceptions import InternalError, raise_argument_error, raise_dimension_error
from igmc.models.graph import BipartiteGraph, GraphLike, NodeKind, RatingScale
from igmc.models.subgraph import EnclosingSubgraph, FeaturizedSubgraph
from igmc.utils.common import derive_rng

logger = logging.getLogger(__name__)

USER_COLOR = "#d62728"
ITEM_COLOR = "#1f77b4"

_worker_graph: Optional[GraphLike] = None


def _drop_pairs(owners: np.ndarray, nbrs: np.ndarray, excluded: Iterable[Tuple[int, int]],
                owner_kind: NodeKind) -> np.ndarray:
    keep = np.ones(owners.size, dtype=bool)
    for user, item in excluded:
        if owner_kind == NodeKind.USER:
            keep &= ~((owners == user) & (nbrs == item))
        else:
            keep &= ~((owners == item) & (nbrs == user))
    return keep


def _subsample(nodes: np.ndarray, cap: Optional[int], rng: np.random.Generator) -> np.ndarray:
    if cap is None or nodes.size <= cap:
        return nodes
    return np.sort(rng.choice(nodes, size=cap, replace=False))


def rating_color(rating_type: int, num_rating_types: int) -> str:
    """Blue for the lowest rating type through red for the highest."""
    t = rating_type / max(num_rating_types - 1, 1)
    red, blue = int(round(255 * t)), int(round(255 * (1 - t)))
    return f"#{red:02x}40{blue:02x}"


class SubgraphService:
    """Service class for enclosing subgraph operations."""

    def extract(self, graph: GraphLike, u: int, v: int, h: int = 1, max_nodes_per_hop: Optional[int] = None,
                seed: int = 0, true_rating: Optional[float] = None) -> EnclosingSubgraph:
        """
        Extract the h-hop enclosing subgraph around (u, v).

        Fringes are expanded alternately by BFS (new users from the item fringe, new items
        from the user fringe), minus already-visited nodes. With max_nodes_per_hop set, each new
        fringe is down-sampled with a generator seeded from (seed, u, v) before joining the node
        set. The subgraph is induced on the collected nodes, with the target edge left out.

        Args:
            graph: Graph or view to extract from; pairs hidden by a view stay hidden.
            u (int): Target user id.
            v (int): Target item id.
            h (int): Number of hops, >= 1.
            max_nodes_per_hop (int): Optional cap on each fringe.
            seed (int): Global seed for the subsampling.
            true_rating (float): Stored on the result.

        Returns:
            EnclosingSubgraph: Isolated pairs give a 2-node, 0-edge subgraph.
        """
        if h < 1:
            raise_argument_error("h", h, "an integer >= 1")
        base: BipartiteGraph = graph.graph
        u, v = int(u), int(v)
        base.check_node(NodeKind.USER, u)
        base.check_node(NodeKind.ITEM, v)
        excluded = {(u, v)} | set(graph.excluded_pairs)
        rng = derive_rng(seed, u, v)

        user_layers: List[np.ndarray] = [np.array([u], dtype=np.int64)]
        item_layers: List[np.ndarray] = [np.array([v], dtype=np.int64)]
        u_fringe, v_fringe = user_layers[0], item_layers[0]
        u_visited, v_visited = user_layers[0], item_layers[0]

        for _ in range(h):
            owners, items, _ = base.gather(NodeKind.USER, u_fringe)
            new_items = items[_drop_pairs(owners, items, excluded, NodeKind.USER)]
            owners, users, _ = base.gather(NodeKind.ITEM, v_fringe)
            new_users = users[_drop_pairs(owners, users, excluded, NodeKind.ITEM)]

            new_users = np.setdiff1d(new_users, u_visited)
            new_items = np.setdiff1d(new_items, v_visited)
            new_users = _subsample(new_users, max_nodes_per_hop, rng)
            new_items = _subsample(new_items, max_nodes_per_hop, rng)
            u_visited = np.union1d(u_visited, new_users)
            v_visited = np.union1d(v_visited, new_items)
            if new_users.size == 0 and new_items.size == 0:
                break
            user_layers.append(new_users)
            item_layers.append(new_items)
            u_fringe, v_fringe = new_users, new_items

        kinds, ids, hops = [np.array([0, 1])], [np.array([u, v])], [np.array([0, 0])]
        for hop, (users_at, items_at) in enumerate(zip(user_layers[1:], item_layers[1:]), start=1):
            kinds += [np.zeros(users_at.size, dtype=np.int64), np.ones(items_at.size, dtype=np.int64)]
            ids += [users_at, items_at]
            hops += [np.full(users_at.size, hop), np.full(items_at.size, hop)]
        kinds = np.concatenate(kinds).astype(np.int64)
        ids = np.concatenate(ids).astype(np.int64)
        hops = np.concatenate(hops).astype(np.int64)
        labels = self.label_nodes(hops, kinds)

        src, dst, types = self._induced_edges(base, ids, kinds, excluded)
        return EnclosingSubgraph(labels=labels, kinds=kinds, global_ids=ids, edge_src=src, edge_dst=dst,
                                 edge_type=types, true_rating=true_rating)

    def _induced_edges(self, base: BipartiteGraph, ids: np.ndarray, kinds: np.ndarray,
                       excluded: Iterable[Tuple[int, int]]) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        user_local = np.flatnonzero(kinds == 0)
        item_local = np.flatnonzero(kinds == 1)
        user_ids, item_ids = ids[user_local], ids[item_local]

        # Walk the adjacency of whichever side has fewer incident edges
        if base.degree_sum(NodeKind.USER, user_ids) <= base.degree_sum(NodeKind.ITEM, item_ids):
            owners, nbrs, types = base.gather(NodeKind.USER, user_ids)
            edge_users, edge_items = owners, nbrs
        else:
            owners, nbrs, types = base.gather(NodeKind.ITEM, item_ids)
            edge_users, edge_items = nbrs, owners

        user_order, item_order = np.argsort(user_ids), np.argsort(item_ids)
        sorted_users, sorted_items = user_ids[user_order], item_ids[item_order]

        def locate(sorted_ids: np.ndarray, values: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
            if sorted_ids.size == 0:
                return np.zeros(values.size, dtype=bool), np.zeros(values.size, dtype=np.int64)
            pos = np.clip(np.searchsorted(sorted_ids, values), 0, sorted_ids.size - 1)
            return sorted_ids[pos] == values, pos

        user_hit, user_pos = locate(sorted_users, edge_users)
        item_hit, item_pos = locate(sorted_items, edge_items)
        keep = user_hit & item_hit
        for user, item in excluded:
            keep &= ~((edge_users == user) & (edge_items == item))

        src = user_local[user_order[user_pos[keep]]]
        dst = item_local[item_order[item_pos[keep]]]
        types = types[keep]
        order = np.lexsort((dst, src))
        return src[order].astype(np.int64), dst[order].astype(np.int64), types[order].astype(np.int64)

    def label_nodes(self, hop_of_node: Sequence[int], kind_of_node: Sequence[int]) -> np.ndarray:
        """
        Label users included at hop i with 2i and items with 2i + 1 (targets: 0 and 1).

        Raises:
            InternalError: If a node has no hop assignment (negative or missing hop).
        """
        hops = np.asarray(hop_of_node, dtype=np.int64)
        kinds = np.asarray(kind_of_node, dtype=np.int64)
        if hops.shape != kinds.shape:
            raise InternalError(f"{hops.size} hops for {kinds.size} nodes")
        if hops.size and hops.min() < 0:
            raise InternalError(f"node {int(np.flatnonzero(hops < 0)[0])} has no hop assignment")
        return 2 * hops + kinds

    def featurize(self, subgraph: EnclosingSubgraph, h: int, num_rating_types: int) -> FeaturizedSubgraph:
        """
        One-hot encode node labels into x0 (width 2h+2) and split edges per rating type in both directions.

        Raises:
            DimensionError: If a label exceeds 2h+1.
        """
        width = 2 * h + 2
        labels = subgraph.labels
        if labels.size and labels.max() >= width:
            raise_dimension_error("featurize", (int(labels.max()) + 1,), (width,))
        x0 = np.zeros((subgraph.node_count, width), dtype=np.float64)
        x0[np.arange(subgraph.node_count), labels] = 1.0
        forward, backward = self._split_by_type(subgraph.edge_src, subgraph.edge_dst, subgraph.edge_type,
                                                num_rating_types)
        return FeaturizedSubgraph(x0=x0, forward_edges=forward, backward_edges=backward,
                                  num_rating_types=num_rating_types, user_id=subgraph.user_id,
                                  item_id=subgraph.item_id, true_rating=subgraph.true_rating)

    @staticmethod
    def _split_by_type(src: np.ndarray, dst: np.ndarray, types: np.ndarray, num_rating_types: int):
        forward, backward = {}, {}
        for r in range(num_rating_types):
            mask = types == r
            forward[r] = np.stack([src[mask], dst[mask]]).astype(np.int64)
            backward[r] = forward[r][::-1].copy()
        return forward, backward

    def dropout_edges(self, fsub: FeaturizedSubgraph, p: float,
                      seed: Union[int, np.random.Generator]) -> FeaturizedSubgraph:
        """
        Remove each undirected edge with probability p; both directions go together.

        Raises:
            UsageError: If p is outside [0, 1).
        """
        if not 0.0 <= p < 1.0:
            raise_argument_error("edge dropout probability", p, "a value in [0, 1)")
        if p == 0.0 or fsub.edge_count == 0:
            return fsub
        rng = seed if isinstance(seed, np.random.Generator) else derive_rng(seed)
        forward, backward = {}, {}
        for r in range(fsub.num_rating_types):
            edges = fsub.forward_edges[r]
            keep = rng.random(edges.shape[1]) >= p
            forward[r] = edges[:, keep]
            backward[r] = forward[r][::-1].copy()
        return FeaturizedSubgraph(x0=fsub.x0, forward_edges=forward, backward_edges=backward,
                                  num_rating_types=fsub.num_rating_types, user_id=fsub.user_id,
                                  item_id=fsub.item_id, true_rating=fsub.true_rating)

    def extract_many(self, graph: GraphLike, pairs: np.ndarray, h: int = 1,
                     max_nodes_per_hop: Optional[int] = None, seed: int = 0,
                     ratings: Optional[np.ndarray] = None,
                     pool: Optional["ExtractionPool"] = None) -> List[EnclosingSubgraph]:
        """Extract the subgraphs of many pairs, in order, optionally on a worker pool."""
        pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
        rated = [None] * len(pairs) if ratings is None else [float(r) for r in ratings]
        tasks = [(int(u), int(v), h, max_nodes_per_hop, seed, r) for (u, v), r in zip(pairs, rated)]
        if pool is not None and pool.workers > 1:
            return pool.map(tasks)
        return [self.extract(graph, u, v, h_, cap, s, r) for u, v, h_, cap, s, r in tasks]

    # --- export --------------------------------------------------------------

    def to_json(self, subgraph: EnclosingSubgraph, predicted: Optional[float] = None) -> dict:
        document = {
            "nodes": [
                {"label": int(label), "kind": "user" if kind == 0 else "item", "global_id": int(gid)}
                for label, kind, gid in zip(subgraph.labels, subgraph.kinds, subgraph.global_ids)
            ],
            "edges": [[s, d, t] for s, d, t in subgraph.edges()],
            "target": [subgraph.target_user_local, subgraph.target_item_local],
            "rating": subgraph.true_rating,
        }
        if predicted is not None:
            document["predicted"] = predicted
        return document

    def from_json(self, document: dict) -> EnclosingSubgraph:
        nodes = document["nodes"]
        edges = np.asarray(document["edges"], dtype=np.int64).reshape(-1, 3)
        return EnclosingSubgraph(
            labels=np.array([n["label"] for n in nodes], dtype=np.int64),
            kinds=np.array([0 if n["kind"] == "user" else 1 for n in nodes], dtype=np.int64),
            global_ids=np.array([n["global_id"] for n in nodes], dtype=np.int64),
            edge_src=edges[:, 0].copy(), edge_dst=edges[:, 1].copy(), edge_type=edges[:, 2].copy(),
            true_rating=document.get("rating"),
        )

    def load_subgraph_json(self, path: Union[str, Path]) -> EnclosingSubgraph:
        return self.from_json(json.loads(Path(path).read_text(encoding="utf-8")))

    def to_dot(self, subgraph: EnclosingSubgraph, scale: RatingScale, predicted: Optional[float] = None,
               name: str = "subgraph") -> str:
        """GraphViz rendering: users red, items blue, targets double-circled, edges colored by rating."""
        caption = "" if predicted is None else f"{predicted:.2f}"
        if subgraph.true_rating is not None:
            caption += f" ({subgraph.true_rating:g})"
        lines = [f"graph {name} {{", f'  label="{caption.strip()}";', "  node [style=filled, fontcolor=white];"]
        for index, (kind, gid, label) in enumerate(zip(subgraph.kinds, subgraph.global_ids, subgraph.labels)):
            color = USER_COLOR if kind == 0 else ITEM_COLOR
            shape = "doublecircle" if index in (subgraph.target_user_local, subgraph.target_item_local) else "circle"
            prefix = "u" if kind == 0 else "i"
            lines.append(f'  n{index} [label="{prefix}{gid}\\nl{label}", fillcolor="{color}", shape={shape}];')
        for src, dst, rtype in subgraph.edges():
            lines.append(f'  n{src} -- n{dst} [color="{rating_color(rtype, len(scale))}", '
                         f'label="{scale.values[rtype]:g}"];')
        lines.append("}")
        return "\n".join(lines) + "\n"


def _init_worker(graph: GraphLike) -> None:
    global _worker_graph
    _worker_graph = graph


def _extract_task(task: tuple) -> EnclosingSubgraph:
    u, v, h, cap, seed, rating = task
    return SubgraphService().extract(_worker_graph, u, v, h, cap, seed, rating)


class ExtractionPool:
    """Process pool whose workers each hold one copy of the (read-only) graph."""

    def __init__(self, graph: GraphLike, workers: int = 1):
        self.workers = workers
        self._executor = None
        if workers > 1:
            self._executor = ProcessPoolExecutor(max_workers=workers, initializer=_init_worker, initargs=(graph,))
            logger.info(f"Started {workers} extraction workers")

    def map(self, tasks: List[tuple]) -> List[EnclosingSubgraph]:
        chunk = max(1, len(tasks) // (4 * self.workers))
        return list(self._executor.map(_extract_task, tasks, chunksize=chunk))

    def close(self) -> None:
        if self._executor is not None:
            self._executor.shutdown()
            self._executor = None

    def __enter__(self) -> "ExtractionPool":
        return self

    def __exit__(self, *exc) -> None:
        self.close()
