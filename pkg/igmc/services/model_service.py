"""Graph-level rating network: batching, relational message passing, pooling and rating head."""

import logging
from dataclasses import dataclass, field
from typing import Dict, Iterator, List, Optional, Sequence

import numpy as np

from igmc.core.config import settings
from igmc.core.exceptions import InputError, raise_contract_error, raise_dimension_error
from igmc.diff import ops
from igmc.diff.tensor import Tensor, constant, parameter
from igmc.models.graph import ContentFeatures
from igmc.models.subgraph import FeaturizedSubgraph
from igmc.schemas.model import ModelConfig, Pooling
from igmc.utils.common import derive_rng

logger = logging.getLogger(__name__)


@dataclass
class ModelParams:
    """
    Named parameter tensors of one network.

    Per layer l: `conv{l}.root` (d_in x d_out), `conv{l}.bases` (num_bases x d_in*d_out, one
    flattened basis matrix per row) and `conv{l}.coefficients` (num_rating_types x num_bases).
    Rating head: `mlp.hidden.weight`, `mlp.hidden.bias`, `mlp.out.weight`, `mlp.out.bias`.
    """
    config: ModelConfig
    tensors: Dict[str, Tensor] = field(default_factory=dict)

    def __getitem__(self, name: str) -> Tensor:
        return self.tensors[name]

    def __iter__(self) -> Iterator[str]:
        return iter(self.tensors)

    def __len__(self) -> int:
        return len(self.tensors)

    def names(self) -> List[str]:
        return list(self.tensors)

    def arrays(self) -> Dict[str, np.ndarray]:
        return {name: t.data.copy() for name, t in self.tensors.items()}

    @property
    def num_parameters(self) -> int:
        return sum(t.size for t in self.tensors.values())

    def layer_dims(self, layer: int):
        dims = [self.config.input_dim] + list(self.config.layer_dims)
        return dims[layer], dims[layer + 1]

    def relation_stack(self, layer: int) -> Tensor:
        """All per-type weights of a layer, one flattened W_r per row (num_rating_types x d_in*d_out)."""
        return ops.matmul(self.tensors[f"conv{layer}.coefficients"], self.tensors[f"conv{layer}.bases"])

    @classmethod
    def from_arrays(cls, config: ModelConfig, arrays: Dict[str, np.ndarray]) -> "ModelParams":
        return cls(config, {name: parameter(value, name=name, dtype=value.dtype) for name, value in arrays.items()})


@dataclass(frozen=True, eq=False)
class SubgraphBatch:
    """
    Several featurized subgraphs stacked into one node matrix.

    Attributes:
        x0 (np.ndarray): Stacked one-hot node features, N x d0.
        edge_src (Dict[int, np.ndarray]): Per rating type, message source rows (both directions).
        edge_dst (Dict[int, np.ndarray]): Per rating type, message destination rows.
        edge_weight (Dict[int, np.ndarray]): Per rating type, 1/|N_r(dst)| of every message.
        user_rows (np.ndarray): Row of each subgraph's target user.
        item_rows (np.ndarray): Row of each subgraph's target item.
        graph_index (np.ndarray): Subgraph of every row.
        ratings (np.ndarray): True rating per subgraph, NaN when unknown.
        pairs (np.ndarray): (user_id, item_id) per subgraph.
        content (np.ndarray): Optional per-subgraph content features (user then item).
    """
    x0: np.ndarray
    edge_src: Dict[int, np.ndarray]
    edge_dst: Dict[int, np.ndarray]
    edge_weight: Dict[int, np.ndarray]
    user_rows: np.ndarray
    item_rows: np.ndarray
    graph_index: np.ndarray
    ratings: np.ndarray
    pairs: np.ndarray
    num_rating_types: int
    content: Optional[np.ndarray] = None

    @property
    def num_graphs(self) -> int:
        return int(self.user_rows.size)

    @property
    def num_nodes(self) -> int:
        return int(self.x0.shape[0])


class ModelService:
    """Service class for building and running the rating network."""

    def collate(self, subgraphs: Sequence[FeaturizedSubgraph],
                content: Optional[ContentFeatures] = None) -> SubgraphBatch:
        """
        Stack featurized subgraphs into one batch, offsetting node indices per subgraph.

        Raises:
            InputError: If content is given and a target user or item has no feature row.
        """
        if not subgraphs:
            raise_contract_error("cannot collate an empty list of subgraphs")
        num_types = subgraphs[0].num_rating_types
        width = subgraphs[0].x0.shape[1]
        offsets = np.cumsum([0] + [s.node_count for s in subgraphs])
        for s in subgraphs:
            if s.num_rating_types != num_types or s.x0.shape[1] != width:
                raise_dimension_error("collate", subgraphs[0].x0.shape, s.x0.shape)

        num_nodes = int(offsets[-1])
        edge_src, edge_dst, edge_weight = {}, {}, {}
        for r in range(num_types):
            fwd = [s.forward_edges[r] + off for s, off in zip(subgraphs, offsets[:-1])]
            users = np.concatenate([e[0] for e in fwd]).astype(np.int64)
            items = np.concatenate([e[1] for e in fwd]).astype(np.int64)
            src = np.concatenate([users, items])
            dst = np.concatenate([items, users])
            degree = np.bincount(dst, minlength=num_nodes)
            edge_src[r], edge_dst[r] = src, dst
            edge_weight[r] = 1.0 / degree[dst] if dst.size else np.zeros(0)

        starts = offsets[:-1].astype(np.int64)
        pairs = np.array([[s.user_id, s.item_id] for s in subgraphs], dtype=np.int64)
        ratings = np.array([np.nan if s.true_rating is None else s.true_rating for s in subgraphs],
                           dtype=np.float64)
        features = None
        if content is not None:
            missing_users = pairs[~content.user_present[pairs[:, 0]], 0]
            missing_items = pairs[~content.item_present[pairs[:, 1]], 1]
            if missing_users.size or missing_items.size:
                raise InputError(f"missing content features for users {missing_users[:10].tolist()} "
                                 f"and items {missing_items[:10].tolist()}")
            features = np.concatenate([content.user_features[pairs[:, 0]],
                                       content.item_features[pairs[:, 1]]], axis=1)

        return SubgraphBatch(
            x0=np.concatenate([s.x0 for s in subgraphs], axis=0),
            edge_src=edge_src, edge_dst=edge_dst, edge_weight=edge_weight,
            user_rows=starts + subgraphs[0].target_user_local,
            item_rows=starts + subgraphs[0].target_item_local,
            graph_index=np.repeat(np.arange(len(subgraphs), dtype=np.int64), np.diff(offsets)),
            ratings=ratings, pairs=pairs, num_rating_types=num_types, content=features,
        )

    def init_params(self, config: ModelConfig, seed: int = 0) -> ModelParams:
        """
        Glorot-uniform weights, a = sqrt(6 / (fan_in + fan_out)) per matrix, zero biases.

        Basis matrices are drawn with the fan of one d_in x d_out matrix.
        """
        rng = derive_rng(seed, 2)
        dtype = settings.dtype

        def glorot(fan_in: int, fan_out: int, shape) -> np.ndarray:
            bound = np.sqrt(6.0 / (fan_in + fan_out))
            return rng.uniform(-bound, bound, size=shape)

        tensors: Dict[str, Tensor] = {}
        dims = [config.input_dim] + list(config.layer_dims)
        for layer, (d_in, d_out) in enumerate(zip(dims[:-1], dims[1:])):
            tensors[f"conv{layer}.root"] = glorot(d_in, d_out, (d_in, d_out))
            tensors[f"conv{layer}.bases"] = glorot(d_in, d_out, (config.num_bases, d_in * d_out))
            tensors[f"conv{layer}.coefficients"] = glorot(config.num_rating_types, config.num_bases,
                                                          (config.num_rating_types, config.num_bases))
        tensors["mlp.hidden.weight"] = glorot(config.pooled_dim, config.mlp_hidden,
                                              (config.pooled_dim, config.mlp_hidden))
        tensors["mlp.hidden.bias"] = np.zeros(config.mlp_hidden)
        tensors["mlp.out.weight"] = glorot(config.mlp_hidden, 1, (config.mlp_hidden, 1))
        tensors["mlp.out.bias"] = np.zeros(1)

        params = ModelParams(config, {name: parameter(value, name=name, dtype=dtype)
                                      for name, value in tensors.items()})
        logger.debug(f"Initialized {params.num_parameters} parameters with seed {seed}")
        return params

    def rgcn_layer(self, x: Tensor, batch: SubgraphBatch, params: ModelParams, layer: int) -> Tensor:
        """
        Relational convolution without activation:
        out_i = x_i W_root + sum_r sum_{j in N_r(i)} x_j W_r / |N_r(i)|.

        Nodes without type-r neighbors get no type-r term.
        """
        d_in, d_out = params.layer_dims(layer)
        if x.ndim != 2 or x.shape[1] != d_in:
            raise_dimension_error(f"conv{layer}", x.shape, (batch.num_nodes, d_in))
        out = ops.matmul(x, params[f"conv{layer}.root"])
        stack = None
        for r in range(batch.num_rating_types):
            src = batch.edge_src[r]
            if src.size == 0:
                continue
            if stack is None:
                stack = params.relation_stack(layer)
            weight = ops.reshape(ops.row_gather(stack, [r]), (d_in, d_out))
            messages = ops.row_gather(ops.matmul(x, weight), src)
            out = ops.add(out, ops.row_scatter_add(messages, batch.edge_dst[r], batch.num_nodes,
                                                   batch.edge_weight[r]))
        return out

    def forward(self, batch: SubgraphBatch, params: ModelParams, training: bool = False,
                rng: Optional[np.random.Generator] = None) -> Tensor:
        """
        Predicted rating of every subgraph in the batch, shape (num_graphs,).

        Layer outputs pass through tanh and are concatenated per node; the pooled vector is the
        target user row next to the target item row (or the sum over all rows), optionally
        followed by content features, then relu -> dropout -> linear.

        Raises:
            InputError: If the model expects content features and the batch has none.
        """
        config = params.config
        if batch.num_rating_types != config.num_rating_types:
            raise_dimension_error("forward", (batch.num_rating_types,), (config.num_rating_types,))

        x = constant(batch.x0, dtype=settings.dtype)
        layer_outputs: List[Tensor] = []
        for layer in range(len(config.layer_dims)):
            pre = self.rgcn_layer(x, batch, params, layer)
            x = ops.tanh(pre)
            layer_outputs.append(pre if config.concat_pre_activation else x)
        node_repr = ops.concat(layer_outputs, axis=1) if len(layer_outputs) > 1 else layer_outputs[0]

        if config.pooling == Pooling.TARGET_CONCAT:
            pooled = ops.concat([ops.row_gather(node_repr, batch.user_rows),
                                 ops.row_gather(node_repr, batch.item_rows)], axis=1)
        else:
            pooled = ops.row_scatter_add(node_repr, batch.graph_index, batch.num_graphs)

        if config.content_dim > 0:
            if batch.content is None:
                raise InputError("model expects content features but the batch has none")
            if batch.content.shape[1] != config.content_dim:
                raise_dimension_error("content", batch.content.shape, (batch.num_graphs, config.content_dim))
            pooled = ops.concat([pooled, constant(batch.content, dtype=settings.dtype)], axis=1)

        hidden = ops.relu(ops.add(ops.matmul(pooled, params["mlp.hidden.weight"]), params["mlp.hidden.bias"]))
        hidden = ops.dropout(hidden, config.mlp_dropout, rng, training)
        out = ops.add(ops.matmul(hidden, params["mlp.out.weight"]), params["mlp.out.bias"])
        return ops.reshape(out, (batch.num_graphs,))
