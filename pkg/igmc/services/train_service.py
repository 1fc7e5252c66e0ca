"""Losses, the training loop and checkpoint-ensembled prediction."""

import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence, Union

import numpy as np
from tqdm import tqdm

from igmc.core.config import settings
from igmc.core.exceptions import NumericalError, raise_argument_error, raise_dimension_error
from igmc.diff import ops
from igmc.diff.optim import Adam
from igmc.diff.tensor import Tape, Tensor, constant, no_grad, use_tape
from igmc.models.checkpoint import Checkpoint
from igmc.models.graph import ContentFeatures, GraphLike, RatingScale, RatingTable
from igmc.schemas.model import ModelConfig
from igmc.schemas.train import EpochRecord, TrainConfig, TrainReport
from igmc.services.checkpoint_service import CheckpointService
from igmc.services.model_service import ModelParams, ModelService, SubgraphBatch
from igmc.services.subgraph_service import ExtractionPool, SubgraphService
from igmc.utils.calculations import calculate_rmse, clip_predictions
from igmc.utils.common import batch_slices, config_hash, derive_rng, write_json

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

REPORT_FILE = "train_log.jsonl"


@dataclass(eq=False)
class TrainResult:
    """Report of a run plus the in-memory checkpoints and final parameters."""
    report: TrainReport
    checkpoints: List[Checkpoint] = field(default_factory=list)
    params: Optional[ModelParams] = None


def mse_loss(predictions: Tensor, targets) -> Tensor:
    """
    Mean of squared differences over the batch.

    Raises:
        UsageError: If the batch is empty.
        DimensionError: If the lengths differ.
    """
    targets = np.asarray(targets, dtype=predictions.data.dtype).reshape(-1)
    if predictions.size == 0 or targets.size == 0:
        raise_argument_error("batch size", 0, "at least one prediction")
    if predictions.shape != targets.shape:
        raise_dimension_error("mse_loss", predictions.shape, targets.shape)
    return ops.scale(ops.frobenius_sq(ops.sub(predictions, constant(targets))), 1.0 / targets.size)


def arr_loss(params: ModelParams) -> Tensor:
    """
    Sum over layers and adjacent rating types of ||W_{r+1} - W_r||_F^2, on the weights rebuilt
    from bases and coefficients. Zero with fewer than two rating types.
    """
    num_types = params.config.num_rating_types
    if num_types < 2:
        return constant(np.asarray(0.0))
    total: Optional[Tensor] = None
    for layer in range(len(params.config.layer_dims)):
        stack = params.relation_stack(layer)
        diff = ops.sub(ops.row_gather(stack, np.arange(1, num_types)), ops.row_gather(stack, np.arange(num_types - 1)))
        term = ops.frobenius_sq(diff)
        total = term if total is None else ops.add(total, term)
    return total


def learning_rate(config: TrainConfig, epoch: int) -> float:
    """lr0 * decay ** floor((epoch - 1) / decay_every), epochs counted from 1."""
    if epoch < 1:
        raise_argument_error("epoch", epoch, "an integer >= 1")
    return config.lr0 * config.lr_decay_factor ** ((epoch - 1) // config.lr_decay_every)


class TrainService:
    """Service class for model training and prediction."""

    def __init__(self, subgraph_service: Optional[SubgraphService] = None,
                 model_service: Optional[ModelService] = None,
                 checkpoint_service: Optional[CheckpointService] = None):
        self.subgraph_service = subgraph_service or SubgraphService()
        self.model_service = model_service or ModelService()
        self.checkpoint_service = checkpoint_service or CheckpointService()

    def prepare_batch(self, graph: GraphLike, pairs: np.ndarray, ratings: Optional[np.ndarray], h: int,
                      max_nodes_per_hop: Optional[int], seed: int, num_rating_types: int,
                      content: Optional[ContentFeatures] = None, edge_dropout: float = 0.0,
                      dropout_key: Sequence[int] = (), pool: Optional[ExtractionPool] = None) -> SubgraphBatch:
        """Extract, featurize and (optionally) edge-drop the subgraphs of some pairs, then collate them."""
        subgraphs = self.subgraph_service.extract_many(graph, pairs, h, max_nodes_per_hop, seed, ratings, pool)
        featurized = []
        for sub in subgraphs:
            fsub = self.subgraph_service.featurize(sub, h, num_rating_types)
            if edge_dropout > 0.0:
                rng = derive_rng(seed, *dropout_key, sub.user_id, sub.item_id)
                fsub = self.subgraph_service.dropout_edges(fsub, edge_dropout, rng)
            featurized.append(fsub)
        return self.model_service.collate(featurized, content)

    def train(self, graph: GraphLike, triples: RatingTable, config: TrainConfig, model_config: ModelConfig,
              out_dir: Optional[PathLike] = None, test: Optional[RatingTable] = None,
              content: Optional[ContentFeatures] = None) -> TrainResult:
        """
        Fit a fresh model to the training ratings.

        Every epoch shuffles the targets with a seeded permutation; every batch extracts the
        subgraphs (target edge hidden), drops edges, runs the network in training mode and takes
        one Adam step on MSE + arr_lambda * ARR. Checkpoints are taken at the ensemble epochs.

        Args:
            graph: Training graph (built from `triples`).
            triples: Training ratings.
            config: Optimization protocol.
            model_config: Architecture; its hop count must equal config.h.
            out_dir: Where the JSON-lines report and checkpoint files go; nothing is written when None.
            test: Optional test ratings, evaluated with the checkpoint ensemble at the end.
            content: Content features, required when model_config.content_dim > 0.

        Raises:
            NumericalError: If a batch loss is not finite; the offending batch is dumped first.
        """
        if model_config.hop != config.h:
            raise_argument_error("model hop", model_config.hop, f"equal to the training hop count {config.h}")
        if len(triples) == 0:
            raise_argument_error("training set size", 0, "at least one rating")

        started = time.perf_counter()
        out_path = Path(out_dir) if out_dir is not None else None
        if out_path is not None:
            out_path.mkdir(parents=True, exist_ok=True)
            (out_path / REPORT_FILE).write_text("", encoding="utf-8")

        num_types = model_config.num_rating_types
        params = self.model_service.init_params(model_config, config.seed)
        optimizer = Adam(params.tensors, lr=config.lr0)
        pairs_all, values_all = triples.pairs(), triples.values
        n = len(triples)
        report = TrainReport(config_hash=config_hash(config.model_dump(mode="json"),
                                                     model_config.model_dump(mode="json")),
                             seed=config.seed)
        checkpoints: List[Checkpoint] = []
        logger.info(f"Training {params.num_parameters} parameters on {n} ratings for {config.epochs} epochs")

        with ExtractionPool(graph, settings.WORKERS) as pool:
            epochs = tqdm(range(1, config.epochs + 1), desc="epochs", disable=not settings.PROGRESS)
            for epoch in epochs:
                epoch_started = time.perf_counter()
                lr = learning_rate(config, epoch)
                order = derive_rng(config.seed, 3, epoch).permutation(n)
                squared_sum = 0.0
                for b, batch_slice in enumerate(batch_slices(n, config.batch_size)):
                    idx = order[batch_slice]
                    batch = self.prepare_batch(graph, pairs_all[idx], values_all[idx], config.h,
                                               config.max_nodes_per_hop, config.seed, num_types, content,
                                               config.edge_dropout, (4, epoch), pool)
                    squared_sum += self._train_step(batch, params, optimizer, config, lr, epoch, b,
                                                    derive_rng(config.seed, 5, epoch, b), out_path)

                train_mse = squared_sum / n
                record = EpochRecord(epoch=epoch, train_mse=train_mse, train_rmse=float(np.sqrt(train_mse)), lr=lr,
                                     wall_time_s=time.perf_counter() - epoch_started)
                if epoch in config.ensemble_epochs:
                    checkpoint = Checkpoint(model_config=model_config, scale=graph.scale, params=params.arrays(),
                                            adam_state=optimizer.state.copy(), epoch=epoch,
                                            train_config=config.model_dump(mode="json"))
                    if out_path is not None:
                        path = self.checkpoint_service.save(checkpoint, out_path / f"checkpoint_epoch{epoch:03d}.ckpt")
                        checkpoint.path = str(path)
                        record.checkpoint = str(path)
                        report.checkpoints.append(str(path))
                    checkpoints.append(checkpoint)
                report.epochs.append(record)
                logger.info(f"Epoch {epoch}: train RMSE {record.train_rmse:.4f}, lr {lr:g}, "
                            f"{record.wall_time_s:.1f}s")
                if out_path is not None:
                    with (out_path / REPORT_FILE).open("a", encoding="utf-8") as f:
                        f.write(record.model_dump_json() + "\n")

        if test is not None and len(test):
            predictions = self.predict(graph, test.pairs(), checkpoints, clip=False, content=content,
                                       max_nodes_per_hop=config.max_nodes_per_hop, seed=config.seed)
            report.test_rmse_unclipped = calculate_rmse(predictions, test.values)
            report.test_rmse_clipped = calculate_rmse(
                clip_predictions(predictions, graph.scale.min_value, graph.scale.max_value), test.values)
            logger.info(f"Test RMSE {report.test_rmse_clipped:.4f} clipped, "
                        f"{report.test_rmse_unclipped:.4f} unclipped")

        report.runtime_s = time.perf_counter() - started
        if out_path is not None:
            with (out_path / REPORT_FILE).open("a", encoding="utf-8") as f:
                summary = report.model_dump(mode="json", exclude={"epochs"})
                f.write(json.dumps({"summary": summary}) + "\n")
        return TrainResult(report=report, checkpoints=checkpoints, params=params)

    def _train_step(self, batch: SubgraphBatch, params: ModelParams, optimizer: Adam, config: TrainConfig,
                    lr: float, epoch: int, batch_number: int, rng: np.random.Generator,
                    out_path: Optional[Path]) -> float:
        """One optimizer step; returns the summed squared error of the batch."""
        optimizer.zero_grad()
        with use_tape(Tape()) as tape:
            predictions = self.model_service.forward(batch, params, training=True, rng=rng)
            mse = mse_loss(predictions, batch.ratings)
            loss = mse
            if config.arr_lambda > 0.0:
                loss = ops.add(mse, ops.scale(arr_loss(params), config.arr_lambda))
            if not np.isfinite(loss.item()):
                dump = self._dump_batch(batch, predictions, epoch, batch_number, out_path)
                tape.clear()
                raise NumericalError(f"non-finite loss at epoch {epoch}, batch {batch_number}", dump_path=dump)
            tape.backward(loss)
        optimizer.step(lr)
        return mse.item() * batch.num_graphs

    @staticmethod
    def _dump_batch(batch: SubgraphBatch, predictions: Tensor, epoch: int, batch_number: int,
                    out_path: Optional[Path]) -> Optional[str]:
        path = (out_path or Path(settings.OUTPUT_DIR)) / f"nan_batch_epoch{epoch}_batch{batch_number}.json"
        path.parent.mkdir(parents=True, exist_ok=True)
        write_json(path, {
            "epoch": epoch,
            "batch": batch_number,
            "pairs": batch.pairs,
            "predictions": [float(p) if np.isfinite(p) else str(p) for p in predictions.data],
            "targets": batch.ratings,
        })
        logger.error(f"Non-finite loss, batch dumped to {path}")
        return str(path)

    def predict(self, graph: GraphLike, pairs, checkpoints: Sequence[Checkpoint], clip: bool = True,
                content: Optional[ContentFeatures] = None, max_nodes_per_hop: Optional[int] = None,
                seed: int = 0, batch_size: int = 50) -> np.ndarray:
        """
        Mean eval-mode prediction of every pair over the checkpoints.

        Subgraphs are extracted from `graph` with the pair itself hidden. With clip on, results are
        clipped to [min, max] of the checkpoints' rating scale.

        Raises:
            ContractError: If the checkpoints disagree on model configuration or scale.
        """
        self.checkpoint_service.check_compatible(checkpoints)
        model_config = checkpoints[0].model_config
        scale: RatingScale = checkpoints[0].scale
        ensemble = [ModelParams.from_arrays(model_config, {k: v.astype(settings.dtype) for k, v in c.params.items()})
                    for c in checkpoints]
        pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
        totals = np.zeros(len(pairs), dtype=np.float64)

        with no_grad(), ExtractionPool(graph, settings.WORKERS) as pool:
            for batch_slice in batch_slices(len(pairs), batch_size):
                batch = self.prepare_batch(graph, pairs[batch_slice], None, model_config.hop, max_nodes_per_hop,
                                           seed, model_config.num_rating_types, content, pool=pool)
                for params in ensemble:
                    totals[batch_slice] += self.model_service.forward(batch, params, training=False).data
        predictions = totals / len(ensemble)
        if clip:
            predictions = clip_predictions(predictions, scale.min_value, scale.max_value)
        return predictions
