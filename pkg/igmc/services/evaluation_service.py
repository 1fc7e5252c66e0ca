"""Experiment drivers: evaluation, sparsity sweep, transfer, ablations, repeats and subgraph export."""

import logging
import time
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from igmc.core.exceptions import InputError, ScaleError, raise_argument_error
from igmc.models.checkpoint import Checkpoint
from igmc.models.graph import BipartiteGraph, ContentFeatures, GraphLike, RatingScale, RatingTable
from igmc.schemas.evaluation import EvalResult, RepeatedResult, RunSummary, TransferSpec
from igmc.schemas.model import ModelConfig, Pooling
from igmc.schemas.train import TrainConfig
from igmc.services.graph_service import Dataset, GraphService
from igmc.services.subgraph_service import SubgraphService
from igmc.services.train_service import TrainResult, TrainService
from igmc.utils.calculations import calculate_mean_std, calculate_rmse, calculate_type_breakdown, clip_predictions
from igmc.utils.common import write_json

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

RESULTS_FILE = "results.json"


@dataclass(eq=False)
class ExperimentRun:
    """Everything one train-and-evaluate run produced."""
    summary: RunSummary
    evaluation: EvalResult
    training: TrainResult


class AblationVariant(str, Enum):
    ORIGINAL = "original"
    SUM_POOLING = "sum_pooling"
    NO_ARR = "no_arr"
    WITH_CONTENT = "with_content"


class EvaluationService:
    """Service class for the experiment drivers."""

    def __init__(self, graph_service: Optional[GraphService] = None,
                 subgraph_service: Optional[SubgraphService] = None,
                 train_service: Optional[TrainService] = None):
        self.graph_service = graph_service or GraphService()
        self.subgraph_service = subgraph_service or SubgraphService()
        self.train_service = train_service or TrainService(self.subgraph_service)

    def evaluate(self, graph: GraphLike, test: RatingTable, checkpoints: Sequence[Checkpoint], clip: bool = True,
                 content: Optional[ContentFeatures] = None, max_nodes_per_hop: Optional[int] = None,
                 seed: int = 0) -> EvalResult:
        """
        RMSE of the ensemble over the test pairs, clipped and unclipped.

        Raises:
            ScaleError: If test rating values are missing from the training scale; all offenders are listed.
        """
        if len(test) == 0:
            raise_argument_error("test set size", 0, "at least one rating")
        checkpoints[0].scale.indices_of(test.values)
        raw = self.train_service.predict(graph, test.pairs(), checkpoints, clip=False, content=content,
                                         max_nodes_per_hop=max_nodes_per_hop, seed=seed)
        scale = checkpoints[0].scale
        clipped = clip_predictions(raw, scale.min_value, scale.max_value)
        reported = clipped if clip else raw
        result = EvalResult(
            rmse=calculate_rmse(reported, test.values),
            rmse_clipped=calculate_rmse(clipped, test.values),
            rmse_unclipped=calculate_rmse(raw, test.values),
            count=len(test),
            per_type=calculate_type_breakdown(reported, test.values),
        )
        logger.info(f"Evaluated {result.count} pairs: RMSE {result.rmse:.4f}")
        return result

    # --- single runs ---------------------------------------------------------

    def run_experiment(self, dataset: Dataset, config: TrainConfig, model_config: ModelConfig,
                       out_dir: Optional[PathLike] = None, content: Optional[ContentFeatures] = None,
                       graph: Optional[BipartiteGraph] = None, triples: Optional[RatingTable] = None,
                       variant: Optional[str] = None, keep_fraction: Optional[float] = None) -> ExperimentRun:
        """Train on the dataset (or the given graph/triples), evaluate on its test set and write results.json."""
        started = time.perf_counter()
        graph = graph if graph is not None else dataset.graph
        triples = triples if triples is not None else dataset.train
        result = self.train_service.train(graph, triples, config, model_config, out_dir, content=content)
        evaluation = self.evaluate(graph, dataset.test, result.checkpoints, clip=config.clip_predictions,
                                   content=content, max_nodes_per_hop=config.max_nodes_per_hop, seed=config.seed)
        summary = RunSummary(
            dataset=dataset.name,
            config_hash=result.report.config_hash,
            seed=config.seed,
            rmse_clipped=evaluation.rmse_clipped,
            rmse_unclipped=evaluation.rmse_unclipped,
            runtime_s=time.perf_counter() - started,
            variant=variant,
            keep_fraction=keep_fraction,
        )
        if out_dir is not None:
            write_json(Path(out_dir) / RESULTS_FILE, summary.model_dump(mode="json"))
        return ExperimentRun(summary, evaluation, result)

    def repeat_experiment(self, dataset: Dataset, config: TrainConfig, model_config: ModelConfig, repeats: int,
                          out_dir: Optional[PathLike] = None, content: Optional[ContentFeatures] = None,
                          variant: Optional[str] = None) -> RepeatedResult:
        """Run with seeds seed, seed+1, ..., seed+repeats-1; mean and std of the clipped RMSE."""
        if repeats < 1:
            raise_argument_error("repeats", repeats, "an integer >= 1")
        runs = []
        for k in range(repeats):
            seeded = config.model_copy(update={"seed": config.seed + k})
            run_dir = Path(out_dir) / f"seed{seeded.seed}" if out_dir is not None else None
            runs.append(self.run_experiment(dataset, seeded, model_config, run_dir, content, variant=variant).summary)
        mean, std = calculate_mean_std([r.rmse_clipped for r in runs])
        logger.info(f"{repeats} runs: RMSE {mean:.4f} +/- {std:.4f}")
        return RepeatedResult(runs=runs, mean_rmse=mean, std_rmse=std)

    # --- sparsity ------------------------------------------------------------

    def sparsity_sweep(self, dataset: Dataset, fractions: Sequence[float], config: TrainConfig,
                       model_config: ModelConfig, out_dir: Optional[PathLike] = None) -> List[Tuple[float, EvalResult]]:
        """
        For every keep fraction, in input order: sparsify the training graph, train a fresh model on
        the kept edges and evaluate on the original test set.

        Raises:
            UsageError: If a fraction is outside (0, 1].
        """
        for fraction in fractions:
            if not 0.0 < fraction <= 1.0:
                raise_argument_error("keep fraction", fraction, "a value in (0, 1]")
        results = []
        for fraction in fractions:
            run_dir = Path(out_dir) / f"keep{fraction:g}" if out_dir is not None else None
            if fraction == 1.0:
                graph, triples = dataset.graph, dataset.train
            else:
                graph = self.graph_service.sparsify(dataset.graph, fraction, config.seed)
                triples = graph.edges()
            logger.info(f"Sparsity run: keep {fraction:g} ({graph.num_edges} edges), seed {config.seed}")
            run = self.run_experiment(dataset, config, model_config, run_dir, graph=graph, triples=triples,
                                      keep_fraction=fraction)
            results.append((fraction, run.evaluation))
        return results

    # --- transfer ------------------------------------------------------------

    def build_transfer_spec(self, target_values: Sequence[float], source_scale: RatingScale,
                            output_rescale: float = 1.0) -> TransferSpec:
        """
        Map the target rating values onto the source rating types.

        Identical scales map one to one. Otherwise the target value range is cut into
        len(source_scale) equal-width bins, the i-th bin feeding source type i.
        """
        values = np.unique(np.asarray(target_values, dtype=np.float64))
        if values.size == 0:
            raise_argument_error("target rating values", "[]", "at least one value")
        if values.tolist() == list(source_scale.values):
            return TransferSpec(source_scale=source_scale, output_rescale=output_rescale,
                                bin_map={v: i for i, v in enumerate(source_scale.values)})

        groups = len(source_scale)
        edges = np.linspace(values.min(), values.max(), groups + 1)
        bins = np.clip(np.searchsorted(edges, values, side="right") - 1, 0, groups - 1)
        logger.info(f"Transfer bins over [{values.min():g}, {values.max():g}]: edges "
                    f"{[round(float(e), 4) for e in edges]}")
        return TransferSpec(source_scale=source_scale, output_rescale=output_rescale,
                            bin_map={float(v): int(b) for v, b in zip(values, bins)},
                            bin_edges=edges.tolist())

    def transfer_predict(self, target_graph: BipartiteGraph, pairs, checkpoints: Sequence[Checkpoint],
                         spec: TransferSpec, clip: bool = True, max_nodes_per_hop: Optional[int] = None,
                         seed: int = 0) -> np.ndarray:
        """
        Predict on a foreign graph: re-type its edges through the bin map, predict with the
        source checkpoints and multiply by the output rescale.

        Raises:
            ScaleError: If a rating value of the target graph has no bin.
        """
        unmapped = [v for v in target_graph.scale.values if v not in spec.bin_map]
        if unmapped:
            raise ScaleError(f"rating values {unmapped} have no bin in the transfer spec", offenders=unmapped)
        type_map = np.array([spec.bin_map[v] for v in target_graph.scale.values], dtype=np.int64)
        retyped = self.graph_service.retype(target_graph, type_map, spec.source_scale)
        predictions = self.train_service.predict(retyped, pairs, checkpoints, clip=clip,
                                                 max_nodes_per_hop=max_nodes_per_hop, seed=seed)
        return predictions * spec.output_rescale

    def transfer_evaluate(self, target: Dataset, checkpoints: Sequence[Checkpoint], spec: TransferSpec,
                          clip: bool = True, max_nodes_per_hop: Optional[int] = None, seed: int = 0) -> EvalResult:
        """RMSE of transferred predictions against the target's own (unbinned) test ratings."""
        raw = self.transfer_predict(target.graph, target.test.pairs(), checkpoints, spec, False, max_nodes_per_hop, seed)
        source = spec.source_scale
        clipped = clip_predictions(raw, source.min_value * spec.output_rescale, source.max_value * spec.output_rescale)
        reported = clipped if clip else raw
        return EvalResult(rmse=calculate_rmse(reported, target.test.values),
                          rmse_clipped=calculate_rmse(clipped, target.test.values),
                          rmse_unclipped=calculate_rmse(raw, target.test.values), count=len(target.test),
                          per_type=calculate_type_breakdown(reported, target.test.values))

    # --- ablations -----------------------------------------------------------

    def ablation_configs(self, variant: Union[AblationVariant, str], config: TrainConfig,
                         model_config: ModelConfig,
                         content: Optional[ContentFeatures] = None) -> Tuple[TrainConfig, ModelConfig]:
        """
        Training and model configuration of an ablation variant; everything else is left as given.

        Raises:
            InputError: If with_content is requested without content features.
        """
        variant = AblationVariant(variant)
        if variant == AblationVariant.SUM_POOLING:
            return config, model_config.model_copy(update={"pooling": Pooling.SUM})
        if variant == AblationVariant.NO_ARR:
            return config.model_copy(update={"arr_lambda": 0.0}), model_config
        if variant == AblationVariant.WITH_CONTENT:
            if content is None:
                raise InputError("the with_content variant needs user and item feature files")
            return config, model_config.model_copy(update={"content_dim": content.dim})
        return config, model_config

    def ablation_run(self, variant: Union[AblationVariant, str], dataset: Dataset, config: TrainConfig,
                     model_config: ModelConfig, content: Optional[ContentFeatures] = None,
                     out_dir: Optional[PathLike] = None) -> EvalResult:
        """Train and evaluate one ablation variant on the dataset."""
        variant = AblationVariant(variant)
        config, model_config = self.ablation_configs(variant, config, model_config, content)
        logger.info(f"Ablation {variant.value}: pooling={model_config.pooling.value}, "
                    f"arr_lambda={config.arr_lambda}, content_dim={model_config.content_dim}")
        content = content if variant == AblationVariant.WITH_CONTENT else None
        return self.run_experiment(dataset, config, model_config, out_dir, content, variant=variant.value).evaluation

    def repeat_ablation(self, variant: Union[AblationVariant, str], dataset: Dataset, config: TrainConfig,
                        model_config: ModelConfig, repeats: int, content: Optional[ContentFeatures] = None,
                        out_dir: Optional[PathLike] = None) -> RepeatedResult:
        """Ablation variant repeated over consecutive seeds."""
        variant = AblationVariant(variant)
        config, model_config = self.ablation_configs(variant, config, model_config, content)
        content = content if variant == AblationVariant.WITH_CONTENT else None
        return self.repeat_experiment(dataset, config, model_config, repeats, out_dir, content, variant=variant.value)

    # --- visualization -------------------------------------------------------

    def export_subgraphs(self, graph: BipartiteGraph, pairs, checkpoints: Sequence[Checkpoint], k: int,
                         out_dir: PathLike, ratings: Optional[Sequence[float]] = None,
                         max_nodes_per_hop: Optional[int] = None, seed: int = 0) -> List[Path]:
        """
        Write DOT and JSON files for the k highest- and k lowest-predicted subgraphs.

        Files are named `top<rank>_u<user>_i<item>` and `bottom<rank>_u<user>_i<item>`, rank from 1.

        Raises:
            UsageError: If k is negative or larger than the number of pairs.
        """
        pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
        if not 0 <= k <= len(pairs):
            raise_argument_error("k", k, f"an integer in [0, {len(pairs)}]")
        if k == 0:
            return []
        predictions = self.train_service.predict(graph, pairs, checkpoints, max_nodes_per_hop=max_nodes_per_hop,
                                                 seed=seed)
        top = np.argsort(-predictions, kind="stable")[:k]
        bottom = np.argsort(predictions, kind="stable")[:k]
        hop = checkpoints[0].model_config.hop
        scale = checkpoints[0].scale

        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        written: List[Path] = []
        for prefix, selection in (("top", top), ("bottom", bottom)):
            for rank, index in enumerate(selection, start=1):
                u, v = (int(x) for x in pairs[index])
                rating = None if ratings is None else float(ratings[index])
                sub = self.subgraph_service.extract(graph, u, v, hop, max_nodes_per_hop, seed, rating)
                stem = out_dir / f"{prefix}{rank}_u{u}_i{v}"
                predicted = float(predictions[index])
                stem.with_suffix(".dot").write_text(
                    self.subgraph_service.to_dot(sub, scale, predicted, name=f"{prefix}{rank}"), encoding="utf-8")
                write_json(stem.with_suffix(".json"), self.subgraph_service.to_json(sub, predicted))
                written += [stem.with_suffix(".dot"), stem.with_suffix(".json")]
        logger.info(f"Exported {len(written)} subgraph files to {out_dir}")
        return written
