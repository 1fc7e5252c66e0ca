"""Train, predict and evaluate commands."""

import argparse
import logging

import pandas as pd

from igmc.cli.arguments import add_checkpoint_arguments, add_clip_arguments, add_common_arguments, \
    add_config_arguments, add_dataset_arguments, emit, extraction_options, load_checkpoint_dataset, load_dataset, \
    output_dir, resolve_clip, resolve_configs, resolve_pairs
from igmc.cli.deps import get_evaluation_service, get_train_service
from igmc.schemas.evaluation import RunSummary
from igmc.utils.common import config_hash, write_json

logger = logging.getLogger(__name__)


def train(args: argparse.Namespace) -> int:
    """Train on a dataset, evaluate the checkpoint ensemble on its test split and write results.json."""
    dataset = load_dataset(args)
    config, model_config = resolve_configs(args, dataset)
    out = output_dir(args, "train")
    evaluation_service = get_evaluation_service()
    if args.repeats > 1:
        repeated = evaluation_service.repeat_experiment(dataset, config, model_config, args.repeats, out)
        write_json(out / "repeats.json", repeated.model_dump(mode="json"))
        emit(repeated.model_dump(mode="json"))
        return 0
    run = evaluation_service.run_experiment(dataset, config, model_config, out)
    emit(run.summary.model_dump(mode="json"))
    return 0


def predict(args: argparse.Namespace) -> int:
    """Predict ratings of pairs with a checkpoint ensemble; writes predictions.tsv with external ids."""
    dataset, checkpoints = load_checkpoint_dataset(args)
    pairs, _ = resolve_pairs(args, dataset)
    cap, seed = extraction_options(checkpoints[0])
    clip = resolve_clip(args, checkpoints[0])
    predictions = get_train_service().predict(dataset.graph, pairs, checkpoints, clip=clip,
                                              max_nodes_per_hop=cap, seed=seed)
    out = output_dir(args, "predict")
    pd.DataFrame({
        "user": dataset.user_map.to_external(pairs[:, 0]),
        "item": dataset.item_map.to_external(pairs[:, 1]),
        "prediction": predictions,
    }).to_csv(out / "predictions.tsv", sep="\t", header=False, index=False)
    emit({"count": len(pairs), "out": str(out / "predictions.tsv")})
    return 0


def evaluate(args: argparse.Namespace) -> int:
    """RMSE of a checkpoint ensemble on the test split."""
    dataset, checkpoints = load_checkpoint_dataset(args)
    cap, seed = extraction_options(checkpoints[0])
    clip = resolve_clip(args, checkpoints[0])
    result = get_evaluation_service().evaluate(dataset.graph, dataset.test, checkpoints, clip=clip,
                                               max_nodes_per_hop=cap, seed=seed)
    out = output_dir(args, "evaluate")
    summary = RunSummary(
        dataset=dataset.name,
        config_hash=config_hash(checkpoints[0].train_config or {},
                                checkpoints[0].model_config.model_dump(mode="json")),
        seed=seed,
        rmse_clipped=result.rmse_clipped,
        rmse_unclipped=result.rmse_unclipped,
    )
    write_json(out / "eval.json", result.model_dump(mode="json"))
    write_json(out / "results.json", summary.model_dump(mode="json"))
    emit(result.model_dump(mode="json"))
    return 0


def register(subparsers) -> None:
    parser = subparsers.add_parser("train", help="Train a model and evaluate it on the test split")
    add_common_arguments(parser)
    add_dataset_arguments(parser)
    add_config_arguments(parser)
    parser.add_argument("--repeats", type=int, default=1, help="Runs with seeds seed..seed+repeats-1")
    parser.set_defaults(handler=train)

    parser = subparsers.add_parser("predict", help="Predict ratings with a checkpoint ensemble")
    add_common_arguments(parser)
    add_dataset_arguments(parser)
    add_checkpoint_arguments(parser)
    parser.add_argument("--pairs", help="File of external (user, item) ids; default: the test split")
    add_clip_arguments(parser)
    parser.set_defaults(handler=predict)

    parser = subparsers.add_parser("evaluate", help="Test RMSE of a checkpoint ensemble")
    add_common_arguments(parser)
    add_dataset_arguments(parser)
    add_checkpoint_arguments(parser)
    add_clip_arguments(parser)
    parser.set_defaults(handler=evaluate)
