"""Experiment commands: sparsity sweep, transfer, ablations and subgraph export."""

import argparse
import logging

from igmc.cli.arguments import add_checkpoint_arguments, add_clip_arguments, add_common_arguments, \
    add_config_arguments, add_dataset_arguments, emit, extraction_options, load_checkpoint_dataset, \
    load_checkpoints, load_content, load_dataset, output_dir, resolve_clip, resolve_configs, resolve_pairs
from igmc.cli.deps import get_evaluation_service
from igmc.core.exceptions import UsageError
from igmc.services.evaluation_service import AblationVariant
from igmc.utils.common import write_json

logger = logging.getLogger(__name__)

DEFAULT_FRACTIONS = "1.0,0.2,0.1,0.05,0.01,0.001"


def parse_fractions(text: str):
    try:
        return [float(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise UsageError(f"invalid --fractions '{text}': expected comma separated numbers")


def sweep_sparsity(args: argparse.Namespace) -> int:
    """Train and evaluate at several training-graph keep fractions."""
    dataset = load_dataset(args)
    config, model_config = resolve_configs(args, dataset)
    fractions = parse_fractions(args.fractions)
    out = output_dir(args, "sweep-sparsity")
    results = get_evaluation_service().sparsity_sweep(dataset, fractions, config, model_config, out)
    document = [{"keep_fraction": fraction, "seed": config.seed, **result.model_dump(mode="json")}
                for fraction, result in results]
    write_json(out / "sweep.json", document)
    emit(document)
    return 0


def transfer(args: argparse.Namespace) -> int:
    """Evaluate checkpoints trained on one dataset on the test split of another."""
    target = load_dataset(args)
    checkpoints = load_checkpoints(args)
    evaluation_service = get_evaluation_service()
    spec = evaluation_service.build_transfer_spec(target.scale.values, checkpoints[0].scale, args.rescale)
    cap, seed = extraction_options(checkpoints[0])
    clip = resolve_clip(args, checkpoints[0])
    result = evaluation_service.transfer_evaluate(target, checkpoints, spec, clip=clip,
                                                  max_nodes_per_hop=cap, seed=seed)
    out = output_dir(args, "transfer")
    document = {"spec": spec.model_dump(mode="json"), "result": result.model_dump(mode="json")}
    write_json(out / "transfer.json", document)
    emit(document)
    return 0


def ablate(args: argparse.Namespace) -> int:
    """Train and evaluate one ablation variant, optionally over several seeds."""
    dataset = load_dataset(args)
    config, model_config = resolve_configs(args, dataset)
    content = load_content(args, dataset)
    out = output_dir(args, "ablate")
    repeated = get_evaluation_service().repeat_ablation(args.variant, dataset, config, model_config, args.repeats,
                                                        content, out)
    write_json(out / "ablation.json", {"variant": args.variant, **repeated.model_dump(mode="json")})
    emit({"variant": args.variant, "mean_rmse": repeated.mean_rmse, "std_rmse": repeated.std_rmse})
    return 0


def export_subgraphs(args: argparse.Namespace) -> int:
    """Write DOT/JSON renderings of the highest- and lowest-predicted subgraphs."""
    dataset, checkpoints = load_checkpoint_dataset(args)
    pairs, ratings = resolve_pairs(args, dataset)
    cap, seed = extraction_options(checkpoints[0])
    out = output_dir(args, "export-subgraphs")
    written = get_evaluation_service().export_subgraphs(dataset.graph, pairs, checkpoints, args.k, out, ratings,
                                                        max_nodes_per_hop=cap, seed=seed)
    emit({"files": [str(p) for p in written]})
    return 0


def register(subparsers) -> None:
    parser = subparsers.add_parser("sweep-sparsity", help="Sparsity robustness sweep")
    add_common_arguments(parser)
    add_dataset_arguments(parser)
    add_config_arguments(parser)
    parser.add_argument("--fractions", default=DEFAULT_FRACTIONS, help="Comma separated keep fractions")
    parser.set_defaults(handler=sweep_sparsity)

    parser = subparsers.add_parser("transfer", help="Transfer checkpoints to another dataset")
    add_common_arguments(parser)
    add_dataset_arguments(parser)
    add_checkpoint_arguments(parser)
    parser.add_argument("--rescale", type=float, default=1.0, help="Multiplier of the transferred predictions")
    add_clip_arguments(parser)
    parser.set_defaults(handler=transfer)

    parser = subparsers.add_parser("ablate", help="Run an ablation variant")
    add_common_arguments(parser)
    add_dataset_arguments(parser)
    add_config_arguments(parser)
    parser.add_argument("--variant", required=True, choices=[v.value for v in AblationVariant])
    parser.add_argument("--repeats", type=int, default=1, help="Runs with seeds seed..seed+repeats-1")
    parser.add_argument("--user-features", help="User content feature file (with_content)")
    parser.add_argument("--item-features", help="Item content feature file (with_content)")
    parser.set_defaults(handler=ablate)

    parser = subparsers.add_parser("export-subgraphs", help="Export top/bottom predicted subgraphs")
    add_common_arguments(parser)
    add_dataset_arguments(parser)
    add_checkpoint_arguments(parser)
    parser.add_argument("--k", type=int, default=5, help="Subgraphs exported at each end")
    parser.add_argument("--pairs", help="File of external (user, item) ids; default: the test split")
    parser.set_defaults(handler=export_subgraphs)
