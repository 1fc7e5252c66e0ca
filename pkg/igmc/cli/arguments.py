"""Shared command-line arguments and their resolution into datasets and configs."""

import argparse
import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from pydantic import ValidationError

from igmc.cli.deps import get_checkpoint_service, get_graph_service
from igmc.core.config import settings
from igmc.core.exceptions import DataError, UsageError
from igmc.models.checkpoint import Checkpoint
from igmc.models.graph import ContentFeatures
from igmc.schemas.dataset import DATASET_PRESETS, SplitKind
from igmc.schemas.model import ModelConfig
from igmc.schemas.train import TrainConfig
from igmc.services.graph_service import Dataset
from igmc.utils.common import convert_numpy_to_builtin, read_flat_config
from igmc.utils.ratings_import import RatingFormat, read_pairs

logger = logging.getLogger(__name__)

# Model fields that come from the data, not from the user
DERIVED_MODEL_FIELDS = {"num_rating_types", "hop", "content_dim"}


class CliArgumentParser(argparse.ArgumentParser):
    """ArgumentParser that raises UsageError instead of exiting."""

    def error(self, message: str):
        raise UsageError(f"{self.prog}: {message}")


def flag(name: str) -> str:
    return "--" + name.replace("_", "-")


def add_common_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="Flat key=value configuration file")
    parser.add_argument("--seed", type=int, default=None, help="Global seed")
    parser.add_argument("--out", help="Output directory")


def add_dataset_arguments(parser: argparse.ArgumentParser, prefix: str = "") -> None:
    """Dataset selection: a preset name with its folder, or explicit train/test files."""
    parser.add_argument(flag(prefix + "dataset"), dest=prefix + "dataset", default="custom",
                        help=f"Preset ({', '.join(DATASET_PRESETS)}) or a free name")
    parser.add_argument(flag(prefix + "data_dir"), dest=prefix + "data_dir", help="Folder of the preset's files")
    parser.add_argument(flag(prefix + "train_file"), dest=prefix + "train_file", help="Training rating file")
    parser.add_argument(flag(prefix + "test_file"), dest=prefix + "test_file", help="Test rating file")
    parser.add_argument(flag(prefix + "format"), dest=prefix + "format", default=RatingFormat.TSV4.value,
                        choices=[f.value for f in RatingFormat], help="Rating file layout")


def add_config_arguments(parser: argparse.ArgumentParser) -> None:
    """One --field-name flag per TrainConfig and ModelConfig field."""
    for name, info in TrainConfig.model_fields.items():
        if name != "seed":
            parser.add_argument(flag(name), dest=name, default=None, help=info.description)
    for name, info in ModelConfig.model_fields.items():
        if name not in DERIVED_MODEL_FIELDS:
            parser.add_argument(flag(name), dest=name, default=None, help=info.description)


def add_checkpoint_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--checkpoint", dest="checkpoints", action="append", required=True,
                        help="Checkpoint file; repeat to average an ensemble")


def add_clip_arguments(parser: argparse.ArgumentParser) -> None:
    """--clip / --no-clip; when neither is given the checkpoint's training setting applies."""
    parser.add_argument("--clip", dest="clip", action="store_const", const=True, default=None,
                        help="Clip predictions to the rating range")
    parser.add_argument("--no-clip", dest="clip", action="store_const", const=False,
                        help="Do not clip predictions to the rating range")


def output_dir(args: argparse.Namespace, command: str) -> Path:
    path = Path(args.out) if args.out else Path(settings.OUTPUT_DIR) / command
    path.mkdir(parents=True, exist_ok=True)
    return path


def load_dataset(args: argparse.Namespace, prefix: str = "", split_seed: Optional[int] = None) -> Dataset:
    """
    Load the dataset named by the arguments.

    Random-split presets are split with split_seed when given, else with --seed (default 0).

    Raises:
        UsageError: If neither a preset nor a training file is given.
    """
    graph_service = get_graph_service()
    name = getattr(args, prefix + "dataset")
    train_file = getattr(args, prefix + "train_file")
    test_file = getattr(args, prefix + "test_file")
    fmt = getattr(args, prefix + "format")
    seed = split_seed if split_seed is not None else (args.seed if args.seed is not None else 0)

    if train_file:
        if not test_file:
            raise UsageError(f"{flag(prefix + 'test_file')} is required with {flag(prefix + 'train_file')}")
        return graph_service.load_split(train_file, test_file, fmt, name)
    if name not in DATASET_PRESETS:
        raise UsageError(f"unknown dataset '{name}': use one of {list(DATASET_PRESETS)} or give "
                         f"{flag(prefix + 'train_file')}/{flag(prefix + 'test_file')}")
    directory = getattr(args, prefix + "data_dir") or Path(settings.DATA_DIR) / name
    return graph_service.load_dataset(DATASET_PRESETS[name], directory, seed)


def resolve_configs(args: argparse.Namespace, dataset: Dataset) -> Tuple[TrainConfig, ModelConfig]:
    """
    Build the run configuration: preset protocol, then the --config file, then flags, then --seed.

    Raises:
        UsageError: On unknown configuration keys or invalid values.
    """
    values: Dict[str, Any] = {}
    if dataset.name in DATASET_PRESETS:
        values.update(DATASET_PRESETS[dataset.name].train_overrides())
    if getattr(args, "config", None):
        values.update(read_flat_config(args.config))
    for name in list(TrainConfig.model_fields) + list(ModelConfig.model_fields):
        value = getattr(args, name, None)
        if value is not None and name != "seed":
            values[name] = value
    if args.seed is not None:
        values["seed"] = args.seed

    unknown = sorted(set(values) - set(TrainConfig.model_fields) - set(ModelConfig.model_fields))
    if unknown:
        raise UsageError(f"unknown configuration keys {unknown}")
    try:
        train_config = TrainConfig(**{k: v for k, v in values.items() if k in TrainConfig.model_fields})
        model_values = {k: v for k, v in values.items()
                        if k in ModelConfig.model_fields and k not in DERIVED_MODEL_FIELDS}
        model_config = ModelConfig(num_rating_types=len(dataset.scale), hop=train_config.h, **model_values)
    except ValidationError as e:
        raise UsageError(f"invalid configuration: {e}")
    return train_config, model_config


def load_checkpoints(args: argparse.Namespace) -> List[Checkpoint]:
    return get_checkpoint_service().load_many(args.checkpoints)


def check_scale(checkpoints: List[Checkpoint], dataset: Dataset) -> None:
    if checkpoints[0].scale.values != dataset.scale.values:
        raise DataError(f"checkpoints use scale {checkpoints[0].scale.values} but the dataset has "
                        f"{dataset.scale.values}; use the transfer command")


def load_checkpoint_dataset(args: argparse.Namespace) -> Tuple[Dataset, List[Checkpoint]]:
    """
    Load the checkpoint ensemble, then the dataset split it was trained on.

    A random-split preset is split again with the training seed of the checkpoints, so the test
    pairs are the ones held out during training.

    Raises:
        UsageError: If --seed names another split than the one the checkpoints were trained on.
        DataError: If the checkpoints were trained on another rating scale than the dataset's.
    """
    checkpoints = load_checkpoints(args)
    split_seed = checkpoint_train_config(checkpoints[0]).seed
    preset = DATASET_PRESETS.get(args.dataset)
    if not args.train_file and preset is not None and preset.split == SplitKind.RANDOM:
        if args.seed is not None and args.seed != split_seed:
            raise UsageError(f"--seed {args.seed} selects another split of {preset.name} than the one the "
                             f"checkpoints were trained on (seed {split_seed})")
    dataset = load_dataset(args, split_seed=split_seed)
    check_scale(checkpoints, dataset)
    return dataset, checkpoints


def checkpoint_train_config(checkpoint: Checkpoint) -> TrainConfig:
    return TrainConfig.model_validate(checkpoint.train_config) if checkpoint.train_config else TrainConfig()


def extraction_options(checkpoint: Checkpoint) -> Tuple[Optional[int], int]:
    """Fringe cap and seed the checkpoint was trained with."""
    train_config = checkpoint_train_config(checkpoint)
    return train_config.max_nodes_per_hop, train_config.seed


def resolve_clip(args: argparse.Namespace, checkpoint: Checkpoint) -> bool:
    """--clip / --no-clip when given, otherwise the clipping the checkpoint was trained with."""
    if getattr(args, "clip", None) is not None:
        return args.clip
    return checkpoint_train_config(checkpoint).clip_predictions


def resolve_pairs(args: argparse.Namespace, dataset: Dataset) -> Tuple[np.ndarray, Optional[np.ndarray]]:
    """Internal id pairs from --pairs (external ids), or the test pairs and ratings by default."""
    if getattr(args, "pairs", None):
        external = read_pairs(args.pairs)
        return np.stack([dataset.user_map.to_internal(external[:, 0]),
                         dataset.item_map.to_internal(external[:, 1])], axis=1), None
    return dataset.test.pairs(), dataset.test.values


def load_content(args: argparse.Namespace, dataset: Dataset) -> Optional[ContentFeatures]:
    if not (getattr(args, "user_features", None) and getattr(args, "item_features", None)):
        return None
    return get_graph_service().load_content_features(args.user_features, args.item_features,
                                                     dataset.user_map, dataset.item_map)


def emit(document: Any) -> None:
    """Print a JSON document on stdout."""
    print(json.dumps(convert_numpy_to_builtin(document), indent=2))
