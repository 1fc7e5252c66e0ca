"""Data ingestion command."""

import argparse
import logging

from igmc.cli.arguments import add_common_arguments, emit, output_dir
from igmc.cli.deps import get_graph_service
from igmc.utils.ratings_import import RatingFormat

logger = logging.getLogger(__name__)


def ingest(args: argparse.Namespace) -> int:
    """Parse rating files and write the canonical edge lists, id maps and scale."""
    graph_service = get_graph_service()
    out = output_dir(args, "ingest")
    if args.test_file:
        dataset = graph_service.load_split(args.train_file, args.test_file, args.format)
        graph, user_map, item_map = dataset.graph, dataset.user_map, dataset.item_map
        graph_service.export_table(dataset.test, out / "test.tsv")
        test_count = len(dataset.test)
    else:
        loaded = graph_service.load_ratings(args.train_file, args.format)
        graph = graph_service.build_graph(loaded.table, len(loaded.user_map), len(loaded.item_map), loaded.scale)
        user_map, item_map = loaded.user_map, loaded.item_map
        test_count = 0

    graph_service.export_edge_list(graph, out / "train.tsv")
    graph_service.write_id_maps(user_map, item_map, out)
    graph_service.write_scale(graph.scale, out / "scale.json")
    emit({
        "users": graph.num_users,
        "items": graph.num_items,
        "train_ratings": graph.num_edges,
        "test_ratings": test_count,
        "scale": graph.scale.values,
        "out": str(out),
    })
    return 0


def register(subparsers) -> None:
    parser = subparsers.add_parser("ingest", help="Parse rating files into canonical form")
    add_common_arguments(parser)
    parser.add_argument("--train-file", required=True, help="Rating file (the training split when --test-file is set)")
    parser.add_argument("--test-file", help="Optional test split sharing the id space")
    parser.add_argument("--format", default=RatingFormat.TSV4.value, choices=[f.value for f in RatingFormat])
    parser.set_defaults(handler=ingest)
