"""CLI dependencies."""

from igmc.services.checkpoint_service import CheckpointService
from igmc.services.evaluation_service import EvaluationService
from igmc.services.graph_service import GraphService
from igmc.services.subgraph_service import SubgraphService
from igmc.services.train_service import TrainService


def get_graph_service() -> GraphService:
    """Get graph service instance."""
    return GraphService()


def get_subgraph_service() -> SubgraphService:
    """Get subgraph service instance."""
    return SubgraphService()


def get_checkpoint_service() -> CheckpointService:
    """Get checkpoint service instance."""
    return CheckpointService()


def get_train_service() -> TrainService:
    """Get train service instance."""
    return TrainService(get_subgraph_service(), checkpoint_service=get_checkpoint_service())


def get_evaluation_service() -> EvaluationService:
    """Get evaluation service instance."""
    return EvaluationService(get_graph_service(), get_subgraph_service(), get_train_service())
