"""Global test configuration and shared fixtures."""

import os
from pathlib import Path

import numpy as np
import pytest

from igmc.core.config import settings
from igmc.diff.tensor import get_tape
from igmc.models.graph import BipartiteGraph
from igmc.schemas.model import ModelConfig
from igmc.schemas.train import TrainConfig
from igmc.services.checkpoint_service import CheckpointService
from igmc.services.evaluation_service import EvaluationService
from igmc.services.graph_service import Dataset, GraphService
from igmc.services.model_service import ModelService
from igmc.services.subgraph_service import SubgraphService
from igmc.services.train_service import TrainService
from igmc.tests.fixtures.graphs import like_path_graph, toy_rating_rows, write_ratings

ML100K_ENV = "IGMC_ML100K_DIR"


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: dataset-scale or long-running acceptance test")


@pytest.fixture(autouse=True)
def quiet_settings(monkeypatch):
    """float64, no progress bars, no log file, single worker, empty tape."""
    monkeypatch.setattr(settings, "FLOAT_DTYPE", "float64")
    monkeypatch.setattr(settings, "PROGRESS", False)
    monkeypatch.setattr(settings, "LOG_FILE", None)
    monkeypatch.setattr(settings, "WORKERS", 1)
    monkeypatch.setattr(settings, "DEBUG_NUMERICS", False)
    get_tape().clear()


@pytest.fixture
def ml100k_dir() -> Path:
    """Folder with u1.base/u1.test; the test is skipped when it is not configured."""
    directory = os.environ.get(ML100K_ENV)
    if not directory or not (Path(directory) / "u1.base").is_file():
        pytest.skip(f"set {ML100K_ENV} to the ML-100K folder to run this test")
    return Path(directory)


# === SERVICES ===

@pytest.fixture
def graph_service() -> GraphService:
    return GraphService()


@pytest.fixture
def subgraph_service() -> SubgraphService:
    return SubgraphService()


@pytest.fixture
def model_service() -> ModelService:
    return ModelService()


@pytest.fixture
def checkpoint_service() -> CheckpointService:
    return CheckpointService()


@pytest.fixture
def train_service(subgraph_service, model_service, checkpoint_service) -> TrainService:
    return TrainService(subgraph_service, model_service, checkpoint_service)


@pytest.fixture
def evaluation_service(graph_service, subgraph_service, train_service) -> EvaluationService:
    return EvaluationService(graph_service, subgraph_service, train_service)


# === DATA ===

@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240518)


@pytest.fixture
def path_graph() -> BipartiteGraph:
    return like_path_graph()


@pytest.fixture
def toy_files(tmp_path):
    """Train and test rating files (tsv4) over one id space."""
    rows = toy_rating_rows(seed=3, num_users=12, num_items=10, count=70)
    train = write_ratings(tmp_path / "toy.base", rows[:60])
    test = write_ratings(tmp_path / "toy.test", rows[60:])
    return train, test


@pytest.fixture
def toy_dataset(graph_service, toy_files) -> Dataset:
    train, test = toy_files
    return graph_service.load_split(train, test, "tsv4", name="toy")


@pytest.fixture
def small_model_config() -> ModelConfig:
    """Narrow network for fast tests."""
    return ModelConfig(num_rating_types=5, hop=1, layer_dims=[4, 4], num_bases=2, mlp_hidden=8)


@pytest.fixture
def quick_train_config() -> TrainConfig:
    return TrainConfig(epochs=2, batch_size=16, lr_decay_every=50, ensemble_epochs=[1, 2], seed=7,
                       max_nodes_per_hop=None)
