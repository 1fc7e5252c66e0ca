from dataclasses import dataclass, field
from typing import Any, Dict, Optional

import numpy as np

from igmc.diff.optim import AdamState
from igmc.models.graph import RatingScale
from igmc.schemas.model import ModelConfig


@dataclass(eq=False)
class Checkpoint:
    """
    Snapshot of a training run at the end of one epoch.

    Attributes:
        model_config (ModelConfig): Architecture the parameters belong to.
        scale (RatingScale): Rating scale the model was trained on.
        params (Dict[str, np.ndarray]): Parameter values by name.
        adam_state (AdamState): Optimizer moments and step counter.
        epoch (int): Epoch the snapshot was taken after.
        train_config (Dict[str, Any]): Training protocol, for bookkeeping.
    """
    model_config: ModelConfig
    scale: RatingScale
    params: Dict[str, np.ndarray]
    adam_state: AdamState = field(default_factory=AdamState)
    epoch: int = 0
    train_config: Optional[Dict[str, Any]] = None
    path: Optional[str] = None
