"""Training configuration and report schemas."""

from typing import List, Optional

from pydantic import BaseModel, Field, field_validator, model_validator


def _split_list(v):
    if isinstance(v, str):
        return [item for item in (part.strip() for part in v.replace(";", ",").split(",")) if item]
    return v


class TrainConfig(BaseModel):
    """Optimization protocol of one training run."""
    epochs: int = Field(default=80, ge=1, description="Number of passes over the training ratings")
    batch_size: int = Field(default=50, ge=1, description="Target pairs per optimizer step")
    lr0: float = Field(default=0.001, gt=0.0, description="Initial learning rate")
    lr_decay_factor: float = Field(default=0.1, gt=0.0, le=1.0, description="Multiplier applied every lr_decay_every epochs")
    lr_decay_every: int = Field(default=50, ge=1, description="Epochs between learning-rate decays")
    arr_lambda: float = Field(default=0.001, ge=0.0, description="Weight of the adjacent rating regularizer")
    edge_dropout: float = Field(default=0.2, ge=0.0, lt=1.0, description="Edge dropout probability at train time")
    h: int = Field(default=1, ge=1, description="Hop count of the enclosing subgraphs")
    max_nodes_per_hop: Optional[int] = Field(default=200, ge=1, description="Fringe cap, None to disable")
    ensemble_epochs: List[int] = Field(default_factory=list, description="Epochs whose checkpoints are averaged")
    seed: int = Field(default=1234, description="Global seed")
    clip_predictions: bool = Field(default=True, description="Clip predictions to the rating range")

    @field_validator("ensemble_epochs", mode="before")
    @classmethod
    def parse_ensemble_epochs(cls, v):
        return _split_list(v)

    @field_validator("max_nodes_per_hop", mode="before")
    @classmethod
    def parse_max_nodes(cls, v):
        if isinstance(v, str) and v.strip().lower() in ("", "none", "off", "0"):
            return None
        if v == 0:
            return None
        return v

    @model_validator(mode="after")
    def check_ensemble_epochs(self) -> "TrainConfig":
        if not self.ensemble_epochs:
            self.ensemble_epochs = [self.epochs]
        outside = [e for e in self.ensemble_epochs if not 1 <= e <= self.epochs]
        if outside:
            raise ValueError(f"ensemble epochs {outside} outside [1, {self.epochs}]")
        self.ensemble_epochs = sorted(set(self.ensemble_epochs))
        return self


class EpochRecord(BaseModel):
    """One line of the training log."""
    epoch: int
    train_mse: float
    train_rmse: float
    lr: float
    wall_time_s: float
    checkpoint: Optional[str] = None


class TrainReport(BaseModel):
    """Outcome of a training run."""
    epochs: List[EpochRecord] = Field(default_factory=list)
    checkpoints: List[str] = Field(default_factory=list)
    config_hash: str = ""
    seed: int = 0
    runtime_s: float = 0.0
    test_rmse_clipped: Optional[float] = None
    test_rmse_unclipped: Optional[float] = None

    @field_validator("epochs")
    @classmethod
    def check_epoch_order(cls, v: List[EpochRecord]) -> List[EpochRecord]:
        numbers = [record.epoch for record in v]
        if numbers != sorted(set(numbers)):
            raise ValueError("epoch records must be strictly increasing")
        return v

    @property
    def final_train_rmse(self) -> Optional[float]:
        return self.epochs[-1].train_rmse if self.epochs else None
