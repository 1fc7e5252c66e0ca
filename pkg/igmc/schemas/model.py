"""Model configuration schema."""

from enum import Enum
from typing import List

from pydantic import BaseModel, Field, field_validator


class Pooling(str, Enum):
    TARGET_CONCAT = "target_concat"
    SUM = "sum"


class ModelConfig(BaseModel):
    """Architecture of the graph-level network."""
    num_rating_types: int = Field(..., ge=1, description="Number of edge types (size of the rating scale)")
    hop: int = Field(default=1, ge=1, description="Hop count of the subgraphs; input width is 2*hop+2")
    layer_dims: List[int] = Field(default_factory=lambda: [32, 32, 32, 32], description="Output width of each layer")
    num_bases: int = Field(default=4, ge=1, description="Basis matrices shared by the per-type weights")
    mlp_hidden: int = Field(default=128, ge=1, description="Hidden units of the rating head")
    mlp_dropout: float = Field(default=0.5, ge=0.0, lt=1.0, description="Dropout rate before the output unit")
    pooling: Pooling = Field(default=Pooling.TARGET_CONCAT, description="Subgraph pooling")
    content_dim: int = Field(default=0, ge=0, description="Width of appended content features, 0 = off")
    concat_pre_activation: bool = Field(default=False, description="Concatenate layer outputs before tanh")

    @field_validator("layer_dims", mode="before")
    @classmethod
    def parse_layer_dims(cls, v):
        if isinstance(v, str):
            return [int(part) for part in v.replace(";", ",").split(",") if part.strip()]
        return v

    @field_validator("layer_dims")
    @classmethod
    def check_layer_dims(cls, v: List[int]) -> List[int]:
        if not v:
            raise ValueError("layer_dims must not be empty")
        if any(d < 1 for d in v):
            raise ValueError(f"layer widths must be positive, got {v}")
        return v

    @property
    def input_dim(self) -> int:
        return 2 * self.hop + 2

    @property
    def node_dim(self) -> int:
        """Width of the concatenated per-node representation."""
        return sum(self.layer_dims)

    @property
    def pooled_dim(self) -> int:
        """Input width of the rating head."""
        width = 2 * self.node_dim if self.pooling == Pooling.TARGET_CONCAT else self.node_dim
        return width + self.content_dim
