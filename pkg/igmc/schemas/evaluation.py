"""Evaluation, transfer and run-summary schemas."""

from typing import Dict, List, Optional

from pydantic import BaseModel, Field, field_validator, model_validator

from igmc.models.graph import RatingScale


class TypeBreakdown(BaseModel):
    """Error statistics of the test pairs sharing one true rating value."""
    rating_value: float
    count: int = Field(..., ge=0)
    rmse: float = Field(..., ge=0.0)
    mean_prediction: float


class EvalResult(BaseModel):
    """RMSE of one evaluation, with and without clipping to the rating range."""
    rmse: float = Field(..., ge=0.0, description="RMSE of the reported predictions")
    rmse_clipped: float = Field(..., ge=0.0)
    rmse_unclipped: float = Field(..., ge=0.0)
    count: int = Field(..., ge=0, description="Number of evaluated pairs")
    per_type: List[TypeBreakdown] = Field(default_factory=list)


class TransferSpec(BaseModel):
    """
    How a foreign rating scale is mapped onto the scale a model was trained on.

    Attributes:
        source_scale (RatingScale): Training-time scale.
        bin_map (Dict[float, int]): Target rating value -> source rating-type index.
        output_rescale (float): Multiplier applied to the transferred predictions.
        bin_edges (List[float]): Edges of the equal-width bins, when binning was used.
    """
    source_scale: RatingScale
    bin_map: Dict[float, int]
    output_rescale: float = Field(default=1.0, gt=0.0)
    bin_edges: List[float] = Field(default_factory=list)

    @model_validator(mode="after")
    def check_bin_map(self) -> "TransferSpec":
        pairs = sorted(self.bin_map.items())
        if any(not 0 <= t < len(self.source_scale) for _, t in pairs):
            raise ValueError(f"bin_map targets outside [0, {len(self.source_scale)})")
        if any(b[1] < a[1] for a, b in zip(pairs, pairs[1:])):
            raise ValueError("bin_map must be monotone in the rating value")
        return self

    @property
    def is_identity(self) -> bool:
        return self.output_rescale == 1.0 and all(
            self.source_scale.values[t] == value for value, t in self.bin_map.items()
        ) and len(self.bin_map) == len(self.source_scale)


class RunSummary(BaseModel):
    """Results file written next to every run."""
    dataset: str
    config_hash: str
    seed: int
    rmse_clipped: Optional[float] = None
    rmse_unclipped: Optional[float] = None
    runtime_s: float = 0.0
    variant: Optional[str] = None
    keep_fraction: Optional[float] = None


class RepeatedResult(BaseModel):
    """Mean and standard deviation over runs with consecutive seeds."""
    runs: List[RunSummary]
    mean_rmse: float
    std_rmse: float

    @field_validator("runs")
    @classmethod
    def check_runs(cls, v: List[RunSummary]) -> List[RunSummary]:
        if not v:
            raise ValueError("at least one run is required")
        return v
