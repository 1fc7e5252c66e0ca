"""Configuration management for the application."""

from typing import Optional

import numpy as np
from pydantic import Field, field_validator
from pydantic_settings import BaseSettings


class Settings(BaseSettings):
    """Application settings."""

    PROJECT_NAME: str = "igmc"
    VERSION: str = "1.0.0"
    DESCRIPTION: str = "Inductive graph-based matrix completion on enclosing subgraphs"

    # Logging
    LOG_LEVEL: str = Field(default="INFO", description="Root log level")
    LOG_FILE: Optional[str] = Field(default=None, description="Log file, unset or empty for console only")

    # Numerics
    FLOAT_DTYPE: str = Field(default="float64", description="Real type of every tensor")
    DEBUG_NUMERICS: bool = Field(default=False, description="Check every diffcore op for NaN/Inf")

    # Execution
    WORKERS: int = Field(default=1, ge=1, description="Subgraph extraction worker processes")
    PROGRESS: bool = Field(default=True, description="Show tqdm progress bars")

    # Paths
    DATA_DIR: str = Field(default="data", description="Root of the dataset folders")
    OUTPUT_DIR: str = Field(default="runs", description="Default output directory")

    @field_validator("FLOAT_DTYPE", mode="before")
    @classmethod
    def normalize_float_dtype(cls, v) -> str:
        """Accept numpy spellings of the two supported real types."""
        name = np.dtype(v).name if not isinstance(v, str) else v.strip().lower()
        if name in ("float64", "f8", "double"):
            return "float64"
        if name in ("float32", "f4", "single"):
            return "float32"
        raise ValueError(f"Unsupported FLOAT_DTYPE '{v}'. Valid values: ['float64', 'float32']")

    @property
    def dtype(self) -> np.dtype:
        return np.dtype(self.FLOAT_DTYPE)

    class Config:
        env_file = ".env"
        case_sensitive = True
        extra = "allow"


settings = Settings()
