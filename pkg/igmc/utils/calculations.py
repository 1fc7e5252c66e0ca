"""
Metric calculations on prediction vectors.
"""
from typing import List, Tuple

import numpy as np
import pandas as pd

from igmc.core.exceptions import raise_argument_error, raise_dimension_error
from igmc.schemas.evaluation import TypeBreakdown


def clip_predictions(predictions: np.ndarray, low: float, high: float) -> np.ndarray:
    return np.clip(np.asarray(predictions, dtype=np.float64), low, high)


def calculate_rmse(predictions: np.ndarray, targets: np.ndarray) -> float:
    """
    RMSE = sqrt(mean((prediction - target)^2)).

    Raises:
        DimensionError: If the vectors differ in length.
        UsageError: If they are empty.
    """
    predictions = np.asarray(predictions, dtype=np.float64).reshape(-1)
    targets = np.asarray(targets, dtype=np.float64).reshape(-1)
    if predictions.shape != targets.shape:
        raise_dimension_error("rmse", predictions.shape, targets.shape)
    if predictions.size == 0:
        raise_argument_error("prediction count", 0, "at least one pair")
    return float(np.sqrt(np.mean((predictions - targets) ** 2)))


def calculate_type_breakdown(predictions: np.ndarray, targets: np.ndarray) -> List[TypeBreakdown]:
    """
    Per true rating value: pair count, RMSE and mean prediction.

    Rating values are listed in ascending order.
    """
    df = pd.DataFrame({"target": np.asarray(targets, dtype=np.float64),
                       "prediction": np.asarray(predictions, dtype=np.float64)})
    df["squared"] = (df["prediction"] - df["target"]) ** 2
    grouped = df.groupby("target").agg(count=("squared", "size"), mse=("squared", "mean"),
                                       mean_prediction=("prediction", "mean"))
    return [
        TypeBreakdown(rating_value=float(value), count=int(row["count"]), rmse=float(np.sqrt(row["mse"])),
                      mean_prediction=float(row["mean_prediction"]))
        for value, row in grouped.sort_index().iterrows()
    ]


def calculate_mean_std(values: List[float]) -> Tuple[float, float]:
    """Mean and population standard deviation; (0, 0) for no values."""
    if not values:
        return 0.0, 0.0
    array = np.asarray(values, dtype=np.float64)
    return float(array.mean()), float(array.std())
