"""Built-in dataset protocols."""

from enum import Enum
from typing import Dict, List, Optional

from pydantic import BaseModel, Field

from igmc.utils.ratings_import import RatingFormat


class SplitKind(str, Enum):
    FILES = "files"
    RANDOM = "random"


class DatasetPreset(BaseModel):
    """File layout and training protocol of a known dataset."""
    name: str
    fmt: RatingFormat = RatingFormat.TSV4
    split: SplitKind = SplitKind.FILES
    train_file: str = "train.tsv"
    test_file: Optional[str] = "test.tsv"
    test_fraction: float = Field(default=0.1, gt=0.0, lt=1.0)
    epochs: int
    lr_decay_every: int
    ensemble_epochs: List[int]

    def train_overrides(self) -> Dict[str, object]:
        """TrainConfig fields set by this protocol."""
        return {
            "epochs": self.epochs,
            "lr_decay_every": self.lr_decay_every,
            "ensemble_epochs": list(self.ensemble_epochs),
        }


DATASET_PRESETS: Dict[str, DatasetPreset] = {
    "ml100k": DatasetPreset(name="ml100k", fmt=RatingFormat.TSV4, train_file="u1.base", test_file="u1.test",
                            epochs=80, lr_decay_every=50, ensemble_epochs=[50, 60, 70, 80]),
    "ml1m": DatasetPreset(name="ml1m", fmt=RatingFormat.DAT, split=SplitKind.RANDOM, train_file="ratings.dat",
                          test_file=None, epochs=40, lr_decay_every=20, ensemble_epochs=[25, 30, 35, 40]),
    "flixster": DatasetPreset(name="flixster", epochs=40, lr_decay_every=50, ensemble_epochs=[10, 20, 30, 40]),
    "douban": DatasetPreset(name="douban", epochs=40, lr_decay_every=50, ensemble_epochs=[10, 20, 30, 40]),
    "yahoo_music": DatasetPreset(name="yahoo_music", epochs=40, lr_decay_every=50,
                                 ensemble_epochs=[10, 20, 30, 40]),
}
