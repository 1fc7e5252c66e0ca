"""
Checkpoint container.

Layout (all integers little-endian):

    8 bytes   magic b"IGMCCKPT"
    uint32    format version
    uint64    header length n
    n bytes   UTF-8 JSON header: model config, scale, epoch, train config, adam step,
              and a tensor index [{name, section, shape, offset}] into the payload
    payload   float64 little-endian values of every tensor, back to back

Sections are "param", "adam_m" and "adam_v".
"""

import json
import logging
import struct
from pathlib import Path
from typing import Dict, List, Sequence, Union

import numpy as np

from igmc.core.exceptions import DataError, InputError, raise_contract_error
from igmc.diff.optim import AdamState
from igmc.models.checkpoint import Checkpoint
from igmc.models.graph import RatingScale
from igmc.schemas.model import ModelConfig

logger = logging.getLogger(__name__)

MAGIC = b"IGMCCKPT"
FORMAT_VERSION = 1
VALUE_DTYPE = np.dtype("<f8")

PathLike = Union[str, Path]


class CheckpointService:
    """Service class for saving and loading checkpoints."""

    def save(self, checkpoint: Checkpoint, path: PathLike) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        index: List[dict] = []
        blobs: List[bytes] = []
        offset = 0
        sections = (("param", checkpoint.params), ("adam_m", checkpoint.adam_state.m),
                    ("adam_v", checkpoint.adam_state.v))
        for section, arrays in sections:
            for name, value in arrays.items():
                blob = np.ascontiguousarray(value, dtype=VALUE_DTYPE).tobytes()
                index.append({"name": name, "section": section, "shape": list(np.shape(value)), "offset": offset})
                blobs.append(blob)
                offset += len(blob)

        header = {
            "model_config": checkpoint.model_config.model_dump(mode="json"),
            "scale": checkpoint.scale.values,
            "epoch": checkpoint.epoch,
            "train_config": checkpoint.train_config,
            "adam_step": checkpoint.adam_state.step,
            "tensors": index,
        }
        header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")
        with path.open("wb") as f:
            f.write(MAGIC)
            f.write(struct.pack("<IQ", FORMAT_VERSION, len(header_bytes)))
            f.write(header_bytes)
            for blob in blobs:
                f.write(blob)
        logger.info(f"Saved checkpoint of epoch {checkpoint.epoch} to {path}")
        return path

    def load(self, path: PathLike) -> Checkpoint:
        """
        Read a checkpoint written by save; values come back bit-identical.

        Raises:
            InputError: If the file does not exist.
            DataError: On a wrong magic header, unknown version or truncated payload.
        """
        path = Path(path)
        if not path.is_file():
            raise InputError(f"Checkpoint {path} not found")
        raw = path.read_bytes()
        prefix = len(MAGIC) + struct.calcsize("<IQ")
        if len(raw) < prefix or raw[:len(MAGIC)] != MAGIC:
            raise DataError(f"{path} is not a checkpoint file")
        version, header_len = struct.unpack("<IQ", raw[len(MAGIC):prefix])
        if version != FORMAT_VERSION:
            raise DataError(f"{path}: unsupported checkpoint version {version}")
        try:
            header = json.loads(raw[prefix:prefix + header_len].decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as e:
            raise DataError(f"{path}: corrupt checkpoint header ({e})")
        payload = memoryview(raw)[prefix + header_len:]

        sections: Dict[str, Dict[str, np.ndarray]] = {"param": {}, "adam_m": {}, "adam_v": {}}
        for entry in header["tensors"]:
            shape = tuple(entry["shape"])
            count = int(np.prod(shape)) if shape else 1
            end = entry["offset"] + count * VALUE_DTYPE.itemsize
            if end > len(payload):
                raise DataError(f"{path}: truncated payload for tensor '{entry['name']}'")
            value = np.frombuffer(payload[entry["offset"]:end], dtype=VALUE_DTYPE).reshape(shape)
            sections[entry["section"]][entry["name"]] = value.astype(np.float64, copy=True)

        return Checkpoint(
            model_config=ModelConfig.model_validate(header["model_config"]),
            scale=RatingScale(values=header["scale"]),
            params=sections["param"],
            adam_state=AdamState(step=header["adam_step"], m=sections["adam_m"], v=sections["adam_v"]),
            epoch=header["epoch"],
            train_config=header.get("train_config"),
            path=str(path),
        )

    def load_many(self, paths: Sequence[PathLike]) -> List[Checkpoint]:
        """
        Load an ensemble of checkpoints.

        Raises:
            ContractError: If they disagree on the model configuration or the rating scale.
        """
        checkpoints = [self.load(p) for p in paths]
        self.check_compatible(checkpoints)
        return checkpoints

    @staticmethod
    def check_compatible(checkpoints: Sequence[Checkpoint]) -> None:
        if not checkpoints:
            raise_contract_error("at least one checkpoint is required")
        first = checkpoints[0]
        for other in checkpoints[1:]:
            if other.model_config != first.model_config:
                raise_contract_error(f"checkpoint {other.path or other.epoch} has a different model configuration")
            if other.scale.values != first.scale.values:
                raise_contract_error(f"checkpoint {other.path or other.epoch} has a different rating scale")
