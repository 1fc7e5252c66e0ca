"""Common utility functions."""

import hashlib
import json
from pathlib import Path
from typing import Any, Dict, Iterator, Union

import numpy as np

from igmc.core.exceptions import InputError, raise_parse_error


def derive_rng(seed: int, *keys: int) -> np.random.Generator:
    """Independent generator for (seed, *keys); the same inputs always give the same stream."""
    return np.random.default_rng(np.random.SeedSequence([int(seed) & 0xFFFFFFFF, *(int(k) for k in keys)]))


def convert_numpy_to_builtin(data: Any) -> Any:
    """Convert numpy scalars and arrays to builtin types recursively."""
    if isinstance(data, np.ndarray):
        return data.tolist()
    elif isinstance(data, np.generic):
        return data.item()
    elif isinstance(data, dict):
        return {key: convert_numpy_to_builtin(value) for key, value in data.items()}
    elif isinstance(data, (list, tuple)):
        return [convert_numpy_to_builtin(item) for item in data]
    else:
        return data


def config_hash(*documents: Dict[str, Any]) -> str:
    """Short stable hash of one or more configuration dictionaries."""
    payload = json.dumps([convert_numpy_to_builtin(d) for d in documents], sort_keys=True, default=str)
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:12]


def batch_slices(total: int, size: int) -> Iterator[slice]:
    """Consecutive slices of at most `size` elements covering range(total)."""
    for start in range(0, total, size):
        yield slice(start, min(start + size, total))


def read_flat_config(path: Union[str, Path]) -> Dict[str, str]:
    """Parse a flat `key=value` file; blank lines and lines starting with '#' are ignored.

    Returns:
        Dict[str, str]: Raw string values, to be validated by the target schema.

    Raises:
        InputError: If the file does not exist.
        ParseError: If a line has no '='.
    """
    path = Path(path)
    if not path.is_file():
        raise InputError(f"Config file {path} not found")
    values: Dict[str, str] = {}
    for number, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise_parse_error(str(path), number, "expected key=value")
        key, value = line.split("=", 1)
        values[key.strip().replace("-", "_")] = value.strip()
    return values


def write_json(path: Union[str, Path], document: Any) -> None:
    Path(path).write_text(json.dumps(convert_numpy_to_builtin(document), indent=2), encoding="utf-8")
