from enum import Enum
from pathlib import Path
from typing import List, Tuple, Union

import numpy as np
import pandas as pd

from igmc.core.exceptions import DuplicateEdgeError, EmptyDatasetError, InputError, raise_parse_error


class RatingFormat(str, Enum):
    TSV4 = "tsv4"
    TSV3 = "tsv3"
    DAT = "dat"


# Number of columns per record for each accepted layout
EXPECTED_COLUMNS = {
    RatingFormat.TSV4: 4,
    RatingFormat.TSV3: 3,
    RatingFormat.DAT: 4,
}

RATING_COLUMNS = ["user", "item", "rating"]


def read_lines(path: Union[str, Path]) -> List[Tuple[int, str]]:
    """Read a UTF-8 text file into (line number, line) pairs, skipping blank lines.

    Args:
        path: File to read.

    Returns:
        List[Tuple[int, str]]: 1-based line numbers with the stripped line content.

    Raises:
        InputError: If the file does not exist.
        ParseError: If the content is not valid UTF-8.
    """
    path = Path(path)
    if not path.is_file():
        raise InputError(f"Rating file {path} not found")
    try:
        text = path.read_bytes().decode("utf-8")
    except UnicodeDecodeError as e:
        raise_parse_error(str(path), None, f"not valid UTF-8 ({e})")
    lines = [line.lstrip("﻿").strip() for line in text.splitlines()]
    return [(number, line) for number, line in enumerate(lines, start=1) if line]


def split_records(records: List[Tuple[int, str]], fmt: RatingFormat, source: str) -> pd.DataFrame:
    """Split raw lines into user/item/rating string columns.

    Args:
        records: Output of read_lines.
        fmt (RatingFormat): Column layout.
        source (str): File name used in error messages.

    Returns:
        pd.DataFrame: Columns user, item, rating (strings) and line (int).

    Raises:
        EmptyDatasetError: If there are no records.
        ParseError: If a record has the wrong number of columns.
    """
    if not records:
        raise EmptyDatasetError(f"empty dataset: {source}")
    numbers = np.fromiter((n for n, _ in records), dtype=np.int64, count=len(records))
    lines = pd.Series([line for _, line in records])
    parts = lines.str.split("::") if fmt == RatingFormat.DAT else lines.str.split()

    expected = EXPECTED_COLUMNS[fmt]
    counts = parts.str.len().to_numpy()
    bad = np.flatnonzero(counts != expected)
    if bad.size:
        first = bad[0]
        raise_parse_error(source, int(numbers[first]), f"expected {expected} columns, found {counts[first]}")

    df = pd.DataFrame(parts.tolist()).iloc[:, :3]
    df.columns = RATING_COLUMNS
    df["line"] = numbers
    return df


def parse_ratings(df: pd.DataFrame, source: str) -> pd.DataFrame:
    """Convert the string columns to integer ids and real ratings.

    Args:
        df (pd.DataFrame): Output of split_records.
        source (str): File name used in error messages.

    Returns:
        pd.DataFrame: Columns user (int64), item (int64), rating (float64), line.

    Raises:
        ParseError: On non-integer or negative ids and on non-numeric ratings.
        DuplicateEdgeError: When a (user, item) pair occurs twice.
    """
    parsed = pd.DataFrame({"line": df["line"]})
    for column in ("user", "item"):
        values = pd.to_numeric(df[column], errors="coerce")
        invalid = values.isna() | (values != np.floor(values)) | (values < 0)
        if invalid.any():
            first = int(np.flatnonzero(invalid.to_numpy())[0])
            raise_parse_error(source, int(df["line"].iloc[first]),
                              f"{column} id '{df[column].iloc[first]}' is not a non-negative integer")
        parsed[column] = values.astype(np.int64)

    ratings = pd.to_numeric(df["rating"], errors="coerce")
    invalid = ratings.isna() | ~np.isfinite(ratings.to_numpy(dtype=np.float64, na_value=np.nan))
    if invalid.any():
        first = int(np.flatnonzero(invalid.to_numpy())[0])
        raise_parse_error(source, int(df["line"].iloc[first]), f"rating '{df['rating'].iloc[first]}' is not numeric")
    parsed["rating"] = ratings.astype(np.float64)

    duplicated = parsed.duplicated(subset=["user", "item"], keep="first")
    if duplicated.any():
        row = parsed[duplicated].iloc[0]
        raise DuplicateEdgeError(
            f"Duplicate edge ({row['user']}, {row['item']}) at {source}:{int(row['line'])}")
    return parsed[["user", "item", "rating", "line"]]


def analyse_ratings(path: Union[str, Path], fmt: RatingFormat) -> pd.DataFrame:
    """Read, split and parse a rating file in one go."""
    source = str(path)
    return parse_ratings(split_records(read_lines(path), RatingFormat(fmt), source), source)


def read_feature_file(path: Union[str, Path]) -> pd.DataFrame:
    """Read a content feature file: external id followed by real feature columns, tab separated.

    Raises:
        InputError: If the file is missing or empty.
        ParseError: If an id or a feature value is not numeric.
    """
    path = Path(path)
    if not path.is_file():
        raise InputError(f"Feature file {path} not found")
    try:
        df = pd.read_csv(path, sep="\t", header=None, comment="#")
    except pd.errors.EmptyDataError:
        raise InputError(f"Feature file {path} is empty")
    if df.empty or df.shape[1] < 2:
        raise InputError(f"Feature file {path} has no feature columns")
    numeric = df.apply(pd.to_numeric, errors="coerce")
    if numeric.isna().any().any():
        row = int(np.flatnonzero(numeric.isna().any(axis=1).to_numpy())[0])
        raise_parse_error(str(path), row + 1, "non-numeric feature value")
    return numeric


def read_pairs(path: Union[str, Path]) -> np.ndarray:
    """Read (user, item) external id pairs from the first two columns of a whitespace separated file.

    Further columns (a rating, a timestamp) are ignored.

    Raises:
        InputError: If the file does not exist.
        EmptyDatasetError: If it has no records.
        ParseError: If an id is not a non-negative integer.
    """
    source = str(path)
    records = read_lines(path)
    if not records:
        raise EmptyDatasetError(f"empty pair list: {source}")
    pairs = np.zeros((len(records), 2), dtype=np.int64)
    for row, (number, line) in enumerate(records):
        parts = line.replace("::", " ").split()
        if len(parts) < 2 or not all(p.isdigit() for p in parts[:2]):
            raise_parse_error(source, number, "expected two non-negative integer ids")
        pairs[row] = int(parts[0]), int(parts[1])
    return pairs
