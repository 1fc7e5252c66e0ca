"""Error hierarchy shared by every layer; each class knows its CLI exit code."""

from typing import Iterable, Optional, Sequence


class IGMCError(Exception):
    """Base class of every error raised on purpose by the package."""

    exit_code: int = 2

    def __init__(self, detail: str):
        super().__init__(detail)
        self.detail = detail


class UsageError(IGMCError):
    exit_code = 1


class DataError(IGMCError):
    exit_code = 2


class ParseError(DataError):
    def __init__(self, detail: str, line_number: Optional[int] = None):
        super().__init__(detail)
        self.line_number = line_number


class DuplicateEdgeError(DataError):
    pass


class EmptyDatasetError(DataError):
    pass


class ScaleError(DataError):
    def __init__(self, detail: str, offenders: Sequence[float] = ()):
        super().__init__(detail)
        self.offenders = list(offenders)


class InputError(DataError):
    pass


class GraphIndexError(IGMCError, IndexError):
    exit_code = 2


class ContractError(IGMCError):
    exit_code = 2


class DimensionError(ContractError):
    pass


class NumericalError(IGMCError):
    exit_code = 3

    def __init__(self, detail: str, dump_path: Optional[str] = None):
        super().__init__(detail)
        self.dump_path = dump_path


class InternalError(IGMCError):
    exit_code = 2


def raise_parse_error(source: str = "", line_number: Optional[int] = None, detail: str = "") -> None:
    """
    Raise a ParseError for a malformed record.

    Args:
        source (str): File (or stream name) being parsed.
        line_number (int): 1-based line of the offending record.
        detail (str): What was wrong with it.

    Raises:
        ParseError: Always.
    """
    where = f"{source}:{line_number}" if line_number is not None else source
    raise ParseError(f"Parse error at {where}: {detail}", line_number=line_number)


def raise_dimension_error(op: str, *shapes: Iterable[int]) -> None:
    """
    Raise a DimensionError naming the operation and every shape involved.

    Args:
        op (str): Name of the primitive that rejected its inputs.
        shapes: The offending shapes, in argument order.

    Raises:
        DimensionError: Always.
    """
    rendered = " vs ".join(str(tuple(s)) for s in shapes)
    raise DimensionError(f"{op}: incompatible shapes {rendered}")


def raise_contract_error(detail: str) -> None:
    """
    Raise a ContractError for a violated precondition.

    Raises:
        ContractError: Always.
    """
    raise ContractError(detail)


def raise_argument_error(name: str, value, expected: str) -> None:
    """
    Raise a UsageError for an argument outside its valid range.

    Args:
        name (str): Argument name.
        value: Rejected value.
        expected (str): Human-readable description of the valid range.

    Raises:
        UsageError: Always.
    """
    raise UsageError(f"Invalid {name} ({value}): expected {expected}")
