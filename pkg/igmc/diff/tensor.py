"""Dense tensors and the gradient tape that records operations on them."""

import threading
from contextlib import contextmanager
from dataclasses import dataclass
from typing import Callable, Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from igmc.core.config import settings
from igmc.core.exceptions import raise_contract_error

BackwardFn = Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]


class Tensor:
    """
    Dense row-major real array taking part in reverse-mode differentiation.

    Attributes:
        data (np.ndarray): Values; its shape is the tensor shape.
        requires_grad (bool): Whether gradients flow to (or through) this tensor.
        grad (np.ndarray): Accumulated gradient of a leaf, same shape as data.
        name (str): Optional label, used for parameters and error messages.
    """

    __slots__ = ("data", "requires_grad", "grad", "name", "is_leaf")

    def __init__(self, data, requires_grad: bool = False, name: Optional[str] = None,
                 dtype: Optional[np.dtype] = None):
        self.data = np.asarray(data, dtype=dtype or settings.dtype)
        self.requires_grad = requires_grad
        self.grad: Optional[np.ndarray] = None
        self.name = name
        self.is_leaf = True

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return int(self.data.size)

    def item(self) -> float:
        return float(self.data.reshape(-1)[0])

    def numpy(self) -> np.ndarray:
        return self.data

    def zero_grad(self) -> None:
        self.grad = None

    def accumulate_grad(self, grad: np.ndarray) -> None:
        if grad.shape != self.data.shape:
            raise_contract_error(f"gradient shape {grad.shape} does not match tensor {self.data.shape}")
        if self.grad is None:
            self.grad = np.array(grad, dtype=self.data.dtype, copy=True)
        else:
            self.grad += grad

    def __repr__(self) -> str:
        label = f", name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad}{label})"


@dataclass
class TapeEntry:
    op: str
    inputs: Tuple[Tensor, ...]
    output: Tensor
    backward: BackwardFn


class Tape:
    """Ordered record of executed operations, replayed in reverse by backward()."""

    def __init__(self):
        self.entries: List[TapeEntry] = []

    def __len__(self) -> int:
        return len(self.entries)

    def record(self, op: str, inputs: Sequence[Tensor], output: Tensor, backward: BackwardFn) -> None:
        self.entries.append(TapeEntry(op, tuple(inputs), output, backward))

    def clear(self) -> None:
        self.entries = []

    def backward(self, loss: Tensor) -> None:
        """
        Propagate d(loss)/d(.) to every leaf reachable on the tape, then clear it.

        Args:
            loss (Tensor): Scalar output of the recorded computation.

        Raises:
            ContractError: If loss is not a scalar or nothing was recorded.
        """
        if loss.size != 1:
            raise_contract_error(f"backward needs a scalar loss, got shape {loss.shape}")
        if not self.entries:
            raise_contract_error("backward called on an empty tape")

        pending: Dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
        for entry in reversed(self.entries):
            upstream = pending.pop(id(entry.output), None)
            if upstream is None:
                continue
            for tensor, grad in zip(entry.inputs, entry.backward(upstream)):
                if grad is None or not tensor.requires_grad:
                    continue
                if tensor.is_leaf:
                    tensor.accumulate_grad(grad)
                elif id(tensor) in pending:
                    pending[id(tensor)] = pending[id(tensor)] + grad
                else:
                    pending[id(tensor)] = grad
        self.clear()


class _TapeState(threading.local):
    def __init__(self):
        self.tape = Tape()
        self.grad_enabled = True


_state = _TapeState()


def get_tape() -> Tape:
    """Tape owned by the calling thread."""
    return _state.tape


def is_grad_enabled() -> bool:
    return _state.grad_enabled


@contextmanager
def use_tape(tape: Tape) -> Iterator[Tape]:
    previous = _state.tape
    _state.tape = tape
    try:
        yield tape
    finally:
        _state.tape = previous


@contextmanager
def no_grad() -> Iterator[None]:
    """Run operations without recording them (evaluation mode)."""
    previous = _state.grad_enabled
    _state.grad_enabled = False
    try:
        yield
    finally:
        _state.grad_enabled = previous


def backward(loss: Tensor) -> None:
    """Backpropagate through the calling thread's tape."""
    get_tape().backward(loss)


def parameter(data, name: Optional[str] = None, dtype: Optional[np.dtype] = None) -> Tensor:
    """Leaf tensor that collects gradients."""
    return Tensor(np.array(data, dtype=dtype or settings.dtype, copy=True), requires_grad=True, name=name)


def constant(data, dtype: Optional[np.dtype] = None) -> Tensor:
    return Tensor(data, requires_grad=False, dtype=dtype)
