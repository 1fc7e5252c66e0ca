"""Adam optimizer, as a pure step function and as a stateful wrapper over parameter tensors."""

from dataclasses import dataclass, field
from typing import Dict, Mapping, Optional, Tuple

import numpy as np

from igmc.core.exceptions import raise_contract_error
from igmc.diff.tensor import Tensor


@dataclass
class AdamState:
    """First/second moment estimates per parameter name and the step counter."""
    step: int = 0
    m: Dict[str, np.ndarray] = field(default_factory=dict)
    v: Dict[str, np.ndarray] = field(default_factory=dict)

    @classmethod
    def zeros_like(cls, params: Mapping[str, np.ndarray]) -> "AdamState":
        return cls(
            step=0,
            m={name: np.zeros_like(value) for name, value in params.items()},
            v={name: np.zeros_like(value) for name, value in params.items()},
        )

    def copy(self) -> "AdamState":
        return AdamState(
            step=self.step,
            m={k: v.copy() for k, v in self.m.items()},
            v={k: v.copy() for k, v in self.v.items()},
        )


def adam_step(params: Mapping[str, np.ndarray], grads: Mapping[str, np.ndarray], state: AdamState,
              lr: float, beta1: float = 0.9, beta2: float = 0.999,
              eps: float = 1e-8) -> Tuple[Dict[str, np.ndarray], AdamState]:
    """
    One Adam update with bias correction.

    Args:
        params: Current values by name.
        grads: Gradients by name; same names and shapes as params.
        state: Moments from the previous step (step counter >= 0).
        lr: Step size.

    Returns:
        Tuple of the updated parameter values and the new state; inputs are left untouched.

    Raises:
        ContractError: On missing names or shape mismatches.
    """
    if state.step < 0:
        raise_contract_error(f"adam step counter must be >= 0, got {state.step}")
    step = state.step + 1
    new_state = AdamState(step=step)
    new_params: Dict[str, np.ndarray] = {}
    correction1 = 1.0 - beta1 ** step
    correction2 = 1.0 - beta2 ** step

    for name, value in params.items():
        grad = grads.get(name)
        m = state.m.get(name)
        v = state.v.get(name)
        if grad is None or m is None or v is None:
            raise_contract_error(f"adam: missing gradient or state for '{name}'")
        if not (grad.shape == m.shape == v.shape == value.shape):
            raise_contract_error(
                f"adam: shape mismatch for '{name}': param {value.shape}, grad {grad.shape}, state {m.shape}")
        m_new = beta1 * m + (1.0 - beta1) * grad
        v_new = beta2 * v + (1.0 - beta2) * grad * grad
        m_hat = m_new / correction1
        v_hat = v_new / correction2
        new_params[name] = value - lr * m_hat / (np.sqrt(v_hat) + eps)
        new_state.m[name] = m_new
        new_state.v[name] = v_new

    return new_params, new_state


class Adam:
    """Applies adam_step to a named set of parameter tensors in place."""

    def __init__(self, params: Mapping[str, Tensor], lr: float = 1e-3, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8, state: Optional[AdamState] = None):
        self.params = dict(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.state = state or AdamState.zeros_like({k: p.data for k, p in self.params.items()})

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.zero_grad()

    def step(self, lr: Optional[float] = None) -> None:
        values = {k: p.data for k, p in self.params.items()}
        grads = {k: (p.grad if p.grad is not None else np.zeros_like(p.data)) for k, p in self.params.items()}
        new_values, self.state = adam_step(values, grads, self.state, self.lr if lr is None else lr,
                                           self.beta1, self.beta2, self.eps)
        for name, value in new_values.items():
            self.params[name].data = value.astype(self.params[name].data.dtype, copy=False)
