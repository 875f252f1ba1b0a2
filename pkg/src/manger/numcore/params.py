"""Named parameter collections with Adam state, plus initializers."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, Iterator, Optional

import numpy as np

from .rng import RngStream
from .tensor import Tensor


@dataclass
class ParamEntry:
    value: Tensor
    adam_m: np.ndarray
    adam_v: np.ndarray
    step_count: int = 0


class ParamStore:
    """Ordered map name -> (value, grad, Adam moments, step count).

    Iteration order is insertion order, which makes every whole-store
    operation (Adam, snapshot, checkpoint) deterministic.
    """

    def __init__(self) -> None:
        self._entries: Dict[str, ParamEntry] = {}

    def add(self, name: str, data) -> Tensor:
        if name in self._entries:
            raise ValueError(f"duplicate parameter name: {name}")
        value = data if isinstance(data, Tensor) else Tensor(data)
        value.requires_grad = True
        arr = value.data
        self._entries[name] = ParamEntry(value, np.zeros_like(arr), np.zeros_like(arr))
        return value

    def __getitem__(self, name: str) -> Tensor:
        return self._entries[name].value

    def __contains__(self, name: str) -> bool:
        return name in self._entries

    def __len__(self) -> int:
        return len(self._entries)

    def names(self) -> list[str]:
        return list(self._entries)

    def entries(self) -> Iterator[tuple[str, ParamEntry]]:
        return iter(self._entries.items())

    def entry(self, name: str) -> ParamEntry:
        return self._entries[name]

    def grad(self, name: str) -> np.ndarray:
        """Gradient of a parameter; zeros when it did not participate."""
        t = self._entries[name].value
        return t.grad if t.grad is not None else np.zeros_like(t.data)

    def zero_grads(self, names: Optional[Iterable[str]] = None) -> None:
        for name in names if names is not None else self._entries:
            self._entries[name].value.grad = None

    def snapshot(self) -> Dict[str, np.ndarray]:
        """Copies of all parameter values, keyed by name."""
        return {name: e.value.data.copy() for name, e in self._entries.items()}

    def load(self, values: Dict[str, np.ndarray]) -> None:
        if set(values) != set(self._entries):
            missing = set(self._entries) - set(values)
            extra = set(values) - set(self._entries)
            raise KeyError(f"parameter name mismatch: missing={sorted(missing)} extra={sorted(extra)}")
        for name, arr in values.items():
            entry = self._entries[name]
            if arr.shape != entry.value.data.shape:
                raise ValueError(f"shape mismatch for {name}: {arr.shape} vs {entry.value.data.shape}")
            entry.value.data = np.asarray(arr, dtype=np.float64).copy()


def adam_step(
    store: ParamStore,
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
    names: Optional[Iterable[str]] = None,
) -> None:
    """Bias-corrected Adam update on the named subset (default: all entries).

    Gradients of the updated entries are zeroed afterwards.
    """
    selected = list(names) if names is not None else store.names()
    for name in selected:
        entry = store.entry(name)
        g = entry.value.grad
        if g is None:
            g = np.zeros_like(entry.value.data)
        entry.step_count += 1
        entry.adam_m += (1.0 - beta1) * (g - entry.adam_m)
        entry.adam_v += (1.0 - beta2) * (g * g - entry.adam_v)
        m_hat = entry.adam_m / (1.0 - beta1 ** entry.step_count)
        v_hat = entry.adam_v / (1.0 - beta2 ** entry.step_count)
        entry.value.data -= lr * m_hat / (np.sqrt(v_hat) + eps)
        entry.value.grad = None


def init_uniform_fanin(shape, rng: RngStream) -> Tensor:
    """U(-1/sqrt(fan_in), +1/sqrt(fan_in)) with fan_in = last dimension."""
    shape = tuple(int(s) for s in shape)
    bound = 1.0 / math.sqrt(shape[-1])
    return Tensor(rng.uniform(-bound, bound, shape))


def init_zeros(shape) -> Tensor:
    return Tensor(np.zeros(tuple(int(s) for s in shape)))
