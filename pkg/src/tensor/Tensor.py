"""
=========================================================================
Tool for video frame interpolation

Created by Bartlomiej Jargut
https://github.com/dee7ine
-------------------------------------------------------------------------
This program is free software: you can redistribute it and/or modify
it under the terms of the GNU General Public License as published by
the Free Software Foundation, either version 3 of the License, or
(at your option) any later version.
This program is distributed in the hope that it will be useful,
but WITHOUT ANY WARRANTY; without even the implied warranty of
MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE. See the
GNU General Public License for more details.

You should have received a copy of the GNU General Public License
along with this program. If not, see <https://www.gnu.org/licenses/>.

=========================================================================
"""


from __future__ import annotations

import threading
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
import numpy.typing as npt

from Exceptions import ContractError, DimensionError

BackwardFn = Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]

_local = threading.local()


class Tensor:
    """
    Dense N-dimensional array of real scalars with an optional gradient
    accumulator.

    Object attributes:
    data -> numpy array holding the values in row-major order
    requires_grad -> whether backward passes deposit gradients into grad
    grad -> same-shape accumulator, None until the first backward pass
    name -> optional label used by parameter tables and checkpoints
    """

    __slots__ = ('data', 'requires_grad', 'grad', 'name')
    __array_ufunc__ = None

    def __init__(self, data, requires_grad: bool = False, dtype=None, name: str = '') -> None:
        array = np.array(data, dtype=dtype, copy=True) if dtype is not None else np.asarray(data)
        if array.dtype.kind != 'f':
            array = array.astype(np.float64)
        self.data: np.ndarray = array
        self.requires_grad = requires_grad
        self.grad: Optional[np.ndarray] = None
        self.name = name

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def dtype(self) -> np.dtype:
        return self.data.dtype

    @property
    def size(self) -> int:
        return self.data.size

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        if self.data.size != 1:
            raise DimensionError(f"item() needs a single-element tensor, got shape {self.shape}")
        return float(self.data.reshape(-1)[0])

    def zero_grad(self) -> None:
        self.grad = None

    def detach(self) -> Tensor:
        return Tensor(self.data)

    def __len__(self) -> int:
        return self.data.shape[0]

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, dtype={self.dtype}, requires_grad={self.requires_grad})"


@dataclass(eq=False)
class Record:
    """
    One recorded operation: identity, inputs, output and the closure
    mapping the output gradient to the input gradients (the closure keeps
    the saved intermediates alive)
    """

    op: str
    inputs: tuple[Tensor, ...]
    output: Tensor
    backward: BackwardFn


@dataclass(eq=False)
class Tape:
    """
    Ordered log of differentiable operations. Operations executed while a
    tape is active (``with Tape() as tape:``) and touching at least one
    tensor with requires_grad are appended in execution order, which is a
    topological order of the graph. A tape belongs to the thread that
    entered it.
    """

    records: list[Record] = field(default_factory=list)

    def __enter__(self) -> Tape:
        _stack().append(self)
        return self

    def __exit__(self, exc_type, exc_val, exc_tb) -> None:
        stack = _stack()
        if stack and stack[-1] is self:
            stack.pop()

    def __len__(self) -> int:
        return len(self.records)

    def append(self, record: Record) -> None:
        self.records.append(record)

    def reset(self) -> None:
        self.records.clear()


def _stack() -> list[Tape]:
    if not hasattr(_local, 'stack'):
        _local.stack = []
    return _local.stack


def current_tape() -> Optional[Tape]:
    stack = _stack()
    return stack[-1] if stack else None


def as_tensor(value, dtype=None) -> Tensor:
    if isinstance(value, Tensor):
        return value
    return Tensor(np.asarray(value, dtype=dtype) if dtype is not None else value)


def result(data: npt.ArrayLike, inputs: Sequence[Tensor], op: str, backward_fn: BackwardFn) -> Tensor:
    """
    Wraps the output of a forward computation and records it on the
    active tape when one of the inputs requires a gradient

    :param data: forward result
    :param inputs: tensors the result depends on, in the order backward_fn returns gradients
    :param op: operation name
    :param backward_fn: output gradient -> tuple of input gradients (None for no gradient)

    :return:
    """

    out = Tensor(data)
    tape = current_tape()
    if tape is not None and any(t.requires_grad for t in inputs):
        out.requires_grad = True
        tape.append(Record(op=op, inputs=tuple(inputs), output=out, backward=backward_fn))
    return out


def backward(tape: Tape, loss: Tensor) -> None:
    """
    Reverse pass over the tape. Gradients are accumulated (added) into
    the grad attribute of every leaf tensor with requires_grad, so running
    backward twice over the same tape without resetting the grads doubles
    them.

    :param tape: tape the loss was computed on
    :param loss: scalar tensor

    :return:
    """

    if loss.data.size != 1:
        raise ContractError(f"backward needs a scalar loss, got shape {loss.shape}")

    produced = {id(record.output) for record in tape.records}
    if id(loss) not in produced:
        raise ContractError("loss is not reachable from the tape")

    grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
    leaves: dict[int, Tensor] = {}

    for record in reversed(tape.records):
        for tensor in record.inputs:
            if tensor.requires_grad and id(tensor) not in produced:
                leaves[id(tensor)] = tensor

        grad_out = grads.pop(id(record.output), None)
        if grad_out is None:
            continue

        for tensor, grad_in in zip(record.inputs, record.backward(grad_out)):
            if grad_in is None or not tensor.requires_grad:
                continue
            key = id(tensor)
            grads[key] = grads[key] + grad_in if key in grads else grad_in

    for key, tensor in leaves.items():
        if key in grads:
            grad = grads[key].astype(tensor.dtype, copy=False).reshape(tensor.shape)
            tensor.grad = grad.copy() if tensor.grad is None else tensor.grad + grad
