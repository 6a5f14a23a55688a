"""Dense float32 tensors with tape-based reverse-mode differentiation.

Operations (see :mod:`zsdetect.numerics.ops`) record themselves onto the
innermost active :class:`Tape`. Replaying the tape backwards from a
scalar loss populates ``grad`` on every ``requires_grad`` tensor that the
loss depends on. Parameters and activations are float32; reductions
accumulate in float64 before casting back.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np


class Tensor:
    """A dense n-dimensional float32 array with an optional gradient."""

    __slots__ = ("data", "grad", "requires_grad")

    def __init__(self, data, requires_grad: bool = False):
        arr = np.asarray(data, dtype=np.float32)
        self.data = arr
        self.grad: np.ndarray | None = None
        self.requires_grad = bool(requires_grad)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        if self.data.size != 1:
            raise ValueError(f"item() requires a scalar tensor, got shape {self.shape}")
        return float(self.data.reshape(()))

    def has_nonfinite(self) -> bool:
        """True when any stored value is NaN or infinite."""
        return not bool(np.isfinite(self.data).all())

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={list(self.shape)}{flag})"


# Backward rule: maps the output gradient to one gradient (or None) per input.
BackwardRule = Callable[[np.ndarray], Sequence[np.ndarray | None]]


class TapeEntry:
    __slots__ = ("op", "inputs", "output", "backward")

    def __init__(self, op: str, inputs: tuple[Tensor, ...], output: Tensor, backward: BackwardRule):
        self.op = op
        self.inputs = inputs
        self.output = output
        self.backward = backward


_ACTIVE_TAPES: list["Tape"] = []


class Tape:
    """Ordered record of operations, innermost-active via ``with``."""

    def __init__(self):
        self.entries: list[TapeEntry] = []

    def __enter__(self) -> "Tape":
        _ACTIVE_TAPES.append(self)
        return self

    def __exit__(self, exc_type, exc, tb) -> None:
        popped = _ACTIVE_TAPES.pop()
        assert popped is self, "tape stack corrupted"

    def __len__(self) -> int:
        return len(self.entries)


def record(op: str, inputs: tuple[Tensor, ...], output: Tensor, backward: BackwardRule) -> None:
    """Record an op on the active tape, if any input tracks gradients."""
    if _ACTIVE_TAPES and output.requires_grad:
        _ACTIVE_TAPES[-1].entries.append(TapeEntry(op, inputs, output, backward))


def backward(loss: Tensor, tape: Tape) -> None:
    """Populate ``grad`` of every requires_grad tensor reachable from ``loss``.

    The tape is replayed in reverse; entries whose output did not receive
    a gradient (i.e. do not feed the loss) are skipped. Gradients
    accumulate into any pre-existing ``grad`` buffers.
    """
    if loss.data.size != 1:
        raise ValueError(f"backward() requires a scalar loss, got shape {loss.shape}")

    flowing: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
    tensors: dict[int, Tensor] = {id(loss): loss}

    for entry in reversed(tape.entries):
        grad_out = flowing.get(id(entry.output))
        if grad_out is None:
            continue
        input_grads = entry.backward(grad_out)
        for tensor, grad in zip(entry.inputs, input_grads):
            if grad is None or not tensor.requires_grad:
                continue
            key = id(tensor)
            if key in flowing:
                flowing[key] = flowing[key] + grad
            else:
                flowing[key] = grad
                tensors[key] = tensor

    for key, tensor in tensors.items():
        grad = np.asarray(flowing[key], dtype=np.float32)
        if tensor.grad is None:
            tensor.grad = grad.reshape(tensor.shape).copy()
        else:
            tensor.grad = tensor.grad + grad.reshape(tensor.shape)
