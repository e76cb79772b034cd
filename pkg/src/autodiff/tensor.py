"""
Dense tensors and the tape recording the primitive operations applied to them, gradients are computed by a reverse
    traversal of the tape
"""

from __future__ import annotations

from typing import TYPE_CHECKING

import numpy as np

if TYPE_CHECKING:
    from typing import Callable, Dict, List, Optional, Sequence, Tuple


class Tensor:
    """
    Tensor with a value and the tape it is recorded on, tensors without a tape are constants
    """

    def __init__(self, data: np.ndarray, tape: Optional[Tape] = None, name: Optional[str] = None):
        self.data = np.ascontiguousarray(data)
        self.tape = tape
        self.name = name

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def ndim(self) -> int:
        return self.data.ndim

    def __matmul__(self, other: Tensor) -> Tensor:
        from src.autodiff.ops import matmul
        return matmul(self, other)

    def __add__(self, other: Tensor) -> Tensor:
        from src.autodiff.ops import add
        return add(self, other)

    def __mul__(self, factor: float) -> Tensor:
        from src.autodiff.ops import scale
        return scale(self, factor)

    __rmul__ = __mul__

    def __getitem__(self, index) -> Tensor:
        from src.autodiff.ops import slice_
        return slice_(self, index)

    def reshape(self, *shape: int) -> Tensor:
        from src.autodiff.ops import reshape
        return reshape(self, shape)

    def transpose(self, *axes: int) -> Tensor:
        from src.autodiff.ops import transpose
        return transpose(self, axes)

    def __repr__(self) -> str:
        return f'Tensor({self.name or ""} shape={self.shape}, dtype={self.dtype}, recorded={self.tape is not None})'


class Node:
    """
    A recorded primitive: its output, inputs and the vector-Jacobian product mapping the output gradient to the input
        gradients
    """

    __slots__ = ('primitive', 'output', 'inputs', 'vjp')

    def __init__(self, primitive: str, output: Tensor, inputs: Sequence[Tensor],
                 vjp: Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]):
        self.primitive = primitive
        self.output = output
        self.inputs = inputs
        self.vjp = vjp


class Tape:
    """
    Ordered record of primitive operations for one training step, a tape has a single writer
    """

    def __init__(self):
        self.nodes: List[Node] = []
        self.parameters: Dict[str, Tensor] = {}

    def watch(self, data: np.ndarray, name: str) -> Tensor:
        """
        Creates a leaf tensor recorded on the tape whose gradient is returned by backward

        :param data: The value
        :param name: The unique parameter name
        :return: The leaf tensor
        """
        assert name not in self.parameters, f'Parameter {name} is already watched'
        tensor = Tensor(data, self, name)
        self.parameters[name] = tensor
        return tensor

    def watch_all(self, parameters: Dict[str, np.ndarray]) -> Dict[str, Tensor]:
        return {name: self.watch(value, name) for name, value in parameters.items()}

    def record(self, primitive: str, output: Tensor, inputs: Sequence[Tensor],
               vjp: Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]):
        self.nodes.append(Node(primitive, output, inputs, vjp))

    def __len__(self) -> int:
        return len(self.nodes)


def backward(tape: Tape, loss: Tensor) -> Dict[str, np.ndarray]:
    """
    Reverse mode differentiation of a scalar loss, nodes are visited in reverse tape order and input gradients are
        summed in tape order so identical tapes give bit identical gradients

    :param tape: The tape the loss was recorded on
    :param loss: The scalar loss
    :return: Dictionary of the gradient of every watched parameter (zero for parameters the loss does not reach)
    """
    if loss.data.size != 1:
        raise ValueError(f'backward: loss must be a scalar, got shape {loss.shape}')
    assert loss.tape is tape, 'backward: the loss was not recorded on this tape'

    gradients: Dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
    for node in reversed(tape.nodes):
        output_gradient = gradients.pop(id(node.output), None)
        if output_gradient is None:
            continue

        for tensor, gradient in zip(node.inputs, node.vjp(output_gradient)):
            if gradient is None or tensor.tape is None:
                continue
            assert gradient.shape == tensor.shape, \
                f'{node.primitive}: gradient shape {gradient.shape} does not match value shape {tensor.shape}'
            key = id(tensor)
            gradients[key] = gradients[key] + gradient if key in gradients else gradient

    return {name: gradients.get(id(tensor), np.zeros_like(tensor.data)).astype(tensor.dtype, copy=False)
            for name, tensor in tape.parameters.items()}


def constant(data: np.ndarray) -> Tensor:
    return Tensor(np.asarray(data))
