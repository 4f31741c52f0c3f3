"""Dense tensors and an explicit reverse-mode tape.

Every differentiable operation in SemiringLib takes an optional :class:`Tape`.
When a tape is supplied the operation records a :class:`Node` holding its inputs,
its output, the forward context required by the backward rule and the backward rule itself.
:meth:`Tape.backward` then replays the recorded nodes in reverse order.
Because nodes are appended in execution order, the reversed list is a valid
reverse topological order and every node is visited exactly once.

There is no global tape: distinct tapes are fully independent.

Examples
--------
.. code:: python

    >>> import numpy as np
    >>> from semiringlib.tensor import Tape, Tensor, Parameter
    >>> from semiringlib.linalg import linear_matmul

    >>> W = Parameter(np.eye(2), name='W')
    >>> x = Tensor(np.array([[1.0, 2.0]]))
    >>> tape = Tape()
    >>> y = linear_matmul(x, W, tape=tape)
    >>> tape.backward(y)
    >>> W.grad
    array([[1., 2.],
           [1., 2.]])

Index
-----
.. currentmodule:: semiringlib.tensor
.. autosummary::
    Tensor
    Parameter
    Node
    Tape

API
---
.. autoclass:: Tensor
    :members:
.. autoclass:: Parameter
.. autoclass:: Node
.. autoclass:: Tape
    :members:

"""

from typing import (
    Any, Callable, Dict, List, NamedTuple, Optional, Sequence, Tuple, Union
)

import numpy as np
from numpy.typing import DTypeLike

from .ndrepr import aNDRepr
from .exceptions import ShapeError

__all__ = ['Tensor', 'Parameter', 'Node', 'Tape', 'as_tensor']

GradFn = Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]


class Tensor:
    """A dense, row-major, real-valued array with an optional gradient buffer.

    Parameters
    ----------
    data : array-like
        The tensor data; integer input is converted to **dtype** (default ``float64``).

    requires_grad : :class:`bool`
        Whether gradients should flow into this tensor.
        Leaf tensors with ``requires_grad=True`` accumulate their gradient in :attr:`grad`.

    name : :class:`str`, optional
        An optional name used in diagnostics.

    dtype : :data:`numpy.typing.DTypeLike`, optional
        The data type; defaults to the dtype of **data** (floats) or ``float64``.

    Attributes
    ----------
    data : :class:`numpy.ndarray`
        The tensor data.

    grad : :class:`numpy.ndarray`, optional
        The accumulated gradient; same shape as :attr:`data` whenever present.

    """

    __slots__ = ('data', 'grad', 'requires_grad', 'name', '_leaf')

    def __init__(self, data: Any, requires_grad: bool = False,
                 name: Optional[str] = None, dtype: Optional[DTypeLike] = None) -> None:
        array = np.asarray(data, dtype=dtype)
        if dtype is None and array.dtype.kind != 'f':
            array = array.astype(np.float64)
        self.data: np.ndarray = array
        self.grad: Optional[np.ndarray] = None
        self.requires_grad = requires_grad
        self.name = name
        self._leaf = True

    @property
    def shape(self) -> Tuple[int, ...]:
        """The shape of this tensor."""
        return self.data.shape

    @property
    def ndim(self) -> int:
        """The number of dimensions of this tensor."""
        return self.data.ndim

    @property
    def size(self) -> int:
        """The number of elements in this tensor."""
        return self.data.size

    @property
    def dtype(self) -> np.dtype:
        """The data type of this tensor."""
        return self.data.dtype

    @property
    def is_leaf(self) -> bool:
        """Whether this tensor was created by the user rather than by a recorded operation."""
        return self._leaf

    def item(self) -> float:
        """Return the value of a single-element tensor as a :class:`float`."""
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else float(self.data)

    def numpy(self) -> np.ndarray:
        """Return the underlying :class:`numpy.ndarray`."""
        return self.data

    def zero_grad(self) -> None:
        """Reset the gradient buffer."""
        self.grad = None

    def accumulate_grad(self, grad: np.ndarray) -> None:
        """Add **grad** to :attr:`grad`, allocating the buffer if necessary."""
        if grad.shape != self.data.shape:
            raise ShapeError(f"gradient of shape {grad.shape} does not match "
                             f"tensor {self.name!r} of shape {self.data.shape}")
        grad = grad.astype(self.data.dtype, copy=False)
        if self.grad is None:
            self.grad = grad.copy()
        else:
            self.grad += grad

    def __repr__(self) -> str:
        return aNDRepr.repr(self)


class Parameter(Tensor):
    """A trainable leaf :class:`Tensor` tagged with an optimizer group label.

    Parameters
    ----------
    data : array-like
        The initial parameter values.

    name : :class:`str`
        The name of the parameter; qualified with the module path by the model builders.

    group : :class:`str`
        Either ``"linear"`` or ``"semiring"``; selects the optimizer settings.

    decay : :class:`bool`
        Whether decoupled weight decay applies to this parameter.

    """

    __slots__ = ('group', 'decay')

    GROUPS = frozenset({'linear', 'semiring'})

    def __init__(self, data: Any, name: str = '', group: str = 'linear',
                 decay: bool = True, dtype: Optional[DTypeLike] = None) -> None:
        super().__init__(data, requires_grad=True, name=name, dtype=dtype)
        if group not in self.GROUPS:
            raise ValueError(f"'group' expected one of {sorted(self.GROUPS)!r}; "
                             f"observed {group!r}")
        self.group = group
        self.decay = decay


def as_tensor(value: Union[Tensor, Any], dtype: Optional[DTypeLike] = None) -> Tensor:
    """Return **value** if it is a :class:`Tensor`, otherwise wrap it in a new non-trainable one."""
    if isinstance(value, Tensor):
        return value
    return Tensor(value, dtype=dtype)


class Node(NamedTuple):
    """A single operation recorded on a :class:`Tape`."""

    #: The name of the operation, *e.g.* ``"semiring_matmul"``.
    op: str

    #: The input tensors, in the order the backward rule returns their gradients.
    inputs: Tuple[Tensor, ...]

    #: The output tensor.
    output: Tensor

    #: The backward rule: maps the output gradient to one gradient (or ``None``) per input.
    backward: GradFn

    #: The path of the module that issued the operation, empty if unknown.
    label: str = ''

    #: Saved forward context, *e.g.* the winners of a tropical product.
    saved: Optional[Dict[str, Any]] = None


class Tape:
    """An ordered record of differentiable operations.

    A tape is single-writer; independent tapes may be used concurrently.

    Attributes
    ----------
    nodes : :class:`list` [:class:`Node`]
        The recorded operations in execution order.

    label : :class:`str`
        The module path attached to newly recorded nodes; see :meth:`Tape.scope`.

    """

    def __init__(self) -> None:
        self.nodes: List[Node] = []
        self.label = ''

    def __len__(self) -> int:
        return len(self.nodes)

    def record(self, op: str, inputs: Sequence[Tensor], output: Tensor, backward: GradFn,
               saved: Optional[Dict[str, Any]] = None) -> Tensor:
        """Append an operation to the tape and return its output.

        The output becomes a non-leaf tensor; it requires a gradient if any input does.
        Operations none of whose inputs require a gradient are not recorded.

        """
        output._leaf = False
        output.requires_grad = any(t.requires_grad for t in inputs)
        if output.requires_grad:
            self.nodes.append(Node(op, tuple(inputs), output, backward, self.label, saved))
        return output

    def scope(self, label: str) -> '_TapeScope':
        """Return a context manager which sets :attr:`Tape.label` to **label** on entry."""
        return _TapeScope(self, label)

    def backward(self, output: Tensor, grad: Optional[np.ndarray] = None) -> None:
        """Propagate gradients from **output** to every leaf which requires them.

        Parameters
        ----------
        output : :class:`Tensor`
            The tensor to differentiate; usually a scalar loss.

        grad : :class:`numpy.ndarray`, optional
            The gradient of the objective with respect to **output**.
            Defaults to ones, *i.e.* the gradient of the sum of **output**.

        """
        if grad is None:
            grad = np.ones_like(output.data)
        elif grad.shape != output.shape:
            raise ShapeError(f"seed gradient of shape {grad.shape} does not match "
                             f"output of shape {output.shape}")

        if output.is_leaf:
            if output.requires_grad:
                output.accumulate_grad(grad)
            return

        pending: Dict[int, np.ndarray] = {id(output): grad}
        for node in reversed(self.nodes):
            out_grad = pending.pop(id(node.output), None)
            if out_grad is None:
                continue

            in_grads = node.backward(out_grad)
            for tensor, in_grad in zip(node.inputs, in_grads):
                if in_grad is None or not tensor.requires_grad:
                    continue
                if tensor.is_leaf:
                    tensor.accumulate_grad(in_grad)
                    continue
                key = id(tensor)
                if key in pending:
                    pending[key] = pending[key] + in_grad
                else:
                    pending[key] = in_grad

    def first_nonfinite(self) -> Optional[Node]:
        """Return the first recorded node whose output contains a NaN or infinity."""
        for node in self.nodes:
            if not np.isfinite(node.output.data).all():
                return node
        return None


class _TapeScope:
    def __init__(self, tape: Tape, label: str) -> None:
        self.tape = tape
        self.label = label
        self._previous = ''

    def __enter__(self) -> Tape:
        self._previous = self.tape.label
        self.tape.label = self.label
        return self.tape

    def __exit__(self, *args: Any) -> None:
        self.tape.label = self._previous
