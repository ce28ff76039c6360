"""Dense tensors taking part in a reverse-mode autodiff graph."""
from contextlib import contextmanager
from enum import Enum
from typing import Any, Callable, Dict, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np
from loguru import logger

from rfshake.errors import ArgumentError

ArrayLike = Union[np.ndarray, float, int, Sequence[float]]
BackwardFn = Callable[[np.ndarray], Tuple[Optional[np.ndarray], ...]]

_default_dtype: np.dtype = np.dtype(np.float32)
_grad_enabled: bool = True


def set_default_dtype(dtype: Union[str, type, np.dtype]) -> None:
    """Switch the dtype used for new tensors (float32 for training, float64 for checks)."""
    global _default_dtype
    dtype = np.dtype(dtype)
    if dtype not in (np.float32, np.float64):
        raise ArgumentError(f"Unsupported dtype: {dtype}")
    _default_dtype = dtype


def get_default_dtype() -> np.dtype:
    return _default_dtype


@contextmanager
def no_grad() -> Iterator[None]:
    """Within the block ops record no graph nodes."""
    global _grad_enabled
    previous, _grad_enabled = _grad_enabled, False
    try:
        yield
    finally:
        _grad_enabled = previous


class OpKind(str, Enum):
    ADD = "add"
    MUL = "mul"
    SUM = "sum"
    MEAN = "mean"
    RESHAPE = "reshape"
    CONV2D = "conv2d"
    MAXPOOL2D = "maxpool2d"
    SUMPOOL2D = "sumpool2d"
    BATCHNORM2D = "batchnorm2d"
    RELU = "relu"
    LINEAR = "linear"
    GLOBAL_AVG_POOL = "global_avg_pool"
    SIGMOID = "sigmoid"
    BCE_WITH_LOGITS = "bce_with_logits"
    SHAKE = "shake"


class AutodiffNode:
    """Records how a tensor was produced.

    `backward_fn` maps the gradient of the output to one gradient per entry in
    `inputs` (None where an input needs none).
    """
    __slots__ = ("op_kind", "inputs", "saved_context", "backward_fn")

    def __init__(self,
        op_kind: OpKind,
        inputs: List["Tensor"],
        backward_fn: BackwardFn,
        saved_context: Optional[Dict[str, Any]] = None,
    ) -> None:
        self.op_kind = op_kind
        self.inputs = inputs
        self.backward_fn = backward_fn
        self.saved_context = saved_context or {}


class Tensor:
    data: np.ndarray
    requires_grad: bool
    grad: Optional[np.ndarray]
    node: Optional[AutodiffNode]

    def __init__(self,
        data: ArrayLike,
        requires_grad: bool = False,
        dtype: Optional[Union[str, type, np.dtype]] = None,
        name: Optional[str] = None,
    ) -> None:
        if isinstance(data, Tensor):
            data = data.data
        array = np.asarray(data)
        if dtype is not None:
            array = array.astype(dtype, copy=False)
        elif not np.issubdtype(array.dtype, np.floating):
            array = array.astype(_default_dtype)
        self.data = np.ascontiguousarray(array)
        self.requires_grad = requires_grad
        self.grad = None
        self.node = None
        self.name = name

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def dtype(self) -> np.dtype:
        return self.data.dtype

    @property
    def size(self) -> int:
        return int(self.data.size)

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else float(self.data)

    def detach(self) -> "Tensor":
        return Tensor(self.data, requires_grad=False)

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        label = f" name={self.name!r}" if self.name else ""
        op = f" op={self.node.op_kind.value}" if self.node else ""
        return f"Tensor(shape={self.shape}, dtype={self.dtype}{label}{op}, requires_grad={self.requires_grad})"

    # operator sugar, the ops themselves live in `ops.py`
    def __add__(self, other: Union["Tensor", ArrayLike]) -> "Tensor":
        from .ops import add
        return add(self, other)

    __radd__ = __add__

    def __mul__(self, other: Union["Tensor", ArrayLike]) -> "Tensor":
        from .ops import mul
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self) -> "Tensor":
        from .ops import mul
        return mul(self, -1.0)

    def __sub__(self, other: Union["Tensor", ArrayLike]) -> "Tensor":
        from .ops import add, mul
        return add(self, mul(as_tensor(other, like=self), -1.0))

    def sum(self) -> "Tensor":
        from .ops import sum as _sum
        return _sum(self)

    def mean(self) -> "Tensor":
        from .ops import mean
        return mean(self)

    def reshape(self, *shape: int) -> "Tensor":
        from .ops import reshape
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def backward(self, grad: Optional[np.ndarray] = None) -> None:
        """Accumulate d(self)/d(leaf) into `.grad` of every requires_grad ancestor."""
        if grad is None:
            if self.data.size != 1:
                raise ArgumentError(
                    f"backward() needs a scalar root, got shape {self.shape}"
                )
            grad = np.ones_like(self.data)

        order = self._topological_order()
        grads: Dict[int, np.ndarray] = {id(self): np.asarray(grad, dtype=self.dtype)}

        for tensor in reversed(order):
            out_grad = grads.get(id(tensor))
            if out_grad is None or tensor.node is None:
                continue
            parent_grads = tensor.node.backward_fn(out_grad)
            for parent, parent_grad in zip(tensor.node.inputs, parent_grads):
                if parent_grad is None or not parent.requires_grad:
                    continue
                if id(parent) in grads:
                    grads[id(parent)] = grads[id(parent)] + parent_grad
                else:
                    grads[id(parent)] = parent_grad

        # only now touch `.grad`, so a second call accumulates instead of compounding
        for tensor in order:
            if not tensor.requires_grad or id(tensor) not in grads:
                continue
            g = grads[id(tensor)].reshape(tensor.shape).astype(tensor.dtype, copy=False)
            tensor.grad = g.copy() if tensor.grad is None else tensor.grad + g
        logger.trace(f"backward visited {len(order)} nodes")

    def _topological_order(self) -> List["Tensor"]:
        order: List[Tensor] = []
        visited = set()
        stack: List[Tuple[Tensor, bool]] = [(self, False)]
        while stack:
            tensor, expanded = stack.pop()
            if expanded:
                order.append(tensor)
                continue
            if id(tensor) in visited:
                continue
            visited.add(id(tensor))
            stack.append((tensor, True))
            if tensor.node is not None:
                for parent in tensor.node.inputs:
                    if id(parent) not in visited:
                        stack.append((parent, False))
        return order


def as_tensor(value: Union[Tensor, ArrayLike], like: Optional[Tensor] = None) -> Tensor:
    if isinstance(value, Tensor):
        return value
    dtype = like.dtype if like is not None else None
    return Tensor(value, requires_grad=False, dtype=dtype)


def make_result(
    data: np.ndarray,
    op_kind: OpKind,
    inputs: List[Tensor],
    backward_fn: BackwardFn,
    saved_context: Optional[Dict[str, Any]] = None,
) -> Tensor:
    """Wrap an op's output, attaching a graph node only when some input needs grad."""
    out = Tensor(data, dtype=data.dtype)
    if _grad_enabled and any(t.requires_grad for t in inputs):
        out.requires_grad = True
        out.node = AutodiffNode(op_kind, inputs, backward_fn, saved_context)
    return out


def parameter(data: ArrayLike, name: Optional[str] = None) -> Tensor:
    """A leaf tensor that collects gradients, in the default dtype."""
    return Tensor(np.asarray(data, dtype=_default_dtype), requires_grad=True, name=name)
